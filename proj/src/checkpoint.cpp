#include "binsim/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "binsim/config_json.hpp"
#include "binsim/error.hpp"

namespace binsim {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'B', 'S', 'I', 'M', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::istream& in, const std::string& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof value)) {
    throw InputError("checkpoint " + path + " is truncated");
  }
  return value;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const GraphConfig& graph_cfg,
                     const Vocab& vocab, std::optional<double> train_seconds_per_epoch) {
  std::ofstream blob(path, std::ios::binary);
  if (!blob) throw InputError("cannot write " + path);
  blob.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(blob, kCheckpointVersion);
  const auto params = model.params().all();
  put<std::uint32_t>(blob, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    put<std::uint32_t>(blob, static_cast<std::uint32_t>(p->name.size()));
    blob.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put<std::uint64_t>(blob, static_cast<std::uint64_t>(p->value.rows()));
    put<std::uint64_t>(blob, static_cast<std::uint64_t>(p->value.cols()));
    blob.write(reinterpret_cast<const char*>(p->value.data()),
               static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  if (!blob) throw InputError("failed writing " + path);

  json sidecar{{"format_version", kCheckpointVersion},
               {"model_config", model.config()},
               {"graph_config", graph_cfg},
               {"vocab_hash", vocab.hash()},
               {"token_vocab_size", model.token_vocab()},
               {"char_vocab_size", model.char_vocab()}};
  if (train_seconds_per_epoch) sidecar["train_seconds_per_epoch"] = *train_seconds_per_epoch;
  std::ofstream meta(path + ".json");
  if (!meta) throw InputError("cannot write " + path + ".json");
  meta << sidecar.dump(2) << '\n';
}

LoadedCheckpoint load_checkpoint(const std::string& path, const Vocab& vocab) {
  std::ifstream meta_in(path + ".json");
  if (!meta_in) throw InputError("missing checkpoint sidecar " + path + ".json");
  json meta;
  try {
    meta = json::parse(meta_in);
  } catch (const json::parse_error& e) {
    throw ParseError(e.byte, e.what());
  }
  if (meta.value("format_version", -1) != kCheckpointVersion) {
    throw InputError("checkpoint " + path + ": unsupported format version");
  }
  const auto hash = meta.at("vocab_hash").get<std::string>();
  if (hash != vocab.hash()) {
    throw InputError("checkpoint " + path + " was trained with a different vocabulary");
  }
  const auto model_cfg = meta.at("model_config").get<ModelConfig>();
  const auto graph_cfg = meta.at("graph_config").get<GraphConfig>();
  const auto tokens = meta.at("token_vocab_size").get<std::size_t>();
  const auto chars = meta.at("char_vocab_size").get<std::size_t>();
  if (tokens != vocab.token_count() || chars != vocab.char_count()) {
    throw InputError("checkpoint " + path + ": vocabulary sizes differ");
  }

  LoadedCheckpoint out{Model(model_cfg, tokens, chars, 0), graph_cfg, hash, std::nullopt};
  if (auto it = meta.find("train_seconds_per_epoch"); it != meta.end() && it->is_number()) {
    out.train_seconds_per_epoch = it->get<double>();
  }
  std::ifstream blob(path, std::ios::binary);
  if (!blob) throw InputError("missing checkpoint " + path);
  char magic[sizeof kMagic];
  if (!blob.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw InputError(path + " is not a checkpoint");
  }
  if (get<std::uint32_t>(blob, path) != kCheckpointVersion) {
    throw InputError("checkpoint " + path + ": unsupported blob version");
  }
  auto params = out.model.params().all();
  if (get<std::uint32_t>(blob, path) != params.size()) {
    throw InputError("checkpoint " + path + ": parameter count mismatch");
  }
  for (auto* p : params) {
    const auto len = get<std::uint32_t>(blob, path);
    std::string name(len, '\0');
    blob.read(name.data(), len);
    const auto rows = get<std::uint64_t>(blob, path);
    const auto cols = get<std::uint64_t>(blob, path);
    if (name != p->name || rows != static_cast<std::uint64_t>(p->value.rows()) ||
        cols != static_cast<std::uint64_t>(p->value.cols())) {
      throw InputError("checkpoint " + path + ": parameter '" + name + "' does not fit the model");
    }
    if (!blob.read(reinterpret_cast<char*>(p->value.data()),
                   static_cast<std::streamsize>(p->value.size() * sizeof(double)))) {
      throw InputError("checkpoint " + path + " is truncated");
    }
  }
  return out;
}

}  // namespace binsim
