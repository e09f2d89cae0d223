#include "binsim/config_json.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "binsim/error.hpp"

namespace binsim {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const char* what, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw InputError(std::string(what) + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || key == k;
    if (!known) throw InputError(std::string(what) + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

std::string formula_name(AlignFormula f) {
  return f == AlignFormula::kAsWritten ? "as_written" : "rescaled";
}

}  // namespace

void to_json(json& j, const GraphConfig& c) {
  json types = json::array();
  for (EdgeType t : kAllEdgeTypes) {
    if (c.enabled_types.test(index_of(t))) types.push_back(edge_type_name(t));
  }
  j = json{{"prefix_len", c.prefix_len},
           {"align_threshold", c.align_threshold},
           {"align_formula", formula_name(c.align_formula)},
           {"enabled_types", types}};
}

void from_json(const json& j, GraphConfig& c) {
  reject_unknown(j, "graph config", {"prefix_len", "align_threshold", "align_formula", "enabled_types"});
  read(j, "prefix_len", c.prefix_len);
  read(j, "align_threshold", c.align_threshold);
  if (auto it = j.find("align_formula"); it != j.end()) {
    const auto name = it->get<std::string>();
    if (name == "as_written") {
      c.align_formula = AlignFormula::kAsWritten;
    } else if (name == "rescaled") {
      c.align_formula = AlignFormula::kRescaled;
    } else {
      throw InputError("graph config: align_formula must be as_written or rescaled");
    }
  }
  if (auto it = j.find("enabled_types"); it != j.end()) {
    c.enabled_types.reset();
    for (const auto& name : *it) c.enabled_types.set(index_of(edge_type_from_name(name.get<std::string>())));
  }
  c.validate();
}

void to_json(json& j, const ModelConfig& c) {
  j = json{{"token_emb_dim", c.token_emb_dim},
           {"char_emb_dim", c.char_emb_dim},
           {"char_filter_width", c.char_filter_width},
           {"char_filter_count", c.char_filter_count},
           {"bilstm_layers", c.bilstm_layers},
           {"rgcn_layers", c.rgcn_layers},
           {"hidden_dim", c.hidden_dim},
           {"num_edge_types", c.num_edge_types},
           {"dropout", c.dropout},
           {"rgcn_aggregation", c.rgcn_aggregation == Aggregation::kShared ? "shared" : "type_specific"},
           {"edge_weighting", c.edge_weighting == EdgeWeighting::kFrequency ? "frequency" : "unweighted"},
           {"activation", c.activation == Activation::kTanh ? "tanh" : "relu"}};
}

void from_json(const json& j, ModelConfig& c) {
  reject_unknown(j, "model config",
                 {"token_emb_dim", "char_emb_dim", "char_filter_width", "char_filter_count",
                  "bilstm_layers", "rgcn_layers", "hidden_dim", "num_edge_types", "dropout",
                  "rgcn_aggregation", "edge_weighting", "activation"});
  read(j, "token_emb_dim", c.token_emb_dim);
  read(j, "char_emb_dim", c.char_emb_dim);
  read(j, "char_filter_width", c.char_filter_width);
  read(j, "char_filter_count", c.char_filter_count);
  read(j, "bilstm_layers", c.bilstm_layers);
  read(j, "rgcn_layers", c.rgcn_layers);
  read(j, "hidden_dim", c.hidden_dim);
  read(j, "num_edge_types", c.num_edge_types);
  read(j, "dropout", c.dropout);
  auto pick = [&](const char* key, auto& field, auto a, const char* a_name, auto b,
                  const char* b_name) {
    if (auto it = j.find(key); it != j.end()) {
      const auto v = it->get<std::string>();
      if (v == a_name) {
        field = a;
      } else if (v == b_name) {
        field = b;
      } else {
        throw InputError(std::string("model config: bad value for ") + key);
      }
    }
  };
  pick("rgcn_aggregation", c.rgcn_aggregation, Aggregation::kTypeSpecific, "type_specific",
       Aggregation::kShared, "shared");
  pick("edge_weighting", c.edge_weighting, EdgeWeighting::kUnweighted, "unweighted",
       EdgeWeighting::kFrequency, "frequency");
  pick("activation", c.activation, Activation::kRelu, "relu", Activation::kTanh, "tanh");
  c.validate();
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"epochs", c.epochs},     {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
           {"beta1", c.beta1},       {"beta2", c.beta2},           {"adam_eps", c.adam_eps},
           {"grad_clip", c.grad_clip}, {"patience", c.patience},   {"seed", c.seed},
           {"workers", c.workers}};
}

void from_json(const json& j, TrainConfig& c) {
  reject_unknown(j, "train config",
                 {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "adam_eps",
                  "grad_clip", "patience", "seed", "workers"});
  read(j, "epochs", c.epochs);
  read(j, "batch_size", c.batch_size);
  read(j, "learning_rate", c.learning_rate);
  read(j, "beta1", c.beta1);
  read(j, "beta2", c.beta2);
  read(j, "adam_eps", c.adam_eps);
  read(j, "grad_clip", c.grad_clip);
  read(j, "patience", c.patience);
  read(j, "seed", c.seed);
  read(j, "workers", c.workers);
  if (c.batch_size == 0) throw InputError("train config: batch_size must be positive");
  if (!(c.learning_rate > 0.0)) throw InputError("train config: learning_rate must be positive");
}

void to_json(json& j, const RunPaths& p) {
  j = json{{"corpus", p.corpus}, {"vocab", p.vocab}, {"checkpoint", p.checkpoint},
           {"train", p.train},   {"dev", p.dev},     {"test", p.test},
           {"queries", p.queries}, {"out", p.out}};
}

void from_json(const json& j, RunPaths& p) {
  reject_unknown(j, "paths",
                 {"corpus", "vocab", "checkpoint", "train", "dev", "test", "queries", "out"});
  read(j, "corpus", p.corpus);
  read(j, "vocab", p.vocab);
  read(j, "checkpoint", p.checkpoint);
  read(j, "train", p.train);
  read(j, "dev", p.dev);
  read(j, "test", p.test);
  read(j, "queries", p.queries);
  read(j, "out", p.out);
}

void to_json(json& j, const RunConfig& c) {
  j = json{{"graph", c.graph}, {"model", c.model}, {"train", c.train}, {"paths", c.paths}};
  j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
}

void from_json(const json& j, RunConfig& c) {
  reject_unknown(j, "run config", {"graph", "model", "train", "seed", "paths"});
  read(j, "graph", c.graph);
  read(j, "model", c.model);
  read(j, "train", c.train);
  read(j, "paths", c.paths);
  if (auto it = j.find("seed"); it != j.end() && !it->is_null()) {
    c.seed = it->get<std::uint64_t>();
  }
}

std::string run_config_to_string(const RunConfig& c) { return json(c).dump(2) + "\n"; }

RunConfig run_config_from_string(const std::string& text) {
  try {
    return json::parse(text).get<RunConfig>();
  } catch (const json::parse_error& e) {
    throw ParseError(e.byte, e.what());
  } catch (const json::exception& e) {
    throw InputError(std::string("run config: ") + e.what());
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return run_config_from_string(buf.str());
}

}  // namespace binsim
