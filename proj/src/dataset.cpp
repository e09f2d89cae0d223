#include "binsim/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <json.hpp>

#include "binsim/error.hpp"

namespace binsim {

using nlohmann::json;

void validate(const PairExample& p) {
  if (p.label != 0 && p.label != 1) throw InputError("pair label must be 0 or 1");
  if (p.id_a.empty() || p.id_b.empty()) throw InputError("pair ids must be non-empty");
}

void validate(const SearchQuery& q) {
  std::set<std::string> seen{q.query_id};
  if (!seen.insert(q.positive_id).second) {
    throw InputError("query '" + q.query_id + "': positive equals the query");
  }
  for (const auto& n : q.negative_ids) {
    if (!seen.insert(n).second) {
      throw InputError("query '" + q.query_id + "': candidate '" + n + "' repeated");
    }
  }
}

namespace {

template <typename T, typename Parse>
std::vector<T> read_jsonl(std::istream& in, Parse parse) {
  std::vector<T> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse(json::parse(line)));
    } catch (const json::exception& e) {
      throw InputError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::ifstream open(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return in;
}

}  // namespace

std::vector<PairExample> read_pairs(std::istream& in) {
  return read_jsonl<PairExample>(in, [](const json& j) {
    PairExample p{j.at("a").get<std::string>(), j.at("b").get<std::string>(),
                  j.at("label").get<int>()};
    validate(p);
    return p;
  });
}

std::vector<PairExample> read_pairs_file(const std::string& path) {
  auto in = open(path);
  return read_pairs(in);
}

void write_pairs(std::ostream& out, const std::vector<PairExample>& pairs) {
  for (const auto& p : pairs) out << json{{"a", p.id_a}, {"b", p.id_b}, {"label", p.label}}.dump() << '\n';
}

std::vector<SearchQuery> read_queries(std::istream& in) {
  return read_jsonl<SearchQuery>(in, [](const json& j) {
    SearchQuery q{j.at("query").get<std::string>(), j.at("positive").get<std::string>(),
                  j.at("negatives").get<std::vector<std::string>>()};
    validate(q);
    return q;
  });
}

std::vector<SearchQuery> read_queries_file(const std::string& path) {
  auto in = open(path);
  return read_queries(in);
}

void write_queries(std::ostream& out, const std::vector<SearchQuery>& queries) {
  for (const auto& q : queries) {
    out << json{{"query", q.query_id}, {"positive", q.positive_id}, {"negatives", q.negative_ids}}.dump()
        << '\n';
  }
}

void write_snippet(std::ostream& out, const std::string& id, const std::string& arch,
                   const std::vector<std::string>& instructions) {
  out << json{{"id", id}, {"arch", arch}, {"instructions", instructions}}.dump() << '\n';
}

PreparedDataset prepare_pairs(const std::vector<PairExample>& pairs, const SnippetStore& store,
                              const Vocab& vocab, const GraphConfig& graph_cfg,
                              const ModelConfig& model_cfg, std::size_t workers) {
  graph_cfg.validate();
  for (const auto& p : pairs) {
    validate(p);
    store.at(p.id_a);
    store.at(p.id_b);
  }
  PreparedDataset out(pairs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto work = [&] {
    for (std::size_t i = next++; i < pairs.size(); i = next++) {
      try {
        const TokenSequence& a = store.at(pairs[i].id_a);
        const TokenSequence& b = store.at(pairs[i].id_b);
        PreparedPair& pp = out[i];
        pp.a = encode_tokens(a, vocab, model_cfg.char_filter_width);
        pp.b = encode_tokens(b, vocab, model_cfg.char_filter_width);
        pp.relations = relation_operators(build_graph(a, b, graph_cfg), model_cfg.edge_weighting,
                                          model_cfg.rgcn_aggregation);
        pp.label = pairs[i].label;
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, pairs.size()));
  std::vector<std::thread> threads;
  for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace binsim
