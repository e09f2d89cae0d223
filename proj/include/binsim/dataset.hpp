#pragma once

#include <istream>
#include <string>
#include <vector>

#include "binsim/graph.hpp"
#include "binsim/model.hpp"
#include "binsim/tokenizer.hpp"

namespace binsim {

struct PairExample {
  std::string id_a;
  std::string id_b;
  int label = 0;

  bool operator==(const PairExample&) const = default;
};

struct SearchQuery {
  std::string query_id;
  std::string positive_id;
  std::vector<std::string> negative_ids;

  bool operator==(const SearchQuery&) const = default;
};

// Throws InputError when ids collide or a label is not 0/1.
void validate(const PairExample& p);
void validate(const SearchQuery& q);

std::vector<PairExample> read_pairs(std::istream& in);
std::vector<PairExample> read_pairs_file(const std::string& path);
void write_pairs(std::ostream& out, const std::vector<PairExample>& pairs);

std::vector<SearchQuery> read_queries(std::istream& in);
std::vector<SearchQuery> read_queries_file(const std::string& path);
void write_queries(std::ostream& out, const std::vector<SearchQuery>& queries);

void write_snippet(std::ostream& out, const std::string& id, const std::string& arch,
                   const std::vector<std::string>& instructions);

// A pair with everything the model needs, built once and reused.
struct PreparedPair {
  EncodedSequence a;
  EncodedSequence b;
  RelationOperators relations;
  int label = 0;
};

using PreparedDataset = std::vector<PreparedPair>;

// Encodes both sides and builds the association graph of every pair.
// Graph construction runs on `workers` threads; output order matches input.
PreparedDataset prepare_pairs(const std::vector<PairExample>& pairs, const SnippetStore& store,
                              const Vocab& vocab, const GraphConfig& graph_cfg,
                              const ModelConfig& model_cfg, std::size_t workers = 1);

}  // namespace binsim
