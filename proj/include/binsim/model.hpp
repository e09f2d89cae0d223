#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <utility>
#include <vector>

#include "binsim/autograd.hpp"
#include "binsim/graph.hpp"
#include "binsim/tokenizer.hpp"

namespace binsim {

enum class Aggregation { kTypeSpecific, kShared };
enum class EdgeWeighting { kUnweighted, kFrequency };
enum class Activation { kRelu, kTanh };

struct ModelConfig {
  std::size_t token_emb_dim = 128;
  std::size_t char_emb_dim = 32;
  std::size_t char_filter_width = 2;
  std::size_t char_filter_count = 64;
  std::size_t bilstm_layers = 1;
  std::size_t rgcn_layers = 2;
  // Width of every Bi-LSTM output (both directions together) and of every
  // R-GCN layer output. Must be even.
  std::size_t hidden_dim = 256;
  std::size_t num_edge_types = kNumEdgeTypes;
  double dropout = 0.0;
  Aggregation rgcn_aggregation = Aggregation::kTypeSpecific;
  EdgeWeighting edge_weighting = EdgeWeighting::kUnweighted;
  Activation activation = Activation::kRelu;

  void validate() const;
  std::size_t token_vector_dim() const { return token_emb_dim + char_filter_count; }
  bool operator==(const ModelConfig&) const = default;
};

// A token sequence mapped through the vocabulary.
struct EncodedSequence {
  std::vector<std::int32_t> token_ids;
  // Per token, right-padded with PAD up to the filter width.
  std::vector<std::vector<std::int32_t>> char_ids;

  std::size_t length() const { return token_ids.size(); }
};

EncodedSequence encode_tokens(const TokenSequence& seq, const Vocab& vocab,
                              std::size_t char_filter_width);

// Normalized per-relation aggregation operators S_r with
// (H * S_r).col(v) = sum_u a_r(v, u) h_u. Column v of S_r holds node v's
// incoming neighbor weights; E0 contributes along its direction only.
struct RelationOperators {
  std::size_t node_count = 0;
  std::vector<std::shared_ptr<const ag::SparseMatrix>> ops;
};

RelationOperators relation_operators(const AssocGraph& g, EdgeWeighting weighting,
                                     Aggregation aggregation);

struct SimilarityScore {
  double probability = 0.5;  // softmax(logits)[1], 1 == same source
  ag::Vector logits = ag::Vector::Zero(2);
};

// All learnable weights.
struct ModelParams {
  ag::Parameter token_embedding;  // token_emb_dim x |tokens|
  ag::Parameter char_embedding;   // char_emb_dim x |chars|
  ag::Parameter char_filters;     // filter_count x (width * char_emb_dim)
  ag::Parameter char_bias;

  struct LstmDirection {
    ag::Parameter w_in, w_rec, bias;
  };
  struct BiLstmLayer {
    LstmDirection forward, backward;
  };
  std::vector<BiLstmLayer> encoder;  // bilstm_layers
  BiLstmLayer post_graph;

  // Layer l weight: hidden x (1 + R) * in, blocks [W_0 | W_r ...], where
  // R is num_edge_types (type-specific) or 1 (shared).
  std::vector<ag::Parameter> rgcn;

  ag::Parameter classifier_w;  // 2 x 4 * hidden
  ag::Parameter classifier_b;  // 2 x 1

  std::vector<ag::Parameter*> all();
  std::vector<const ag::Parameter*> all() const;
};

class Model {
 public:
  Model(ModelConfig cfg, std::size_t token_vocab, std::size_t char_vocab, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }
  std::size_t token_vocab() const { return token_vocab_; }
  std::size_t char_vocab() const { return char_vocab_; }

 private:
  ModelConfig cfg_;
  std::size_t token_vocab_;
  std::size_t char_vocab_;
  ModelParams params_;
};

// The neural pipeline evaluated on one tape. Dropout is active only when a
// generator is supplied.
class ForwardPass {
 public:
  ForwardPass(const Model& model, ag::Tape& tape, std::mt19937_64* dropout_rng = nullptr);

  ag::Var vectorize(const EncodedSequence& seq);
  ag::Var encode(const ag::Var& vectors);
  ag::Var rgcn_layer(std::size_t layer, const ag::Var& states, const RelationOperators& rel);
  std::pair<ag::Var, ag::Var> refine(const ag::Var& h_a, const ag::Var& h_b,
                                     const RelationOperators& rel);
  ag::Var pool(const ag::Var& refined);
  // Fusion feature [F_a; F_b; F_a - F_b; F_a * F_b].
  ag::Var fuse(const ag::Var& f_a, const ag::Var& f_b);
  ag::Var classify(const ag::Var& fused);

  // Full pipeline; returns 2 x 1 logits.
  ag::Var logits(const EncodedSequence& a, const EncodedSequence& b,
                 const RelationOperators& rel);

  ag::Tape& tape() { return tape_; }

 private:
  ag::Var bilstm(const ModelParams::BiLstmLayer& layer, const ag::Var& x);
  ag::Var activate(const ag::Var& x);
  ag::Var maybe_dropout(const ag::Var& x);

  const Model& model_;
  ag::Tape& tape_;
  std::mt19937_64* rng_;
};

// Inference on one pair (no gradient recording).
SimilarityScore forward_pair(const Model& model, const EncodedSequence& a,
                             const EncodedSequence& b, const RelationOperators& rel);
SimilarityScore forward_pair(const Model& model, const Vocab& vocab, const TokenSequence& a,
                             const TokenSequence& b, const GraphConfig& graph_cfg);

SimilarityScore score_from_logits(const ag::Vector& logits);

// Mean two-class cross-entropy. Throws InputError for labels outside {0,1}.
double loss(const std::vector<SimilarityScore>& scores, const std::vector<int>& labels);

}  // namespace binsim
