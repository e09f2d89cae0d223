#include "binsim/model.hpp"

#include <cmath>
#include <stdexcept>

#include "binsim/error.hpp"

namespace binsim {

using ag::Matrix;
using ag::Var;

void ModelConfig::validate() const {
  if (token_emb_dim == 0 || char_emb_dim == 0 || char_filter_width == 0 ||
      char_filter_count == 0 || hidden_dim == 0 || bilstm_layers == 0) {
    throw InputError("model config: dimensions must be positive");
  }
  if (hidden_dim % 2 != 0) throw InputError("model config: hidden_dim must be even");
  if (num_edge_types != kNumEdgeTypes) {
    throw InputError("model config: num_edge_types must be " + std::to_string(kNumEdgeTypes));
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InputError("model config: dropout in [0, 1)");
}

EncodedSequence encode_tokens(const TokenSequence& seq, const Vocab& vocab,
                              std::size_t char_filter_width) {
  EncodedSequence enc;
  enc.token_ids.reserve(seq.length());
  enc.char_ids.reserve(seq.length());
  for (const Token& tok : seq.tokens) {
    enc.token_ids.push_back(vocab.token_id(tok.text));
    auto chars = vocab.char_ids(tok.text);
    if (chars.size() < char_filter_width) chars.resize(char_filter_width, kPadId);
    enc.char_ids.push_back(std::move(chars));
  }
  return enc;
}

RelationOperators relation_operators(const AssocGraph& g, EdgeWeighting weighting,
                                     Aggregation aggregation) {
  const auto n = static_cast<Eigen::Index>(g.node_count());
  // Incoming (source, weight) lists per relation and target node.
  std::vector<std::vector<std::vector<std::pair<Eigen::Index, double>>>> incoming(
      kNumEdgeTypes, std::vector<std::vector<std::pair<Eigen::Index, double>>>(n));
  for (const TypedEdge& e : g.edges) {
    auto& per_node = incoming[index_of(e.type)];
    const auto src = static_cast<Eigen::Index>(e.src);
    const auto dst = static_cast<Eigen::Index>(e.dst);
    per_node[dst].emplace_back(src, e.weight);
    if (!is_directed(e.type)) per_node[src].emplace_back(dst, e.weight);
  }

  std::vector<Eigen::Triplet<double>> shared;
  RelationOperators rel;
  rel.node_count = g.node_count();
  for (std::size_t r = 0; r < kNumEdgeTypes; ++r) {
    std::vector<Eigen::Triplet<double>> triplets;
    for (Eigen::Index v = 0; v < n; ++v) {
      const auto& nbrs = incoming[r][v];
      if (nbrs.empty()) continue;
      double total = 0.0;
      for (const auto& [u, w] : nbrs) total += weighting == EdgeWeighting::kFrequency ? w : 1.0;
      for (const auto& [u, w] : nbrs) {
        const double a = (weighting == EdgeWeighting::kFrequency ? w : 1.0) / total;
        triplets.emplace_back(u, v, a);
      }
    }
    if (aggregation == Aggregation::kShared) {
      shared.insert(shared.end(), triplets.begin(), triplets.end());
    } else {
      auto s = std::make_shared<ag::SparseMatrix>(n, n);
      s->setFromTriplets(triplets.begin(), triplets.end());
      rel.ops.push_back(std::move(s));
    }
  }
  if (aggregation == Aggregation::kShared) {
    auto s = std::make_shared<ag::SparseMatrix>(n, n);
    s->setFromTriplets(shared.begin(), shared.end());
    rel.ops.push_back(std::move(s));
  }
  return rel;
}

// ---------------------------------------------------------------------------
// Parameters

std::vector<ag::Parameter*> ModelParams::all() {
  std::vector<ag::Parameter*> out{&token_embedding, &char_embedding, &char_filters, &char_bias};
  auto add_layer = [&](BiLstmLayer& l) {
    for (LstmDirection* d : {&l.forward, &l.backward}) {
      out.push_back(&d->w_in);
      out.push_back(&d->w_rec);
      out.push_back(&d->bias);
    }
  };
  for (auto& l : encoder) add_layer(l);
  for (auto& w : rgcn) out.push_back(&w);
  add_layer(post_graph);
  out.push_back(&classifier_w);
  out.push_back(&classifier_b);
  return out;
}

std::vector<const ag::Parameter*> ModelParams::all() const {
  auto mut = const_cast<ModelParams*>(this)->all();
  return {mut.begin(), mut.end()};
}

namespace {

Matrix uniform(Eigen::Index rows, Eigen::Index cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
  }
  return m;
}

double xavier(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

ModelParams::LstmDirection make_direction(const std::string& name, std::size_t in,
                                          std::size_t hidden, std::mt19937_64& rng) {
  const auto h = static_cast<Eigen::Index>(hidden);
  Matrix bias = Matrix::Zero(4 * h, 1);
  bias.middleRows(h, h).setOnes();  // forget gate
  return {ag::Parameter(name + ".w_in", uniform(4 * h, static_cast<Eigen::Index>(in),
                                                 xavier(in, hidden), rng)),
          ag::Parameter(name + ".w_rec", uniform(4 * h, h, xavier(hidden, hidden), rng)),
          ag::Parameter(name + ".bias", std::move(bias))};
}

ModelParams::BiLstmLayer make_bilstm(const std::string& name, std::size_t in,
                                     std::size_t hidden, std::mt19937_64& rng) {
  auto fwd = make_direction(name + ".fwd", in, hidden / 2, rng);
  auto bwd = make_direction(name + ".bwd", in, hidden / 2, rng);
  return {std::move(fwd), std::move(bwd)};
}

}  // namespace

Model::Model(ModelConfig cfg, std::size_t token_vocab, std::size_t char_vocab,
             std::uint64_t seed)
    : cfg_(cfg), token_vocab_(token_vocab), char_vocab_(char_vocab) {
  cfg_.validate();
  if (token_vocab < 2 || char_vocab < 2) throw InputError("model: vocabulary too small");
  std::mt19937_64 rng(seed);
  const auto te = static_cast<Eigen::Index>(cfg_.token_emb_dim);
  const auto ce = static_cast<Eigen::Index>(cfg_.char_emb_dim);
  const auto fc = static_cast<Eigen::Index>(cfg_.char_filter_count);
  const auto fw = static_cast<Eigen::Index>(cfg_.char_filter_width);
  const auto hid = static_cast<Eigen::Index>(cfg_.hidden_dim);

  params_.token_embedding = ag::Parameter(
      "token_embedding", uniform(te, static_cast<Eigen::Index>(token_vocab), 0.1, rng));
  params_.char_embedding = ag::Parameter(
      "char_embedding", uniform(ce, static_cast<Eigen::Index>(char_vocab), 0.1, rng));
  params_.char_filters = ag::Parameter(
      "char_filters",
      uniform(fc, fw * ce, xavier(cfg_.char_filter_width * cfg_.char_emb_dim, cfg_.char_filter_count), rng));
  params_.char_bias = ag::Parameter("char_bias", Matrix::Zero(fc, 1));

  std::size_t in = cfg_.token_vector_dim();
  for (std::size_t l = 0; l < cfg_.bilstm_layers; ++l) {
    params_.encoder.push_back(make_bilstm("encoder" + std::to_string(l), in, cfg_.hidden_dim, rng));
    in = cfg_.hidden_dim;
  }

  const std::size_t relations =
      cfg_.rgcn_aggregation == Aggregation::kShared ? 1 : cfg_.num_edge_types;
  for (std::size_t l = 0; l < cfg_.rgcn_layers; ++l) {
    Matrix w(hid, static_cast<Eigen::Index>(1 + relations) * hid);
    for (std::size_t r = 0; r <= relations; ++r) {
      w.middleCols(static_cast<Eigen::Index>(r) * hid, hid) =
          uniform(hid, hid, xavier(cfg_.hidden_dim, cfg_.hidden_dim), rng);
    }
    params_.rgcn.emplace_back("rgcn" + std::to_string(l), std::move(w));
  }

  params_.post_graph = make_bilstm("post_graph", cfg_.hidden_dim, cfg_.hidden_dim, rng);
  params_.classifier_w = ag::Parameter(
      "classifier_w", uniform(2, 4 * hid, xavier(4 * cfg_.hidden_dim, 2), rng));
  params_.classifier_b = ag::Parameter("classifier_b", Matrix::Zero(2, 1));
}

// ---------------------------------------------------------------------------
// Forward pass

ForwardPass::ForwardPass(const Model& model, ag::Tape& tape, std::mt19937_64* dropout_rng)
    : model_(model), tape_(tape), rng_(dropout_rng) {}

Var ForwardPass::maybe_dropout(const Var& x) {
  if (!rng_ || model_.config().dropout <= 0.0) return x;
  return ag::dropout(x, model_.config().dropout, *rng_);
}

Var ForwardPass::activate(const Var& x) {
  return model_.config().activation == Activation::kRelu ? ag::relu(x) : ag::tanh(x);
}

Var ForwardPass::vectorize(const EncodedSequence& seq) {
  const ModelParams& p = model_.params();
  if (seq.length() == 0) throw ShapeError("vectorize: empty sequence");
  Var tokens = ag::lookup(tape_.param(p.token_embedding), seq.token_ids);
  Var chars = ag::char_conv_maxpool(tape_.param(p.char_embedding), tape_.param(p.char_filters),
                                    tape_.param(p.char_bias), seq.char_ids,
                                    static_cast<Eigen::Index>(model_.config().char_filter_width));
  const Var parts[] = {tokens, chars};
  return maybe_dropout(ag::concat_rows(parts));
}

Var ForwardPass::bilstm(const ModelParams::BiLstmLayer& layer, const Var& x) {
  auto run = [&](const ModelParams::LstmDirection& d, bool reverse) {
    return ag::lstm(x, tape_.param(d.w_in), tape_.param(d.w_rec), tape_.param(d.bias), reverse);
  };
  const Var parts[] = {run(layer.forward, false), run(layer.backward, true)};
  return ag::concat_rows(parts);
}

Var ForwardPass::encode(const Var& vectors) {
  Var x = vectors;
  for (const auto& layer : model_.params().encoder) x = bilstm(layer, x);
  return x;
}

Var ForwardPass::rgcn_layer(std::size_t layer, const Var& states, const RelationOperators& rel) {
  if (static_cast<std::size_t>(states.cols()) != rel.node_count) {
    throw ShapeError("rgcn_layer: node states do not match graph node count");
  }
  const ag::Parameter& w = model_.params().rgcn.at(layer);
  if (w.value.cols() != static_cast<Eigen::Index>(1 + rel.ops.size()) * states.rows()) {
    throw ShapeError("rgcn_layer: relation operators do not match layer weights");
  }
  std::vector<Var> blocks{states};
  blocks.reserve(1 + rel.ops.size());
  for (const auto& op : rel.ops) blocks.push_back(ag::spmm(states, op));
  return activate(ag::matmul(tape_.param(w), ag::concat_rows(blocks)));
}

std::pair<Var, Var> ForwardPass::refine(const Var& h_a, const Var& h_b,
                                        const RelationOperators& rel) {
  const Var parts[] = {h_a, h_b};
  Var h = ag::concat_cols(parts);
  for (std::size_t l = 0; l < model_.config().rgcn_layers; ++l) {
    h = maybe_dropout(rgcn_layer(l, h, rel));
  }
  return {ag::slice_cols(h, 0, h_a.cols()), ag::slice_cols(h, h_a.cols(), h_b.cols())};
}

Var ForwardPass::pool(const Var& refined) {
  return ag::max_cols(bilstm(model_.params().post_graph, refined));
}

Var ForwardPass::fuse(const Var& f_a, const Var& f_b) {
  if (f_a.rows() != f_b.rows() || f_a.cols() != 1 || f_b.cols() != 1) {
    throw ShapeError("fuse: snippet vectors must be equal-length columns");
  }
  const Var parts[] = {f_a, f_b, ag::sub(f_a, f_b), ag::cmul(f_a, f_b)};
  return ag::concat_rows(parts);
}

Var ForwardPass::classify(const Var& fused) {
  const ModelParams& p = model_.params();
  if (fused.rows() != p.classifier_w.value.cols()) {
    throw ShapeError("classify: fused feature has the wrong width");
  }
  return ag::add_bias(ag::matmul(tape_.param(p.classifier_w), fused),
                      tape_.param(p.classifier_b));
}

Var ForwardPass::logits(const EncodedSequence& a, const EncodedSequence& b,
                        const RelationOperators& rel) {
  if (a.length() + b.length() != rel.node_count) {
    throw ShapeError("forward: graph does not match the sequence pair");
  }
  Var h_a = encode(vectorize(a));
  Var h_b = encode(vectorize(b));
  auto [r_a, r_b] = refine(h_a, h_b, rel);
  return classify(fuse(pool(r_a), pool(r_b)));
}

SimilarityScore score_from_logits(const ag::Vector& logits) {
  SimilarityScore s;
  s.logits = logits;
  s.probability = ag::softmax(logits)(1);
  return s;
}

SimilarityScore forward_pair(const Model& model, const EncodedSequence& a,
                             const EncodedSequence& b, const RelationOperators& rel) {
  ag::Tape tape(false);
  ForwardPass pass(model, tape);
  return score_from_logits(pass.logits(a, b, rel).value().col(0));
}

SimilarityScore forward_pair(const Model& model, const Vocab& vocab, const TokenSequence& a,
                             const TokenSequence& b, const GraphConfig& graph_cfg) {
  const auto& cfg = model.config();
  const AssocGraph g = build_graph(a, b, graph_cfg);
  return forward_pair(model, encode_tokens(a, vocab, cfg.char_filter_width),
                      encode_tokens(b, vocab, cfg.char_filter_width),
                      relation_operators(g, cfg.edge_weighting, cfg.rgcn_aggregation));
}

double loss(const std::vector<SimilarityScore>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw InputError("loss: batch sizes differ");
  if (scores.empty()) throw InputError("loss: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw InputError("loss: label must be 0 or 1");
    const ag::Vector& z = scores[i].logits;
    const double m = z.maxCoeff();
    total += m + std::log((z.array() - m).exp().sum()) - z(labels[i]);
  }
  return total / static_cast<double>(scores.size());
}

}  // namespace binsim
