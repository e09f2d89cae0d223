#pragma once

#include <optional>
#include <string>
#include <vector>

#include "binsim/dataset.hpp"
#include "binsim/metrics.hpp"
#include "binsim/model.hpp"

namespace binsim {

struct EvalTiming {
  std::optional<double> train_seconds_per_epoch;
  double predict_ms_per_pair = 0.0;
};

struct EvalReport {
  std::optional<double> auc;
  std::optional<double> precision_at_1;
  std::optional<double> mrr;
  std::size_t n_pairs = 0;
  std::size_t n_queries = 0;
  std::vector<std::size_t> ranks;  // per query, 1-based
  EvalTiming timing;
};

// {"auc", "p_at_1", "mrr", "n_pairs", "n_queries", "ranks", "timing"}; metrics
// that were not computed are null.
std::string report_to_json(const EvalReport& r);

EvalReport eval_auc(const Model& model, const PreparedDataset& pairs, std::size_t workers = 1);

// Ranks the positive against the negatives of every query.
EvalReport eval_search(const Model& model, const Vocab& vocab, const SnippetStore& store,
                       const GraphConfig& graph_cfg, const std::vector<SearchQuery>& queries,
                       std::size_t workers = 1);

// Similarity of the space-joined token strings of each pair.
std::vector<double> edit_distance_scores(const std::vector<PairExample>& pairs,
                                         const SnippetStore& store);
double baseline_edit_distance(const std::vector<PairExample>& pairs, const SnippetStore& store);

}  // namespace binsim
