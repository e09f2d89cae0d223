#include "binsim/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <thread>

#include <json.hpp>

#include "binsim/error.hpp"
#include "binsim/trainer.hpp"

namespace binsim {

using nlohmann::json;

namespace {

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn fn) {
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) fn(i);
  };
  workers = std::max<std::size_t>(1, std::min(workers, n));
  std::vector<std::thread> threads;
  for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::string report_to_json(const EvalReport& r) {
  json doc{{"auc", optional_json(r.auc)},
           {"p_at_1", optional_json(r.precision_at_1)},
           {"mrr", optional_json(r.mrr)},
           {"n_pairs", r.n_pairs},
           {"n_queries", r.n_queries},
           {"ranks", r.ranks},
           {"timing",
            {{"train_seconds_per_epoch", optional_json(r.timing.train_seconds_per_epoch)},
             {"predict_ms_per_pair", r.timing.predict_ms_per_pair}}}};
  return doc.dump(2) + "\n";
}

EvalReport eval_auc(const Model& model, const PreparedDataset& pairs, std::size_t workers) {
  EvalReport r;
  const auto start = std::chrono::steady_clock::now();
  const auto scores = score_pairs(model, pairs, workers);
  r.timing.predict_ms_per_pair = elapsed_ms(start) / static_cast<double>(std::max<std::size_t>(1, pairs.size()));
  std::vector<int> labels;
  for (const auto& p : pairs) labels.push_back(p.label);
  r.auc = auc(scores, labels);
  r.n_pairs = pairs.size();
  return r;
}

EvalReport eval_search(const Model& model, const Vocab& vocab, const SnippetStore& store,
                       const GraphConfig& graph_cfg, const std::vector<SearchQuery>& queries,
                       std::size_t workers) {
  for (const auto& q : queries) {
    validate(q);
    store.at(q.query_id);
    store.at(q.positive_id);
    for (const auto& n : q.negative_ids) store.at(n);
  }
  const auto start = std::chrono::steady_clock::now();
  std::vector<QueryScores> scored(queries.size());
  std::atomic<std::size_t> pairs_scored{0};
  parallel_for(queries.size(), workers, [&](std::size_t i) {
    const SearchQuery& q = queries[i];
    const TokenSequence& query = store.at(q.query_id);
    auto score = [&](const std::string& id) {
      ++pairs_scored;
      return CandidateScore{id, forward_pair(model, vocab, query, store.at(id), graph_cfg).probability};
    };
    QueryScores& out = scored[i];
    out.query_id = q.query_id;
    out.positive = score(q.positive_id);
    for (const auto& n : q.negative_ids) out.negatives.push_back(score(n));
  });
  EvalReport r;
  r.timing.predict_ms_per_pair =
      elapsed_ms(start) / static_cast<double>(std::max<std::size_t>(1, pairs_scored.load()));
  const SearchMetrics m = search_metrics(scored);
  r.precision_at_1 = m.precision_at_1;
  r.mrr = m.mrr;
  r.ranks = m.ranks;
  r.n_queries = queries.size();
  r.n_pairs = pairs_scored.load();
  return r;
}

std::vector<double> edit_distance_scores(const std::vector<PairExample>& pairs,
                                         const SnippetStore& store) {
  std::vector<double> scores;
  scores.reserve(pairs.size());
  for (const auto& p : pairs) {
    scores.push_back(edit_similarity(join_tokens(store.at(p.id_a)), join_tokens(store.at(p.id_b))));
  }
  return scores;
}

double baseline_edit_distance(const std::vector<PairExample>& pairs, const SnippetStore& store) {
  std::vector<int> labels;
  for (const auto& p : pairs) labels.push_back(p.label);
  return auc(edit_distance_scores(pairs, store), labels);
}

}  // namespace binsim
