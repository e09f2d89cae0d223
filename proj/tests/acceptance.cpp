// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// gated criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "binsim/evaluation.hpp"
#include "binsim/metrics.hpp"
#include "binsim/synthetic.hpp"
#include "binsim/trainer.hpp"
#include "oracles.hpp"

using namespace binsim;
using binsim::testing::brute_force_edges;
using binsim::testing::edge_map;
using binsim::testing::random_sequence;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. build_graph against the all-triples oracle.
Outcome graph_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<int> coin(0, 1);
  std::size_t mismatches = 0;
  std::size_t edges = 0;
  for (int k = 0; k < 1000; ++k) {
    const auto a = random_sequence(rng, 64, "a", "arm");
    const auto b = random_sequence(rng, 64, "b", "mips");
    GraphConfig cfg;
    cfg.prefix_len = 1 + rng() % 4;
    cfg.align_threshold = 0.5 + static_cast<double>(rng() % 6) * 0.5;
    cfg.align_formula = coin(rng) ? AlignFormula::kRescaled : AlignFormula::kAsWritten;
    if (k % 4 == 3) cfg.enabled_types = EdgeTypeSet(rng() & 0x3f);
    const AssocGraph g = build_graph(a, b, cfg);
    g.check_invariants();
    const auto got = edge_map(g);
    edges += got.size();
    if (got != brute_force_edges(a, b, cfg)) ++mismatches;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 120.0,
          fmt("1000 pairs, %zu mismatches, %zu edges, %.1fs (limit 120s)", mismatches, edges,
              secs)};
}

// 2. Alignment predicate and e5 edges against exact integer enumeration.
Outcome alignment_exhaustive() {
  std::size_t checked = 0;
  std::size_t mismatches = 0;
  for (std::size_t la = 1; la <= 12; ++la) {
    for (std::size_t lb = 1; lb <= 12; ++lb) {
      TokenSequence a;
      TokenSequence b;
      for (std::size_t i = 0; i < la; ++i) a.tokens.push_back({"X", TokenRole::kOpcode, OperandKind::kNone, i, i});
      for (std::size_t j = 0; j < lb; ++j) b.tokens.push_back({"Y", TokenRole::kOpcode, OperandKind::kNone, j, j});
      a.num_instructions = la;
      b.num_instructions = lb;
      for (long iota : {1L, 2L, 3L}) {
        for (auto formula : {AlignFormula::kAsWritten, AlignFormula::kRescaled}) {
          std::set<std::pair<std::size_t, std::size_t>> want;
          for (std::size_t i = 0; i < la; ++i) {
            for (std::size_t j = 0; j < lb; ++j) {
              // |i*la/lb - j| < iota  <=>  |i*la - j*lb| < iota*lb (and the
              // rescaled variant with la and lb swapped in the scaling).
              const long I = static_cast<long>(i), J = static_cast<long>(j);
              const long LA = static_cast<long>(la), LB = static_cast<long>(lb);
              const bool hit = formula == AlignFormula::kAsWritten
                                   ? std::labs(I * LA - J * LB) < iota * LB
                                   : std::labs(I * LB - J * LA) < iota * LA;
              const bool got = positions_aligned(i, j, la, lb, static_cast<double>(iota), formula);
              ++checked;
              if (hit != got) ++mismatches;
              if (hit) want.insert({i, la + j});
            }
          }
          std::set<std::pair<std::size_t, std::size_t>> got;
          for (const auto& e : edges_e5(a, b, static_cast<double>(iota), formula)) {
            got.insert({std::min(e.src, e.dst), std::max(e.src, e.dst)});
          }
          ++checked;
          if (got != want) ++mismatches;
        }
      }
    }
  }
  return {mismatches == 0, fmt("%zu predicate and edge-set checks, %zu mismatches", checked,
                               mismatches)};
}

// 3. R-GCN layer against a dense adjacency reference.
Outcome rgcn_dense() {
  std::mt19937_64 rng(99);
  double worst = 0.0;
  double worst_shared = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto weighting = k % 2 ? EdgeWeighting::kFrequency : EdgeWeighting::kUnweighted;
    const auto act = k % 3 ? Activation::kRelu : Activation::kTanh;
    worst = std::max(worst, testing::rgcn_oracle_error(rng, Aggregation::kTypeSpecific,
                                                       weighting, act, 24));
    worst_shared = std::max(worst_shared, testing::rgcn_oracle_error(rng, Aggregation::kShared,
                                                                     weighting, act, 24));
  }
  return {worst < 1e-5 && worst_shared < 1e-5,
          fmt("100 instances each; max rel err %.2e type-specific, %.2e shared (limit 1e-5)",
              worst, worst_shared)};
}

// 4. Central differences on a miniature model.
Outcome gradient_check() {
  std::mt19937_64 rng(4);
  std::size_t checked = 0;
  std::size_t failures = 0;
  double worst = 0.0;
  for (auto agg : {Aggregation::kTypeSpecific, Aggregation::kShared}) {
    ModelConfig cfg = testing::mini_config(6);
    cfg.rgcn_aggregation = agg;
    const auto a = random_sequence(rng, 8, "a", "arm");
    const auto b = random_sequence(rng, 8, "b", "mips");
    const auto c = random_sequence(rng, 8, "c", "mips");
    const Vocab vocab = build_vocab({a, b, c});
    Model model(cfg, vocab.token_count(), vocab.char_count(), rng());
    const std::vector<PreparedPair> batch{testing::prepare_one(a, b, 1, vocab, cfg),
                                          testing::prepare_one(a, c, 0, vocab, cfg)};
    const auto res = testing::gradient_check(model, batch, 150, rng);
    checked += res.checked;
    failures += res.failures;
    worst = std::max(worst, res.max_rel_err);
  }
  return {checked >= 200 && failures == 0 && worst < 1e-3,
          fmt("%zu parameters, %zu above tolerance, max rel err %.2e (limit 1e-3)", checked,
              failures, worst)};
}

// Small model used for the training criteria on a single CPU core.
ModelConfig desk_config() {
  ModelConfig m;
  m.token_emb_dim = 16;
  m.char_emb_dim = 8;
  m.char_filter_count = 8;
  m.hidden_dim = 32;
  return m;
}

// 5. 50-pair toy corpus overfits.
Outcome overfit() {
  const auto t0 = Clock::now();
  synthetic::CorpusSpec spec;
  spec.num_functions = 25;
  spec.num_negatives = 5;
  spec.train_fraction = 1.0;
  spec.dev_fraction = 0.0;
  spec.seed = 5;
  const auto corpus = synthetic::generate(spec);
  const auto store = synthetic::to_store(corpus);
  const Vocab vocab = build_vocab(store.all());
  const ModelConfig m = desk_config();
  const auto data = prepare_pairs(corpus.train, store, vocab, GraphConfig{}, m);
  TrainConfig t;
  t.epochs = 200;
  t.batch_size = 8;
  t.patience = 0;
  t.seed = 5;
  std::size_t reached = 0;
  double best = 0.0;
  train(data, {}, m, t, vocab.token_count(), vocab.char_count(), [&](const EpochLog& e) {
    best = std::max(best, e.train_accuracy);
    if (reached == 0 && e.train_accuracy >= 0.95) reached = e.epoch;
  });
  const double secs = seconds_since(t0);
  return {data.size() == 50 && reached > 0 && secs <= 600.0,
          fmt("%zu pairs; accuracy >= 0.95 first at epoch %zu (best %.3f), %.0fs (limit 600s)",
              data.size(), reached, best, secs)};
}

// 6. Synthetic discrimination against the edit-distance baseline and ablations.
Outcome discrimination() {
  const auto t0 = Clock::now();
  synthetic::CorpusSpec spec;
  spec.num_functions = 500;
  spec.family_size = 5;
  spec.mutation_rate = 0.3;
  spec.train_fraction = 0.6;
  spec.dev_fraction = 0.2;
  spec.seed = 7;
  const auto corpus = synthetic::generate(spec);
  const auto store = synthetic::to_store(corpus);
  const Vocab vocab = build_vocab(store.all());
  const double baseline = baseline_edit_distance(corpus.test, store);

  auto run = [&](GraphConfig g, ModelConfig m) {
    const auto tr = prepare_pairs(corpus.train, store, vocab, g, m);
    const auto dv = prepare_pairs(corpus.dev, store, vocab, g, m);
    const auto te = prepare_pairs(corpus.test, store, vocab, g, m);
    TrainConfig t;
    t.epochs = 40;
    t.batch_size = 16;
    t.patience = 0;
    t.seed = 7;
    const auto r = train(tr, dv, m, t, vocab.token_count(), vocab.char_count());
    return *eval_auc(r.model, te).auc;
  };
  const ModelConfig m = desk_config();
  const double full = run(GraphConfig{}, m);
  GraphConfig mono_only;
  mono_only.enabled_types = mono_arch_types();
  const double no_cross = run(mono_only, m);
  ModelConfig shared = m;
  shared.rgcn_aggregation = Aggregation::kShared;
  const double no_type = run(GraphConfig{}, shared);
  GraphConfig cross_only;
  cross_only.enabled_types = cross_arch_types();
  const double no_mono = run(cross_only, m);
  const double secs = seconds_since(t0);
  const bool pass = full >= baseline + 0.10 && no_cross < full && no_type < full &&
                    no_mono <= full && secs <= 1800.0;
  return {pass, fmt("test AUC full %.4f, edit baseline %.4f, no cross-arch edges %.4f, "
                    "shared aggregation %.4f, no mono-arch edges %.4f; %zu test pairs; "
                    "%.0fs (limit 1800s)",
                    full, baseline, no_cross, no_type, no_mono, corpus.test.size(), secs)};
}

// 7. Search metric fixtures.
QueryScores query_with_rank(std::size_t rank) {
  QueryScores q{"q", {"p", 1.05 - static_cast<double>(rank - 1) * 0.1}, {}};
  for (std::size_t k = 0; k < 5; ++k) {
    q.negatives.push_back({"n" + std::to_string(k), 1.0 - static_cast<double>(k) * 0.1});
  }
  return q;
}

Outcome search_fixtures() {
  const auto a = search_metrics({query_with_rank(1), query_with_rank(1)});
  const auto b = search_metrics({query_with_rank(3)});
  const auto c = search_metrics({query_with_rank(1), query_with_rank(4)});
  bool ok = a.precision_at_1 == 1.0 && a.mrr == 1.0 && b.precision_at_1 == 0.0 &&
            b.mrr == 1.0 / 3.0 && c.precision_at_1 == 0.5 && c.mrr == 0.625;

  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<QueryScores> qs(1 + rng() % 8);
    for (auto& q : qs) {
      q.positive = {"p", std::round(unit(rng) * 10) / 10};
      const std::size_t n = rng() % 12;
      for (std::size_t k = 0; k < n; ++k) {
        q.negatives.push_back({"n" + std::to_string(k), std::round(unit(rng) * 10) / 10});
      }
    }
    const auto m = search_metrics(qs);
    if (m.mrr < m.precision_at_1) ++violations;
  }
  ok = ok && violations == 0;
  return {ok, fmt("fixtures (%.1f,%.1f) (%.1f,%.6f) (%.1f,%.3f); %zu of 1000 random trials with "
                  "MRR < p@1",
                  a.precision_at_1, a.mrr, b.precision_at_1, b.mrr, c.precision_at_1, c.mrr,
                  violations)};
}

// 8. AUC fixture.
Outcome auc_fixture() {
  const double v = auc({0.9, 0.8, 0.85, 0.1}, {1, 1, 0, 0});
  return {v == 0.75, fmt("AUC = %.17g", v)};
}

// 9. Two CLI pipeline runs with one seed.
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(const std::string& args) {
  const std::string cmd = "\"" BINSIM_EXE "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  const fs::path root = "acceptance_work";
  fs::remove_all(root);
  std::vector<std::string> graph, auc_report, search_report, checkpoint;
  for (const char* run : {"run1", "run2"}) {
    const std::string d = (root / run).string();
    const std::string corpus = " --corpus " + d + "/c/snippets.jsonl";
    const std::string model = corpus + " --vocab " + d + "/vocab.json --checkpoint " + d + "/m.bin";
    const int rc =
        cli("gen-synthetic --seed 31 --functions 60 --negatives 5 --out " + d + "/c") |
        cli("build-vocab" + corpus + " --out " + d + "/vocab.json") |
        cli("build-graph" + corpus + " --pair f00003.arm,f00003.mips --out " + d + "/graph.json") |
        cli("train --seed 31" + model + " --train " + d + "/c/train.jsonl --dev " + d +
            "/c/dev.jsonl --epochs 3 --hidden-dim 16 --token-emb-dim 8 --char-emb-dim 4"
            " --char-filters 4 --out " + d + "/log.json") |
        cli("eval-auc" + model + " --pairs " + d + "/c/test.jsonl --out " + d + "/auc.json") |
        cli("eval-search" + model + " --queries " + d + "/c/search.jsonl --out " + d +
            "/search.json");
    if (rc != 0) return {false, std::string("pipeline command failed in ") + run};
    graph.push_back(slurp(d + "/graph.json"));
    checkpoint.push_back(slurp(d + "/m.bin"));
    auto strip = [](const std::string& text) {
      auto j = nlohmann::json::parse(text);
      j.erase("timing");
      return j.dump();
    };
    auc_report.push_back(strip(slurp(d + "/auc.json")));
    search_report.push_back(strip(slurp(d + "/search.json")));
  }
  const bool same_graph = !graph[0].empty() && graph[0] == graph[1];
  const bool same_eval = auc_report[0] == auc_report[1] && search_report[0] == search_report[1];
  const bool same_ckpt = checkpoint[0] == checkpoint[1];
  return {same_graph && same_eval,
          fmt("graph dumps %s, eval JSON without timing %s, checkpoints %s",
              same_graph ? "identical" : "differ", same_eval ? "identical" : "differ",
              same_ckpt ? "bitwise identical" : "differ")};
}

// 10. Compare-mode throughput at default model size, reported only.
Outcome throughput() {
  synthetic::CorpusSpec spec;
  spec.num_functions = 40;
  spec.min_ops = 28;
  spec.max_ops = 32;
  spec.num_negatives = 5;
  spec.seed = 10;
  const auto corpus = synthetic::generate(spec);
  const auto store = synthetic::to_store(corpus);
  const Vocab vocab = build_vocab(store.all());
  double instructions = 0.0;
  for (const auto& snip : corpus.snippets) {
    instructions += static_cast<double>(snip.instructions.size());
  }
  instructions /= static_cast<double>(corpus.snippets.size());

  auto rate = [&](const ModelConfig& cfg) {
    const Model model(cfg, vocab.token_count(), vocab.char_count(), 1);
    const auto t0 = Clock::now();
    double sink = 0.0;
    for (std::size_t f = 0; f < spec.num_functions; ++f) {
      const auto& a = store.at(synthetic::snippet_id(f, synthetic::Dialect::kArm));
      const auto& b = store.at(synthetic::snippet_id(f, synthetic::Dialect::kMips));
      sink += forward_pair(model, vocab, a, b, GraphConfig{}).probability;
    }
    const double r = static_cast<double>(spec.num_functions) / seconds_since(t0);
    return sink < 0.0 ? 0.0 : r;
  };
  const double full = rate(ModelConfig{});
  const double desk = rate(desk_config());
  return {full >= 50.0, fmt("%.1f pairs/s (%.1f ms/pair) at default model size, %.1f pairs/s at "
                            "the small training config; %.1f instructions per snippet; "
                            "reported, not gated",
                            full, 1000.0 / full, desk, instructions)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
    bool gated;
  };
  const std::vector<Criterion> criteria{
      {1, "graph oracle equivalence", graph_oracle, true},
      {2, "alignment rule exhaustive check", alignment_exhaustive, true},
      {3, "R-GCN layer vs dense reference", rgcn_dense, true},
      {4, "gradient check", gradient_check, true},
      {5, "toy overfit", overfit, true},
      {6, "synthetic discrimination", discrimination, true},
      {7, "search metrics", search_fixtures, true},
      {8, "AUC fixture", auc_fixture, true},
      {9, "pipeline determinism", determinism, true},
      {10, "compare throughput", throughput, false},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("AC%d %s: %s: %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass && c.gated) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
