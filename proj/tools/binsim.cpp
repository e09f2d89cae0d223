// binsim: cross-architecture binary code similarity toolkit.
//
// Exit codes: 0 success, 1 internal error, 2 bad input or usage.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "binsim/checkpoint.hpp"
#include "binsim/config_json.hpp"
#include "binsim/dataset.hpp"
#include "binsim/error.hpp"
#include "binsim/evaluation.hpp"
#include "binsim/graph.hpp"
#include "binsim/synthetic.hpp"
#include "binsim/trainer.hpp"

using namespace binsim;
using nlohmann::json;

namespace {

constexpr std::uint64_t kDefaultSeed = 1;

// Flags write into a scratch RunConfig; after parsing, only the flags the
// user actually passed are copied over the config file values.
class Overrides {
 public:
  template <typename Get>
  CLI::Option* bind(CLI::App* app, const std::string& name, Get get, const std::string& desc) {
    CLI::Option* opt = app->add_option(name, get(scratch_), desc);
    appliers_.emplace_back(opt, [this, get](RunConfig& dst) { get(dst) = get(scratch_); });
    return opt;
  }

  // String-valued flags converted on apply.
  CLI::Option* bind_text(CLI::App* app, const std::string& name,
                         std::function<void(RunConfig&, const std::string&)> set,
                         const std::string& desc) {
    texts_.push_back(std::make_unique<std::string>());
    std::string* holder = texts_.back().get();
    CLI::Option* opt = app->add_option(name, *holder, desc);
    appliers_.emplace_back(opt, [holder, set](RunConfig& dst) { set(dst, *holder); });
    return opt;
  }

  void apply(RunConfig& cfg) const {
    for (const auto& [opt, fn] : appliers_) {
      if (opt->count() > 0) fn(cfg);
    }
  }

 private:
  RunConfig scratch_;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> appliers_;
  std::vector<std::unique_ptr<std::string>> texts_;
};

struct Globals {
  std::string config_path;
  std::string registers_path;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::size_t workers = 1;
  CLI::Option* workers_opt = nullptr;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << text;
}

const std::string& need(const std::string& value, const char* flag) {
  if (value.empty()) throw InputError(std::string("missing required ") + flag);
  return value;
}

std::uint64_t parse_seed(const char* text) {
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(text, &end, 10);
  if (errno != 0 || end == text || *end != '\0' || text[0] == '-') {
    throw InputError(std::string("BINSIM_SEED is not an unsigned integer: '") + text + "'");
  }
  return v;
}

RegisterTables register_tables(const Globals& g) {
  RegisterTables t = RegisterTables::builtin();
  if (!g.registers_path.empty()) t.load_file(g.registers_path);
  return t;
}

struct Context {
  RunConfig cfg;
  RegisterTables tables;
  std::uint64_t seed = kDefaultSeed;
  std::size_t workers = 1;

  SnippetStore corpus() const {
    return read_snippets_file(need(cfg.paths.corpus, "--corpus"), tables);
  }
  Vocab vocab() const { return Vocab::from_json(read_text(need(cfg.paths.vocab, "--vocab"))); }
};

Context resolve(const Globals& g, const Overrides& o) {
  Context ctx;
  if (!g.config_path.empty()) ctx.cfg = load_run_config(g.config_path);
  o.apply(ctx.cfg);
  if (g.seed_opt->count() > 0) {
    ctx.cfg.seed = g.seed;
  } else if (!ctx.cfg.seed) {
    if (const char* env = std::getenv("BINSIM_SEED"); env && *env) ctx.cfg.seed = parse_seed(env);
  }
  ctx.seed = ctx.cfg.seed.value_or(kDefaultSeed);
  ctx.cfg.train.seed = ctx.seed;
  if (g.workers_opt->count() > 0) ctx.cfg.train.workers = g.workers;
  if (ctx.cfg.train.workers == 0) throw InputError("--workers must be positive");
  ctx.workers = ctx.cfg.train.workers;
  ctx.cfg.graph.validate();
  ctx.cfg.model.validate();
  ctx.tables = register_tables(g);
  return ctx;
}

std::pair<std::string, std::string> split_pair(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos || comma == 0 || comma + 1 == text.size()) {
    throw InputError("--pair expects two ids separated by a comma, got '" + text + "'");
  }
  return {text.substr(0, comma), text.substr(comma + 1)};
}

void add_graph_flags(CLI::App* app, Overrides& o) {
  o.bind(app, "--prefix-len", [](RunConfig& c) -> auto& { return c.graph.prefix_len; },
         "Opcode prefix length for e2 edges");
  o.bind(app, "--align-threshold",
         [](RunConfig& c) -> auto& { return c.graph.align_threshold; },
         "Position alignment threshold for e5 edges");
  o.bind_text(
      app, "--align-formula",
      [](RunConfig& c, const std::string& v) {
        if (v == "as_written") {
          c.graph.align_formula = AlignFormula::kAsWritten;
        } else if (v == "rescaled") {
          c.graph.align_formula = AlignFormula::kRescaled;
        } else {
          throw InputError("--align-formula must be as_written or rescaled");
        }
      },
      "as_written | rescaled");
  o.bind_text(
      app, "--edges",
      [](RunConfig& c, const std::string& v) { c.graph.enabled_types = parse_edge_types(v); },
      "Enabled edge types, e.g. e0,e1 or all, mono, cross");
  o.bind_text(
      app, "--disable-edges",
      [](RunConfig& c, const std::string& v) { c.graph.enabled_types &= ~parse_edge_types(v); },
      "Edge types to drop, e.g. e2,e3,e4,e5");
}

void add_model_flags(CLI::App* app, Overrides& o) {
  o.bind(app, "--token-emb-dim", [](RunConfig& c) -> auto& { return c.model.token_emb_dim; },
         "Token embedding size");
  o.bind(app, "--char-emb-dim", [](RunConfig& c) -> auto& { return c.model.char_emb_dim; },
         "Character embedding size");
  o.bind(app, "--char-filter-width",
         [](RunConfig& c) -> auto& { return c.model.char_filter_width; }, "Char conv width");
  o.bind(app, "--char-filters", [](RunConfig& c) -> auto& { return c.model.char_filter_count; },
         "Number of char conv filters");
  o.bind(app, "--bilstm-layers", [](RunConfig& c) -> auto& { return c.model.bilstm_layers; },
         "Encoder Bi-LSTM layers");
  o.bind(app, "--rgcn-layers", [](RunConfig& c) -> auto& { return c.model.rgcn_layers; },
         "R-GCN layers");
  o.bind(app, "--hidden-dim", [](RunConfig& c) -> auto& { return c.model.hidden_dim; },
         "Hidden size (even)");
  o.bind(app, "--dropout", [](RunConfig& c) -> auto& { return c.model.dropout; },
         "Dropout rate during training");
  o.bind_text(
      app, "--aggregation",
      [](RunConfig& c, const std::string& v) {
        if (v == "type_specific") {
          c.model.rgcn_aggregation = Aggregation::kTypeSpecific;
        } else if (v == "shared") {
          c.model.rgcn_aggregation = Aggregation::kShared;
        } else {
          throw InputError("--aggregation must be type_specific or shared");
        }
      },
      "type_specific | shared");
  o.bind_text(
      app, "--edge-weighting",
      [](RunConfig& c, const std::string& v) {
        if (v == "unweighted") {
          c.model.edge_weighting = EdgeWeighting::kUnweighted;
        } else if (v == "frequency") {
          c.model.edge_weighting = EdgeWeighting::kFrequency;
        } else {
          throw InputError("--edge-weighting must be unweighted or frequency");
        }
      },
      "unweighted | frequency");
  o.bind_text(
      app, "--activation",
      [](RunConfig& c, const std::string& v) {
        if (v == "relu") {
          c.model.activation = Activation::kRelu;
        } else if (v == "tanh") {
          c.model.activation = Activation::kTanh;
        } else {
          throw InputError("--activation must be relu or tanh");
        }
      },
      "relu | tanh");
}

void add_train_flags(CLI::App* app, Overrides& o) {
  o.bind(app, "--epochs", [](RunConfig& c) -> auto& { return c.train.epochs; }, "Epoch budget");
  o.bind(app, "--batch-size", [](RunConfig& c) -> auto& { return c.train.batch_size; },
         "Pairs per optimizer step");
  o.bind(app, "--lr", [](RunConfig& c) -> auto& { return c.train.learning_rate; },
         "Adam learning rate");
  o.bind(app, "--grad-clip", [](RunConfig& c) -> auto& { return c.train.grad_clip; },
         "Gradient norm clip (0 disables)");
  o.bind(app, "--patience", [](RunConfig& c) -> auto& { return c.train.patience; },
         "Early stopping patience in epochs (0 disables)");
}

#define PATH_FLAG(app, o, flag, field, desc) \
  (o).bind((app), flag, [](RunConfig& c) -> auto& { return c.paths.field; }, desc)

json epoch_json(const EpochLog& e) {
  json j{{"epoch", e.epoch}, {"loss", e.loss}, {"train_accuracy", e.train_accuracy},
         {"seconds", e.seconds}};
  j["dev_auc"] = e.dev_auc ? json(*e.dev_auc) : json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_build_vocab(const Context& ctx) {
  const SnippetStore store = ctx.corpus();
  const Vocab vocab = build_vocab(store.all());
  const std::string& out = ctx.cfg.paths.out.empty() ? ctx.cfg.paths.vocab : ctx.cfg.paths.out;
  write_text(need(out, "--out"), vocab.to_json());
  std::cerr << "vocab: " << vocab.token_count() << " tokens, " << vocab.char_count()
            << " chars from " << store.size() << " snippets\n";
  return 0;
}

int cmd_build_graph(const Context& ctx, const std::string& pair) {
  const auto [id_a, id_b] = split_pair(need(pair, "--pair"));
  const SnippetStore store = ctx.corpus();
  const AssocGraph g = build_graph(store.at(id_a), store.at(id_b), ctx.cfg.graph);
  write_text(ctx.cfg.paths.out, serialize_graph(g));
  return 0;
}

int cmd_train(const Context& ctx) {
  const SnippetStore store = ctx.corpus();
  const Vocab vocab = ctx.vocab();
  const auto& paths = ctx.cfg.paths;
  const auto train_pairs = read_pairs_file(need(paths.train, "--train"));
  const auto dev_pairs = paths.dev.empty() ? std::vector<PairExample>{} : read_pairs_file(paths.dev);
  const std::string& ckpt = need(paths.checkpoint, "--checkpoint");

  const auto train_set =
      prepare_pairs(train_pairs, store, vocab, ctx.cfg.graph, ctx.cfg.model, ctx.workers);
  const auto dev_set =
      prepare_pairs(dev_pairs, store, vocab, ctx.cfg.graph, ctx.cfg.model, ctx.workers);
  json log = json::array();
  const TrainResult r = train(train_set, dev_set, ctx.cfg.model, ctx.cfg.train,
                              vocab.token_count(), vocab.char_count(), [&](const EpochLog& e) {
                                log.push_back(epoch_json(e));
                                std::cerr << "epoch " << e.epoch << " loss " << e.loss
                                          << " acc " << e.train_accuracy;
                                if (e.dev_auc) std::cerr << " dev_auc " << *e.dev_auc;
                                std::cerr << " (" << e.seconds << "s)\n";
                              });
  save_checkpoint(ckpt, r.model, ctx.cfg.graph, vocab, r.seconds_per_epoch);
  json summary{{"epochs", log},
               {"best_epoch", r.best_epoch},
               {"seconds_per_epoch", r.seconds_per_epoch},
               {"checkpoint", ckpt}};
  summary["best_dev_auc"] = r.best_dev_auc ? json(*r.best_dev_auc) : json(nullptr);
  if (!paths.out.empty()) write_text(paths.out, summary.dump(2) + "\n");
  return 0;
}

int cmd_eval_auc(const Context& ctx) {
  const SnippetStore store = ctx.corpus();
  const Vocab vocab = ctx.vocab();
  const LoadedCheckpoint ckpt = load_checkpoint(need(ctx.cfg.paths.checkpoint, "--checkpoint"), vocab);
  const auto pairs = read_pairs_file(need(ctx.cfg.paths.test, "--pairs"));
  const auto data =
      prepare_pairs(pairs, store, vocab, ckpt.graph_config, ckpt.model.config(), ctx.workers);
  EvalReport r = eval_auc(ckpt.model, data, ctx.workers);
  r.timing.train_seconds_per_epoch = ckpt.train_seconds_per_epoch;
  write_text(ctx.cfg.paths.out, report_to_json(r));
  return 0;
}

int cmd_eval_search(const Context& ctx) {
  const SnippetStore store = ctx.corpus();
  const Vocab vocab = ctx.vocab();
  const LoadedCheckpoint ckpt = load_checkpoint(need(ctx.cfg.paths.checkpoint, "--checkpoint"), vocab);
  const auto queries = read_queries_file(need(ctx.cfg.paths.queries, "--queries"));
  EvalReport r = eval_search(ckpt.model, vocab, store, ckpt.graph_config, queries, ctx.workers);
  r.timing.train_seconds_per_epoch = ckpt.train_seconds_per_epoch;
  write_text(ctx.cfg.paths.out, report_to_json(r));
  return 0;
}

int cmd_compare(const Context& ctx, const std::string& a, const std::string& b) {
  const SnippetStore store = ctx.corpus();
  const Vocab vocab = ctx.vocab();
  const LoadedCheckpoint ckpt = load_checkpoint(need(ctx.cfg.paths.checkpoint, "--checkpoint"), vocab);
  const SimilarityScore s = forward_pair(ckpt.model, vocab, store.at(need(a, "--a")),
                                         store.at(need(b, "--b")), ckpt.graph_config);
  json out{{"a", a},
           {"b", b},
           {"probability", s.probability},
           {"logits", {s.logits(0), s.logits(1)}}};
  write_text(ctx.cfg.paths.out, out.dump() + "\n");
  return 0;
}

int cmd_gen_synthetic(const Context& ctx, synthetic::CorpusSpec spec) {
  spec.seed = ctx.seed;
  const synthetic::Corpus c = synthetic::generate(spec);
  const std::string& dir = need(ctx.cfg.paths.out, "--out");
  synthetic::write_corpus(c, spec, dir);
  std::cerr << "wrote " << c.snippets.size() << " snippets, " << c.train.size() << "/"
            << c.dev.size() << "/" << c.test.size() << " train/dev/test pairs and "
            << c.queries.size() << " queries to " << dir << "\n";
  return 0;
}

int cmd_baseline_edit(const Context& ctx) {
  const SnippetStore store = ctx.corpus();
  const auto pairs = read_pairs_file(need(ctx.cfg.paths.test, "--pairs"));
  EvalReport r;
  const auto start = std::chrono::steady_clock::now();
  r.auc = baseline_edit_distance(pairs, store);
  r.n_pairs = pairs.size();
  r.timing.predict_ms_per_pair =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count() /
      static_cast<double>(std::max<std::size_t>(1, pairs.size()));
  write_text(ctx.cfg.paths.out, report_to_json(r));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-architecture binary code similarity"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  Overrides o;
  app.add_option("--config", g.config_path, "JSON run configuration; flags override it")
      ->check(CLI::ExistingFile);
  app.add_option("--registers", g.registers_path, "Extra register table file")
      ->check(CLI::ExistingFile);
  g.seed_opt = app.add_option("--seed", g.seed, "Random seed (falls back to BINSIM_SEED)");
  g.workers_opt = app.add_option("--workers", g.workers, "Worker threads")
                      ->check(CLI::PositiveNumber);

  auto* vocab_cmd = app.add_subcommand("build-vocab", "Build the token/char vocabulary");
  PATH_FLAG(vocab_cmd, o, "--corpus", corpus, "Snippet JSONL file");
  PATH_FLAG(vocab_cmd, o, "--out,-o", out, "Output vocab file");

  std::string pair;
  auto* graph_cmd = app.add_subcommand("build-graph", "Dump the association graph of a pair");
  PATH_FLAG(graph_cmd, o, "--corpus", corpus, "Snippet JSONL file");
  graph_cmd->add_option("--pair", pair, "Two snippet ids: A,B")->required();
  PATH_FLAG(graph_cmd, o, "--out,-o", out, "Output JSON (stdout when omitted)");
  add_graph_flags(graph_cmd, o);

  auto* train_cmd = app.add_subcommand("train", "Train a model on labelled pairs");
  PATH_FLAG(train_cmd, o, "--corpus", corpus, "Snippet JSONL file");
  PATH_FLAG(train_cmd, o, "--vocab", vocab, "Vocab file");
  PATH_FLAG(train_cmd, o, "--train", train, "Training pairs JSONL");
  PATH_FLAG(train_cmd, o, "--dev", dev, "Development pairs JSONL");
  PATH_FLAG(train_cmd, o, "--checkpoint", checkpoint, "Checkpoint to write");
  PATH_FLAG(train_cmd, o, "--out,-o", out, "Training log JSON");
  add_graph_flags(train_cmd, o);
  add_model_flags(train_cmd, o);
  add_train_flags(train_cmd, o);

  auto* auc_cmd = app.add_subcommand("eval-auc", "Pairwise AUC of a checkpoint");
  PATH_FLAG(auc_cmd, o, "--corpus", corpus, "Snippet JSONL file");
  PATH_FLAG(auc_cmd, o, "--vocab", vocab, "Vocab file");
  PATH_FLAG(auc_cmd, o, "--checkpoint", checkpoint, "Checkpoint");
  PATH_FLAG(auc_cmd, o, "--pairs", test, "Labelled pairs JSONL");
  PATH_FLAG(auc_cmd, o, "--out,-o", out, "Report JSON (stdout when omitted)");

  auto* search_cmd = app.add_subcommand("eval-search", "Function search precision@1 and MRR");
  PATH_FLAG(search_cmd, o, "--corpus", corpus, "Snippet JSONL file");
  PATH_FLAG(search_cmd, o, "--vocab", vocab, "Vocab file");
  PATH_FLAG(search_cmd, o, "--checkpoint", checkpoint, "Checkpoint");
  PATH_FLAG(search_cmd, o, "--queries", queries, "Search queries JSONL");
  PATH_FLAG(search_cmd, o, "--out,-o", out, "Report JSON (stdout when omitted)");

  std::string id_a;
  std::string id_b;
  auto* compare_cmd = app.add_subcommand("compare", "Score one snippet pair");
  PATH_FLAG(compare_cmd, o, "--corpus", corpus, "Snippet JSONL file");
  PATH_FLAG(compare_cmd, o, "--vocab", vocab, "Vocab file");
  PATH_FLAG(compare_cmd, o, "--checkpoint", checkpoint, "Checkpoint");
  compare_cmd->add_option("--a", id_a, "First snippet id")->required();
  compare_cmd->add_option("--b", id_b, "Second snippet id")->required();
  PATH_FLAG(compare_cmd, o, "--out,-o", out, "Output JSON (stdout when omitted)");

  synthetic::CorpusSpec spec;
  auto* synth_cmd = app.add_subcommand("gen-synthetic", "Generate a two-dialect corpus");
  PATH_FLAG(synth_cmd, o, "--out,-o", out, "Output directory");
  synth_cmd->add_option("--functions", spec.num_functions, "Number of functions")
      ->capture_default_str();
  synth_cmd->add_option("--negatives", spec.num_negatives, "Negatives per search query")
      ->capture_default_str();
  synth_cmd->add_option("--min-ops", spec.min_ops, "Shortest function")->capture_default_str();
  synth_cmd->add_option("--max-ops", spec.max_ops, "Longest function")->capture_default_str();
  synth_cmd->add_option("--symbol-pool", spec.symbol_pool, "Distinct call/string symbols")
      ->capture_default_str();
  synth_cmd->add_option("--train-fraction", spec.train_fraction)->capture_default_str();
  synth_cmd->add_option("--dev-fraction", spec.dev_fraction)->capture_default_str();
  synth_cmd->add_option("--family-size", spec.family_size, "Functions per family of near-copies")
      ->capture_default_str();
  synth_cmd->add_option("--mutation-rate", spec.mutation_rate,
                        "Per-instruction mutation probability within a family")
      ->capture_default_str();

  auto* edit_cmd = app.add_subcommand("baseline-edit", "Edit-distance baseline AUC");
  PATH_FLAG(edit_cmd, o, "--corpus", corpus, "Snippet JSONL file");
  PATH_FLAG(edit_cmd, o, "--pairs", test, "Labelled pairs JSONL");
  PATH_FLAG(edit_cmd, o, "--out,-o", out, "Report JSON (stdout when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const Context ctx = resolve(g, o);
    if (*vocab_cmd) return cmd_build_vocab(ctx);
    if (*graph_cmd) return cmd_build_graph(ctx, pair);
    if (*train_cmd) return cmd_train(ctx);
    if (*auc_cmd) return cmd_eval_auc(ctx);
    if (*search_cmd) return cmd_eval_search(ctx);
    if (*compare_cmd) return cmd_compare(ctx, id_a, id_b);
    if (*synth_cmd) return cmd_gen_synthetic(ctx, spec);
    if (*edit_cmd) return cmd_baseline_edit(ctx);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
