#include <doctest.h>

#include "binsim/config_json.hpp"
#include "binsim/error.hpp"

using namespace binsim;

TEST_CASE("run config round trip") {
  RunConfig c;
  CHECK(run_config_from_string(run_config_to_string(c)) == c);

  c.graph.prefix_len = 4;
  c.graph.align_threshold = 1.5;
  c.graph.align_formula = AlignFormula::kRescaled;
  c.graph.enabled_types = mono_arch_types();
  c.model.hidden_dim = 32;
  c.model.rgcn_aggregation = Aggregation::kShared;
  c.model.edge_weighting = EdgeWeighting::kFrequency;
  c.model.activation = Activation::kTanh;
  c.model.dropout = 0.25;
  c.train.epochs = 7;
  c.train.learning_rate = 0.01;
  c.seed = 123;
  c.paths.corpus = "corpus.jsonl";
  c.paths.out = "out/";
  const std::string text = run_config_to_string(c);
  const RunConfig back = run_config_from_string(text);
  CHECK(back == c);
  CHECK(run_config_to_string(back) == text);
}

TEST_CASE("partial config keeps defaults") {
  const RunConfig c = run_config_from_string(R"({"model": {"hidden_dim": 64}, "seed": 9})");
  CHECK(c.model.hidden_dim == 64);
  CHECK(c.model.token_emb_dim == 128);
  CHECK(c.graph == GraphConfig{});
  CHECK(c.seed == 9u);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(run_config_from_string(R"({"bogus": 1})"), InputError);
  CHECK_THROWS_AS(run_config_from_string(R"({"model": {"hidden": 64}})"), InputError);
  CHECK_THROWS_AS(run_config_from_string(R"({"graph": {"prefix_len": 0}})"), InputError);
  CHECK_THROWS_AS(run_config_from_string(R"({"graph": {"align_formula": "sideways"}})"),
                  InputError);
  CHECK_THROWS_AS(run_config_from_string(R"({"graph": {"enabled_types": ["e7"]}})"), InputError);
  CHECK_THROWS_AS(run_config_from_string(R"({"train": {"batch_size": 0}})"), InputError);
  CHECK_THROWS_AS(run_config_from_string(R"({"model": {"hidden_dim": "big"}})"), InputError);
  try {
    run_config_from_string("{\"seed\": ");
    FAIL("expected parse error");
  } catch (const ParseError& e) {
    CHECK(e.offset() > 0);
  }
  CHECK_THROWS_AS(load_run_config("/nonexistent/config.json"), InputError);
}
