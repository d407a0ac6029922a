#include <doctest.h>

#include <cstdio>

#include "eostb/checkpoint.hpp"
#include "eostb/config.hpp"
#include "eostb/errors.hpp"
#include "support.hpp"

using namespace eostb;
using namespace eostb::testing;
using nlohmann::json;

TEST_CASE("checkpoint round-trips bit-exactly, with and without optimizer state") {
  const DatasetConfig d = micro_dataset();
  Checkpoint ck;
  ck.params = randomized_params(micro_model(d), 51);
  ck.meta = {{"seed", 3}, {"note", "x"}};
  auto back = decode_checkpoint(encode_checkpoint(ck));
  CHECK(back.params.config == ck.params.config);
  CHECK(back.params.values == ck.params.values);
  CHECK(back.optimizer.empty());
  CHECK(back.meta == ck.meta);

  Grads g = ck.params.zeros_like();
  for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] = 1e-3 * static_cast<double>(i % 7);
  Params p = ck.params;
  adam_step(p, g, ck.optimizer, AdamConfig{});
  back = decode_checkpoint(encode_checkpoint(ck));
  CHECK(back.optimizer.m == ck.optimizer.m);
  CHECK(back.optimizer.v == ck.optimizer.v);
  CHECK(back.optimizer.step == 1);

  const std::string path = "test_roundtrip.ckpt";
  write_checkpoint(path, ck);
  CHECK(read_checkpoint(path).params.values == ck.params.values);
  std::remove(path.c_str());
}

TEST_CASE("corrupt checkpoints are rejected") {
  Checkpoint ck;
  ck.params = init_params(micro_model(micro_dataset()), 52);
  const std::string bytes = encode_checkpoint(ck);
  CHECK_THROWS_AS(decode_checkpoint("NOTACKPT" + bytes.substr(8)), FormatError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), FormatError);
  CHECK_THROWS_AS(read_checkpoint("/nonexistent/model.ckpt"), IoError);
}

TEST_CASE("run config: defaults survive a JSON round trip") {
  for (const char* kind : {"dataset_build", "train_mle", "train_selective", "train_combined", "score", "filter",
                           "probe_saliency", "probe_aggregation", "probe_tendency", "eval", "report"}) {
    RunConfig c;
    c.kind = run_kind_from_string(kind);
    const auto j = to_json(c);
    const RunConfig back = run_config_from_json(j);
    CHECK(to_json(back) == j);
    CHECK(config_hash(back) == config_hash(c));
  }
}

TEST_CASE("run config: overrides, unknown keys and wrong types") {
  json j = {{"kind", "train_selective"}, {"training", {{"lr", 3e-5}, {"epochs", 1}}}, {"seeds", {4, 5}}};
  const RunConfig c = run_config_from_json(j);
  CHECK(c.training.train.adam.lr == 3e-5);
  CHECK(c.training.train.epochs == 1);
  CHECK(c.seeds == std::vector<std::uint64_t>{4, 5});

  CHECK_THROWS_AS(run_config_from_json({{"kind", "train_mle"}, {"trainig", json::object()}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"kind", "train_mle"}, {"training", {{"lr", "fast"}}}}), ConfigError);
  CHECK_THROWS_AS(run_config_from_json({{"kind", "pretrain"}}), ConfigError);
  RunConfig empty;
  empty.seeds.clear();
  CHECK_THROWS_AS(empty.validate(), ConfigError);
  RunConfig ft;
  ft.kind = RunKind::further_train;
  CHECK_THROWS_AS(ft.validate(), ConfigError);
}

TEST_CASE("config hash ignores seeds and tracks everything else") {
  RunConfig a, b;
  b.seeds = {7, 8, 9};
  CHECK(config_hash(a) == config_hash(b));
  b.training.train.adam.lr *= 2;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a).size() == 16);
}

TEST_CASE("seed expansion and code version") {
  CHECK(expand_seed("runs/mle/seed-{seed}/model.ckpt", 12) == "runs/mle/seed-12/model.ckpt");
  CHECK(expand_seed("a{seed}b{seed}", 3) == "a3b3");
  CHECK(expand_seed("plain", 3) == "plain");
  CHECK(!code_version().empty());
}

TEST_CASE("dataset section round-trips") {
  DatasetConfig d = micro_dataset();
  d.mixture = {0.1, 0.2, 0.7};
  const DatasetConfig back = dataset_config_from_json(to_json(d));
  CHECK(to_json(back) == to_json(d));
}
