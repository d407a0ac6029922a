#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "eostb/checkpoint.hpp"
#include "eostb/errors.hpp"
#include "eostb/harness.hpp"
#include "eostb/plots.hpp"
#include "support.hpp"

using namespace eostb;
using namespace eostb::testing;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

RunConfig tiny(RunKind kind, const fs::path& out) {
  RunConfig c;
  c.kind = kind;
  c.output_dir = out.string();
  c.seeds = {2};
  c.dataset = micro_dataset();
  c.dataset.train_size = 24;
  c.dataset.test_size = 12;
  c.model = micro_model(c.dataset);
  c.training.train.epochs = 1;
  c.training.train.batch_size = 8;
  c.training.train.log_interval = 1;
  c.training.monitor_size = 8;
  c.probe.examples = 6;
  c.decode.max_len = 20;
  return c;
}

}  // namespace

TEST_CASE("plots are byte-deterministic and come with their data") {
  TempDir dir("eostb_plot_test");
  std::vector<Series> s{{"a", {0, 1, 2}, {0.1, std::nan(""), 0.3}}, {"b", {0, 1, 2}, {1, 2, 3}}};
  const auto svg = line_plot_svg("t", "x", "y", s);
  CHECK(svg == line_plot_svg("t", "x", "y", s));
  CHECK(svg.rfind("<svg", 0) == 0);
  const auto stem = (dir.path / "p").string();
  write_plot(stem, svg, series_tsv(s));
  CHECK(fs::exists(stem + ".svg"));
  CHECK(fs::exists(stem + ".tsv"));
  CHECK(slurp(stem + ".svg") == svg);
  const auto bars = bar_plot_svg("b", {"c1", "c2"}, {{"g", {1, 2}}});
  CHECK(bars == bar_plot_svg("b", {"c1", "c2"}, {{"g", {1, 2}}}));
  CHECK(bars_tsv({"c1", "c2"}, {{"g", {1, 2}}}).find("c2") != std::string::npos);
}

TEST_CASE("captions file round-trips") {
  TempDir dir("eostb_caps_test");
  const Vocab v = micro_dataset().vocab();
  std::vector<std::vector<int>> caps;
  for (const auto& ex : micro_examples(5, 1200)) caps.push_back(ex.caption);
  caps.push_back({v.bos(), v.eos()});
  const auto path = (dir.path / "c.tsv").string();
  write_captions(path, caps, v);
  CHECK(read_captions(path) == caps);
}

TEST_CASE("monitor batch picks the requested detail level") {
  const DatasetConfig d = micro_dataset();
  const auto data = build_dataset(d, Split::train);
  const auto m = monitor_batch(data, DetailLevel::over_detailed, 4);
  CHECK(m.size() <= 4);
  for (const auto& ex : m) CHECK(ex.detail_level == DetailLevel::over_detailed);
}

TEST_CASE("training runs are reproducible and stamped with provenance") {
  TempDir a("eostb_run_a"), b("eostb_run_b");
  run(tiny(RunKind::train_mle, a.path), std::cout);
  run(tiny(RunKind::train_mle, b.path), std::cout);
  const auto ca = read_checkpoint((a.path / "seed-2" / "model.ckpt").string());
  const auto cb = read_checkpoint((b.path / "seed-2" / "model.ckpt").string());
  CHECK(ca.params.values == cb.params.values);
  const auto prov = ca.meta["provenance"];
  CHECK(prov["seed"] == 2);
  CHECK(prov["config_hash"] == config_hash(tiny(RunKind::train_mle, a.path)));
  CHECK(prov["code_version"] == code_version());
  for (const char* f : {"training_log.tsv", "eos_track.tsv", "loss.svg", "loss.tsv", "provenance.json", "config.json"})
    CHECK_MESSAGE(fs::exists(a.path / "seed-2" / f), f);
}

TEST_CASE("tendency plot carries one series per manipulation") {
  TempDir dir("eostb_tendency_run");
  RunConfig c = tiny(RunKind::probe_tendency, dir.path);
  Checkpoint ck;
  ck.params = init_params(c.model, 1);
  const auto ckpt = (dir.path / "m.ckpt").string();
  write_checkpoint(ckpt, ck);
  c.init_checkpoint = ckpt;
  run(c, std::cout);
  const auto tsv = slurp(dir.path / "seed-2" / "tendency.tsv");
  const auto svg = slurp(dir.path / "seed-2" / "tendency.svg");
  for (auto m : c.probe.modes) {
    CHECK(tsv.find(std::string(to_string(m))) != std::string::npos);
    CHECK(svg.find(std::string(to_string(m))) != std::string::npos);
  }
}

TEST_CASE("missing inputs fail before any work") {
  TempDir dir("eostb_missing_input");
  RunConfig c = tiny(RunKind::eval, dir.path);
  c.init_checkpoint = (dir.path / "absent.ckpt").string();
  CHECK_THROWS_AS(run(c, std::cout), IoError);
  CHECK(!fs::exists(dir.path / "seed-2" / "captions.tsv"));
}

#ifdef EOSTB_CLI_PATH
TEST_CASE("CLI reports a machine-readable error class") {
  TempDir dir("eostb_cli_err");
  const auto err = (dir.path / "err.txt").string();
  const std::string cmd = std::string(EOSTB_CLI_PATH) + " train --set /training/nope=1 --dry-run 2> " + err;
  const int rc = std::system(cmd.c_str());
  CHECK(rc != 0);
  CHECK(slurp(err).rfind("error_class=config_error", 0) == 0);
  const std::string usage = std::string(EOSTB_CLI_PATH) + " train --bogus 2> " + err;
  CHECK(std::system(usage.c_str()) != 0);
  CHECK(slurp(err).find("error_class=usage_error") != std::string::npos);
}
#endif
