// eostb: command-line front end for the experiment harness.
//
//   eostb dataset build --config data.json
//   eostb train --objective selective --config run.json --seeds 1,2,3
//   eostb further-train --init runs/mle/seed-{seed}/model.ckpt ...
//   eostb score | filter | eval | report ...
//   eostb probe saliency|tendency|aggregation ...
//   eostb defaults [kind]        prints the fully-defaulted config
//
// Any config field can be overridden with --set /json/pointer=value, e.g.
// --set /training/lr=3e-5 --set /dataset/mixture/full=0.5.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "eostb/config.hpp"
#include "eostb/errors.hpp"
#include "eostb/harness.hpp"

using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::string output;
  std::vector<std::uint64_t> seeds;
  std::string init;
  std::string train_data;
  std::string test_data;
  std::vector<std::string> sets;
  bool dry_run = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "JSON config file (comments allowed)");
  cmd->add_option("-o,--output", c.output, "output directory");
  cmd->add_option("--seeds", c.seeds, "seed list, e.g. 1,2,3")->delimiter(',');
  cmd->add_option("--init", c.init, "initial checkpoint; {seed} expands");
  cmd->add_option("--train-data", c.train_data, "training JSONL; {seed} expands");
  cmd->add_option("--test-data", c.test_data, "test JSONL; {seed} expands");
  cmd->add_option("--set", c.sets, "override: /json/pointer=value (value parsed as JSON, else string)");
  cmd->add_flag("--dry-run", c.dry_run, "print the resolved config and exit");
}

json read_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw eostb::IoError("cannot open config '" + path + "'");
  try {
    return json::parse(f, nullptr, true, true);
  } catch (const json::exception& e) {
    throw eostb::ConfigError("config '" + path + "': " + e.what());
  }
}

eostb::RunConfig resolve(const Common& c, eostb::RunKind kind) {
  json j = c.config.empty() ? json::object() : read_json(c.config);
  j["kind"] = std::string(eostb::to_string(kind));
  if (!c.output.empty()) j["output_dir"] = c.output;
  if (!c.seeds.empty()) j["seeds"] = c.seeds;
  if (!c.init.empty()) j["init_checkpoint"] = c.init;
  if (!c.train_data.empty()) j["train_data"] = c.train_data;
  if (!c.test_data.empty()) j["test_data"] = c.test_data;
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || s.empty() || s[0] != '/')
      throw eostb::ConfigError("--set expects /json/pointer=value, got '" + s + "'");
    const std::string key = s.substr(0, eq), raw = s.substr(eq + 1);
    json v;
    try {
      v = json::parse(raw);
    } catch (const json::exception&) {
      v = raw;
    }
    try {
      j[json::json_pointer(key)] = v;
    } catch (const json::exception& e) {
      throw eostb::ConfigError("--set " + key + ": " + e.what());
    }
  }
  return eostb::run_config_from_json(j);
}

int fail(const std::string& cls, const std::string& what) {
  std::cerr << "error_class=" << cls << "\n" << what << "\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"eostb: EOS-decision experiments on a synthetic captioning testbed"};
  app.require_subcommand(1);

  Common common;
  std::string objective = "mle";
  std::string defaults_kind = "train_mle";
  eostb::RunKind kind = eostb::RunKind::train_mle;

  auto* dataset = app.add_subcommand("dataset", "dataset tools");
  dataset->require_subcommand(1);
  auto* build = dataset->add_subcommand("build", "build train/test JSONL");
  add_common(build, common);
  build->callback([&] { kind = eostb::RunKind::dataset_build; });

  auto* train = app.add_subcommand("train", "train from an initialisation");
  add_common(train, common);
  train->add_option("--objective", objective, "mle | selective | combined")
      ->check(CLI::IsMember({"mle", "selective", "combined"}));
  train->callback([&] {
    kind = objective == "mle"         ? eostb::RunKind::train_mle
           : objective == "selective" ? eostb::RunKind::train_selective
                                      : eostb::RunKind::train_combined;
  });

  auto* further = app.add_subcommand("further-train", "continue training a checkpoint");
  add_common(further, common);
  further->callback([&] { kind = eostb::RunKind::further_train; });

  auto* score = app.add_subcommand("score", "score training examples with a reference model");
  add_common(score, common);
  score->callback([&] { kind = eostb::RunKind::score; });

  auto* filter = app.add_subcommand("filter", "drop examples by score");
  add_common(filter, common);
  filter->callback([&] { kind = eostb::RunKind::filter; });

  auto* eval = app.add_subcommand("eval", "generate and evaluate captions");
  add_common(eval, common);
  eval->callback([&] { kind = eostb::RunKind::eval; });

  auto* report = app.add_subcommand("report", "summarise eval runs");
  add_common(report, common);
  report->callback([&] { kind = eostb::RunKind::report; });

  auto* probe = app.add_subcommand("probe", "attention and EOS-tendency probes");
  probe->require_subcommand(1);
  auto* sal = probe->add_subcommand("saliency", "information flow to EOS and non-EOS targets");
  add_common(sal, common);
  sal->callback([&] { kind = eostb::RunKind::probe_saliency; });
  auto* ten = probe->add_subcommand("tendency", "p(EOS) vs relative position under context manipulations");
  add_common(ten, common);
  ten->callback([&] { kind = eostb::RunKind::probe_tendency; });
  auto* agg = probe->add_subcommand("aggregation", "per-layer aggregation pattern");
  add_common(agg, common);
  agg->callback([&] { kind = eostb::RunKind::probe_aggregation; });

  auto* defaults = app.add_subcommand("defaults", "print the default config for a run kind");
  defaults->add_option("kind", defaults_kind, "run kind");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return fail("usage_error", e.what());
  }

  try {
    if (defaults->parsed()) {
      eostb::RunConfig c;
      c.kind = eostb::run_kind_from_string(defaults_kind);
      std::cout << eostb::to_json(c).dump(2) << "\n";
      return 0;
    }
    const eostb::RunConfig cfg = resolve(common, kind);
    if (common.dry_run) {
      cfg.validate();
      std::cout << eostb::to_json(cfg).dump(2) << "\n";
      return 0;
    }
    eostb::run(cfg, std::cout);
  } catch (const eostb::Error& e) {
    return fail(e.error_class(), e.what());
  } catch (const std::exception& e) {
    return fail("internal_error", e.what());
  }
  return 0;
}
