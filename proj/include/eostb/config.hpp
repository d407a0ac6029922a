#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "eostb/objectives.hpp"
#include "eostb/probes.hpp"
#include "eostb/scenegen.hpp"
#include "eostb/scoring.hpp"
#include "eostb/tinylm.hpp"
#include "eostb/train.hpp"

// Run configuration for the experiment harness. Every field has a default;
// a config file only lists what it changes. Unknown keys are rejected so a
// typo cannot silently fall back to a default.
namespace eostb {

enum class RunKind {
  dataset_build,
  train_mle,
  train_selective,
  train_combined,
  further_train,
  score,
  filter,
  probe_saliency,
  probe_aggregation,
  probe_tendency,
  eval,
  report,
};

std::string_view to_string(RunKind k);
RunKind run_kind_from_string(std::string_view s);

struct TrainingSection {
  TrainConfig train;      // objective is filled in from the run kind / objective section
  int monitor_size = 128;  // examples handed to track_eos
  DetailLevel monitor_detail = DetailLevel::over_detailed;
  bool resume_optimizer = false;  // further_train: continue saved Adam moments
};

struct FilterSection {
  FilterPlan plan;
  std::string scores;  // score report produced by `score`
};

struct ProbeSection {
  int examples = 500;
  std::uint64_t target_seed = 11;  // non-EOS target sampling
  Manipulation manipulation;       // noise steps, mask fraction, aux seed
  std::vector<ManipulationMode> modes{ManipulationMode::none, ManipulationMode::image_minus,
                                      ManipulationMode::image_plus, ManipulationMode::image_replace,
                                      ManipulationMode::text_minus};
};

struct EvalSection {
  std::vector<double> truncate_r;  // extra truncation-baseline rows, percent
  std::string base_captions;       // captions file of a base model for omission analysis
};

struct RunConfig {
  RunKind kind = RunKind::train_mle;
  std::string output_dir = "runs/default";
  std::vector<std::uint64_t> seeds{1};

  DatasetConfig dataset;
  std::string train_data;  // JSONL; empty: build from `dataset`
  std::string test_data;
  std::string init_checkpoint;  // `{seed}` expands to the seed

  ModelConfig model;
  ObjectiveSpec objective;
  TrainingSection training;
  DecodeConfig decode;
  FilterSection filter;
  ProbeSection probe;
  EvalSection eval;
  std::vector<std::string> report_runs;  // run directories summarised by `report`

  // Sizes the model to the dataset (vocabulary, feature width, slots).
  void sync_model_to_dataset();
  void validate() const;
};

nlohmann::ordered_json to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// Section converters, exposed for the checkpoint metadata and tests.
nlohmann::ordered_json to_json(const DatasetConfig& d);
DatasetConfig dataset_config_from_json(const nlohmann::json& j);

// FNV-1a over the canonical JSON of the config (seed list excluded, so every
// seed of a sweep shares one hash).
std::string config_hash(const RunConfig& c);

// Library version plus the source revision captured at configure time.
std::string code_version();

// Expands `{seed}` in a path template.
std::string expand_seed(const std::string& templ, std::uint64_t seed);

}  // namespace eostb
