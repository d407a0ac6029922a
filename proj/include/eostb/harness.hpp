#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "eostb/config.hpp"
#include "eostb/hallmetrics.hpp"
#include "eostb/train.hpp"

// Experiment orchestration: one RunConfig, executed once per seed, writes
// checkpoints, logs, reports and plots under <output_dir>/seed-<s>/. Every
// artifact carries the config hash, seed and code version.
namespace eostb {

struct Provenance {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string code_version;
  std::string kind;

  nlohmann::ordered_json to_json() const;
};

Provenance provenance_for(const RunConfig& cfg, std::uint64_t seed);

std::string seed_dir(const RunConfig& cfg, std::uint64_t seed);

// Train/test data per the config: read from the given JSONL path (with
// `{seed}` expanded) or built from the dataset section.
std::vector<Example> load_split(const RunConfig& cfg, Split split, std::uint64_t seed);

// The first `n` examples with the given detail level; all of `data` when none
// match.
std::vector<Example> monitor_batch(const std::vector<Example>& data, DetailLevel level, int n);

// Greedy captions for every example, in parallel.
std::vector<std::vector<int>> generate_captions(const Params& params, const std::vector<Example>& data,
                                                const Vocab& vocab, const DecodeConfig& dcfg);

std::vector<Scene> scenes_of(const std::vector<Example>& data);

// `index \t token ids \t decoded text` per caption.
void write_captions(const std::string& path, const std::vector<std::vector<int>>& caps, const Vocab& vocab);
std::vector<std::vector<int>> read_captions(const std::string& path);

std::string training_log_tsv(const TrainingLog& log);
std::string eos_track_tsv(const TrainingLog& log);

// Executes the run for every seed. Progress lines go to `log`.
void run(const RunConfig& cfg, std::ostream& log);

}  // namespace eostb
