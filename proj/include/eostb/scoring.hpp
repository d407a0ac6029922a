#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eostb/scenegen.hpp"
#include "eostb/tinylm.hpp"

// Per-example EOS-supervision scores under a reference model, and dataset
// filtering driven by them.
//
//   s_pos   = -sum_{i: y_i = EOS}  log p_EOS(i)
//   s_neg   = -sum_{i: y_i != EOS} log(1 - p_EOS(i))
//   s_final = s_neg - s_pos
//
// High s_final marks an example that suppresses the EOS tendency more than
// it teaches it.
namespace eostb {

// Log-probabilities are floored at log(kScoreEps), so a certain miss costs
// a finite amount and a certain hit costs exactly 0.
inline constexpr double kScoreEps = 1e-12;

struct ScoreTriple {
  double s_pos = 0.0;
  double s_neg = 0.0;
  double s_final = 0.0;
};

ScoreTriple make_score(double s_pos, double s_neg);

ScoreTriple score_from_eos_probs(std::span<const double> p_eos, std::span<const int> labels, int eos);
ScoreTriple score_from_logits(const Matrix& logits, std::span<const int> labels, int eos);

ScoreTriple score_example(const Params& ref, const Example& ex, int eos);

// Throws the per-example error re-tagged with the example index.
std::vector<ScoreTriple> score_dataset(const Params& ref, const std::vector<Example>& dataset, int eos);

enum class FilterMode { top, random, reversed };
// Which score ranks the data. `final` is the default; the single-metric
// rankings exist for comparison runs.
enum class FilterMetric { final, pos_only, neg_only };

std::string_view to_string(FilterMode m);
FilterMode filter_mode_from_string(std::string_view s);
std::string_view to_string(FilterMetric m);
FilterMetric filter_metric_from_string(std::string_view s);

struct FilterPlan {
  FilterMode mode = FilterMode::top;
  double ratio = 0.2;
  std::uint64_t seed = 0;
  FilterMetric metric = FilterMetric::final;

  void validate() const;
};

// Harmfulness key used for ranking under a metric.
double harm_key(const ScoreTriple& s, FilterMetric metric);

// Indices removed by the plan (ascending), ceil(ratio * N) of them.
std::vector<std::size_t> removal_set(std::span<const ScoreTriple> scores, const FilterPlan& plan);

struct FilterOutcome {
  std::vector<Example> kept;
  std::vector<std::size_t> removed;
};

FilterOutcome filter_dataset(const std::vector<Example>& dataset, std::span<const ScoreTriple> scores,
                             const FilterPlan& plan);

// Tab-separated: index, s_pos, s_neg, s_final (with a header row).
void write_score_report(std::ostream& os, std::span<const ScoreTriple> scores);
void write_score_report(const std::string& path, std::span<const ScoreTriple> scores);
std::vector<ScoreTriple> read_score_report(const std::string& path);

// JSON sidecar listing the removed indices with the plan.
std::string filter_manifest_json(const FilterPlan& plan, std::span<const std::size_t> removed, std::size_t n_total);

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<int> counts;
  double bin_width() const { return counts.empty() ? 0.0 : (hi - lo) / static_cast<double>(counts.size()); }
};

Histogram histogram(std::span<const double> values, int bins);

struct ScoreSummary {
  double mean_pos = 0, mean_neg = 0, mean_final = 0, sd_final = 0;
  Histogram pos, neg, fin;
};

ScoreSummary summarize_scores(std::span<const ScoreTriple> scores, int bins = 30);

}  // namespace eostb
