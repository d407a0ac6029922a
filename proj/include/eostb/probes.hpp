#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eostb/rng.hpp"
#include "eostb/scenegen.hpp"
#include "eostb/tinylm.hpp"

// Read-only instruments on a trained model: attention-saliency information
// flow toward a prediction target, and the EOS tendency under controlled
// edits of the visual or textual context.
namespace eostb {

// Half-open [begin, end) range in context coordinates.
struct Range {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
  bool contains(int i) const { return i >= begin && i < end; }
};

struct Segmentation {
  Range scene, prev, current;
};

struct SaliencyReport {
  std::vector<Matrix> layers;  // I_l, context x context
  Segmentation seg;
  int target_pos = 0;    // caption index being predicted
  int target_token = 0;
  int target_row = 0;    // context row that predicts it
  std::vector<int> context_tokens;  // text part of the context
};

// Text segmentation for a context of `inputs`: the current sentence starts
// after the last PERIOD strictly before the final input token.
Segmentation segment_context(int scene_rows, std::span<const int> inputs, const Vocab& vocab);

// Feeds caption[0 .. target_pos-1], takes the cross-entropy of
// caption[target_pos] at the last row, and returns mean_h |A (*) dL/dA|.
SaliencyReport saliency(const Params& params, const Example& ex, int target_pos, const Vocab& vocab);

struct FlowTriple {
  double scene = 0.0, prev = 0.0, current = 0.0;
};

std::vector<FlowTriple> flow_proportions(const SaliencyReport& r);

struct AggregationTriple {
  double others_to_periods = 0.0, periods_to_target = 0.0, among_others = 0.0;
};

std::vector<AggregationTriple> aggregation_pattern(const SaliencyReport& r, const Vocab& vocab);

// Layers forming the top quartile (at least one).
std::vector<int> top_quartile_layers(int n_layers);

// Target positions used for the non-EOS comparison: the last 10 tokens of the
// last sentence (its article through its PERIOD).
std::vector<int> non_eos_candidates(const std::vector<int>& caption, const Vocab& vocab);

enum class ManipulationMode { none, image_minus, image_plus, image_replace, text_minus };

std::string_view to_string(ManipulationMode m);
ManipulationMode manipulation_from_string(std::string_view s);

struct NoiseSchedule {
  double beta_start = 1e-4;
  double beta_end = 0.02;
  int length = 1000;
  double beta(int step) const;  // step in [0, length)
};

struct Manipulation {
  ManipulationMode mode = ManipulationMode::none;
  int noise_steps = 500;
  // Unset: ceil(mask_fraction * text length).
  std::optional<int> mask_prefix_len;
  double mask_fraction = 0.25;
  std::uint64_t aux_seed = 7;
  NoiseSchedule schedule;

  void validate() const;
};

struct ManipulatedContext {
  Matrix features;
  int hidden_prefix = 0;

  ForwardOptions options(int text_len) const;
};

// Deterministic in (example, manipulation); the random scene for
// image_plus / image_replace is drawn from `dcfg`.
ManipulatedContext manipulate(const Example& ex, const Manipulation& m, const DatasetConfig& dcfg);

// Adds T steps of x <- sqrt(1 - b_t) x + sqrt(b_t) sigma eps.
Matrix noise_features(const Matrix& features, int steps, const NoiseSchedule& sched, double sigma, Rng& rng);

struct TendencyCurve {
  static constexpr int kBuckets = 10;
  std::vector<double> center;  // bucket centre, per bucket
  std::vector<double> mean;    // mean p_EOS, NaN when empty
  std::vector<int> count;
  double fit_a = 0.0, fit_b = 0.0, fit_rms = 0.0;
};

// Bucket of relative position k / n (1 <= k <= n), i.e. ceil(10 k / n) - 1.
int tendency_bucket(int k, int n);

// Least-squares fit of log(y) = log(a) + b x over the finite points.
void fit_exponential(std::span<const double> x, std::span<const double> y, double& a, double& b, double& rms);

TendencyCurve tendency_curve(const Params& params, const std::vector<Example>& dataset, const Manipulation& m,
                             const DatasetConfig& dcfg);

// Aggregates over a set of probe examples.
struct FlowSummary {
  std::vector<FlowTriple> eos_target;      // per layer, mean over examples
  std::vector<FlowTriple> non_eos_target;
  int n_examples = 0;
  double top_quartile_prev_eos = 0.0;
  double top_quartile_prev_non_eos = 0.0;
};

struct AggregationSummary {
  std::vector<AggregationTriple> layers;
  int n_examples = 0;
};

// Probe examples: the first `limit` examples with at least two sentences.
std::vector<const Example*> probe_examples(const std::vector<Example>& dataset, int limit, const Vocab& vocab);

FlowSummary flow_probe(const Params& params, const std::vector<Example>& dataset, int limit, std::uint64_t seed,
                       const Vocab& vocab);
AggregationSummary aggregation_probe(const Params& params, const std::vector<Example>& dataset, int limit,
                                     const Vocab& vocab);

}  // namespace eostb
