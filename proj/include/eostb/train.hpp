#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "eostb/objectives.hpp"
#include "eostb/scenegen.hpp"
#include "eostb/tinylm.hpp"

// Mini-batch training with Adam, plus the EOS-tendency tracker that the
// training loop samples at a fixed interval.
namespace eostb {

struct AdamConfig {
  double lr = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // global gradient-norm clip; <= 0 disables

  void validate() const;
};

enum class LrSchedule { constant, cosine };

std::string_view to_string(LrSchedule s);
LrSchedule lr_schedule_from_string(std::string_view s);

// Linear warmup over the first warmup_frac of the steps, then constant or
// cosine decay to zero.
double scheduled_lr(double base, LrSchedule sched, double warmup_frac, std::int64_t step, std::int64_t total);

struct AdamState {
  std::vector<double> m, v;
  std::int64_t step = 0;

  bool empty() const { return m.empty(); }
};

// Returns the pre-clip gradient norm.
double adam_step(Params& params, const Grads& grads, AdamState& state, const AdamConfig& cfg);
// Same, with the learning rate given explicitly.
double adam_step(Params& params, const Grads& grads, AdamState& state, const AdamConfig& cfg, double lr);

struct TrainConfig {
  ObjectiveSpec objective;
  AdamConfig adam;
  int epochs = 3;
  int batch_size = 16;
  std::uint64_t seed = 1;
  int log_interval = 50;
  LrSchedule schedule = LrSchedule::cosine;
  double warmup_frac = 0.03;

  void validate() const;
};

struct EosTrack {
  double eos_loglik = 0.0;      // mean log p_EOS at EOS-labelled positions
  double p_eos_sentence_end = 0.0;  // mean p_EOS right after every PERIOD
};

EosTrack track_eos(const Params& params, const std::vector<Example>& batch, const Vocab& vocab);

struct TrainingLog {
  struct Step {
    std::int64_t step;
    double loss;
  };
  struct Track {
    std::int64_t step;
    EosTrack value;
  };
  std::vector<Step> steps;
  std::vector<Track> tracks;
};

struct TrainResult {
  Params params;
  AdamState optimizer;
  TrainingLog log;
};

// Mean loss and summed gradients of one batch. Per-example gradients are
// computed in parallel and reduced in index order, so the result does not
// depend on the thread count.
double batch_loss_and_grads(const Params& params, const std::vector<const Example*>& batch,
                            const ObjectiveSpec& spec, int eos, std::size_t first_ordinal, Grads& grads);

// Trains `init` on `data`. `monitor` is the fixed batch handed to track_eos
// at step 0, every log_interval steps and after the last step. Pass a
// non-empty `resume` to continue from saved optimizer moments.
TrainResult train(Params init, const std::vector<Example>& data, const TrainConfig& cfg,
                  const std::vector<Example>& monitor, const Vocab& vocab, const AdamState& resume = {});

// Least-squares slope of y against x.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace eostb
