#include "eostb/train.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "eostb/errors.hpp"
#include "eostb/rng.hpp"

namespace eostb {

void AdamConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("adam: lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam: betas outside [0,1)");
  if (!(eps > 0.0)) throw ConfigError("adam: eps must be > 0");
}

void TrainConfig::validate() const {
  objective.validate();
  adam.validate();
  if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (log_interval < 1) throw ConfigError("train: log_interval must be >= 1");
  if (!(warmup_frac >= 0.0 && warmup_frac < 1.0)) throw ConfigError("train: warmup_frac outside [0,1)");
}

std::string_view to_string(LrSchedule s) { return s == LrSchedule::constant ? "constant" : "cosine"; }

LrSchedule lr_schedule_from_string(std::string_view s) {
  if (s == "constant") return LrSchedule::constant;
  if (s == "cosine") return LrSchedule::cosine;
  throw ConfigError("unknown lr schedule '" + std::string(s) + "'");
}

double scheduled_lr(double base, LrSchedule sched, double warmup_frac, std::int64_t step, std::int64_t total) {
  const auto warm = static_cast<std::int64_t>(std::ceil(warmup_frac * static_cast<double>(total)));
  if (step < warm) return base * static_cast<double>(step + 1) / static_cast<double>(warm);
  if (sched == LrSchedule::constant || total <= warm) return base;
  const double prog = static_cast<double>(step - warm) / static_cast<double>(total - warm);
  return base * 0.5 * (1.0 + std::cos(M_PI * prog));
}

double adam_step(Params& params, const Grads& grads, AdamState& st, const AdamConfig& cfg) {
  return adam_step(params, grads, st, cfg, cfg.lr);
}

double adam_step(Params& params, const Grads& grads, AdamState& st, const AdamConfig& cfg, double lr) {
  const std::size_t n = params.values.size();
  if (grads.values.size() != n) throw AlignmentError("adam: gradient size mismatch");
  if (st.m.empty()) {
    st.m.assign(n, 0.0);
    st.v.assign(n, 0.0);
  }
  double sq = 0.0;
  for (double g : grads.values) sq += g * g;
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericError("adam: non-finite gradient norm");
  const double scale = (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) ? cfg.clip_norm / norm : 1.0;

  ++st.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads.values[i] * scale;
    st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g;
    st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * g * g;
    params.values[i] -= lr * (st.m[i] / c1) / (std::sqrt(st.v[i] / c2) + cfg.eps);
  }
  return norm;
}

EosTrack track_eos(const Params& params, const std::vector<Example>& batch, const Vocab& vocab) {
  const int n = static_cast<int>(batch.size());
  std::vector<double> ll(n, 0.0), pe(n, 0.0);
  std::vector<int> n_ll(n, 0), n_pe(n, 0);
#pragma omp parallel for schedule(dynamic, 4)
  for (int e = 0; e < n; ++e) {
    const Example& ex = batch[e];
    const auto inputs = ex.inputs();
    const ForwardTrace tr = forward(params, ex.features.tokens, inputs);
    for (int i = 0; i < tr.text_len; ++i) {
      const bool eos_label = ex.labels[i] == vocab.eos();
      const bool after_period = inputs[i] == vocab.period();
      if (!eos_label && !after_period) continue;
      const double lp = log_softmax(tr.logits.row(i))[vocab.eos()];
      if (eos_label) {
        ll[e] += lp;
        ++n_ll[e];
      }
      if (after_period) {
        pe[e] += std::exp(lp);
        ++n_pe[e];
      }
    }
  }
  EosTrack t;
  const double a = std::accumulate(ll.begin(), ll.end(), 0.0), b = std::accumulate(pe.begin(), pe.end(), 0.0);
  const int na = std::accumulate(n_ll.begin(), n_ll.end(), 0), nb = std::accumulate(n_pe.begin(), n_pe.end(), 0);
  t.eos_loglik = na ? a / na : 0.0;
  t.p_eos_sentence_end = nb ? b / nb : 0.0;
  return t;
}

double batch_loss_and_grads(const Params& params, const std::vector<const Example*>& batch,
                            const ObjectiveSpec& spec, int eos, std::size_t first_ordinal, Grads& grads) {
  const int n = static_cast<int>(batch.size());
  std::vector<LossAndGrads> parts(n);
  std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (int i = 0; i < n; ++i) {
    try {
      const Example& ex = *batch[i];
      const auto inputs = ex.inputs();
      parts[i] = loss_and_grads(params, ex.features.tokens, inputs, ex.labels,
                                make_loss(spec, eos, first_ordinal + static_cast<std::size_t>(i)));
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (int i = 0; i < n; ++i)
    if (!errors[i].empty()) throw NumericError("batch example " + std::to_string(i) + ": " + errors[i]);

  grads = params.zeros_like();
  double loss = 0.0;
  const double w = 1.0 / std::max(n, 1);
  for (int i = 0; i < n; ++i) {
    loss += parts[i].loss * w;
    for (std::size_t k = 0; k < grads.values.size(); ++k) grads.values[k] += parts[i].grads.values[k] * w;
  }
  return loss;
}

TrainResult train(Params init, const std::vector<Example>& data, const TrainConfig& cfg,
                  const std::vector<Example>& monitor, const Vocab& vocab, const AdamState& resume) {
  cfg.validate();
  if (data.empty()) throw ConfigError("train: empty dataset");
  TrainResult r;
  r.params = std::move(init);
  r.optimizer = resume;
  const int eos = vocab.eos();
  const std::size_t n = data.size();

  std::int64_t step = 0;
  auto track = [&] {
    if (!monitor.empty()) r.log.tracks.push_back({step, track_eos(r.params, monitor, vocab)});
  };
  track();

  std::vector<std::size_t> order(n);
  std::size_t ordinal = 0;
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  const auto total = static_cast<std::int64_t>(cfg.epochs) * static_cast<std::int64_t>((n + bs - 1) / bs);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch) + 1));
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);

    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const Example*> batch;
      for (std::size_t k = start; k < end; ++k) batch.push_back(&data[order[k]]);
      Grads g;
      const double loss = batch_loss_and_grads(r.params, batch, cfg.objective, eos, ordinal, g);
      ordinal += batch.size();
      if (!std::isfinite(loss))
        throw NumericError("train: non-finite loss at step " + std::to_string(step) + ", epoch " +
                           std::to_string(epoch));
      adam_step(r.params, g, r.optimizer, cfg.adam,
                scheduled_lr(cfg.adam.lr, cfg.schedule, cfg.warmup_frac, step, total));
      if (!r.params.all_finite()) throw NumericError("train: parameters diverged at step " + std::to_string(step));
      ++step;
      r.log.steps.push_back({step, loss});
      if (step % cfg.log_interval == 0) track();
    }
  }
  if (r.log.tracks.empty() || r.log.tracks.back().step != step) track();
  return r;
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return 0.0;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0 ? sxy / sxx : 0.0;
}

}  // namespace eostb
