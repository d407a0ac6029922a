#include "eostb/probes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "eostb/errors.hpp"

namespace eostb {

Segmentation segment_context(int scene_rows, std::span<const int> inputs, const Vocab& vocab) {
  const int n = static_cast<int>(inputs.size());
  int cur = 0;
  for (int i = 0; i + 1 < n; ++i)
    if (inputs[i] == vocab.period()) cur = i + 1;
  Segmentation s;
  s.scene = {0, scene_rows};
  s.prev = {scene_rows, scene_rows + cur};
  s.current = {scene_rows + cur, scene_rows + n};
  return s;
}

SaliencyReport saliency(const Params& params, const Example& ex, int target_pos, const Vocab& vocab) {
  const int n = static_cast<int>(ex.caption.size());
  if (target_pos < 1 || target_pos >= n)
    throw LengthError("saliency: target position " + std::to_string(target_pos) + " outside caption of length " +
                      std::to_string(n));
  const std::vector<int> inputs(ex.caption.begin(), ex.caption.begin() + target_pos);
  const ForwardTrace tr = forward(params, ex.features.tokens, inputs);

  const int last = tr.text_len - 1;
  Matrix d_logits(tr.logits.rows, tr.logits.cols);
  const auto lp = log_softmax(tr.logits.row(last));
  for (int v = 0; v < tr.logits.cols; ++v) d_logits(last, v) = std::exp(lp[v]);
  d_logits(last, ex.caption[target_pos]) -= 1.0;

  Grads scratch = params.zeros_like();
  std::vector<std::vector<Matrix>> d_attn;
  backward(params, tr, d_logits, scratch, &d_attn);

  SaliencyReport r;
  const int C = tr.context_len();
  const int H = params.config.n_heads;
  r.layers.assign(params.config.n_layers, Matrix(C, C));
  for (int l = 0; l < params.config.n_layers; ++l) {
    Matrix& I = r.layers[l];
    for (int h = 0; h < H; ++h) {
      const Matrix& A = tr.attention(l, h);
      const Matrix& D = d_attn[l][h];
      for (std::size_t t = 0; t < I.data.size(); ++t) I.data[t] += std::abs(A.data[t] * D.data[t]);
    }
    for (double& v : I.data) v /= H;
  }
  r.seg = segment_context(tr.scene_rows, inputs, vocab);
  r.target_pos = target_pos;
  r.target_token = ex.caption[target_pos];
  r.target_row = C - 1;
  r.context_tokens = inputs;
  return r;
}

std::vector<FlowTriple> flow_proportions(const SaliencyReport& r) {
  std::vector<FlowTriple> out;
  for (const Matrix& I : r.layers) {
    auto row = I.row(r.target_row);
    FlowTriple f;
    for (int j = 0; j < I.cols; ++j) {
      if (r.seg.scene.contains(j))
        f.scene += row[j];
      else if (r.seg.prev.contains(j))
        f.prev += row[j];
      else
        f.current += row[j];
    }
    const double total = f.scene + f.prev + f.current;
    if (total > 0.0) {
      f.scene /= total;
      f.prev /= total;
      f.current /= total;
    }
    out.push_back(f);
  }
  return out;
}

std::vector<AggregationTriple> aggregation_pattern(const SaliencyReport& r, const Vocab& vocab) {
  const int S = r.seg.scene.size();
  const int T = static_cast<int>(r.context_tokens.size());
  // Per text position: 0 other, 1 period, 2 target row, 3 excluded (BOS).
  std::vector<int> kind(T, 0);
  for (int t = 0; t < T; ++t) {
    const int tok = r.context_tokens[t];
    if (S + t == r.target_row)
      kind[t] = 2;
    else if (tok == vocab.period())
      kind[t] = 1;
    else if (tok == vocab.bos() || tok == vocab.eos())
      kind[t] = 3;
  }
  std::vector<AggregationTriple> out;
  for (const Matrix& I : r.layers) {
    double op = 0.0, pt = 0.0, oo = 0.0;
    int n_op = 0, n_pt = 0, n_oo = 0;
    for (int i = 0; i < T; ++i) {
      for (int j = 0; j < i; ++j) {
        const double v = I(S + i, S + j);
        if (kind[i] == 1 && kind[j] == 0) {
          op += v;
          ++n_op;
        } else if (kind[i] == 2 && kind[j] == 1) {
          pt += v;
          ++n_pt;
        } else if (kind[i] == 0 && kind[j] == 0) {
          oo += v;
          ++n_oo;
        }
      }
    }
    AggregationTriple a;
    a.others_to_periods = n_op ? op / n_op : 0.0;
    a.periods_to_target = n_pt ? pt / n_pt : 0.0;
    a.among_others = n_oo ? oo / n_oo : 0.0;
    const double total = a.others_to_periods + a.periods_to_target + a.among_others;
    if (total > 0.0) {
      a.others_to_periods /= total;
      a.periods_to_target /= total;
      a.among_others /= total;
    }
    out.push_back(a);
  }
  return out;
}

std::vector<int> top_quartile_layers(int n_layers) {
  const int k = std::max(1, (n_layers + 3) / 4);
  std::vector<int> out;
  for (int l = n_layers - k; l < n_layers; ++l) out.push_back(l);
  return out;
}

std::vector<int> non_eos_candidates(const std::vector<int>& caption, const Vocab& vocab) {
  // Last sentence: after the second-to-last PERIOD, up to and including the
  // final PERIOD (EOS excluded).
  int end = static_cast<int>(caption.size());
  if (end > 0 && caption[end - 1] == vocab.eos()) --end;
  int begin = 1;
  for (int i = 0; i + 1 < end; ++i)
    if (caption[i] == vocab.period()) begin = i + 1;
  begin = std::max(begin, end - 10);
  std::vector<int> out;
  for (int i = begin; i < end; ++i) out.push_back(i);
  return out;
}

std::string_view to_string(ManipulationMode m) {
  switch (m) {
    case ManipulationMode::none: return "none";
    case ManipulationMode::image_minus: return "image_minus";
    case ManipulationMode::image_plus: return "image_plus";
    case ManipulationMode::image_replace: return "image_replace";
    case ManipulationMode::text_minus: return "text_minus";
  }
  return "?";
}

ManipulationMode manipulation_from_string(std::string_view s) {
  for (auto m : {ManipulationMode::none, ManipulationMode::image_minus, ManipulationMode::image_plus,
                 ManipulationMode::image_replace, ManipulationMode::text_minus})
    if (s == to_string(m)) return m;
  throw ConfigError("unknown manipulation '" + std::string(s) + "'");
}

double NoiseSchedule::beta(int step) const {
  if (length <= 1) return beta_start;
  return beta_start + (beta_end - beta_start) * static_cast<double>(step) / static_cast<double>(length - 1);
}

void Manipulation::validate() const {
  if (noise_steps < 0) throw ConfigError("manipulation: noise_steps must be >= 0");
  if (mask_prefix_len && *mask_prefix_len < 0) throw ConfigError("manipulation: mask_prefix_len must be >= 0");
  if (!(mask_fraction >= 0.0 && mask_fraction <= 1.0)) throw ConfigError("manipulation: mask_fraction outside [0,1]");
  if (mode == ManipulationMode::image_minus && noise_steps > schedule.length)
    throw ConfigError("manipulation: noise_steps exceeds the schedule length");
  if (mode != ManipulationMode::text_minus && mask_prefix_len && *mask_prefix_len > 0)
    throw ConfigError("manipulation: mask_prefix_len only applies to text_minus");
  if (!(schedule.beta_start > 0.0 && schedule.beta_end < 1.0 && schedule.beta_start <= schedule.beta_end))
    throw ConfigError("manipulation: invalid noise schedule");
}

ForwardOptions ManipulatedContext::options(int text_len) const {
  ForwardOptions o;
  if (hidden_prefix > 0) {
    o.hidden_text.assign(text_len, false);
    for (int i = 0; i < std::min(hidden_prefix, text_len); ++i) o.hidden_text[i] = true;
  }
  return o;
}

Matrix noise_features(const Matrix& features, int steps, const NoiseSchedule& sched, double sigma, Rng& rng) {
  Matrix x = features;
  for (int t = 0; t < steps; ++t) {
    const double b = sched.beta(t);
    const double keep = std::sqrt(1.0 - b), add = std::sqrt(b) * sigma;
    for (double& v : x.data) v = keep * v + add * rng.normal();
  }
  return x;
}

namespace {

Matrix random_scene_features(const Example& ex, const Manipulation& m, const DatasetConfig& dcfg) {
  // Seeds far from both dataset seed ranges.
  const std::uint64_t seed = mix_seed(mix_seed(m.aux_seed, ex.scene.seed), 0xabcdefULL);
  const Scene other = gen_scene(seed, dcfg.scene);
  return render_features(other, dcfg.perception).tokens;
}

}  // namespace

ManipulatedContext manipulate(const Example& ex, const Manipulation& m, const DatasetConfig& dcfg) {
  m.validate();
  ManipulatedContext c;
  c.features = ex.features.tokens;
  switch (m.mode) {
    case ManipulationMode::none: break;
    case ManipulationMode::image_minus: {
      Rng rng(mix_seed(m.aux_seed, ex.scene.seed));
      c.features = noise_features(c.features, m.noise_steps, m.schedule, dcfg.perception.degrade_scale, rng);
      break;
    }
    case ManipulationMode::image_plus: {
      const Matrix extra = random_scene_features(ex, m, dcfg);
      if (extra.cols != c.features.cols) throw ConfigError("manipulate: feature width mismatch");
      Matrix both(c.features.rows + extra.rows, c.features.cols);
      std::copy(c.features.data.begin(), c.features.data.end(), both.data.begin());
      std::copy(extra.data.begin(), extra.data.end(), both.data.begin() + static_cast<std::ptrdiff_t>(c.features.data.size()));
      c.features = std::move(both);
      break;
    }
    case ManipulationMode::image_replace: c.features = random_scene_features(ex, m, dcfg); break;
    case ManipulationMode::text_minus: {
      const int text_len = static_cast<int>(ex.caption.size()) - 1;
      c.hidden_prefix = m.mask_prefix_len ? *m.mask_prefix_len
                                          : static_cast<int>(std::ceil(m.mask_fraction * text_len - 1e-9));
      break;
    }
  }
  return c;
}

int tendency_bucket(int k, int n) {
  const int b = (TendencyCurve::kBuckets * k + n - 1) / n - 1;
  return std::clamp(b, 0, TendencyCurve::kBuckets - 1);
}

void fit_exponential(std::span<const double> x, std::span<const double> y, double& a, double& b, double& rms) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(y[i]) || y[i] <= 0.0) continue;
    const double ly = std::log(y[i]);
    sx += x[i];
    sy += ly;
    sxx += x[i] * x[i];
    sxy += x[i] * ly;
    ++n;
  }
  a = b = rms = 0.0;
  if (n == 0) return;
  const double den = n * sxx - sx * sx;
  b = (n >= 2 && den != 0.0) ? (n * sxy - sx * sy) / den : 0.0;
  a = std::exp((sy - b * sx) / n);
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(y[i]) || y[i] <= 0.0) continue;
    const double r = y[i] - a * std::exp(b * x[i]);
    ss += r * r;
  }
  rms = std::sqrt(ss / n);
}

TendencyCurve tendency_curve(const Params& params, const std::vector<Example>& dataset, const Manipulation& m,
                             const DatasetConfig& dcfg) {
  if (dataset.empty()) throw ConfigError("tendency_curve: empty dataset");
  m.validate();
  const Vocab vocab = dcfg.vocab();
  constexpr int B = TendencyCurve::kBuckets;
  const int n_ex = static_cast<int>(dataset.size());
  std::vector<std::vector<double>> sums(n_ex, std::vector<double>(B, 0.0));
  std::vector<std::vector<int>> counts(n_ex, std::vector<int>(B, 0));

#pragma omp parallel for schedule(dynamic, 4)
  for (int e = 0; e < n_ex; ++e) {
    const Example& ex = dataset[e];
    const auto inputs = ex.inputs();
    const int n = static_cast<int>(inputs.size());
    const ManipulatedContext ctx = manipulate(ex, m, dcfg);
    const ForwardTrace tr = forward(params, ctx.features, inputs, ctx.options(n));
    for (int k = 0; k < n; ++k) {
      if (inputs[k] != vocab.period()) continue;
      const auto lp = log_softmax(tr.logits.row(k));
      const int b = tendency_bucket(k + 1, n);
      sums[e][b] += std::exp(lp[vocab.eos()]);
      ++counts[e][b];
    }
  }

  TendencyCurve c;
  c.center.resize(B);
  c.mean.assign(B, std::numeric_limits<double>::quiet_NaN());
  c.count.assign(B, 0);
  std::vector<double> total(B, 0.0);
  for (int e = 0; e < n_ex; ++e)
    for (int b = 0; b < B; ++b) {
      total[b] += sums[e][b];
      c.count[b] += counts[e][b];
    }
  for (int b = 0; b < B; ++b) {
    c.center[b] = (b + 0.5) / B;
    if (c.count[b] > 0) c.mean[b] = total[b] / c.count[b];
  }
  fit_exponential(c.center, c.mean, c.fit_a, c.fit_b, c.fit_rms);
  return c;
}

std::vector<const Example*> probe_examples(const std::vector<Example>& dataset, int limit, const Vocab& vocab) {
  std::vector<const Example*> out;
  for (const auto& ex : dataset) {
    if (static_cast<int>(out.size()) >= limit) break;
    if (count_sentences(ex.caption, vocab) >= 2) out.push_back(&ex);
  }
  return out;
}

FlowSummary flow_probe(const Params& params, const std::vector<Example>& dataset, int limit, std::uint64_t seed,
                       const Vocab& vocab) {
  const auto exs = probe_examples(dataset, limit, vocab);
  const int n = static_cast<int>(exs.size());
  const int L = params.config.n_layers;
  std::vector<std::vector<FlowTriple>> eos_f(n), other_f(n);

#pragma omp parallel for schedule(dynamic, 4)
  for (int i = 0; i < n; ++i) {
    const Example& ex = *exs[i];
    eos_f[i] = flow_proportions(saliency(params, ex, static_cast<int>(ex.caption.size()) - 1, vocab));
    const auto cand = non_eos_candidates(ex.caption, vocab);
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    const int pos = cand[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cand.size()) - 1))];
    other_f[i] = flow_proportions(saliency(params, ex, pos, vocab));
  }

  FlowSummary s;
  s.n_examples = n;
  s.eos_target.assign(L, {});
  s.non_eos_target.assign(L, {});
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < L; ++l) {
      s.eos_target[l].scene += eos_f[i][l].scene / n;
      s.eos_target[l].prev += eos_f[i][l].prev / n;
      s.eos_target[l].current += eos_f[i][l].current / n;
      s.non_eos_target[l].scene += other_f[i][l].scene / n;
      s.non_eos_target[l].prev += other_f[i][l].prev / n;
      s.non_eos_target[l].current += other_f[i][l].current / n;
    }
  const auto top = top_quartile_layers(L);
  for (int l : top) {
    s.top_quartile_prev_eos += s.eos_target[l].prev / static_cast<double>(top.size());
    s.top_quartile_prev_non_eos += s.non_eos_target[l].prev / static_cast<double>(top.size());
  }
  return s;
}

AggregationSummary aggregation_probe(const Params& params, const std::vector<Example>& dataset, int limit,
                                     const Vocab& vocab) {
  const auto exs = probe_examples(dataset, limit, vocab);
  const int n = static_cast<int>(exs.size());
  const int L = params.config.n_layers;
  std::vector<std::vector<AggregationTriple>> per(n);

#pragma omp parallel for schedule(dynamic, 4)
  for (int i = 0; i < n; ++i) {
    const Example& ex = *exs[i];
    per[i] = aggregation_pattern(saliency(params, ex, static_cast<int>(ex.caption.size()) - 1, vocab), vocab);
  }

  AggregationSummary s;
  s.n_examples = n;
  s.layers.assign(L, {});
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < L; ++l) {
      s.layers[l].others_to_periods += per[i][l].others_to_periods / n;
      s.layers[l].periods_to_target += per[i][l].periods_to_target / n;
      s.layers[l].among_others += per[i][l].among_others / n;
    }
  return s;
}

}  // namespace eostb
