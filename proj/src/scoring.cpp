#include "eostb/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "eostb/errors.hpp"
#include "eostb/rng.hpp"

namespace eostb {

namespace {

const double kLogLo = std::log(kScoreEps);
// Floor at log(eps) so p = 0 stays finite; cap at 0 against rounding.
double clamp_log(double lp) { return std::clamp(lp, kLogLo, 0.0); }

double lse(std::span<const double> z, int skip) {
  double mx = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < static_cast<int>(z.size()); ++j)
    if (j != skip) mx = std::max(mx, z[j]);
  double s = 0.0;
  for (int j = 0; j < static_cast<int>(z.size()); ++j)
    if (j != skip) s += std::exp(z[j] - mx);
  return mx + std::log(s);
}

}  // namespace

ScoreTriple make_score(double s_pos, double s_neg) { return {s_pos, s_neg, s_neg - s_pos}; }

ScoreTriple score_from_eos_probs(std::span<const double> p_eos, std::span<const int> labels, int eos) {
  if (p_eos.size() != labels.size()) throw AlignmentError("score: probabilities/labels length mismatch");
  double s_pos = 0.0, s_neg = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = p_eos[i];
    if (!(p >= 0.0 && p <= 1.0)) throw NumericError("score: p_EOS outside [0,1]");
    if (labels[i] == eos)
      s_pos -= clamp_log(std::log(p));
    else
      s_neg -= clamp_log(std::log1p(-p));
  }
  return make_score(s_pos, s_neg);
}

// log p_EOS and log(1 - p_EOS) both come from log-sum-exp differences, so a
// p_EOS close to 1 does not lose precision in 1 - p.
ScoreTriple score_from_logits(const Matrix& logits, std::span<const int> labels, int eos) {
  if (static_cast<int>(labels.size()) != logits.rows) throw AlignmentError("score: logits/labels length mismatch");
  if (eos < 0 || eos >= logits.cols) throw ConfigError("score: eos index outside vocabulary");
  double s_pos = 0.0, s_neg = 0.0;
  for (int i = 0; i < logits.rows; ++i) {
    auto z = logits.row(i);
    const double all = lse(z, -1);
    if (labels[i] == eos)
      s_pos -= clamp_log(z[eos] - all);
    else
      s_neg -= clamp_log(lse(z, eos) - all);
  }
  return make_score(s_pos, s_neg);
}

ScoreTriple score_example(const Params& ref, const Example& ex, int eos) {
  const auto inputs = ex.inputs();
  if (static_cast<int>(inputs.size()) > ref.config.max_seq)
    throw LengthError("score: example length " + std::to_string(inputs.size()) + " exceeds max_seq");
  const ForwardTrace tr = forward(ref, ex.features.tokens, inputs);
  return score_from_logits(tr.logits, ex.labels, eos);
}

std::vector<ScoreTriple> score_dataset(const Params& ref, const std::vector<Example>& dataset, int eos) {
  const int n = static_cast<int>(dataset.size());
  std::vector<ScoreTriple> out(dataset.size());
  std::vector<std::string> errors(dataset.size());
  std::vector<std::string> classes(dataset.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (int i = 0; i < n; ++i) {
    try {
      out[i] = score_example(ref, dataset[i], eos);
    } catch (const Error& e) {
      errors[i] = e.what();
      classes[i] = e.error_class();
    }
  }
  for (int i = 0; i < n; ++i) {
    if (errors[i].empty()) continue;
    const std::string msg = "example " + std::to_string(i) + ": " + errors[i];
    if (classes[i] == "length_error") throw LengthError(msg);
    if (classes[i] == "numeric_error") throw NumericError(msg);
    throw AlignmentError(msg);
  }
  return out;
}

std::string_view to_string(FilterMode m) {
  switch (m) {
    case FilterMode::top: return "top";
    case FilterMode::random: return "random";
    case FilterMode::reversed: return "reversed";
  }
  return "?";
}

FilterMode filter_mode_from_string(std::string_view s) {
  if (s == "top") return FilterMode::top;
  if (s == "random") return FilterMode::random;
  if (s == "reversed") return FilterMode::reversed;
  throw ConfigError("unknown filter mode '" + std::string(s) + "'");
}

std::string_view to_string(FilterMetric m) {
  switch (m) {
    case FilterMetric::final: return "final";
    case FilterMetric::pos_only: return "pos_only";
    case FilterMetric::neg_only: return "neg_only";
  }
  return "?";
}

FilterMetric filter_metric_from_string(std::string_view s) {
  if (s == "final") return FilterMetric::final;
  if (s == "pos_only") return FilterMetric::pos_only;
  if (s == "neg_only") return FilterMetric::neg_only;
  throw ConfigError("unknown filter metric '" + std::string(s) + "'");
}

void FilterPlan::validate() const {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("filter: ratio must lie in (0,1)");
}

double harm_key(const ScoreTriple& s, FilterMetric metric) {
  switch (metric) {
    case FilterMetric::final: return s.s_final;
    case FilterMetric::pos_only: return -s.s_pos;
    case FilterMetric::neg_only: return s.s_neg;
  }
  return s.s_final;
}

std::vector<std::size_t> removal_set(std::span<const ScoreTriple> scores, const FilterPlan& plan) {
  plan.validate();
  const std::size_t n = scores.size();
  // The small slack keeps e.g. 0.2 * 100 from rounding up to 21.
  const auto m = static_cast<std::size_t>(std::ceil(plan.ratio * static_cast<double>(n) - 1e-9));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  switch (plan.mode) {
    case FilterMode::top:
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return harm_key(scores[a], plan.metric) > harm_key(scores[b], plan.metric);
      });
      break;
    case FilterMode::reversed:
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return harm_key(scores[a], plan.metric) < harm_key(scores[b], plan.metric);
      });
      break;
    case FilterMode::random: {
      Rng rng(plan.seed);
      for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
      break;
    }
  }
  std::vector<std::size_t> removed(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(m, n)));
  std::sort(removed.begin(), removed.end());
  return removed;
}

FilterOutcome filter_dataset(const std::vector<Example>& dataset, std::span<const ScoreTriple> scores,
                             const FilterPlan& plan) {
  if (scores.size() != dataset.size()) throw AlignmentError("filter: scores not aligned with dataset");
  FilterOutcome out;
  out.removed = removal_set(scores, plan);
  std::size_t r = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (r < out.removed.size() && out.removed[r] == i) {
      ++r;
      continue;
    }
    out.kept.push_back(dataset[i]);
  }
  return out;
}

void write_score_report(std::ostream& os, std::span<const ScoreTriple> scores) {
  os << "index\ts_pos\ts_neg\ts_final\n";
  char buf[128];
  for (std::size_t i = 0; i < scores.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu\t%.17g\t%.17g\t%.17g\n", i, scores[i].s_pos, scores[i].s_neg,
                  scores[i].s_final);
    os << buf;
  }
}

void write_score_report(const std::string& path, std::span<const ScoreTriple> scores) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  write_score_report(f, scores);
  if (!f) throw IoError("write failed for '" + path + "'");
}

std::vector<ScoreTriple> read_score_report(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::string line;
  std::getline(f, line);
  if (line != "index\ts_pos\ts_neg\ts_final") throw FormatError("score report: bad header in '" + path + "'");
  std::vector<ScoreTriple> out;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::size_t idx;
    ScoreTriple s;
    if (!(ls >> idx >> s.s_pos >> s.s_neg >> s.s_final) || idx != out.size())
      throw FormatError("score report: malformed row " + std::to_string(out.size()));
    out.push_back(s);
  }
  return out;
}

std::string filter_manifest_json(const FilterPlan& plan, std::span<const std::size_t> removed, std::size_t n_total) {
  nlohmann::json j;
  j["mode"] = std::string(to_string(plan.mode));
  j["metric"] = std::string(to_string(plan.metric));
  j["ratio"] = plan.ratio;
  j["seed"] = plan.seed;
  j["n_total"] = n_total;
  j["n_removed"] = removed.size();
  j["removed"] = std::vector<std::size_t>(removed.begin(), removed.end());
  return j.dump(2) + "\n";
}

Histogram histogram(std::span<const double> values, int bins) {
  Histogram h;
  h.counts.assign(std::max(bins, 1), 0);
  if (values.empty()) return h;
  h.lo = *std::min_element(values.begin(), values.end());
  h.hi = *std::max_element(values.begin(), values.end());
  if (h.hi <= h.lo) h.hi = h.lo + 1.0;
  const double w = h.bin_width();
  for (double v : values) {
    auto b = static_cast<int>((v - h.lo) / w);
    b = std::clamp(b, 0, static_cast<int>(h.counts.size()) - 1);
    ++h.counts[b];
  }
  return h;
}

ScoreSummary summarize_scores(std::span<const ScoreTriple> scores, int bins) {
  ScoreSummary s;
  std::vector<double> p, n, f;
  for (const auto& t : scores) {
    p.push_back(t.s_pos);
    n.push_back(t.s_neg);
    f.push_back(t.s_final);
  }
  auto mean = [](const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  s.mean_pos = mean(p);
  s.mean_neg = mean(n);
  s.mean_final = mean(f);
  double var = 0.0;
  for (double v : f) var += (v - s.mean_final) * (v - s.mean_final);
  s.sd_final = f.size() > 1 ? std::sqrt(var / static_cast<double>(f.size() - 1)) : 0.0;
  s.pos = histogram(p, bins);
  s.neg = histogram(n, bins);
  s.fin = histogram(f, bins);
  return s;
}

}  // namespace eostb
