#pragma once

// Shared fixtures and independent oracles for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "eostb/hallmetrics.hpp"
#include "eostb/rng.hpp"
#include "eostb/scenegen.hpp"
#include "eostb/scoring.hpp"
#include "eostb/tinylm.hpp"
#include "eostb/train.hpp"

namespace eostb::testing {

// Small world for micro-model checks: 13-token vocab, 6-wide features.
inline DatasetConfig micro_dataset() {
  DatasetConfig d;
  d.scene.n_classes = 6;
  d.scene.n_attrs = 3;
  d.scene.min_objects = 1;
  d.scene.max_objects = 3;
  d.perception.slots = 3;
  d.perception.class_dims = 4;
  d.perception.attr_dims = 2;
  d.train_size = 16;
  d.test_size = 8;
  return d;
}

inline ModelConfig micro_model(const DatasetConfig& d) {
  ModelConfig m;
  m.n_layers = 1;
  m.n_heads = 2;
  m.d_model = 8;
  m.d_ff = 16;
  m.max_seq = 24;
  m.vocab_size = d.vocab().size();
  m.scene_slots = d.perception.slots;
  m.feature_dim = d.perception.feature_dim();
  return m;
}

// Micro examples with at least two sentences, so both EOS and non-EOS labels
// occur and the period logic is exercised.
inline std::vector<Example> micro_examples(int n, std::uint64_t seed_base = 100) {
  const DatasetConfig d = micro_dataset();
  const Vocab v = d.vocab();
  std::vector<Example> out;
  for (std::uint64_t s = seed_base; static_cast<int>(out.size()) < n; ++s) {
    Example ex = make_example(s, d, v);
    if (count_sentences(ex.caption, v) >= 2) out.push_back(std::move(ex));
  }
  return out;
}

// Random parameters with larger spread than the default init, so that
// gradients are not dominated by near-uniform attention.
inline Params randomized_params(const ModelConfig& m, std::uint64_t seed, double scale = 0.5) {
  Params p = init_params(m, seed);
  Rng rng(seed * 7919 + 3);
  for (double& x : p.values) x += scale * rng.normal();
  return p;
}

struct GradCheck {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double worst_abs = 0.0;  // among failures, or overall when none fail
  double worst_rel = 0.0;
  std::string worst_tensor;
};

// Central finite differences of the batch loss against the analytic
// gradient, every parameter entry. An entry passes when either the absolute
// error is <= abs_tol or the relative error is <= rel_tol.
inline GradCheck finite_difference_check(const Params& params, const std::vector<Example>& batch,
                                         const ObjectiveSpec& spec, int eos, double rel_tol = 1e-3,
                                         double abs_tol = 1e-6, double h = 1e-5) {
  std::vector<const Example*> ptrs;
  for (const auto& ex : batch) ptrs.push_back(&ex);
  Grads g;
  batch_loss_and_grads(params, ptrs, spec, eos, 0, g);
  Params p = params;
  GradCheck r;
  for (const auto& t : params.layout.tensors) {
    for (std::size_t k = 0; k < t.slice.size(); ++k) {
      const std::size_t idx = t.slice.offset + k;
      const double orig = p.values[idx];
      Grads scratch;
      p.values[idx] = orig + h;
      const double up = batch_loss_and_grads(p, ptrs, spec, eos, 0, scratch);
      p.values[idx] = orig - h;
      const double dn = batch_loss_and_grads(p, ptrs, spec, eos, 0, scratch);
      p.values[idx] = orig;
      const double fd = (up - dn) / (2 * h);
      const double an = g.values[idx];
      const double abs_err = std::abs(fd - an);
      const double rel_err = abs_err / std::max(std::abs(fd), std::abs(an));
      ++r.checked;
      const bool ok = abs_err <= abs_tol || rel_err <= rel_tol;
      if (!ok) {
        ++r.failures;
        if (abs_err > r.worst_abs) {
          r.worst_abs = abs_err;
          r.worst_rel = rel_err;
          r.worst_tensor = t.name;
        }
      }
    }
  }
  return r;
}

// Brute-force CHAIR recount working on token strings rather than ids.
inline EvalReport brute_force_chair(const std::vector<std::vector<int>>& caps, const std::vector<Scene>& scenes,
                                    const Vocab& v) {
  std::set<std::string> class_words;
  for (int c = 0; c < v.n_classes(); ++c) class_words.insert(v.token(v.class_token(c)));
  EvalReport r;
  r.n_captions = static_cast<int>(caps.size());
  long halluc_caps = 0, halluc = 0, mentioned = 0, correct = 0, gt = 0, len = 0, mentions_ok = 0, mentions_bad = 0;
  for (std::size_t i = 0; i < caps.size(); ++i) {
    std::set<std::string> truth;
    for (const auto& o : scenes[i].objects) truth.insert(v.token(v.class_token(o.class_id)));
    std::vector<std::string> words;
    for (int t : caps[i]) {
      const std::string& w = v.token(t);
      if (w != "<bos>" && w != "<eos>") ++len;
      if (class_words.count(w)) words.push_back(w);
    }
    std::set<std::string> said(words.begin(), words.end());
    bool any = false;
    for (const auto& w : said) {
      ++mentioned;
      if (truth.count(w))
        ++correct;
      else {
        ++halluc;
        any = true;
      }
    }
    for (const auto& w : words) (truth.count(w) ? mentions_ok : mentions_bad)++;
    halluc_caps += any;
    gt += static_cast<long>(truth.size());
  }
  const double n = static_cast<double>(caps.size());
  r.chair_s = caps.empty() ? 0.0 : halluc_caps / n;
  r.chair_i = mentioned ? static_cast<double>(halluc) / mentioned : 0.0;
  r.recall = gt ? static_cast<double>(correct) / gt : 0.0;
  r.mean_length = caps.empty() ? 0.0 : len / n;
  r.avg_correct_mentions = caps.empty() ? 0.0 : mentions_ok / n;
  r.avg_halluc_mentions = caps.empty() ? 0.0 : mentions_bad / n;
  return r;
}

// Random small CHAIR fixture: <= 10 captions over scenes of <= 5 objects.
// Captions mix scene objects, absent classes, repeats and filler tokens.
struct ChairFixture {
  std::vector<std::vector<int>> caps;
  std::vector<Scene> scenes;
};

inline ChairFixture random_chair_fixture(Rng& rng, const Vocab& v) {
  ChairFixture f;
  const int n = static_cast<int>(rng.uniform_int(0, 10));
  for (int i = 0; i < n; ++i) {
    Scene s;
    const int k = static_cast<int>(rng.uniform_int(0, 5));
    for (int j = 0; j < k; ++j) {
      ObjectInstance o;
      o.class_id = static_cast<int>(rng.uniform_int(0, v.n_classes() - 1));
      o.salience = rng.uniform();
      s.objects.push_back(o);
    }
    std::vector<int> cap{v.bos()};
    const int words = static_cast<int>(rng.uniform_int(0, 8));
    for (int w = 0; w < words; ++w) {
      const double u = rng.uniform();
      if (u < 0.35 && !s.objects.empty())
        cap.push_back(v.class_token(s.objects[rng.uniform_int(0, k - 1)].class_id));
      else if (u < 0.6)
        cap.push_back(v.class_token(static_cast<int>(rng.uniform_int(0, v.n_classes() - 1))));
      else if (u < 0.75)
        cap.push_back(v.attr_token(static_cast<int>(rng.uniform_int(0, v.n_attrs() - 1))));
      else if (u < 0.9)
        cap.push_back(v.article());
      else
        cap.push_back(v.period());
    }
    if (rng.uniform() < 0.8) cap.push_back(v.eos());
    f.caps.push_back(std::move(cap));
    f.scenes.push_back(std::move(s));
  }
  return f;
}

inline bool same_report(const EvalReport& a, const EvalReport& b, double tol = 1e-12) {
  auto near = [&](double x, double y) { return std::abs(x - y) <= tol; };
  return near(a.chair_s, b.chair_s) && near(a.chair_i, b.chair_i) && near(a.recall, b.recall) &&
         near(a.mean_length, b.mean_length) && a.n_captions == b.n_captions &&
         near(a.avg_correct_mentions, b.avg_correct_mentions) && near(a.avg_halluc_mentions, b.avg_halluc_mentions);
}

// Filter contracts on one score list: removal count, every removed key is at
// least (top) / at most (reversed) every kept key, ties broken toward the
// lower index, and the result is sorted and duplicate-free.
inline bool filter_contracts_hold(const std::vector<ScoreTriple>& scores, const FilterPlan& plan, std::string* why) {
  const auto removed = removal_set(scores, plan);
  const std::size_t n = scores.size();
  const std::size_t want =
      static_cast<std::size_t>(std::min<double>(static_cast<double>(n), std::ceil(plan.ratio * n - 1e-9)));
  if (removed.size() != want) {
    *why = "count " + std::to_string(removed.size()) + " != " + std::to_string(want);
    return false;
  }
  if (!std::is_sorted(removed.begin(), removed.end()) ||
      std::adjacent_find(removed.begin(), removed.end()) != removed.end()) {
    *why = "removal list not sorted/unique";
    return false;
  }
  if (plan.mode == FilterMode::random) return true;
  std::vector<bool> gone(n, false);
  for (auto i : removed) gone[i] = true;
  for (std::size_t i = 0; i < n; ++i) {
    if (!gone[i]) continue;
    const double ki = harm_key(scores[i], plan.metric);
    for (std::size_t j = 0; j < n; ++j) {
      if (gone[j]) continue;
      const double kj = harm_key(scores[j], plan.metric);
      const bool worse = plan.mode == FilterMode::top ? kj > ki : kj < ki;
      if (worse || (kj == ki && j < i)) {
        *why = "kept " + std::to_string(j) + " should have been removed before " + std::to_string(i);
        return false;
      }
    }
  }
  return true;
}

}  // namespace eostb::testing
