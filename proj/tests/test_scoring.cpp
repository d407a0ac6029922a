#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "eostb/errors.hpp"
#include "eostb/scoring.hpp"
#include "support.hpp"

using namespace eostb;
using namespace eostb::testing;

TEST_CASE("score from stated probabilities") {
  const int eos = 9;
  const std::vector<int> labels{3, 4, eos};
  const std::vector<double> p{0.5, 0.25, 0.8};
  const auto s = score_from_eos_probs(p, labels, eos);
  CHECK(s.s_neg == doctest::Approx(-std::log(0.5) - std::log(0.75)));
  CHECK(s.s_neg == doctest::Approx(0.9808).epsilon(1e-4));
  CHECK(s.s_pos == doctest::Approx(0.2231).epsilon(1e-4));
  CHECK(s.s_final == doctest::Approx(0.7577).epsilon(1e-4));
  CHECK(s.s_final == s.s_neg - s.s_pos);
}

TEST_CASE("score limits") {
  const int eos = 0;
  const std::vector<int> labels{2, 2, eos};
  CHECK(score_from_eos_probs(std::vector<double>{0.3, 0.6, 1.0}, labels, eos).s_pos == 0.0);
  CHECK(score_from_eos_probs(std::vector<double>{0.0, 0.0, 0.4}, labels, eos).s_neg == 0.0);
  const auto clamped = score_from_eos_probs(std::vector<double>{1.0, 0.0, 0.0}, labels, eos);
  CHECK(std::isfinite(clamped.s_pos));
  CHECK(std::isfinite(clamped.s_neg));
}

TEST_CASE("s_pos reads only EOS-labelled rows, s_neg only the others") {
  Rng rng(21);
  const int eos = 1;
  Matrix z(4, 5);
  for (double& x : z.data) x = rng.normal();
  const std::vector<int> labels{0, 3, 4, eos};
  const auto a = score_from_logits(z, labels, eos);
  Matrix z2 = z;
  for (int j = 0; j < 5; ++j) z2(1, j) += rng.normal();
  const auto b = score_from_logits(z2, labels, eos);
  CHECK(a.s_pos == b.s_pos);
  CHECK(a.s_neg != b.s_neg);
  Matrix z3 = z;
  for (int j = 0; j < 5; ++j) z3(3, j) += rng.normal();
  const auto c = score_from_logits(z3, labels, eos);
  CHECK(a.s_neg == c.s_neg);
  CHECK(a.s_pos != c.s_pos);
}

TEST_CASE("score_dataset: empty, permutation, agreement with score_example") {
  const DatasetConfig d = micro_dataset();
  const int eos = d.vocab().eos();
  const Params p = randomized_params(micro_model(d), 22);
  CHECK(score_dataset(p, {}, eos).empty());
  auto data = micro_examples(7, 500);
  const auto s = score_dataset(p, data, eos);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto e = score_example(p, data[i], eos);
    CHECK(s[i].s_final == e.s_final);
    CHECK(s[i].s_pos >= 0.0);
    CHECK(s[i].s_neg >= 0.0);
  }
  std::vector<std::size_t> perm{3, 0, 6, 1, 5, 2, 4};
  std::vector<Example> shuffled;
  for (auto i : perm) shuffled.push_back(data[i]);
  const auto t = score_dataset(p, shuffled, eos);
  for (std::size_t k = 0; k < perm.size(); ++k) CHECK(t[k].s_final == s[perm[k]].s_final);
}

TEST_CASE("filter contracts on random scores") {
  Rng rng(23);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(1, 60));
    std::vector<ScoreTriple> scores;
    for (int i = 0; i < n; ++i)
      // Coarse values so ties are common.
      scores.push_back(make_score(std::round(rng.uniform() * 4), std::round(rng.uniform() * 4)));
    for (auto mode : {FilterMode::top, FilterMode::random, FilterMode::reversed})
      for (auto metric : {FilterMetric::final, FilterMetric::pos_only, FilterMetric::neg_only}) {
        FilterPlan plan;
        plan.mode = mode;
        plan.metric = metric;
        plan.ratio = 0.05 + 0.9 * rng.uniform();
        plan.seed = trial;
        std::string why;
        CAPTURE(to_string(mode));
        CHECK_MESSAGE(filter_contracts_hold(scores, plan, &why), why);
      }
  }
}

TEST_CASE("filter: count, disjointness, monotone in ratio") {
  Rng rng(24);
  std::vector<Example> data(100);
  std::vector<ScoreTriple> scores;
  for (int i = 0; i < 100; ++i) scores.push_back(make_score(rng.uniform(), rng.uniform()));
  FilterPlan top;
  CHECK(filter_dataset(data, scores, top).kept.size() == 80);
  FilterPlan rev = top;
  rev.mode = FilterMode::reversed;
  for (double r : {0.1, 0.3, 0.5}) {
    top.ratio = rev.ratio = r;
    const auto a = removal_set(scores, top), b = removal_set(scores, rev);
    std::vector<std::size_t> both;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
    CHECK(both.empty());
  }
  for (auto mode : {FilterMode::top, FilterMode::reversed, FilterMode::random}) {
    FilterPlan lo, hi;
    lo.mode = hi.mode = mode;
    lo.ratio = 0.1;
    hi.ratio = 0.3;
    const auto a = removal_set(scores, lo), b = removal_set(scores, hi);
    CHECK(std::includes(b.begin(), b.end(), a.begin(), a.end()));
  }
}

TEST_CASE("filter: ties go to the lower index; random depends on the seed") {
  std::vector<ScoreTriple> flat(10, make_score(1.0, 1.0));
  FilterPlan plan;
  plan.ratio = 0.3;
  CHECK(removal_set(flat, plan) == std::vector<std::size_t>{0, 1, 2});
  plan.mode = FilterMode::reversed;
  CHECK(removal_set(flat, plan) == std::vector<std::size_t>{0, 1, 2});
  plan.mode = FilterMode::random;
  plan.seed = 1;
  const auto a = removal_set(flat, plan);
  CHECK(a == removal_set(flat, plan));
  bool differs = false;
  for (std::uint64_t s = 2; s < 10 && !differs; ++s) {
    plan.seed = s;
    differs = removal_set(flat, plan) != a;
  }
  CHECK(differs);
}

TEST_CASE("filter: ratio and alignment errors") {
  std::vector<ScoreTriple> scores(4);
  for (double r : {0.0, 1.0, -0.1, 1.5}) {
    FilterPlan plan;
    plan.ratio = r;
    CHECK_THROWS_AS(removal_set(scores, plan), ConfigError);
  }
  std::vector<Example> data(3);
  CHECK_THROWS(filter_dataset(data, scores, FilterPlan{}));
  CHECK_THROWS_AS(filter_mode_from_string("bottom"), ConfigError);
}

TEST_CASE("score report round-trips exactly") {
  Rng rng(25);
  std::vector<ScoreTriple> scores;
  for (int i = 0; i < 20; ++i) scores.push_back(make_score(rng.uniform() * 3, rng.uniform() * 7));
  const std::string path = "test_scores_roundtrip.tsv";
  write_score_report(path, scores);
  const auto back = read_score_report(path);
  REQUIRE(back.size() == scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    CHECK(back[i].s_pos == scores[i].s_pos);
    CHECK(back[i].s_neg == scores[i].s_neg);
    CHECK(back[i].s_final == scores[i].s_final);
  }
  std::remove(path.c_str());
}

TEST_CASE("histogram counts every value") {
  const std::vector<double> v{-1, 0, 0.5, 2, 3, 3};
  const auto h = histogram(v, 4);
  CHECK(std::accumulate(h.counts.begin(), h.counts.end(), 0) == 6);
  CHECK(h.lo == -1.0);
  CHECK(h.hi == 3.0);
}
