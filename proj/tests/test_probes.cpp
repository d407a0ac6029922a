#include <doctest.h>

#include <cmath>

#include "eostb/errors.hpp"
#include "eostb/objectives.hpp"
#include "eostb/probes.hpp"
#include "support.hpp"

using namespace eostb;
using namespace eostb::testing;

namespace {

ModelConfig two_layer(const DatasetConfig& d) {
  ModelConfig m = micro_model(d);
  m.n_layers = 2;
  return m;
}

double target_loss(const Params& p, const Example& ex, int target_pos, const AttentionNudge* nudge) {
  const std::vector<int> inputs(ex.caption.begin(), ex.caption.begin() + target_pos);
  ForwardOptions o;
  o.nudge = nudge;
  const auto tr = forward(p, ex.features.tokens, inputs, o);
  return -log_softmax(tr.logits.row(tr.text_len - 1))[ex.caption[target_pos]];
}

}  // namespace

TEST_CASE("saliency matches finite differences on the attention entries") {
  const DatasetConfig d = micro_dataset();
  const Vocab v = d.vocab();
  const Params p = randomized_params(two_layer(d), 41);
  const Example ex = micro_examples(1, 600)[0];
  const int target = static_cast<int>(ex.caption.size()) - 1;  // the EOS
  const auto r = saliency(p, ex, target, v);
  const int H = p.config.n_heads;
  const auto tr = forward(p, ex.features.tokens, std::vector<int>(ex.caption.begin(), ex.caption.begin() + target));
  const double h = 1e-6;
  int compared = 0;
  for (int l = 0; l < p.config.n_layers; ++l)
    for (int i = 0; i < tr.context_len(); ++i)
      for (int j = 0; j < tr.context_len(); ++j) {
        if (!tr.allowed(i, j)) {
          CHECK(r.layers[l](i, j) == 0.0);
          continue;
        }
        double fd_sum = 0.0;
        for (int hd = 0; hd < H; ++hd) {
          AttentionNudge up{l, hd, i, j, h}, dn{l, hd, i, j, -h};
          const double g = (target_loss(p, ex, target, &up) - target_loss(p, ex, target, &dn)) / (2 * h);
          fd_sum += std::abs(tr.attention(l, hd)(i, j) * g);
        }
        const double an = r.layers[l](i, j);
        if (std::max(an, fd_sum) < 1e-9) continue;
        CHECK(std::abs(an - fd_sum / H) <= 1e-2 * std::max(an, fd_sum / H) + 1e-9);
        ++compared;
      }
  CHECK(compared > 20);
}

TEST_CASE("saliency rows beyond the target row and the segmentation") {
  const DatasetConfig d = micro_dataset();
  const Vocab v = d.vocab();
  const Params p = randomized_params(two_layer(d), 42);
  const Example ex = micro_examples(1, 601)[0];
  const int target = static_cast<int>(ex.caption.size()) - 1;
  const auto r = saliency(p, ex, target, v);
  CHECK(r.target_row == r.seg.current.end - 1);
  CHECK(r.seg.scene.size() == d.perception.slots);
  CHECK(r.seg.prev.end == r.seg.current.begin);
  // The current sentence begins right after the last interior PERIOD.
  CHECK(r.context_tokens[r.seg.current.begin - r.seg.scene.end - 1] == v.period());
  for (const auto& f : flow_proportions(r)) CHECK(f.scene + f.prev + f.current == doctest::Approx(1.0));
  for (const auto& a : aggregation_pattern(r, v)) {
    const double s = a.others_to_periods + a.periods_to_target + a.among_others;
    CHECK((s == doctest::Approx(1.0) || s == 0.0));
  }
  CHECK_THROWS_AS(saliency(p, ex, 0, v), LengthError);
  CHECK_THROWS_AS(saliency(p, ex, static_cast<int>(ex.caption.size()), v), LengthError);
}

TEST_CASE("segmentation edge cases") {
  const Vocab v = Vocab::make(4, 2);
  const int a = v.article(), c = v.class_token(0), P = v.period();
  // One sentence: no previous-sentence span.
  auto s = segment_context(3, std::vector<int>{v.bos(), a, c, P}, v);
  CHECK(s.prev.size() == 0);
  CHECK(s.current.size() == 4);
  // No period at all.
  s = segment_context(3, std::vector<int>{v.bos(), a, c}, v);
  CHECK(s.prev.size() == 0);
  // Two sentences, context ends in the final PERIOD (the EOS row).
  s = segment_context(2, std::vector<int>{v.bos(), a, c, P, a, c, P}, v);
  CHECK(s.prev.begin == 2);
  CHECK(s.prev.size() == 4);
  CHECK(s.current.size() == 3);
}

TEST_CASE("non-EOS candidates span the last sentence") {
  const Vocab v = Vocab::make(4, 2);
  const int a = v.article(), x = v.attr_token(0), c = v.class_token(1), P = v.period();
  const std::vector<int> cap{v.bos(), a, x, c, P, a, x, c, P, v.eos()};
  CHECK(non_eos_candidates(cap, v) == std::vector<int>{5, 6, 7, 8});
  CHECK(top_quartile_layers(1) == std::vector<int>{0});
  CHECK(top_quartile_layers(8) == std::vector<int>{6, 7});
  CHECK(top_quartile_layers(5) == std::vector<int>{3, 4});
}

TEST_CASE("manipulation invariants") {
  const DatasetConfig d = micro_dataset();
  const Example ex = micro_examples(1, 602)[0];
  Manipulation m;
  const auto none = manipulate(ex, m, d);
  CHECK(none.features == ex.features.tokens);
  CHECK(none.hidden_prefix == 0);

  m.mode = ManipulationMode::image_minus;
  m.noise_steps = 0;
  CHECK(manipulate(ex, m, d).features == ex.features.tokens);
  m.noise_steps = 500;
  const auto noisy = manipulate(ex, m, d);
  CHECK(noisy.features != ex.features.tokens);
  CHECK(noisy.features == manipulate(ex, m, d).features);

  m = {};
  m.mode = ManipulationMode::image_plus;
  const auto plus = manipulate(ex, m, d);
  CHECK(plus.features.rows == 2 * ex.features.tokens.rows);
  for (int r = 0; r < ex.features.tokens.rows; ++r)
    for (int c = 0; c < plus.features.cols; ++c) CHECK(plus.features(r, c) == ex.features.tokens(r, c));

  m.mode = ManipulationMode::image_replace;
  const auto rep = manipulate(ex, m, d);
  CHECK(rep.features.rows == ex.features.tokens.rows);
  CHECK(rep.features != ex.features.tokens);

  m.mode = ManipulationMode::text_minus;
  const int text_len = static_cast<int>(ex.caption.size()) - 1;
  CHECK(manipulate(ex, m, d).hidden_prefix == static_cast<int>(std::ceil(0.25 * text_len - 1e-9)));
  m.mask_prefix_len = 2;
  const auto tm = manipulate(ex, m, d);
  CHECK(tm.hidden_prefix == 2);
  const auto o = tm.options(text_len);
  CHECK(o.hidden_text[0]);
  CHECK(o.hidden_text[1]);
  CHECK(!o.hidden_text[2]);

  Manipulation bad;
  bad.noise_steps = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = {};
  bad.mask_prefix_len = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK_THROWS_AS(manipulation_from_string("image_times"), ConfigError);
}

TEST_CASE("noise schedule drives features toward the noise scale") {
  Rng rng(43);
  Matrix x(200, 50, 5.0);
  const NoiseSchedule s;
  CHECK(s.beta(0) == doctest::Approx(1e-4));
  CHECK(s.beta(s.length - 1) == doctest::Approx(0.02));
  const Matrix y = noise_features(x, 1000, s, 1.0, rng);
  const double n = static_cast<double>(y.data.size());
  double mean = 0.0, sq = 0.0;
  for (double v : y.data) mean += v;
  mean /= n;
  for (double v : y.data) sq += (v - mean) * (v - mean);
  // x_T = k x_0 + e with k = prod sqrt(1 - b_t) and var(e) = 1 - k^2.
  double keep = 1.0;
  for (int t = 0; t < 1000; ++t) keep *= std::sqrt(1.0 - s.beta(t));
  const double var = 1.0 - keep * keep;
  CHECK(std::abs(mean - 5.0 * keep) < 5.0 * std::sqrt(var / n));
  CHECK(sq / n == doctest::Approx(var).epsilon(0.05));
}

TEST_CASE("tendency buckets and exponential fit") {
  CHECK(tendency_bucket(1, 10) == 0);
  CHECK(tendency_bucket(10, 10) == 9);
  CHECK(tendency_bucket(1, 1) == 9);
  CHECK(tendency_bucket(5, 20) == 2);  // ceil(2.5) - 1
  CHECK(tendency_bucket(6, 20) == 2);
  CHECK(tendency_bucket(7, 20) == 3);
  for (int n = 1; n < 40; ++n)
    for (int k = 1; k <= n; ++k) CHECK(tendency_bucket(k, n) == static_cast<int>(std::ceil(10.0 * k / n)) - 1);

  std::vector<double> x, y;
  for (int i = 0; i < 10; ++i) {
    x.push_back((i + 0.5) / 10);
    y.push_back(0.03 * std::exp(2.5 * x.back()));
  }
  y[4] = std::nan("");
  double a, b, rms;
  fit_exponential(x, y, a, b, rms);
  CHECK(a == doctest::Approx(0.03));
  CHECK(b == doctest::Approx(2.5));
  CHECK(rms < 1e-12);
}

TEST_CASE("tendency curve is deterministic and counts every sentence end") {
  const DatasetConfig d = micro_dataset();
  const Vocab v = d.vocab();
  const Params p = randomized_params(micro_model(d), 44);
  const auto data = micro_examples(12, 700);
  int periods = 0;
  for (const auto& ex : data)
    for (int t : ex.inputs()) periods += t == v.period();
  for (auto mode : {ManipulationMode::none, ManipulationMode::image_minus, ManipulationMode::image_plus,
                    ManipulationMode::image_replace, ManipulationMode::text_minus}) {
    Manipulation m;
    m.mode = mode;
    const auto c = tendency_curve(p, data, m, d);
    const auto c2 = tendency_curve(p, data, m, d);
    int total = 0;
    for (int b = 0; b < TendencyCurve::kBuckets; ++b) {
      total += c.count[b];
      if (c.count[b] > 0) {
        CHECK(c.mean[b] > 0.0);
        CHECK(c.mean[b] < 1.0);
        CHECK(c.mean[b] == c2.mean[b]);
      }
    }
    CHECK(total == periods);
  }
}

TEST_CASE("flow probe restricts to multi-sentence examples") {
  const DatasetConfig d = micro_dataset();
  const Vocab v = d.vocab();
  const Params p = randomized_params(two_layer(d), 45);
  std::vector<Example> data;
  for (std::uint64_t s = 800; data.size() < 20; ++s) data.push_back(make_example(s, d, v));
  const auto probes = probe_examples(data, 100, v);
  for (const Example* ex : probes) CHECK(count_sentences(ex->caption, v) >= 2);
  const auto f = flow_probe(p, data, 100, 1, v);
  CHECK(f.n_examples == static_cast<int>(probes.size()));
  CHECK(f.eos_target.size() == 2);
  for (const auto& t : f.eos_target) CHECK(t.scene + t.prev + t.current == doctest::Approx(1.0));
  const auto g = aggregation_probe(p, data, 100, v);
  CHECK(g.layers.size() == 2);
}
