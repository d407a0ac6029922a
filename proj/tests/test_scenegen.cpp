#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "eostb/errors.hpp"
#include "eostb/scenegen.hpp"

using namespace eostb;

TEST_CASE("vocabulary layout") {
  const Vocab v = Vocab::make(48, 12);
  CHECK(v.size() == 64);
  CHECK(v.token(v.bos()) == "<bos>");
  CHECK(v.token(v.eos()) == "<eos>");
  CHECK(v.token(v.period()) == ".");
  CHECK(v.class_of(v.class_token(17)) == 17);
  CHECK(v.attr_of(v.attr_token(3)) == 3);
  CHECK(v.class_of(v.attr_token(3)) == -1);
  CHECK(v.index(v.token(v.class_token(5))) == v.class_token(5));
  CHECK_THROWS_AS(v.index("nonexistent"), ConfigError);
}

TEST_CASE("an empty object range gives an empty scene") {
  SceneConfig c;
  c.min_objects = 0;
  c.max_objects = 0;
  CHECK(gen_scene(0, c).objects.empty());
}

TEST_CASE("scenes are deterministic in the seed") {
  SceneConfig c;
  CHECK(gen_scene(7, c) == gen_scene(7, c));
  CHECK_FALSE(gen_scene(7, c) == gen_scene(8, c));
}

TEST_CASE("salience sampler: Monte-Carlo mean of U[0,1] within 0.5 +- 0.05") {
  SceneConfig c;
  double sum = 0.0;
  long n = 0;
  for (std::uint64_t s = 1; s <= 1000; ++s)
    for (const auto& o : gen_scene(s, c).objects) {
      CHECK(o.salience >= 0.0);
      CHECK(o.salience < 1.0);
      sum += o.salience;
      ++n;
    }
  CHECK(std::abs(sum / n - 0.5) < 0.05);
}

TEST_CASE("scene invariants: distinct classes, count in range") {
  SceneConfig c;
  for (std::uint64_t s = 1; s <= 300; ++s) {
    const Scene sc = gen_scene(s, c);
    CHECK(static_cast<int>(sc.objects.size()) >= c.min_objects);
    CHECK(static_cast<int>(sc.objects.size()) <= c.max_objects);
    std::set<int> cls;
    for (const auto& o : sc.objects) cls.insert(o.class_id);
    CHECK(cls.size() == sc.objects.size());
  }
}

TEST_CASE("perception threshold boundaries") {
  SceneConfig c;
  PerceptionConfig p;
  const Scene sc = gen_scene(3, c);
  p.threshold = 0.0;
  auto g = render_features(sc, p);
  for (int s = 0; s < p.slots; ++s) CHECK(g.perceivable_mask[s] == (g.slot_object[s] >= 0));
  p.threshold = 1.0;
  g = render_features(sc, p);
  for (int s = 0; s < p.slots; ++s) CHECK_FALSE(g.perceivable_mask[s]);
}

TEST_CASE("perceivable mask follows salience") {
  Scene sc;
  sc.seed = 11;
  sc.objects.push_back({0, {1}, 0.2});
  sc.objects.push_back({1, {2}, 0.9});
  PerceptionConfig p;
  const auto g = render_features(sc, p);
  // Slots are in description order: the 0.9 object first.
  CHECK(g.slot_object[0] == 1);
  CHECK(g.slot_object[1] == 0);
  CHECK(g.perceivable_mask[0]);
  CHECK_FALSE(g.perceivable_mask[1]);
  for (int s = 2; s < p.slots; ++s) CHECK(g.slot_object[s] == -1);
}

TEST_CASE("informative slots carry the class code, degraded slots do not") {
  Scene sc;
  sc.seed = 2;
  sc.objects.push_back({4, {0}, 0.95});
  PerceptionConfig p;
  p.informative_noise = 0.0;
  const auto g = render_features(sc, p);
  for (int d = 0; d < p.class_dims; ++d) CHECK(std::abs(g.tokens(0, d)) == doctest::Approx(1.0));
  Scene sc2 = sc;
  sc2.objects[0].class_id = 5;
  const auto g2 = render_features(sc2, p);
  bool differs = false;
  for (int d = 0; d < p.class_dims; ++d) differs |= g.tokens(0, d) != g2.tokens(0, d);
  CHECK(differs);
}

TEST_CASE("caption grammar and detail levels") {
  const Vocab v = Vocab::make(48, 12);
  PerceptionConfig p;
  Scene empty;
  CHECK(gen_caption(empty, DetailLevel::full, v, p) == std::vector<int>{v.bos(), v.eos()});

  Scene two;
  two.seed = 4;
  two.objects.push_back({3, {1}, 0.8});
  two.objects.push_back({9, {2}, 0.1});
  const auto only = gen_caption(two, DetailLevel::perceivable_only, v, p);
  CHECK(count_sentences(only, v) == 1);
  CHECK(well_formed(only, v));

  Scene three = two;
  three.objects.push_back({12, {5}, 0.6});
  const auto over = gen_caption(three, DetailLevel::over_detailed, v, p);
  CHECK(count_sentences(over, v) == 4);
  CHECK(over.back() == v.eos());
  CHECK(well_formed(over, v));
  // The distractor is absent from the scene.
  const int distractor = v.class_of(over[over.size() - 3]);
  CHECK(distractor >= 0);
  for (const auto& o : three.objects) CHECK(o.class_id != distractor);
}

TEST_CASE("captions describe objects in salience order") {
  const Vocab v = Vocab::make(48, 12);
  PerceptionConfig p;
  Scene s;
  s.objects = {{1, {0}, 0.3}, {2, {0}, 0.9}, {3, {0}, 0.6}};
  const auto cap = gen_caption(s, DetailLevel::full, v, p);
  std::vector<int> cls;
  for (int t : cap)
    if (v.class_of(t) >= 0) cls.push_back(v.class_of(t));
  CHECK(cls == std::vector<int>{2, 3, 1});
}

TEST_CASE("dataset: size, invariants, degenerate mixture") {
  DatasetConfig d;
  d.train_size = 100;
  d.mixture = {0.0, 0.0, 1.0};
  const Vocab v = d.vocab();
  const auto data = build_dataset(d, Split::train);
  REQUIRE(data.size() == 100);
  for (const auto& ex : data) {
    CHECK(ex.detail_level == DetailLevel::over_detailed);
    CHECK(well_formed(ex.caption, v));
    CHECK(ex.labels == shift_labels(ex.caption));
    CHECK(ex.features.tokens.rows == d.perception.slots);
    CHECK(ex.features.tokens.cols == d.perception.feature_dim());
  }
}

TEST_CASE("default mixture proportions") {
  DatasetConfig d;
  d.train_size = 4000;
  int counts[3] = {0, 0, 0};
  for (const auto& ex : build_dataset(d, Split::train)) ++counts[static_cast<int>(ex.detail_level)];
  CHECK(counts[0] / 4000.0 == doctest::Approx(0.3).epsilon(0.1));
  CHECK(counts[1] / 4000.0 == doctest::Approx(0.4).epsilon(0.1));
  CHECK(counts[2] / 4000.0 == doctest::Approx(0.3).epsilon(0.1));
}

TEST_CASE("serialization is byte-stable and round-trips") {
  DatasetConfig d;
  d.train_size = 50;
  const auto a = build_dataset(d, Split::train);
  const auto b = build_dataset(d, Split::train);
  CHECK(serialize_dataset(a) == serialize_dataset(b));
  const auto back = parse_dataset(serialize_dataset(a), d.perception);
  REQUIRE(back.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(back[i].scene == a[i].scene);
    CHECK(back[i].caption == a[i].caption);
    CHECK(back[i].detail_level == a[i].detail_level);
    CHECK(back[i].features.tokens == a[i].features.tokens);
  }
  CHECK(serialize_dataset(back) == serialize_dataset(a));
}

TEST_CASE("malformed dataset lines are rejected") {
  PerceptionConfig p;
  CHECK_THROWS_AS(parse_dataset("{not json}\n", p), FormatError);
  CHECK_THROWS_AS(parse_dataset("{\"seed\": 1}\n", p), FormatError);
}

TEST_CASE("config validation") {
  DatasetConfig d;
  d.test_seed_base = d.train_seed_base + 10;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  DatasetConfig e;
  e.scene.max_objects = 9;
  CHECK_THROWS_AS(e.validate(), ConfigError);
  PerceptionConfig p;
  p.threshold = 1.5;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}
