#include "eostb/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "eostb/errors.hpp"
#include "eostb/rng.hpp"

namespace eostb {

namespace {

constexpr const char* kAttrNames[] = {"red",   "blue",  "green", "yellow", "black", "white",
                                      "small", "large", "round", "shiny",  "wooden", "striped"};
constexpr const char* kClassNames[] = {
    "cube",   "ball",   "cup",    "chair",  "table", "lamp",   "book",  "clock",
    "vase",   "bottle", "plate",  "spoon",  "knife", "fork",   "bowl",  "pillow",
    "sofa",   "bed",    "door",   "window", "tree",  "flower", "dog",   "cat",
    "bird",   "horse",  "car",    "bus",    "bike",  "boat",   "kite",  "umbrella",
    "bag",    "hat",    "shoe",   "phone",  "mouse", "laptop", "cake",  "apple",
    "banana", "orange", "pizza",  "bench",  "sign",  "train",  "truck", "fence"};

std::string attr_name(int i) {
  if (i < static_cast<int>(std::size(kAttrNames))) return kAttrNames[i];
  return "attr" + std::to_string(i);
}
std::string class_name(int i) {
  if (i < static_cast<int>(std::size(kClassNames))) return kClassNames[i];
  return "obj" + std::to_string(i);
}

// Salts for deriving independent streams from one scene seed.
constexpr std::uint64_t kSceneSalt = 1;
constexpr std::uint64_t kDetailSalt = 3;
constexpr std::uint64_t kDistractorSalt = 7;

struct Codebook {
  std::vector<std::vector<double>> cls;
  std::vector<std::vector<double>> attr;
};

std::vector<std::vector<double>> sign_codes(Rng& rng, int n, int dims) {
  std::vector<std::vector<double>> codes;
  codes.reserve(n);
  while (static_cast<int>(codes.size()) < n) {
    std::vector<double> c(dims);
    for (auto& v : c) v = (rng.next_u64() & 1) ? 1.0 : -1.0;
    if (std::find(codes.begin(), codes.end(), c) == codes.end()) codes.push_back(std::move(c));
  }
  return codes;
}

Codebook make_codebook(const PerceptionConfig& pcfg, int n_classes, int n_attrs) {
  Rng crng(mix_seed(pcfg.codebook_seed, 0));
  Rng arng(mix_seed(pcfg.codebook_seed, 1));
  Codebook cb;
  cb.cls = sign_codes(crng, n_classes, pcfg.class_dims);
  cb.attr = sign_codes(arng, n_attrs, pcfg.attr_dims);
  return cb;
}

}  // namespace

// ---------------------------------------------------------------- Vocab

Vocab Vocab::make(int n_classes, int n_attrs) {
  if (n_classes < 1 || n_attrs < 1) throw ConfigError("vocab needs at least one class and attribute");
  Vocab v;
  v.tokens_ = {"<bos>", "<eos>", ".", "a"};
  for (int i = 0; i < n_attrs; ++i) {
    v.attr_tokens_.push_back(static_cast<int>(v.tokens_.size()));
    v.tokens_.push_back(attr_name(i));
  }
  for (int i = 0; i < n_classes; ++i) {
    v.class_tokens_.push_back(static_cast<int>(v.tokens_.size()));
    v.tokens_.push_back(class_name(i));
  }
  v.token_class_.assign(v.tokens_.size(), -1);
  v.token_attr_.assign(v.tokens_.size(), -1);
  for (int i = 0; i < n_classes; ++i) v.token_class_[v.class_tokens_[i]] = i;
  for (int i = 0; i < n_attrs; ++i) v.token_attr_[v.attr_tokens_[i]] = i;
  for (int i = 0; i < v.size(); ++i) {
    if (!v.lookup_.emplace(v.tokens_[i], i).second)
      throw ConfigError("duplicate token '" + v.tokens_[i] + "'");
  }
  return v;
}

int Vocab::class_token(int class_id) const {
  if (class_id < 0 || class_id >= n_classes())
    throw GenerationError("class id " + std::to_string(class_id) + " not in vocabulary");
  return class_tokens_[class_id];
}

int Vocab::attr_token(int attr_id) const {
  if (attr_id < 0 || attr_id >= n_attrs())
    throw GenerationError("attribute id " + std::to_string(attr_id) + " not in vocabulary");
  return attr_tokens_[attr_id];
}

int Vocab::class_of(int token) const {
  if (token < 0 || token >= size()) return -1;
  return token_class_[token];
}

int Vocab::attr_of(int token) const {
  if (token < 0 || token >= size()) return -1;
  return token_attr_[token];
}

int Vocab::index(std::string_view tok) const {
  auto it = lookup_.find(std::string(tok));
  if (it == lookup_.end()) throw ConfigError("unknown token '" + std::string(tok) + "'");
  return it->second;
}

std::string Vocab::decode(const std::vector<int>& seq) const {
  std::string out;
  for (int t : seq) {
    if (!out.empty()) out += ' ';
    out += (t >= 0 && t < size()) ? tokens_[t] : "<?>";
  }
  return out;
}

// ---------------------------------------------------------------- configs

void SceneConfig::validate() const {
  if (n_classes < 1 || n_attrs < 1) throw ConfigError("scene: class/attribute pools must be nonempty");
  if (min_objects < 0 || max_objects < min_objects)
    throw ConfigError("scene: invalid object-count range [" + std::to_string(min_objects) + "," +
                      std::to_string(max_objects) + "]");
  if (max_objects > n_classes) throw ConfigError("scene: max_objects exceeds class pool (classes are distinct per scene)");
  if (attrs_per_object < 0 || attrs_per_object > n_attrs)
    throw ConfigError("scene: attrs_per_object out of range");
  if (!(salience_lo >= 0.0 && salience_hi <= 1.0 && salience_lo <= salience_hi))
    throw ConfigError("scene: salience range must lie in [0,1]");
}

void PerceptionConfig::validate() const {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("perception: threshold must be in [0,1]");
  if (slots < 1) throw ConfigError("perception: slots must be >= 1");
  if (class_dims < 1 || attr_dims < 1) throw ConfigError("perception: code dims must be >= 1");
  if (!(informative_noise >= 0.0) || !(degrade_scale >= 0.0))
    throw ConfigError("perception: noise scales must be >= 0");
}

void CaptionConfig::validate() const {
  if (distractors < 0) throw ConfigError("caption: distractors must be >= 0");
}

void DetailMixture::validate() const {
  if (perceivable_only < 0 || full < 0 || over_detailed < 0)
    throw ConfigError("mixture: weights must be nonnegative");
  if (perceivable_only + full + over_detailed <= 0) throw ConfigError("mixture: weights sum to zero");
}

void DatasetConfig::validate() const {
  scene.validate();
  perception.validate();
  caption.validate();
  mixture.validate();
  if (train_size <= 0 || test_size <= 0) throw ConfigError("dataset: sizes must be > 0");
  if (scene.max_objects > perception.slots)
    throw ConfigError("dataset: max_objects exceeds perception slots");
  if (static_cast<double>(perception.class_dims) < std::log2(static_cast<double>(scene.n_classes)) ||
      static_cast<double>(perception.attr_dims) < std::log2(static_cast<double>(scene.n_attrs)))
    throw ConfigError("dataset: code dims too small for distinct codes");
  const std::uint64_t a0 = train_seed_base, a1 = train_seed_base + train_size;
  const std::uint64_t b0 = test_seed_base, b1 = test_seed_base + test_size;
  if (a0 < b1 && b0 < a1) throw ConfigError("dataset: train and test seed ranges overlap");
}

std::string_view to_string(DetailLevel d) {
  switch (d) {
    case DetailLevel::perceivable_only: return "perceivable_only";
    case DetailLevel::full: return "full";
    case DetailLevel::over_detailed: return "over_detailed";
  }
  return "?";
}

DetailLevel detail_from_string(std::string_view s) {
  if (s == "perceivable_only") return DetailLevel::perceivable_only;
  if (s == "full") return DetailLevel::full;
  if (s == "over_detailed") return DetailLevel::over_detailed;
  throw FormatError("unknown detail level '" + std::string(s) + "'");
}

// ---------------------------------------------------------------- generation

bool is_perceivable(const ObjectInstance& obj, const PerceptionConfig& pcfg) {
  return obj.salience >= pcfg.threshold;
}

Scene gen_scene(std::uint64_t seed, const SceneConfig& cfg) {
  cfg.validate();
  Rng rng(mix_seed(seed, kSceneSalt));
  Scene s;
  s.seed = seed;
  const int k = static_cast<int>(rng.uniform_int(cfg.min_objects, cfg.max_objects));

  std::vector<int> classes(cfg.n_classes);
  std::iota(classes.begin(), classes.end(), 0);
  std::vector<int> attrs(cfg.n_attrs);
  std::iota(attrs.begin(), attrs.end(), 0);

  for (int i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(i, cfg.n_classes - 1));
    std::swap(classes[i], classes[j]);
    ObjectInstance obj;
    obj.class_id = classes[i];
    for (int a = 0; a < cfg.attrs_per_object; ++a) {
      const auto b = static_cast<std::size_t>(rng.uniform_int(a, cfg.n_attrs - 1));
      std::swap(attrs[a], attrs[b]);
      obj.attributes.push_back(attrs[a]);
    }
    obj.salience = rng.uniform(cfg.salience_lo, cfg.salience_hi);
    s.objects.push_back(std::move(obj));
  }
  return s;
}

FeatureGrid render_features(const Scene& scene, const PerceptionConfig& pcfg) {
  pcfg.validate();
  const int nobj = static_cast<int>(scene.objects.size());
  if (nobj > pcfg.slots) throw ConfigError("scene has more objects than perception slots");

  int max_class = 0, max_attr = 0;
  for (const auto& o : scene.objects) {
    max_class = std::max(max_class, o.class_id + 1);
    for (int a : o.attributes) max_attr = std::max(max_attr, a + 1);
  }
  // The codebook is a prefix-stable function of the seed, so sizing it to the
  // largest id seen keeps codes identical across scenes.
  const Codebook cb = make_codebook(pcfg, std::max(max_class, 1), std::max(max_attr, 1));

  Rng rng(mix_seed(scene.seed, pcfg.noise_seed));

  // Slots follow description order (salience, descending); trailing slots
  // are empty.
  FeatureGrid g;
  g.tokens = Matrix(pcfg.slots, pcfg.feature_dim());
  g.perceivable_mask.assign(pcfg.slots, false);
  g.slot_object.assign(pcfg.slots, -1);
  const auto order = description_order(scene);
  for (int i = 0; i < nobj; ++i) g.slot_object[i] = order[i];

  for (int s = 0; s < pcfg.slots; ++s) {
    const int oi = g.slot_object[s];
    const bool informative = oi >= 0 && is_perceivable(scene.objects[oi], pcfg);
    g.perceivable_mask[s] = informative;
    std::vector<double> code(pcfg.feature_dim(), 0.0);
    if (informative) {
      const auto& obj = scene.objects[oi];
      const auto& cc = cb.cls[obj.class_id];
      std::copy(cc.begin(), cc.end(), code.begin());
      if (!obj.attributes.empty()) {
        const double w = 1.0 / static_cast<double>(obj.attributes.size());
        for (int a : obj.attributes)
          for (int d = 0; d < pcfg.attr_dims; ++d) code[pcfg.class_dims + d] += w * cb.attr[a][d];
      }
    }
    // Every slot draws the same number of normals so the stream does not
    // depend on which objects are perceivable.
    for (int d = 0; d < pcfg.feature_dim(); ++d) {
      const double n = rng.normal();
      g.tokens(s, d) = informative ? code[d] + pcfg.informative_noise * n : pcfg.degrade_scale * n;
    }
  }
  return g;
}

std::vector<int> description_order(const Scene& scene) {
  std::vector<int> order(scene.objects.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scene.objects[a].salience > scene.objects[b].salience;
  });
  return order;
}

namespace {

void append_sentence(std::vector<int>& seq, const ObjectInstance& obj, const Vocab& vocab) {
  seq.push_back(vocab.article());
  for (int a : obj.attributes) seq.push_back(vocab.attr_token(a));
  seq.push_back(vocab.class_token(obj.class_id));
  seq.push_back(vocab.period());
}

}  // namespace

std::vector<int> gen_caption(const Scene& scene, DetailLevel level, const Vocab& vocab,
                             const PerceptionConfig& pcfg, const CaptionConfig& ccfg) {
  ccfg.validate();
  std::vector<int> seq{vocab.bos()};
  for (int oi : description_order(scene)) {
    const auto& obj = scene.objects[oi];
    if (level == DetailLevel::perceivable_only && !is_perceivable(obj, pcfg)) continue;
    append_sentence(seq, obj, vocab);
  }
  if (level == DetailLevel::over_detailed && ccfg.distractors > 0) {
    Rng rng(mix_seed(scene.seed, kDistractorSalt));
    std::vector<int> absent;
    for (int c = 0; c < vocab.n_classes(); ++c) {
      const bool present = std::any_of(scene.objects.begin(), scene.objects.end(),
                                        [c](const ObjectInstance& o) { return o.class_id == c; });
      if (!present) absent.push_back(c);
    }
    const int nattr = scene.objects.empty() ? 1 : static_cast<int>(scene.objects.front().attributes.size());
    for (int d = 0; d < ccfg.distractors && !absent.empty(); ++d) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(absent.size()) - 1));
      ObjectInstance fake;
      fake.class_id = absent[j];
      absent.erase(absent.begin() + static_cast<std::ptrdiff_t>(j));
      for (int a = 0; a < nattr; ++a)
        fake.attributes.push_back(static_cast<int>(rng.uniform_int(0, vocab.n_attrs() - 1)));
      append_sentence(seq, fake, vocab);
    }
  }
  seq.push_back(vocab.eos());
  return seq;
}

std::vector<int> shift_labels(const std::vector<int>& caption) {
  if (caption.size() < 2) return {};
  return {caption.begin() + 1, caption.end()};
}

int count_sentences(const std::vector<int>& caption, const Vocab& vocab) {
  return static_cast<int>(std::count(caption.begin(), caption.end(), vocab.period()));
}

bool well_formed(const std::vector<int>& caption, const Vocab& vocab) {
  if (caption.size() < 2 || caption.front() != vocab.bos() || caption.back() != vocab.eos()) return false;
  std::size_t i = 1;
  const std::size_t end = caption.size() - 1;
  while (i < end) {
    if (caption[i++] != vocab.article()) return false;
    while (i < end && vocab.attr_of(caption[i]) >= 0) ++i;
    if (i >= end || !vocab.is_object_word(caption[i++])) return false;
    if (i >= end || caption[i++] != vocab.period()) return false;
  }
  return true;
}

Example make_example(std::uint64_t seed, const DatasetConfig& dcfg, const Vocab& vocab) {
  Example ex;
  ex.scene = gen_scene(seed, dcfg.scene);
  ex.features = render_features(ex.scene, dcfg.perception);

  const auto& m = dcfg.mixture;
  const double total = m.perceivable_only + m.full + m.over_detailed;
  const double u = Rng(mix_seed(seed, kDetailSalt)).uniform() * total;
  if (u < m.perceivable_only)
    ex.detail_level = DetailLevel::perceivable_only;
  else if (u < m.perceivable_only + m.full)
    ex.detail_level = DetailLevel::full;
  else
    ex.detail_level = DetailLevel::over_detailed;

  ex.caption = gen_caption(ex.scene, ex.detail_level, vocab, dcfg.perception, dcfg.caption);
  ex.labels = shift_labels(ex.caption);
  return ex;
}

std::vector<Example> build_dataset(const DatasetConfig& dcfg, Split split) {
  dcfg.validate();
  const Vocab vocab = dcfg.vocab();
  const int n = split == Split::train ? dcfg.train_size : dcfg.test_size;
  const std::uint64_t base = split == Split::train ? dcfg.train_seed_base : dcfg.test_seed_base;
  std::vector<Example> out(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) out[i] = make_example(base + static_cast<std::uint64_t>(i), dcfg, vocab);
  return out;
}

// ---------------------------------------------------------------- I/O

namespace {

nlohmann::json to_json(const Example& ex) {
  nlohmann::json objs = nlohmann::json::array();
  for (const auto& o : ex.scene.objects)
    objs.push_back({{"class", o.class_id}, {"attrs", o.attributes}, {"salience", o.salience}});
  return {{"seed", ex.scene.seed},
          {"detail", std::string(to_string(ex.detail_level))},
          {"objects", std::move(objs)},
          {"caption", ex.caption}};
}

}  // namespace

std::string serialize_dataset(const std::vector<Example>& examples) {
  std::string out;
  for (const auto& ex : examples) {
    out += to_json(ex).dump();
    out += '\n';
  }
  return out;
}

void write_dataset(const std::string& path, const std::vector<Example>& examples) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f << serialize_dataset(examples);
  if (!f) throw IoError("write failed for '" + path + "'");
}

std::vector<Example> parse_dataset(const std::string& text, const PerceptionConfig& pcfg) {
  std::vector<Example> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Example ex;
      ex.scene.seed = j.at("seed").get<std::uint64_t>();
      ex.detail_level = detail_from_string(j.at("detail").get<std::string>());
      for (const auto& o : j.at("objects")) {
        ObjectInstance obj;
        obj.class_id = o.at("class").get<int>();
        obj.attributes = o.at("attrs").get<std::vector<int>>();
        obj.salience = o.at("salience").get<double>();
        if (!(obj.salience >= 0.0 && obj.salience <= 1.0)) throw FormatError("salience out of [0,1]");
        ex.scene.objects.push_back(std::move(obj));
      }
      ex.caption = j.at("caption").get<std::vector<int>>();
      if (ex.caption.size() < 2) throw FormatError("caption shorter than BOS EOS");
      ex.labels = shift_labels(ex.caption);
      ex.features = render_features(ex.scene, pcfg);
      out.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("dataset line " + std::to_string(lineno) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Example> read_dataset(const std::string& path, const PerceptionConfig& pcfg) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_dataset(ss.str(), pcfg);
}

}  // namespace eostb
