#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "eostb/tensor.hpp"

// Synthetic scene world: scenes of objects with a per-object salience,
// perception-limited feature rendering, and templated captions whose detail
// level can exceed what the features reveal.
namespace eostb {

// Token inventory. Layout: <bos> <eos> . a <attr...> <class...>
class Vocab {
 public:
  static Vocab make(int n_classes, int n_attrs);

  int size() const { return static_cast<int>(tokens_.size()); }
  int bos() const { return bos_; }
  int eos() const { return eos_; }
  int period() const { return period_; }
  int article() const { return article_; }
  int n_classes() const { return static_cast<int>(class_tokens_.size()); }
  int n_attrs() const { return static_cast<int>(attr_tokens_.size()); }

  int class_token(int class_id) const;
  int attr_token(int attr_id) const;
  // -1 when the token is not an object / attribute word.
  int class_of(int token) const;
  int attr_of(int token) const;
  bool is_object_word(int token) const { return class_of(token) >= 0; }

  const std::string& token(int index) const { return tokens_.at(index); }
  int index(std::string_view tok) const;  // throws ConfigError when absent
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::string decode(const std::vector<int>& seq) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> lookup_;
  std::vector<int> class_tokens_;
  std::vector<int> attr_tokens_;
  std::vector<int> token_class_;  // per token, -1 when not a class word
  std::vector<int> token_attr_;
  int bos_ = 0, eos_ = 1, period_ = 2, article_ = 3;
};

struct ObjectInstance {
  int class_id = 0;
  std::vector<int> attributes;
  double salience = 0.0;

  bool operator==(const ObjectInstance&) const = default;
};

struct Scene {
  std::vector<ObjectInstance> objects;
  std::uint64_t seed = 0;

  bool operator==(const Scene&) const = default;
};

struct SceneConfig {
  int n_classes = 48;
  int n_attrs = 12;
  int min_objects = 1;
  int max_objects = 6;
  int attrs_per_object = 1;
  // Salience ~ Uniform[salience_lo, salience_hi].
  double salience_lo = 0.0;
  double salience_hi = 1.0;

  void validate() const;
};

struct PerceptionConfig {
  double threshold = 0.5;
  int slots = 6;
  int class_dims = 32;
  int attr_dims = 8;
  double informative_noise = 0.1;
  // Degraded and empty slots are N(0, degrade_scale^2) per entry.
  double degrade_scale = 1.0;
  std::uint64_t codebook_seed = 1234;
  std::uint64_t noise_seed = 99;

  int feature_dim() const { return class_dims + attr_dims; }
  void validate() const;
};

struct CaptionConfig {
  int distractors = 1;
  void validate() const;
};

struct FeatureGrid {
  Matrix tokens;                    // slots x feature_dim
  std::vector<bool> perceivable_mask;  // per slot
  std::vector<int> slot_object;     // object index per slot, -1 for empty

  int slots() const { return tokens.rows; }
};

enum class DetailLevel { perceivable_only, full, over_detailed };

std::string_view to_string(DetailLevel d);
DetailLevel detail_from_string(std::string_view s);

struct Example {
  Scene scene;
  FeatureGrid features;
  std::vector<int> caption;  // BOS ... EOS
  std::vector<int> labels;   // caption shifted left by one
  DetailLevel detail_level = DetailLevel::full;

  // Model inputs: the caption without its final token.
  std::vector<int> inputs() const { return {caption.begin(), caption.end() - 1}; }
};

bool is_perceivable(const ObjectInstance& obj, const PerceptionConfig& pcfg);

Scene gen_scene(std::uint64_t seed, const SceneConfig& cfg);

FeatureGrid render_features(const Scene& scene, const PerceptionConfig& pcfg);

// Objects described by a caption, in caption order: perceivable objects
// first (by salience, descending), then the rest.
std::vector<int> description_order(const Scene& scene);

std::vector<int> gen_caption(const Scene& scene, DetailLevel level, const Vocab& vocab,
                             const PerceptionConfig& pcfg, const CaptionConfig& ccfg = {});

std::vector<int> shift_labels(const std::vector<int>& caption);

// Number of PERIOD-terminated sentences.
int count_sentences(const std::vector<int>& caption, const Vocab& vocab);

// Checks grammar: BOS, then sentences "a <attr>* <class> .", then one EOS.
bool well_formed(const std::vector<int>& caption, const Vocab& vocab);

struct DetailMixture {
  double perceivable_only = 0.3;
  double full = 0.4;
  double over_detailed = 0.3;
  void validate() const;
};

struct DatasetConfig {
  SceneConfig scene;
  PerceptionConfig perception;
  CaptionConfig caption;
  DetailMixture mixture;
  int train_size = 2000;
  int test_size = 500;
  std::uint64_t train_seed_base = 1'000'000;
  std::uint64_t test_seed_base = 9'000'000;

  Vocab vocab() const { return Vocab::make(scene.n_classes, scene.n_attrs); }
  void validate() const;
};

enum class Split { train, test };

Example make_example(std::uint64_t seed, const DatasetConfig& dcfg, const Vocab& vocab);

std::vector<Example> build_dataset(const DatasetConfig& dcfg, Split split);

// Line-delimited JSON records. Features are not stored; read_dataset
// re-renders them from the scene and the perception config.
std::string serialize_dataset(const std::vector<Example>& examples);
void write_dataset(const std::string& path, const std::vector<Example>& examples);
std::vector<Example> parse_dataset(const std::string& text, const PerceptionConfig& pcfg);
std::vector<Example> read_dataset(const std::string& path, const PerceptionConfig& pcfg);

}  // namespace eostb
