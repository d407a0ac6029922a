#include "eostb/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "eostb/checkpoint.hpp"
#include "eostb/errors.hpp"

#ifndef EOSTB_SOURCE_REVISION
#define EOSTB_SOURCE_REVISION "unknown"
#endif

namespace eostb {

namespace {

constexpr std::string_view kRunKinds[] = {"dataset_build",  "train_mle",       "train_selective",   "train_combined",
                                          "further_train",  "score",           "filter",            "probe_saliency",
                                          "probe_aggregation", "probe_tendency", "eval",             "report"};

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (auto a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
void get(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

std::string get_enum(const json& j, const char* key, std::string_view fallback, const std::string& where) {
  std::string s(fallback);
  get(j, key, s, where);
  return s;
}

}  // namespace

std::string_view to_string(RunKind k) { return kRunKinds[static_cast<int>(k)]; }

RunKind run_kind_from_string(std::string_view s) {
  for (int i = 0; i < static_cast<int>(std::size(kRunKinds)); ++i)
    if (s == kRunKinds[i]) return static_cast<RunKind>(i);
  throw ConfigError("unknown run kind '" + std::string(s) + "'");
}

ojson to_json(const DatasetConfig& d) {
  ojson j;
  j["scene"] = {{"n_classes", d.scene.n_classes},       {"n_attrs", d.scene.n_attrs},
                {"min_objects", d.scene.min_objects},   {"max_objects", d.scene.max_objects},
                {"attrs_per_object", d.scene.attrs_per_object}, {"salience_lo", d.scene.salience_lo},
                {"salience_hi", d.scene.salience_hi}};
  j["perception"] = {{"threshold", d.perception.threshold},
                     {"slots", d.perception.slots},
                     {"class_dims", d.perception.class_dims},
                     {"attr_dims", d.perception.attr_dims},
                     {"informative_noise", d.perception.informative_noise},
                     {"degrade_scale", d.perception.degrade_scale},
                     {"codebook_seed", d.perception.codebook_seed},
                     {"noise_seed", d.perception.noise_seed}};
  j["caption"] = {{"distractors", d.caption.distractors}};
  j["mixture"] = {{"perceivable_only", d.mixture.perceivable_only},
                  {"full", d.mixture.full},
                  {"over_detailed", d.mixture.over_detailed}};
  j["train_size"] = d.train_size;
  j["test_size"] = d.test_size;
  j["train_seed_base"] = d.train_seed_base;
  j["test_seed_base"] = d.test_seed_base;
  return j;
}

DatasetConfig dataset_config_from_json(const json& j) {
  DatasetConfig d;
  const std::string w = "dataset";
  check_keys(j, {"scene", "perception", "caption", "mixture", "train_size", "test_size", "train_seed_base",
                 "test_seed_base"},
             w);
  if (j.contains("scene")) {
    const auto& s = j["scene"];
    check_keys(s, {"n_classes", "n_attrs", "min_objects", "max_objects", "attrs_per_object", "salience_lo",
                   "salience_hi"},
               w + ".scene");
    get(s, "n_classes", d.scene.n_classes, w);
    get(s, "n_attrs", d.scene.n_attrs, w);
    get(s, "min_objects", d.scene.min_objects, w);
    get(s, "max_objects", d.scene.max_objects, w);
    get(s, "attrs_per_object", d.scene.attrs_per_object, w);
    get(s, "salience_lo", d.scene.salience_lo, w);
    get(s, "salience_hi", d.scene.salience_hi, w);
  }
  if (j.contains("perception")) {
    const auto& p = j["perception"];
    check_keys(p, {"threshold", "slots", "class_dims", "attr_dims", "informative_noise", "degrade_scale",
                   "codebook_seed", "noise_seed"},
               w + ".perception");
    get(p, "threshold", d.perception.threshold, w);
    get(p, "slots", d.perception.slots, w);
    get(p, "class_dims", d.perception.class_dims, w);
    get(p, "attr_dims", d.perception.attr_dims, w);
    get(p, "informative_noise", d.perception.informative_noise, w);
    get(p, "degrade_scale", d.perception.degrade_scale, w);
    get(p, "codebook_seed", d.perception.codebook_seed, w);
    get(p, "noise_seed", d.perception.noise_seed, w);
  }
  if (j.contains("caption")) {
    check_keys(j["caption"], {"distractors"}, w + ".caption");
    get(j["caption"], "distractors", d.caption.distractors, w);
  }
  if (j.contains("mixture")) {
    const auto& m = j["mixture"];
    check_keys(m, {"perceivable_only", "full", "over_detailed"}, w + ".mixture");
    get(m, "perceivable_only", d.mixture.perceivable_only, w);
    get(m, "full", d.mixture.full, w);
    get(m, "over_detailed", d.mixture.over_detailed, w);
  }
  get(j, "train_size", d.train_size, w);
  get(j, "test_size", d.test_size, w);
  get(j, "train_seed_base", d.train_seed_base, w);
  get(j, "test_seed_base", d.test_seed_base, w);
  return d;
}

void RunConfig::sync_model_to_dataset() {
  model.vocab_size = dataset.vocab().size();
  model.feature_dim = dataset.perception.feature_dim();
  model.scene_slots = dataset.perception.slots;
}

void RunConfig::validate() const {
  if (seeds.empty()) throw ConfigError("config: seed list is empty");
  if (output_dir.empty()) throw ConfigError("config: output_dir is empty");
  dataset.validate();
  model.validate();
  objective.validate();
  training.train.validate();
  if (training.monitor_size < 0) throw ConfigError("config: training.monitor_size must be >= 0");
  if (decode.max_len < 1) throw ConfigError("config: decode.max_len must be >= 1");
  if (model.vocab_size != dataset.vocab().size())
    throw ConfigError("config: model.vocab_size " + std::to_string(model.vocab_size) +
                      " does not match the dataset vocabulary (" + std::to_string(dataset.vocab().size()) + ")");
  if (model.feature_dim != dataset.perception.feature_dim())
    throw ConfigError("config: model.feature_dim does not match the perception feature width");
  if (kind == RunKind::filter) filter.plan.validate();
  if (probe.examples < 1) throw ConfigError("config: probe.examples must be >= 1");
  probe.manipulation.validate();
  for (double r : eval.truncate_r)
    if (!(r > 0.0 && r <= 100.0)) throw ConfigError("config: eval.truncate_r values must lie in (0,100]");
  if (kind == RunKind::further_train && init_checkpoint.empty())
    throw ConfigError("config: further_train needs init_checkpoint");
}

ojson to_json(const RunConfig& c) {
  ojson j;
  j["kind"] = std::string(to_string(c.kind));
  j["output_dir"] = c.output_dir;
  j["seeds"] = c.seeds;
  j["dataset"] = to_json(c.dataset);
  j["train_data"] = c.train_data;
  j["test_data"] = c.test_data;
  j["init_checkpoint"] = c.init_checkpoint;
  j["model"] = model_config_to_json(c.model);
  j["objective"] = {{"kind", std::string(to_string(c.objective.kind))}, {"combine_ratio", c.objective.combine_ratio}};
  const auto& t = c.training.train;
  j["training"] = {{"epochs", t.epochs},
                   {"batch_size", t.batch_size},
                   {"lr", t.adam.lr},
                   {"beta1", t.adam.beta1},
                   {"beta2", t.adam.beta2},
                   {"eps", t.adam.eps},
                   {"clip_norm", t.adam.clip_norm},
                   {"schedule", std::string(to_string(t.schedule))},
                   {"warmup_frac", t.warmup_frac},
                   {"log_interval", t.log_interval},
                   {"monitor_size", c.training.monitor_size},
                   {"monitor_detail", std::string(to_string(c.training.monitor_detail))},
                   {"resume_optimizer", c.training.resume_optimizer}};
  j["decode"] = {{"max_len", c.decode.max_len}, {"alpha", c.decode.alpha}};
  j["filter"] = {{"mode", std::string(to_string(c.filter.plan.mode))},
                 {"metric", std::string(to_string(c.filter.plan.metric))},
                 {"ratio", c.filter.plan.ratio},
                 {"seed", c.filter.plan.seed},
                 {"scores", c.filter.scores}};
  std::vector<std::string> modes;
  for (auto m : c.probe.modes) modes.emplace_back(to_string(m));
  const auto& m = c.probe.manipulation;
  j["probe"] = {{"examples", c.probe.examples},
                {"target_seed", c.probe.target_seed},
                {"modes", modes},
                {"noise_steps", m.noise_steps},
                {"mask_fraction", m.mask_fraction},
                {"mask_prefix_len", m.mask_prefix_len ? json(*m.mask_prefix_len) : json(nullptr)},
                {"aux_seed", m.aux_seed},
                {"beta_start", m.schedule.beta_start},
                {"beta_end", m.schedule.beta_end},
                {"schedule_length", m.schedule.length}};
  j["eval"] = {{"truncate_r", c.eval.truncate_r}, {"base_captions", c.eval.base_captions}};
  j["report_runs"] = c.report_runs;
  return j;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  const std::string w = "config";
  check_keys(j, {"kind", "output_dir", "seeds", "dataset", "train_data", "test_data", "init_checkpoint", "model",
                 "objective", "training", "decode", "filter", "probe", "eval", "report_runs"},
             w);
  c.kind = run_kind_from_string(get_enum(j, "kind", to_string(c.kind), w));
  get(j, "output_dir", c.output_dir, w);
  get(j, "seeds", c.seeds, w);
  if (j.contains("dataset")) c.dataset = dataset_config_from_json(j["dataset"]);
  get(j, "train_data", c.train_data, w);
  get(j, "test_data", c.test_data, w);
  get(j, "init_checkpoint", c.init_checkpoint, w);
  c.sync_model_to_dataset();
  if (j.contains("model")) {
    const auto& m = j["model"];
    check_keys(m, {"n_layers", "n_heads", "d_model", "d_ff", "max_seq", "vocab_size", "scene_slots", "feature_dim"},
               w + ".model");
    json merged = model_config_to_json(c.model);
    merged.update(m);
    c.model = model_config_from_json(merged);
  }
  if (j.contains("objective")) {
    const auto& o = j["objective"];
    check_keys(o, {"kind", "combine_ratio"}, w + ".objective");
    c.objective.kind = objective_from_string(get_enum(o, "kind", to_string(c.objective.kind), w));
    get(o, "combine_ratio", c.objective.combine_ratio, w);
  }
  if (j.contains("training")) {
    const auto& t = j["training"];
    check_keys(t, {"epochs", "batch_size", "lr", "beta1", "beta2", "eps", "clip_norm", "schedule", "warmup_frac",
                   "log_interval", "monitor_size", "monitor_detail", "resume_optimizer"},
               w + ".training");
    auto& tc = c.training.train;
    get(t, "epochs", tc.epochs, w);
    get(t, "batch_size", tc.batch_size, w);
    get(t, "lr", tc.adam.lr, w);
    get(t, "beta1", tc.adam.beta1, w);
    get(t, "beta2", tc.adam.beta2, w);
    get(t, "eps", tc.adam.eps, w);
    get(t, "clip_norm", tc.adam.clip_norm, w);
    tc.schedule = lr_schedule_from_string(get_enum(t, "schedule", to_string(tc.schedule), w));
    get(t, "warmup_frac", tc.warmup_frac, w);
    get(t, "log_interval", tc.log_interval, w);
    get(t, "monitor_size", c.training.monitor_size, w);
    c.training.monitor_detail = detail_from_string(get_enum(t, "monitor_detail", to_string(c.training.monitor_detail), w));
    get(t, "resume_optimizer", c.training.resume_optimizer, w);
  }
  if (j.contains("decode")) {
    check_keys(j["decode"], {"max_len", "alpha"}, w + ".decode");
    get(j["decode"], "max_len", c.decode.max_len, w);
    get(j["decode"], "alpha", c.decode.alpha, w);
  }
  if (j.contains("filter")) {
    const auto& f = j["filter"];
    check_keys(f, {"mode", "metric", "ratio", "seed", "scores"}, w + ".filter");
    c.filter.plan.mode = filter_mode_from_string(get_enum(f, "mode", to_string(c.filter.plan.mode), w));
    c.filter.plan.metric = filter_metric_from_string(get_enum(f, "metric", to_string(c.filter.plan.metric), w));
    get(f, "ratio", c.filter.plan.ratio, w);
    get(f, "seed", c.filter.plan.seed, w);
    get(f, "scores", c.filter.scores, w);
  }
  if (j.contains("probe")) {
    const auto& p = j["probe"];
    check_keys(p, {"examples", "target_seed", "modes", "noise_steps", "mask_fraction", "mask_prefix_len", "aux_seed",
                   "beta_start", "beta_end", "schedule_length"},
               w + ".probe");
    get(p, "examples", c.probe.examples, w);
    get(p, "target_seed", c.probe.target_seed, w);
    if (p.contains("modes")) {
      std::vector<std::string> modes;
      get(p, "modes", modes, w);
      c.probe.modes.clear();
      for (const auto& m : modes) c.probe.modes.push_back(manipulation_from_string(m));
    }
    auto& m = c.probe.manipulation;
    get(p, "noise_steps", m.noise_steps, w);
    get(p, "mask_fraction", m.mask_fraction, w);
    if (p.contains("mask_prefix_len") && !p["mask_prefix_len"].is_null()) {
      int v = 0;
      get(p, "mask_prefix_len", v, w);
      m.mask_prefix_len = v;
    }
    get(p, "aux_seed", m.aux_seed, w);
    get(p, "beta_start", m.schedule.beta_start, w);
    get(p, "beta_end", m.schedule.beta_end, w);
    get(p, "schedule_length", m.schedule.length, w);
  }
  if (j.contains("eval")) {
    check_keys(j["eval"], {"truncate_r", "base_captions"}, w + ".eval");
    get(j["eval"], "truncate_r", c.eval.truncate_r, w);
    get(j["eval"], "base_captions", c.eval.base_captions, w);
  }
  get(j, "report_runs", c.report_runs, w);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(f, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return run_config_from_json(j);
}

std::string config_hash(const RunConfig& c) {
  auto j = to_json(c);
  j.erase("seeds");
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string code_version() { return std::string("eostb-0.1.0+") + EOSTB_SOURCE_REVISION; }

std::string expand_seed(const std::string& templ, std::uint64_t seed) {
  std::string out = templ;
  const std::string key = "{seed}";
  for (std::size_t p = out.find(key); p != std::string::npos; p = out.find(key, p))
    out.replace(p, key.size(), std::to_string(seed));
  return out;
}

}  // namespace eostb
