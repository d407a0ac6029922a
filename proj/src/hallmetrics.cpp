#include "eostb/hallmetrics.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include <json.hpp>

#include "eostb/errors.hpp"

namespace eostb {

std::vector<int> object_mentions(std::span<const int> caption, const Vocab& vocab) {
  std::vector<int> out;
  for (int t : caption) {
    if (t < 0 || t >= vocab.size()) continue;
    const int c = vocab.class_of(t);
    if (c >= 0) out.push_back(c);
  }
  return out;
}

std::set<int> extract_objects(std::span<const int> caption, const Vocab& vocab) {
  const auto m = object_mentions(caption, vocab);
  return {m.begin(), m.end()};
}

std::set<int> scene_classes(const Scene& scene) {
  std::set<int> s;
  for (const auto& o : scene.objects) s.insert(o.class_id);
  return s;
}

int content_length(std::span<const int> caption, const Vocab& vocab) {
  int n = 0;
  for (int t : caption)
    if (t != vocab.bos() && t != vocab.eos()) ++n;
  return n;
}

EvalReport chair_eval(const std::vector<std::vector<int>>& captions, const std::vector<Scene>& scenes,
                      const Vocab& vocab) {
  if (captions.size() != scenes.size())
    throw AlignmentError("chair_eval: " + std::to_string(captions.size()) + " captions for " +
                         std::to_string(scenes.size()) + " scenes");
  EvalReport r;
  r.n_captions = static_cast<int>(captions.size());
  if (captions.empty()) return r;

  long halluc_captions = 0, mentioned = 0, halluc = 0, correct = 0, truth = 0, tokens = 0;
  long correct_multi = 0, halluc_multi = 0;
  for (std::size_t i = 0; i < captions.size(); ++i) {
    const auto gt = scene_classes(scenes[i]);
    const auto said = extract_objects(captions[i], vocab);
    int h = 0;
    for (int c : said) {
      if (gt.count(c))
        ++correct;
      else
        ++h;
    }
    for (int c : object_mentions(captions[i], vocab)) (gt.count(c) ? correct_multi : halluc_multi)++;
    halluc += h;
    halluc_captions += h > 0;
    mentioned += static_cast<long>(said.size());
    truth += static_cast<long>(gt.size());
    tokens += content_length(captions[i], vocab);
  }
  const double n = static_cast<double>(captions.size());
  r.chair_s = static_cast<double>(halluc_captions) / n;
  r.chair_i = mentioned > 0 ? static_cast<double>(halluc) / static_cast<double>(mentioned) : 0.0;
  r.recall = truth > 0 ? static_cast<double>(correct) / static_cast<double>(truth) : 0.0;
  r.mean_length = static_cast<double>(tokens) / n;
  r.avg_correct_mentions = static_cast<double>(correct_multi) / n;
  r.avg_halluc_mentions = static_cast<double>(halluc_multi) / n;
  return r;
}

std::vector<int> truncate_caption(std::span<const int> caption, double r_percent, const Vocab& vocab) {
  if (!(r_percent > 0.0 && r_percent <= 100.0)) throw ConfigError("truncate: R must lie in (0, 100]");
  const int len = content_length(caption, vocab);
  const int keep = static_cast<int>(std::ceil(r_percent / 100.0 * len - 1e-9));
  if (keep >= len) return {caption.begin(), caption.end()};
  std::vector<int> out;
  int kept = 0;
  for (int t : caption) {
    if (t == vocab.bos()) {
      out.push_back(t);
      continue;
    }
    if (t == vocab.eos() || kept == keep) break;
    out.push_back(t);
    ++kept;
  }
  out.push_back(vocab.eos());
  return out;
}

std::vector<std::vector<int>> truncate_baseline(const std::vector<std::vector<int>>& captions, double r_percent,
                                                const Vocab& vocab) {
  std::vector<std::vector<int>> out;
  out.reserve(captions.size());
  for (const auto& c : captions) out.push_back(truncate_caption(c, r_percent, vocab));
  return out;
}

OmissionReport omission_analysis(const std::vector<std::vector<int>>& base, const std::vector<std::vector<int>>& fresh,
                                 const std::vector<Scene>& scenes, const Vocab& vocab) {
  if (base.size() != fresh.size() || base.size() != scenes.size())
    throw AlignmentError("omission_analysis: caption lists and scenes differ in length");
  OmissionReport r;
  long correct_new = 0, halluc_new = 0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    const auto gt = scene_classes(scenes[i]);
    const auto b = extract_objects(base[i], vocab);
    const auto f = extract_objects(fresh[i], vocab);
    for (int c : b) {
      if (f.count(c)) continue;
      if (gt.count(c))
        ++r.n_correct_omitted;
      else
        ++r.n_halluc_omitted;
    }
    for (int c : object_mentions(fresh[i], vocab)) (gt.count(c) ? correct_new : halluc_new)++;
  }
  const int omitted = r.n_halluc_omitted + r.n_correct_omitted;
  r.halluc_rate_of_omission = omitted > 0 ? static_cast<double>(r.n_halluc_omitted) / omitted : 0.0;
  if (!base.empty()) {
    r.avg_correct_per_caption = static_cast<double>(correct_new) / static_cast<double>(base.size());
    r.avg_halluc_per_caption = static_cast<double>(halluc_new) / static_cast<double>(base.size());
  }
  return r;
}

void write_eval_table(std::ostream& os, const EvalReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "chair_s\tchair_i\trecall\tmean_length\tn_captions\n%.6f\t%.6f\t%.6f\t%.4f\t%d\n",
                r.chair_s, r.chair_i, r.recall, r.mean_length, r.n_captions);
  os << buf;
}

std::string eval_report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["chair_s"] = r.chair_s;
  j["chair_i"] = r.chair_i;
  j["recall"] = r.recall;
  j["mean_length"] = r.mean_length;
  j["n_captions"] = r.n_captions;
  j["avg_correct_mentions"] = r.avg_correct_mentions;
  j["avg_halluc_mentions"] = r.avg_halluc_mentions;
  return j.dump(2);
}

}  // namespace eostb
