#pragma once

#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "eostb/scenegen.hpp"

// CHAIR-style hallucination metrics for generated captions. Vocabulary words
// map one-to-one onto object classes, so extraction is an exact lookup.
namespace eostb {

struct EvalReport {
  double chair_s = 0.0;
  double chair_i = 0.0;
  double recall = 0.0;
  double mean_length = 0.0;  // tokens, BOS/EOS excluded
  int n_captions = 0;
  // Multiset counts per caption, for the average-count tables.
  double avg_correct_mentions = 0.0;
  double avg_halluc_mentions = 0.0;
};

struct OmissionReport {
  int n_halluc_omitted = 0;
  int n_correct_omitted = 0;
  double halluc_rate_of_omission = 0.0;
  double avg_correct_per_caption = 0.0;  // of the new captions
  double avg_halluc_per_caption = 0.0;
};

// Class ids of every object word, in order and with repeats.
std::vector<int> object_mentions(std::span<const int> caption, const Vocab& vocab);
std::set<int> extract_objects(std::span<const int> caption, const Vocab& vocab);
std::set<int> scene_classes(const Scene& scene);

// Content tokens: everything except BOS and EOS.
int content_length(std::span<const int> caption, const Vocab& vocab);

EvalReport chair_eval(const std::vector<std::vector<int>>& captions, const std::vector<Scene>& scenes,
                      const Vocab& vocab);

// Keeps the first ceil(R% * content length) content tokens, then EOS.
std::vector<int> truncate_caption(std::span<const int> caption, double r_percent, const Vocab& vocab);
std::vector<std::vector<int>> truncate_baseline(const std::vector<std::vector<int>>& captions, double r_percent,
                                                const Vocab& vocab);

OmissionReport omission_analysis(const std::vector<std::vector<int>>& base, const std::vector<std::vector<int>>& fresh,
                                 const std::vector<Scene>& scenes, const Vocab& vocab);

void write_eval_table(std::ostream& os, const EvalReport& r);
std::string eval_report_json(const EvalReport& r);

}  // namespace eostb
