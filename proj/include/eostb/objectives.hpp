#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "eostb/tensor.hpp"
#include "eostb/tinylm.hpp"

// Training objectives over one sequence of logits.
//
//   mle        -log softmax(z)[y] at every position
//   selective  same as mle where y == EOS; elsewhere the EOS logit is left
//              out of the partition function, so it is neither read nor
//              given any gradient
//   combined   per-example alternation between the two, keyed on the
//              example's ordinal
//
// Losses are averaged over positions.
namespace eostb {

enum class ObjectiveKind { mle, selective, combined };

std::string_view to_string(ObjectiveKind k);
ObjectiveKind objective_from_string(std::string_view s);

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::mle;
  // selective : mle proportion for `combined`; 1.0 is the 1:1 mix.
  double combine_ratio = 1.0;

  void validate() const;
};

// Per-position loss terms.
std::vector<double> mle_terms(const Matrix& logits, std::span<const int> labels);
std::vector<double> selective_terms(const Matrix& logits, std::span<const int> labels, int eos);

double mle_loss(const Matrix& logits, std::span<const int> labels);
double selective_loss(const Matrix& logits, std::span<const int> labels, int eos);
inline double mle_loss(const ForwardTrace& tr, std::span<const int> labels) { return mle_loss(tr.logits, labels); }
inline double selective_loss(const ForwardTrace& tr, std::span<const int> labels, int eos) {
  return selective_loss(tr.logits, labels, eos);
}

// Mean loss plus d(loss)/d(logits), written into d_logits.
double mle_loss_grad(const Matrix& logits, std::span<const int> labels, Matrix& d_logits);
double selective_loss_grad(const Matrix& logits, std::span<const int> labels, int eos, Matrix& d_logits);

// softmax over the vocabulary without EOS; the EOS entry is 0.
std::vector<double> restricted_softmax(std::span<const double> z, int eos);

// Which constituent the combined objective applies to example `ordinal`.
// Bresenham-style, so any prefix of length n has floor(n * share) selective
// examples with share = ratio / (1 + ratio).
ObjectiveKind combined_choice(std::size_t ordinal, double ratio);

double combined_loss(const Matrix& logits, std::span<const int> labels, int eos, double ratio,
                     std::size_t ordinal);

// Resolves the spec for one example into a LossFn usable by the model.
LossFn make_loss(const ObjectiveSpec& spec, int eos, std::size_t ordinal);

}  // namespace eostb
