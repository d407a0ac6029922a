#include "eostb/objectives.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "eostb/errors.hpp"

namespace eostb {

std::string_view to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::mle: return "mle";
    case ObjectiveKind::selective: return "selective";
    case ObjectiveKind::combined: return "combined";
  }
  return "?";
}

ObjectiveKind objective_from_string(std::string_view s) {
  if (s == "mle") return ObjectiveKind::mle;
  if (s == "selective") return ObjectiveKind::selective;
  if (s == "combined") return ObjectiveKind::combined;
  throw ConfigError("unknown objective '" + std::string(s) + "'");
}

void ObjectiveSpec::validate() const {
  if (!(combine_ratio > 0.0) || !std::isfinite(combine_ratio))
    throw ConfigError("objective: combine_ratio must be a positive finite number");
}

namespace {

void check_shape(const Matrix& logits, std::span<const int> labels) {
  if (static_cast<int>(labels.size()) != logits.rows)
    throw AlignmentError("objective: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(logits.rows) + " logit rows");
  for (int y : labels)
    if (y < 0 || y >= logits.cols) throw AlignmentError("objective: label outside vocabulary");
}

// log-sum-exp over z, skipping index `skip` (pass -1 to include all).
double lse_excluding(std::span<const double> z, int skip) {
  double mx = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < static_cast<int>(z.size()); ++j)
    if (j != skip) mx = std::max(mx, z[j]);
  double s = 0.0;
  for (int j = 0; j < static_cast<int>(z.size()); ++j)
    if (j != skip) s += std::exp(z[j] - mx);
  return mx + std::log(s);
}

// Both objectives share this path at EOS-labelled positions, so the terms
// agree bit-for-bit there.
double full_term(std::span<const double> z, int y) { return lse_excluding(z, -1) - z[y]; }
double restricted_term(std::span<const double> z, int y, int eos) { return lse_excluding(z, eos) - z[y]; }

void full_grad(std::span<const double> z, int y, double w, std::span<double> dz) {
  const double lse = lse_excluding(z, -1);
  for (int j = 0; j < static_cast<int>(z.size()); ++j) dz[j] = w * std::exp(z[j] - lse);
  dz[y] -= w;
}

void restricted_grad(std::span<const double> z, int y, int eos, double w, std::span<double> dz) {
  const double lse = lse_excluding(z, eos);
  for (int j = 0; j < static_cast<int>(z.size()); ++j) dz[j] = j == eos ? 0.0 : w * std::exp(z[j] - lse);
  dz[y] -= w;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

std::vector<double> mle_terms(const Matrix& logits, std::span<const int> labels) {
  check_shape(logits, labels);
  std::vector<double> out(labels.size());
  for (int i = 0; i < logits.rows; ++i) out[i] = full_term(logits.row(i), labels[i]);
  return out;
}

std::vector<double> selective_terms(const Matrix& logits, std::span<const int> labels, int eos) {
  check_shape(logits, labels);
  if (eos < 0 || eos >= logits.cols) throw ConfigError("selective: eos index outside vocabulary");
  std::vector<double> out(labels.size());
  for (int i = 0; i < logits.rows; ++i) {
    const int y = labels[i];
    out[i] = y == eos ? full_term(logits.row(i), y) : restricted_term(logits.row(i), y, eos);
  }
  return out;
}

double mle_loss(const Matrix& logits, std::span<const int> labels) { return mean(mle_terms(logits, labels)); }

double selective_loss(const Matrix& logits, std::span<const int> labels, int eos) {
  return mean(selective_terms(logits, labels, eos));
}

double mle_loss_grad(const Matrix& logits, std::span<const int> labels, Matrix& d_logits) {
  const auto terms = mle_terms(logits, labels);
  d_logits = Matrix(logits.rows, logits.cols);
  const double w = 1.0 / static_cast<double>(std::max<std::size_t>(labels.size(), 1));
  for (int i = 0; i < logits.rows; ++i) full_grad(logits.row(i), labels[i], w, d_logits.row(i));
  return mean(terms);
}

double selective_loss_grad(const Matrix& logits, std::span<const int> labels, int eos, Matrix& d_logits) {
  const auto terms = selective_terms(logits, labels, eos);
  d_logits = Matrix(logits.rows, logits.cols);
  const double w = 1.0 / static_cast<double>(std::max<std::size_t>(labels.size(), 1));
  for (int i = 0; i < logits.rows; ++i) {
    const int y = labels[i];
    if (y == eos)
      full_grad(logits.row(i), y, w, d_logits.row(i));
    else
      restricted_grad(logits.row(i), y, eos, w, d_logits.row(i));
  }
  return mean(terms);
}

std::vector<double> restricted_softmax(std::span<const double> z, int eos) {
  const double lse = lse_excluding(z, eos);
  std::vector<double> p(z.size());
  for (int j = 0; j < static_cast<int>(z.size()); ++j) p[j] = j == eos ? 0.0 : std::exp(z[j] - lse);
  return p;
}

ObjectiveKind combined_choice(std::size_t ordinal, double ratio) {
  if (!(ratio > 0.0)) throw ConfigError("combined: ratio must be > 0");
  const double share = ratio / (1.0 + ratio);
  const auto k = static_cast<double>(ordinal);
  const bool sel = std::floor((k + 1.0) * share) > std::floor(k * share);
  return sel ? ObjectiveKind::selective : ObjectiveKind::mle;
}

double combined_loss(const Matrix& logits, std::span<const int> labels, int eos, double ratio,
                     std::size_t ordinal) {
  return combined_choice(ordinal, ratio) == ObjectiveKind::selective ? selective_loss(logits, labels, eos)
                                                                      : mle_loss(logits, labels);
}

LossFn make_loss(const ObjectiveSpec& spec, int eos, std::size_t ordinal) {
  spec.validate();
  ObjectiveKind k = spec.kind;
  if (k == ObjectiveKind::combined) k = combined_choice(ordinal, spec.combine_ratio);
  if (k == ObjectiveKind::selective)
    return [eos](const Matrix& z, std::span<const int> y, Matrix& dz) { return selective_loss_grad(z, y, eos, dz); };
  return [](const Matrix& z, std::span<const int> y, Matrix& dz) { return mle_loss_grad(z, y, dz); };
}

}  // namespace eostb
