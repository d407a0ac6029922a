#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "eostb/tensor.hpp"

// A small pre-LayerNorm causal transformer decoder. Scene feature rows are
// projected into the model width and prepended to the text, so one attention
// matrix per head covers scene slots, earlier sentences and the current one.
// Forward passes cache everything the hand-written reverse pass needs.
namespace eostb {

struct ModelConfig {
  int n_layers = 2;
  int n_heads = 4;
  int d_model = 32;
  int d_ff = 64;
  int max_seq = 40;
  int vocab_size = 64;
  int scene_slots = 6;
  int feature_dim = 40;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// A tensor's position inside the flat parameter buffer.
struct Slice {
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

struct LayerSlices {
  Slice ln1_g, ln1_b, wq, wk, wv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
};

struct NamedSlice {
  std::string name;
  Slice slice;
  enum class Init { normal, zeros, ones } init = Init::normal;
  double init_std = 0.0;
};

struct ParamLayout {
  Slice tok_emb, pos_emb, scene_w, scene_b, slot_emb;
  std::vector<LayerSlices> layers;
  Slice lnf_g, lnf_b, w_out;
  std::vector<NamedSlice> tensors;  // storage order
  std::size_t total = 0;

  static ParamLayout make(const ModelConfig& cfg);
  const NamedSlice& find(const std::string& name) const;
};

// Flat parameter (or gradient) storage plus the layout that names it.
struct Params {
  ModelConfig config;
  ParamLayout layout;
  std::vector<double> values;

  Params() = default;
  explicit Params(const ModelConfig& cfg);  // zero-filled

  MatView view(const Slice& s) { return {values.data() + s.offset, s.rows, s.cols}; }
  ConstMatView view(const Slice& s) const { return {values.data() + s.offset, s.rows, s.cols}; }
  MatView view(const std::string& name) { return view(layout.find(name).slice); }
  ConstMatView view(const std::string& name) const { return view(layout.find(name).slice); }

  Params zeros_like() const { return Params(config); }
  bool all_finite() const;
};

using Grads = Params;

Params init_params(const ModelConfig& cfg, std::uint64_t seed);

// Post-softmax additive nudge of one attention entry; used by the
// finite-difference check of attention saliency.
struct AttentionNudge {
  int layer = 0;
  int head = 0;
  int row = 0;
  int col = 0;
  double delta = 0.0;
};

struct ForwardOptions {
  // Per text position; true hides that token from every query.
  std::vector<bool> hidden_text;
  const AttentionNudge* nudge = nullptr;
};

struct LayerCache {
  Matrix x_in, ln1, q, k, v, o, x_mid, ln2, h_pre, h_act;
  std::vector<double> ln1_mean, ln1_rstd, ln2_mean, ln2_rstd;
  std::vector<Matrix> attn;  // per head, context x context
};

struct ForwardTrace {
  int scene_rows = 0;
  int text_len = 0;
  std::vector<int> tokens;
  std::vector<bool> hidden_text;
  Matrix features;
  Matrix logits;  // text_len x vocab
  std::vector<LayerCache> layers;
  Matrix x_final, lnf;
  std::vector<double> lnf_mean, lnf_rstd;

  int context_len() const { return scene_rows + text_len; }
  const Matrix& attention(int layer, int head) const { return layers[layer].attn[head]; }
  // Whether query i may attend to key j (context coordinates).
  bool allowed(int i, int j) const;
};

ForwardTrace forward(const Params& params, const Matrix& features, std::span<const int> tokens,
                     const ForwardOptions& opts = {});

// Reverse pass from d(loss)/d(logits). Gradients are accumulated into
// `grads`. When `d_attn` is non-null it receives d(loss)/d(A) per layer and
// head, A being the post-softmax attention matrix.
void backward(const Params& params, const ForwardTrace& trace, const Matrix& d_logits, Grads& grads,
              std::vector<std::vector<Matrix>>* d_attn = nullptr);

// Loss over one sequence. Writes d(loss)/d(logits) into d_logits (same shape
// as logits) and returns the loss.
using LossFn = std::function<double(const Matrix& logits, std::span<const int> labels, Matrix& d_logits)>;

struct LossAndGrads {
  double loss = 0.0;
  Grads grads;
};

LossAndGrads loss_and_grads(const Params& params, const Matrix& features, std::span<const int> tokens,
                            std::span<const int> labels, const LossFn& objective);

struct DecodeConfig {
  int max_len = 40;    // total caption length including BOS
  double alpha = 0.0;  // EOS logit bonus per step; 0 disables
};

// Greedy decoding. At the t-th generated token (t = 1, 2, ...) the EOS logit
// is raised by alpha * t before the argmax.
std::vector<int> generate(const Params& params, const Matrix& features, int bos, int eos,
                          const DecodeConfig& dcfg, const ForwardOptions& opts = {});

std::vector<double> eos_probability(const ForwardTrace& trace, std::span<const int> positions, int eos);

// Numerically stable log-softmax of one row.
std::vector<double> log_softmax(std::span<const double> z);

}  // namespace eostb
