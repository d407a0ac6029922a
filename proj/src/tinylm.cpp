#include "eostb/tinylm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eostb/errors.hpp"
#include "eostb/kernels.hpp"
#include "eostb/rng.hpp"

namespace eostb {

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInitStd = 0.02;

}  // namespace

void ModelConfig::validate() const {
  if (n_layers < 1 || n_heads < 1 || d_model < 1 || d_ff < 1 || max_seq < 1 || vocab_size < 1 ||
      scene_slots < 1 || feature_dim < 1)
    throw ConfigError("model: all counts must be >= 1");
  if (d_model % n_heads != 0)
    throw ConfigError("model: d_model (" + std::to_string(d_model) + ") not divisible by n_heads (" +
                      std::to_string(n_heads) + ")");
}

ParamLayout ParamLayout::make(const ModelConfig& cfg) {
  cfg.validate();
  ParamLayout L;
  using Init = NamedSlice::Init;
  auto add = [&](const std::string& name, int r, int c, Init init, double sd = 0.0) {
    Slice s{L.total, r, c};
    L.total += s.size();
    L.tensors.push_back({name, s, init, sd});
    return s;
  };
  const int d = cfg.d_model;
  const double resid_sd = kInitStd / std::sqrt(2.0 * cfg.n_layers);
  L.tok_emb = add("tok_emb", cfg.vocab_size, d, Init::normal, kInitStd);
  L.pos_emb = add("pos_emb", cfg.max_seq, d, Init::normal, kInitStd);
  L.scene_w = add("scene_w", cfg.feature_dim, d, Init::normal, kInitStd);
  L.scene_b = add("scene_b", 1, d, Init::zeros);
  L.slot_emb = add("slot_emb", cfg.scene_slots, d, Init::normal, kInitStd);
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    LayerSlices ls;
    ls.ln1_g = add(p + "ln1_g", 1, d, Init::ones);
    ls.ln1_b = add(p + "ln1_b", 1, d, Init::zeros);
    ls.wq = add(p + "wq", d, d, Init::normal, kInitStd);
    ls.wk = add(p + "wk", d, d, Init::normal, kInitStd);
    ls.wv = add(p + "wv", d, d, Init::normal, kInitStd);
    ls.wo = add(p + "wo", d, d, Init::normal, resid_sd);
    ls.bo = add(p + "bo", 1, d, Init::zeros);
    ls.ln2_g = add(p + "ln2_g", 1, d, Init::ones);
    ls.ln2_b = add(p + "ln2_b", 1, d, Init::zeros);
    ls.w1 = add(p + "w1", d, cfg.d_ff, Init::normal, kInitStd);
    ls.b1 = add(p + "b1", 1, cfg.d_ff, Init::zeros);
    ls.w2 = add(p + "w2", cfg.d_ff, d, Init::normal, resid_sd);
    ls.b2 = add(p + "b2", 1, d, Init::zeros);
    L.layers.push_back(ls);
  }
  L.lnf_g = add("lnf_g", 1, d, Init::ones);
  L.lnf_b = add("lnf_b", 1, d, Init::zeros);
  L.w_out = add("w_out", d, cfg.vocab_size, Init::normal, kInitStd);
  return L;
}

const NamedSlice& ParamLayout::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw ConfigError("no parameter tensor named '" + name + "'");
}

Params::Params(const ModelConfig& cfg) : config(cfg), layout(ParamLayout::make(cfg)), values(layout.total, 0.0) {}

bool Params::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

Params init_params(const ModelConfig& cfg, std::uint64_t seed) {
  Params p(cfg);
  Rng rng(seed);
  for (const auto& t : p.layout.tensors) {
    double* dst = p.values.data() + t.slice.offset;
    for (std::size_t i = 0; i < t.slice.size(); ++i) {
      switch (t.init) {
        case NamedSlice::Init::normal: dst[i] = rng.normal(0.0, t.init_std); break;
        case NamedSlice::Init::zeros: dst[i] = 0.0; break;
        case NamedSlice::Init::ones: dst[i] = 1.0; break;
      }
    }
  }
  return p;
}

// ---------------------------------------------------------------- helpers

namespace {

void layer_norm(const Matrix& x, ConstMatView g, ConstMatView b, Matrix& y, std::vector<double>& mean,
                std::vector<double>& rstd) {
  const int n = x.rows, d = x.cols;
  y = Matrix(n, d);
  mean.assign(n, 0.0);
  rstd.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    auto xi = x.row(i);
    double mu = 0.0;
    for (double v : xi) mu += v;
    mu /= d;
    double var = 0.0;
    for (double v : xi) var += (v - mu) * (v - mu);
    var /= d;
    const double rs = 1.0 / std::sqrt(var + kLnEps);
    mean[i] = mu;
    rstd[i] = rs;
    for (int j = 0; j < d; ++j) y(i, j) = (xi[j] - mu) * rs * g(0, j) + b(0, j);
  }
}

// dx += LN backward; dg, db accumulate.
void layer_norm_backward(const Matrix& x, const std::vector<double>& mean, const std::vector<double>& rstd,
                         ConstMatView g, const Matrix& dy, Matrix& dx, MatView dg, MatView db) {
  const int n = x.rows, d = x.cols;
  std::vector<double> xhat(d), dxhat(d);
  for (int i = 0; i < n; ++i) {
    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
    for (int j = 0; j < d; ++j) {
      xhat[j] = (x(i, j) - mean[i]) * rstd[i];
      dxhat[j] = dy(i, j) * g(0, j);
      dg(0, j) += dy(i, j) * xhat[j];
      db(0, j) += dy(i, j);
      sum_dxhat += dxhat[j];
      sum_dxhat_xhat += dxhat[j] * xhat[j];
    }
    const double m1 = sum_dxhat / d, m2 = sum_dxhat_xhat / d;
    for (int j = 0; j < d; ++j) dx(i, j) += rstd[i] * (dxhat[j] - m1 - xhat[j] * m2);
  }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

double gelu(double x) {
  const double u = kGeluC * (x + 0.044715 * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_grad(double x) {
  const double u = kGeluC * (x + 0.044715 * x * x * x);
  const double t = std::tanh(u);
  const double du = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

void add_bias(Matrix& m, ConstMatView b) {
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) m(i, j) += b(0, j);
}

void bias_backward(const Matrix& dy, MatView db) {
  for (int i = 0; i < dy.rows; ++i)
    for (int j = 0; j < dy.cols; ++j) db(0, j) += dy(i, j);
}

}  // namespace

bool ForwardTrace::allowed(int i, int j) const {
  if (j < scene_rows) return true;
  if (i < scene_rows) return false;
  const int ti = i - scene_rows, tj = j - scene_rows;
  if (tj > ti) return false;
  return hidden_text.empty() || !hidden_text[tj];
}

std::vector<double> log_softmax(std::span<const double> z) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : z) mx = std::max(mx, v);
  double s = 0.0;
  for (double v : z) s += std::exp(v - mx);
  const double lse = mx + std::log(s);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
  return out;
}

// ---------------------------------------------------------------- forward

ForwardTrace forward(const Params& params, const Matrix& features, std::span<const int> tokens,
                     const ForwardOptions& opts) {
  const ModelConfig& cfg = params.config;
  const ParamLayout& L = params.layout;
  if (tokens.empty()) throw LengthError("forward: empty token sequence");
  if (static_cast<int>(tokens.size()) > cfg.max_seq)
    throw LengthError("forward: sequence length " + std::to_string(tokens.size()) + " exceeds max_seq " +
                      std::to_string(cfg.max_seq));
  if (features.rows < 1 || features.cols != cfg.feature_dim)
    throw ConfigError("forward: feature grid must be (>=1) x " + std::to_string(cfg.feature_dim));
  if (!opts.hidden_text.empty() && opts.hidden_text.size() != tokens.size())
    throw ConfigError("forward: hidden_text mask length mismatch");

  const int S = features.rows, T = static_cast<int>(tokens.size()), C = S + T;
  const int d = cfg.d_model, H = cfg.n_heads, dh = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  ForwardTrace tr;
  tr.scene_rows = S;
  tr.text_len = T;
  tr.tokens.assign(tokens.begin(), tokens.end());
  tr.hidden_text = opts.hidden_text;
  tr.features = features;

  Matrix x(C, d);
  {
    Matrix scene(S, d);
    kernels::gemm_nn(view(features), params.view(L.scene_w), view(scene));
    add_bias(scene, params.view(L.scene_b));
    // Extra scene rows (a second, concatenated scene) reuse the slot
    // embeddings cyclically.
    auto slot = params.view(L.slot_emb);
    for (int r = 0; r < S; ++r)
      for (int j = 0; j < d; ++j) scene(r, j) += slot(r % cfg.scene_slots, j);
    std::copy(scene.data.begin(), scene.data.end(), x.data.begin());
    auto tok = params.view(L.tok_emb);
    auto pos = params.view(L.pos_emb);
    for (int t = 0; t < T; ++t) {
      const int id = tokens[t];
      if (id < 0 || id >= cfg.vocab_size) throw ConfigError("forward: token id out of vocabulary");
      for (int j = 0; j < d; ++j) x(S + t, j) = tok(id, j) + pos(t, j);
    }
  }

  tr.layers.resize(cfg.n_layers);
  for (int l = 0; l < cfg.n_layers; ++l) {
    const LayerSlices& ls = L.layers[l];
    LayerCache& lc = tr.layers[l];
    lc.x_in = x;
    layer_norm(x, params.view(ls.ln1_g), params.view(ls.ln1_b), lc.ln1, lc.ln1_mean, lc.ln1_rstd);
    lc.q = Matrix(C, d);
    lc.k = Matrix(C, d);
    lc.v = Matrix(C, d);
    kernels::gemm_nn(view(lc.ln1), params.view(ls.wq), view(lc.q));
    kernels::gemm_nn(view(lc.ln1), params.view(ls.wk), view(lc.k));
    kernels::gemm_nn(view(lc.ln1), params.view(ls.wv), view(lc.v));

    lc.o = Matrix(C, d);
    lc.attn.assign(H, Matrix(C, C));
    std::vector<double> srow(C);
    for (int h = 0; h < H; ++h) {
      Matrix& A = lc.attn[h];
      const int off = h * dh;
      for (int i = 0; i < C; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < C; ++j) {
          if (!tr.allowed(i, j)) continue;
          double s = 0.0;
          for (int e = 0; e < dh; ++e) s += lc.q(i, off + e) * lc.k(j, off + e);
          srow[j] = s * scale;
          mx = std::max(mx, srow[j]);
        }
        double z = 0.0;
        for (int j = 0; j < C; ++j) {
          if (!tr.allowed(i, j)) continue;
          const double e = std::exp(srow[j] - mx);
          A(i, j) = e;
          z += e;
        }
        for (int j = 0; j < C; ++j) A(i, j) /= z;
      }
      if (opts.nudge && opts.nudge->layer == l && opts.nudge->head == h)
        A(opts.nudge->row, opts.nudge->col) += opts.nudge->delta;
      for (int i = 0; i < C; ++i) {
        for (int j = 0; j < C; ++j) {
          const double a = A(i, j);
          if (a == 0.0) continue;
          for (int e = 0; e < dh; ++e) lc.o(i, off + e) += a * lc.v(j, off + e);
        }
      }
    }

    Matrix proj(C, d);
    kernels::gemm_nn(view(lc.o), params.view(ls.wo), view(proj));
    add_bias(proj, params.view(ls.bo));
    for (std::size_t t = 0; t < x.data.size(); ++t) x.data[t] += proj.data[t];
    lc.x_mid = x;

    layer_norm(x, params.view(ls.ln2_g), params.view(ls.ln2_b), lc.ln2, lc.ln2_mean, lc.ln2_rstd);
    lc.h_pre = Matrix(C, cfg.d_ff);
    kernels::gemm_nn(view(lc.ln2), params.view(ls.w1), view(lc.h_pre));
    add_bias(lc.h_pre, params.view(ls.b1));
    lc.h_act = lc.h_pre;
    for (double& v : lc.h_act.data) v = gelu(v);
    Matrix ff(C, d);
    kernels::gemm_nn(view(lc.h_act), params.view(ls.w2), view(ff));
    add_bias(ff, params.view(ls.b2));
    for (std::size_t t = 0; t < x.data.size(); ++t) x.data[t] += ff.data[t];
  }

  // Only text rows produce logits.
  tr.x_final = Matrix(T, d);
  std::copy(x.data.begin() + static_cast<std::ptrdiff_t>(S) * d, x.data.end(), tr.x_final.data.begin());
  layer_norm(tr.x_final, params.view(L.lnf_g), params.view(L.lnf_b), tr.lnf, tr.lnf_mean, tr.lnf_rstd);
  tr.logits = Matrix(T, cfg.vocab_size);
  kernels::gemm_nn(view(tr.lnf), params.view(L.w_out), view(tr.logits));
  return tr;
}

// ---------------------------------------------------------------- backward

void backward(const Params& params, const ForwardTrace& tr, const Matrix& d_logits, Grads& grads,
              std::vector<std::vector<Matrix>>* d_attn) {
  const ModelConfig& cfg = params.config;
  const ParamLayout& L = params.layout;
  const int S = tr.scene_rows, T = tr.text_len, C = S + T;
  const int d = cfg.d_model, H = cfg.n_heads, dh = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  if (d_logits.rows != T || d_logits.cols != cfg.vocab_size)
    throw ConfigError("backward: d_logits shape mismatch");

  kernels::gemm_tn(view(tr.lnf), view(d_logits), grads.view(L.w_out), true);
  Matrix d_lnf(T, d);
  kernels::gemm_nt(view(d_logits), params.view(L.w_out), view(d_lnf));

  Matrix dx(C, d);  // gradient w.r.t. the residual stream
  {
    Matrix dxt(T, d);
    layer_norm_backward(tr.x_final, tr.lnf_mean, tr.lnf_rstd, params.view(L.lnf_g), d_lnf, dxt,
                        grads.view(L.lnf_g), grads.view(L.lnf_b));
    std::copy(dxt.data.begin(), dxt.data.end(), dx.data.begin() + static_cast<std::ptrdiff_t>(S) * d);
  }

  if (d_attn) d_attn->assign(cfg.n_layers, std::vector<Matrix>(H, Matrix(C, C)));

  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const LayerSlices& ls = L.layers[l];
    const LayerCache& lc = tr.layers[l];

    // FFN block: x_out = x_mid + gelu(LN2(x_mid) W1 + b1) W2 + b2
    bias_backward(dx, grads.view(ls.b2));
    kernels::gemm_tn(view(lc.h_act), view(dx), grads.view(ls.w2), true);
    Matrix dh_pre(C, cfg.d_ff);
    kernels::gemm_nt(view(dx), params.view(ls.w2), view(dh_pre));
    for (std::size_t t = 0; t < dh_pre.data.size(); ++t) dh_pre.data[t] *= gelu_grad(lc.h_pre.data[t]);
    bias_backward(dh_pre, grads.view(ls.b1));
    kernels::gemm_tn(view(lc.ln2), view(dh_pre), grads.view(ls.w1), true);
    Matrix dln2(C, d);
    kernels::gemm_nt(view(dh_pre), params.view(ls.w1), view(dln2));
    layer_norm_backward(lc.x_mid, lc.ln2_mean, lc.ln2_rstd, params.view(ls.ln2_g), dln2, dx,
                        grads.view(ls.ln2_g), grads.view(ls.ln2_b));

    // Attention block: x_mid = x_in + (A V) Wo + bo
    bias_backward(dx, grads.view(ls.bo));
    kernels::gemm_tn(view(lc.o), view(dx), grads.view(ls.wo), true);
    Matrix d_o(C, d);
    kernels::gemm_nt(view(dx), params.view(ls.wo), view(d_o));

    Matrix dq(C, d), dk(C, d), dv(C, d);
    std::vector<double> da_row(C);
    for (int h = 0; h < H; ++h) {
      const Matrix& A = lc.attn[h];
      const int off = h * dh;
      for (int i = 0; i < C; ++i) {
        double dot = 0.0;
        for (int j = 0; j < C; ++j) {
          if (!tr.allowed(i, j)) {
            da_row[j] = 0.0;
            continue;
          }
          double g = 0.0;
          for (int e = 0; e < dh; ++e) g += d_o(i, off + e) * lc.v(j, off + e);
          da_row[j] = g;
          dot += g * A(i, j);
          const double a = A(i, j);
          for (int e = 0; e < dh; ++e) dv(j, off + e) += a * d_o(i, off + e);
        }
        if (d_attn) {
          auto& D = (*d_attn)[l][h];
          for (int j = 0; j < C; ++j) D(i, j) = da_row[j];
        }
        for (int j = 0; j < C; ++j) {
          if (!tr.allowed(i, j)) continue;
          const double ds = A(i, j) * (da_row[j] - dot) * scale;
          if (ds == 0.0) continue;
          for (int e = 0; e < dh; ++e) {
            dq(i, off + e) += ds * lc.k(j, off + e);
            dk(j, off + e) += ds * lc.q(i, off + e);
          }
        }
      }
    }

    kernels::gemm_tn(view(lc.ln1), view(dq), grads.view(ls.wq), true);
    kernels::gemm_tn(view(lc.ln1), view(dk), grads.view(ls.wk), true);
    kernels::gemm_tn(view(lc.ln1), view(dv), grads.view(ls.wv), true);
    Matrix dln1(C, d);
    kernels::gemm_nt(view(dq), params.view(ls.wq), view(dln1));
    kernels::gemm_nt(view(dk), params.view(ls.wk), view(dln1), true);
    kernels::gemm_nt(view(dv), params.view(ls.wv), view(dln1), true);
    layer_norm_backward(lc.x_in, lc.ln1_mean, lc.ln1_rstd, params.view(ls.ln1_g), dln1, dx,
                        grads.view(ls.ln1_g), grads.view(ls.ln1_b));
  }

  // Embeddings.
  {
    auto dtok = grads.view(L.tok_emb);
    auto dpos = grads.view(L.pos_emb);
    for (int t = 0; t < T; ++t) {
      const int id = tr.tokens[t];
      for (int j = 0; j < d; ++j) {
        dtok(id, j) += dx(S + t, j);
        dpos(t, j) += dx(S + t, j);
      }
    }
    // Scene rows: x = F W + b + slot.
    Matrix dscene(S, d);
    std::copy(dx.data.begin(), dx.data.begin() + static_cast<std::ptrdiff_t>(S) * d, dscene.data.begin());
    auto dslot = grads.view(L.slot_emb);
    for (int r = 0; r < S; ++r)
      for (int j = 0; j < d; ++j) dslot(r % cfg.scene_slots, j) += dscene(r, j);
    bias_backward(dscene, grads.view(L.scene_b));
    kernels::gemm_tn(view(tr.features), view(dscene), grads.view(L.scene_w), true);
  }
}

}  // namespace eostb

// ---------------------------------------------------------------- API

namespace eostb {

LossAndGrads loss_and_grads(const Params& params, const Matrix& features, std::span<const int> tokens,
                            std::span<const int> labels, const LossFn& objective) {
  if (labels.size() != tokens.size()) throw AlignmentError("loss_and_grads: labels/tokens length mismatch");
  const ForwardTrace tr = forward(params, features, tokens);
  Matrix d_logits(tr.logits.rows, tr.logits.cols);
  LossAndGrads out;
  out.loss = objective(tr.logits, labels, d_logits);
  if (!std::isfinite(out.loss)) throw NumericError("loss_and_grads: non-finite loss");
  out.grads = params.zeros_like();
  backward(params, tr, d_logits, out.grads);
  return out;
}

std::vector<int> generate(const Params& params, const Matrix& features, int bos, int eos,
                          const DecodeConfig& dcfg, const ForwardOptions& opts) {
  const int max_len = std::min(dcfg.max_len, params.config.max_seq);
  if (max_len < 1) throw ConfigError("generate: max_len must be >= 1");
  std::vector<int> seq{bos};
  ForwardOptions step_opts;
  step_opts.nudge = opts.nudge;
  for (int t = 1; static_cast<int>(seq.size()) < max_len; ++t) {
    if (!opts.hidden_text.empty()) {
      step_opts.hidden_text.assign(seq.size(), false);
      for (std::size_t i = 0; i < seq.size() && i < opts.hidden_text.size(); ++i)
        step_opts.hidden_text[i] = opts.hidden_text[i];
    }
    const ForwardTrace tr = forward(params, features, seq, step_opts);
    auto z = tr.logits.row(tr.text_len - 1);
    int best = -1;
    double best_v = -std::numeric_limits<double>::infinity();
    for (int v = 0; v < static_cast<int>(z.size()); ++v) {
      double zv = z[v];
      if (v == eos && dcfg.alpha != 0.0) zv += dcfg.alpha * t;
      if (best < 0 || zv > best_v) {
        best = v;
        best_v = zv;
      }
    }
    seq.push_back(best);
    if (best == eos) break;
  }
  return seq;
}

std::vector<double> eos_probability(const ForwardTrace& trace, std::span<const int> positions, int eos) {
  std::vector<double> out;
  out.reserve(positions.size());
  for (int p : positions) {
    if (p < 0 || p >= trace.text_len) throw LengthError("eos_probability: position out of range");
    const auto lp = log_softmax(trace.logits.row(p));
    out.push_back(std::exp(lp.at(eos)));
  }
  return out;
}

}  // namespace eostb
