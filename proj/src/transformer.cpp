#include "worksight/transformer.hpp"

#include "worksight/error.hpp"
#include "worksight/text_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

namespace worksight::nn {
namespace {

constexpr double kLayerNormEps = 1e-5;

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = &b.data[k * b.cols];
      double* crow = &c.data[i * c.cols];
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

// C += scale * A^T * B
void add_matmul_tn(Matrix& c, const Matrix& a, const Matrix& b, double scale) {
  for (std::size_t k = 0; k < a.rows; ++k) {
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double aki = scale * a(k, i);
      if (aki == 0.0) continue;
      const double* brow = &b.data[k * b.cols];
      double* crow = &c.data[i * c.cols];
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
    }
  }
}

// C = A * B^T
Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.rows; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) s += a(i, k) * b(j, k);
      c(i, j) = s;
    }
  return c;
}

void add_row_bias(Matrix& m, const Matrix& bias) {
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) m(i, j) += bias.data[j];
}

void add_col_sums(Matrix& bias_grad, const Matrix& m, double scale) {
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) bias_grad.data[j] += scale * m(i, j);
}

void add_into(Matrix& a, const Matrix& b) {
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

Matrix linear(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y = matmul(x, w);
  add_row_bias(y, b);
  return y;
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

double gelu(double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x))); }

double gelu_grad(double x) {
  const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
}

std::vector<double> softmax(const std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - m));
  for (double& v : p) v /= s;
  return p;
}

struct LayerNormCache {
  Matrix xhat;
  std::vector<double> inv_sigma;
};

Matrix layer_norm(const Matrix& x, const Matrix& g, const Matrix& b, LayerNormCache* cache) {
  Matrix y(x.rows, x.cols);
  if (cache) {
    cache->xhat = Matrix(x.rows, x.cols);
    cache->inv_sigma.assign(x.rows, 0.0);
  }
  const double n = static_cast<double>(x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) mu += x(i, j);
    mu /= n;
    double var = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) var += (x(i, j) - mu) * (x(i, j) - mu);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t j = 0; j < x.cols; ++j) {
      const double xh = (x(i, j) - mu) * inv;
      y(i, j) = g.data[j] * xh + b.data[j];
      if (cache) cache->xhat(i, j) = xh;
    }
    if (cache) cache->inv_sigma[i] = inv;
  }
  return y;
}

// Returns dL/dx; accumulates dL/dg and dL/db scaled by `w`.
Matrix layer_norm_backward(const Matrix& dy, const Matrix& g, const LayerNormCache& c, Matrix& dg, Matrix& db,
                           double w) {
  Matrix dx(dy.rows, dy.cols);
  const double n = static_cast<double>(dy.cols);
  std::vector<double> dxhat(dy.cols);
  for (std::size_t i = 0; i < dy.rows; ++i) {
    double mean_d = 0.0;
    double mean_dx = 0.0;
    for (std::size_t j = 0; j < dy.cols; ++j) {
      dxhat[j] = dy(i, j) * g.data[j];
      mean_d += dxhat[j];
      mean_dx += dxhat[j] * c.xhat(i, j);
      dg.data[j] += w * dy(i, j) * c.xhat(i, j);
      db.data[j] += w * dy(i, j);
    }
    mean_d /= n;
    mean_dx /= n;
    for (std::size_t j = 0; j < dy.cols; ++j)
      dx(i, j) = c.inv_sigma[i] * (dxhat[j] - mean_d - c.xhat(i, j) * mean_dx);
  }
  return dx;
}

// Inverted dropout mask; empty when disabled.
Matrix dropout_mask(std::size_t rows, std::size_t cols, double rate, std::mt19937_64* rng) {
  if (!rng || rate <= 0.0) return {};
  Matrix mask(rows, cols);
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  for (double& v : mask.data) v = keep(*rng) ? scale : 0.0;
  return mask;
}

void apply_mask(Matrix& m, const Matrix& mask) {
  if (mask.data.empty()) return;
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] *= mask.data[i];
}

struct LayerCache {
  Matrix x;        // layer input
  Matrix q, k, v;  // projections
  std::vector<Matrix> attn;  // per head, n x n
  Matrix heads;    // concatenated head outputs
  Matrix attn_mask;
  LayerNormCache ln1;
  Matrix y1;       // after first norm
  Matrix z1;       // pre-activation of the feed-forward
  Matrix h1;       // gelu(z1)
  Matrix ffn_mask;
  LayerNormCache ln2;
};

}  // namespace

void ModelConfig::validate() const {
  if (d_in == 0 || d_model == 0 || n_heads == 0 || n_layers == 0 || d_ffn == 0 || n_classes == 0 || n_tokens == 0)
    throw ValidationError("model config: all dimensions must be >= 1");
  if (d_model % n_heads != 0) throw ValidationError("model config: d_model must be divisible by n_heads");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ValidationError("model config: dropout_rate must be in [0, 1)");
}

std::size_t TransformerClassifier::add_param(std::string name, std::size_t rows, std::size_t cols) {
  params_.emplace_back(rows, cols);
  names_.push_back(std::move(name));
  return params_.size() - 1;
}

TransformerClassifier::TransformerClassifier(const ModelConfig& config) : config_(config) {
  config_.validate();
  const auto& c = config_;
  w_in_ = add_param("input.weight", c.d_in, c.d_model);
  b_in_ = add_param("input.bias", 1, c.d_model);
  pos_ = add_param("positional", c.n_tokens, c.d_model);
  for (std::size_t l = 0; l < c.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    LayerIndex li{};
    li.wq = add_param(p + "attn.wq", c.d_model, c.d_model);
    li.bq = add_param(p + "attn.bq", 1, c.d_model);
    li.wk = add_param(p + "attn.wk", c.d_model, c.d_model);
    li.bk = add_param(p + "attn.bk", 1, c.d_model);
    li.wv = add_param(p + "attn.wv", c.d_model, c.d_model);
    li.bv = add_param(p + "attn.bv", 1, c.d_model);
    li.wo = add_param(p + "attn.wo", c.d_model, c.d_model);
    li.bo = add_param(p + "attn.bo", 1, c.d_model);
    li.ln1_g = add_param(p + "norm1.gamma", 1, c.d_model);
    li.ln1_b = add_param(p + "norm1.beta", 1, c.d_model);
    li.w1 = add_param(p + "ffn.w1", c.d_model, c.d_ffn);
    li.b1 = add_param(p + "ffn.b1", 1, c.d_ffn);
    li.w2 = add_param(p + "ffn.w2", c.d_ffn, c.d_model);
    li.b2 = add_param(p + "ffn.b2", 1, c.d_model);
    li.ln2_g = add_param(p + "norm2.gamma", 1, c.d_model);
    li.ln2_b = add_param(p + "norm2.beta", 1, c.d_model);
    layers_.push_back(li);
  }
  w_cls_ = add_param("classifier.weight", c.d_model, c.n_classes);
  b_cls_ = add_param("classifier.bias", 1, c.n_classes);

  std::mt19937_64 rng(c.seed);
  auto fill_uniform = [&](std::size_t idx, double bound) {
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& v : params_[idx].data) v = u(rng);
  };
  auto fan_in = [](std::size_t n) { return 1.0 / std::sqrt(static_cast<double>(n)); };
  fill_uniform(w_in_, fan_in(c.d_in));
  fill_uniform(b_in_, fan_in(c.d_in));
  if (c.positional) fill_uniform(pos_, 0.1);
  for (const auto& li : layers_) {
    for (std::size_t idx : {li.wq, li.bq, li.wk, li.bk, li.wv, li.bv, li.wo, li.bo}) fill_uniform(idx, fan_in(c.d_model));
    std::fill(params_[li.ln1_g].data.begin(), params_[li.ln1_g].data.end(), 1.0);
    fill_uniform(li.w1, fan_in(c.d_model));
    fill_uniform(li.b1, fan_in(c.d_model));
    fill_uniform(li.w2, fan_in(c.d_ffn));
    fill_uniform(li.b2, fan_in(c.d_ffn));
    std::fill(params_[li.ln2_g].data.begin(), params_[li.ln2_g].data.end(), 1.0);
  }
  fill_uniform(w_cls_, fan_in(c.d_model));
  fill_uniform(b_cls_, fan_in(c.d_model));
}

std::vector<Matrix> TransformerClassifier::zero_grads() const {
  std::vector<Matrix> g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.emplace_back(p.rows, p.cols);
  return g;
}

std::size_t TransformerClassifier::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

double TransformerClassifier::loss_and_grad(const Matrix& tokens, std::size_t label, std::vector<Matrix>* grads,
                                            double weight, std::mt19937_64* dropout_rng) const {
  if (label >= config_.n_classes) throw ValidationError("label out of range");
  return run(tokens, label, grads, weight, dropout_rng, nullptr);
}

double TransformerClassifier::run(const Matrix& tokens, std::size_t label, std::vector<Matrix>* grads, double weight,
                                  std::mt19937_64* dropout_rng, std::vector<double>* logits_out) const {
  const auto& c = config_;
  if (tokens.rows != c.n_tokens || tokens.cols != c.d_in)
    throw ValidationError("dimension mismatch: expected " + std::to_string(c.n_tokens) + "x" + std::to_string(c.d_in) +
                          " tokens, got " + std::to_string(tokens.rows) + "x" + std::to_string(tokens.cols));
  const bool backward = grads != nullptr;
  const std::size_t n = c.n_tokens;
  const std::size_t dh = c.d_model / c.n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const double rate = c.dropout_rate;

  // ---- forward ----
  Matrix x = linear(tokens, params_[w_in_], params_[b_in_]);
  if (c.positional) add_into(x, params_[pos_]);
  const Matrix embed_mask = dropout_mask(n, c.d_model, rate, dropout_rng);
  apply_mask(x, embed_mask);

  std::vector<LayerCache> caches(layers_.size());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& li = layers_[l];
    auto& lc = caches[l];
    lc.x = x;
    lc.q = linear(x, params_[li.wq], params_[li.bq]);
    lc.k = linear(x, params_[li.wk], params_[li.bk]);
    lc.v = linear(x, params_[li.wv], params_[li.bv]);
    lc.heads = Matrix(n, c.d_model);
    lc.attn.assign(c.n_heads, Matrix(n, n));
    for (std::size_t h = 0; h < c.n_heads; ++h) {
      Matrix& a = lc.attn[h];
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> s(n);
        for (std::size_t j = 0; j < n; ++j) {
          double dot = 0.0;
          for (std::size_t e = 0; e < dh; ++e) dot += lc.q(i, h * dh + e) * lc.k(j, h * dh + e);
          s[j] = dot * scale;
        }
        const auto p = softmax(s);
        for (std::size_t j = 0; j < n; ++j) a(i, j) = p[j];
        for (std::size_t e = 0; e < dh; ++e) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += p[j] * lc.v(j, h * dh + e);
          lc.heads(i, h * dh + e) = acc;
        }
      }
    }
    Matrix o = linear(lc.heads, params_[li.wo], params_[li.bo]);
    lc.attn_mask = dropout_mask(n, c.d_model, rate, dropout_rng);
    apply_mask(o, lc.attn_mask);
    add_into(o, x);
    lc.y1 = layer_norm(o, params_[li.ln1_g], params_[li.ln1_b], backward ? &lc.ln1 : nullptr);

    lc.z1 = linear(lc.y1, params_[li.w1], params_[li.b1]);
    lc.h1 = lc.z1;
    for (double& v : lc.h1.data) v = gelu(v);
    Matrix f = linear(lc.h1, params_[li.w2], params_[li.b2]);
    lc.ffn_mask = dropout_mask(n, c.d_model, rate, dropout_rng);
    apply_mask(f, lc.ffn_mask);
    add_into(f, lc.y1);
    x = layer_norm(f, params_[li.ln2_g], params_[li.ln2_b], backward ? &lc.ln2 : nullptr);
  }

  Matrix pooled(1, c.d_model);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c.d_model; ++j) pooled.data[j] += x(i, j) / static_cast<double>(n);
  const Matrix z = linear(pooled, params_[w_cls_], params_[b_cls_]);
  if (logits_out) {
    *logits_out = z.data;
    return 0.0;
  }

  // log-softmax for a stable loss
  const double zmax = *std::max_element(z.data.begin(), z.data.end());
  double sum = 0.0;
  for (double v : z.data) sum += std::exp(v - zmax);
  const double log_norm = zmax + std::log(sum);
  const double loss = log_norm - z.data[label];
  if (!backward) return loss;

  // ---- backward ----
  auto& g = *grads;
  const double w = weight;
  Matrix dz(1, c.n_classes);
  for (std::size_t k = 0; k < c.n_classes; ++k)
    dz.data[k] = std::exp(z.data[k] - log_norm) - (k == label ? 1.0 : 0.0);
  add_matmul_tn(g[w_cls_], pooled, dz, w);
  add_col_sums(g[b_cls_], dz, w);
  const Matrix dpooled = matmul_nt(dz, params_[w_cls_]);

  Matrix dx(n, c.d_model);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < c.d_model; ++j) dx(i, j) = dpooled.data[j] / static_cast<double>(n);

  for (std::size_t l = layers_.size(); l-- > 0;) {
    const auto& li = layers_[l];
    const auto& lc = caches[l];
    // second sub-block: x_out = LN2(y1 + drop(ffn(y1)))
    const Matrix dsum2 = layer_norm_backward(dx, params_[li.ln2_g], lc.ln2, g[li.ln2_g], g[li.ln2_b], w);
    Matrix df = dsum2;
    apply_mask(df, lc.ffn_mask);
    add_matmul_tn(g[li.w2], lc.h1, df, w);
    add_col_sums(g[li.b2], df, w);
    Matrix dz1 = matmul_nt(df, params_[li.w2]);
    for (std::size_t i = 0; i < dz1.data.size(); ++i) dz1.data[i] *= gelu_grad(lc.z1.data[i]);
    add_matmul_tn(g[li.w1], lc.y1, dz1, w);
    add_col_sums(g[li.b1], dz1, w);
    Matrix dy1 = matmul_nt(dz1, params_[li.w1]);
    add_into(dy1, dsum2);

    // first sub-block: y1 = LN1(x + drop(attn(x)))
    const Matrix dsum1 = layer_norm_backward(dy1, params_[li.ln1_g], lc.ln1, g[li.ln1_g], g[li.ln1_b], w);
    Matrix dout = dsum1;
    apply_mask(dout, lc.attn_mask);
    add_matmul_tn(g[li.wo], lc.heads, dout, w);
    add_col_sums(g[li.bo], dout, w);
    const Matrix dheads = matmul_nt(dout, params_[li.wo]);

    Matrix dq(n, c.d_model), dk(n, c.d_model), dv(n, c.d_model);
    for (std::size_t h = 0; h < c.n_heads; ++h) {
      const Matrix& a = lc.attn[h];
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> da(n);
        for (std::size_t j = 0; j < n; ++j) {
          double s = 0.0;
          for (std::size_t e = 0; e < dh; ++e) s += dheads(i, h * dh + e) * lc.v(j, h * dh + e);
          da[j] = s;
          for (std::size_t e = 0; e < dh; ++e) dv(j, h * dh + e) += a(i, j) * dheads(i, h * dh + e);
        }
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += da[j] * a(i, j);
        for (std::size_t j = 0; j < n; ++j) {
          const double ds = a(i, j) * (da[j] - dot) * scale;
          if (ds == 0.0) continue;
          for (std::size_t e = 0; e < dh; ++e) {
            dq(i, h * dh + e) += ds * lc.k(j, h * dh + e);
            dk(j, h * dh + e) += ds * lc.q(i, h * dh + e);
          }
        }
      }
    }
    add_matmul_tn(g[li.wq], lc.x, dq, w);
    add_col_sums(g[li.bq], dq, w);
    add_matmul_tn(g[li.wk], lc.x, dk, w);
    add_col_sums(g[li.bk], dk, w);
    add_matmul_tn(g[li.wv], lc.x, dv, w);
    add_col_sums(g[li.bv], dv, w);
    dx = dsum1;
    add_into(dx, matmul_nt(dq, params_[li.wq]));
    add_into(dx, matmul_nt(dk, params_[li.wk]));
    add_into(dx, matmul_nt(dv, params_[li.wv]));
  }

  apply_mask(dx, embed_mask);
  add_matmul_tn(g[w_in_], tokens, dx, w);
  add_col_sums(g[b_in_], dx, w);
  if (c.positional)
    for (std::size_t i = 0; i < dx.data.size(); ++i) g[pos_].data[i] += w * dx.data[i];
  return loss;
}

std::vector<double> TransformerClassifier::logits(const Matrix& tokens) const {
  std::vector<double> z;
  run(tokens, 0, nullptr, 1.0, nullptr, &z);
  return z;
}

std::vector<double> TransformerClassifier::predict_proba(const Matrix& tokens) const {
  return softmax(logits(tokens));
}

int TransformerClassifier::predict(const Matrix& tokens) const {
  const auto z = logits(tokens);
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

Adam::Adam(const std::vector<Matrix>& params, const AdamConfig& config) : config_(config) {
  for (const auto& p : params) {
    m_.emplace_back(p.rows, p.cols);
    v_.emplace_back(p.rows, p.cols);
  }
}

void Adam::step(std::vector<Matrix>& params, const std::vector<Matrix>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw ValidationError("adam: tensor count mismatch");
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].data;
    const auto& g = grads[i].data;
    auto& m = m_[i].data;
    auto& v = v_[i].data;
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p[j] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

// ---- checkpoint ----

namespace {

constexpr char kMagic[8] = {'W', 'S', 'T', 'F', 'M', 'R', '0', '1'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

struct Reader {
  const std::string& bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > bytes.size()) throw DataError("truncated checkpoint");
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes[pos++]);
  }
};

}  // namespace

std::string serialize_checkpoint(const TransformerClassifier& model) {
  const auto& c = model.config();
  std::string out(kMagic, sizeof kMagic);
  for (std::uint64_t v : {c.d_in, c.d_model, c.n_heads, c.n_layers, c.d_ffn, c.n_classes, c.n_tokens})
    put_u64(out, v);
  put_u64(out, c.seed);
  put_f64(out, c.dropout_rate);
  out.push_back(c.positional ? 1 : 0);
  put_u64(out, model.parameters().size());
  for (const auto& p : model.parameters()) {
    put_u64(out, p.rows);
    put_u64(out, p.cols);
    for (double d : p.data) put_f64(out, d);
  }
  return out;
}

void save_checkpoint(const TransformerClassifier& model, const std::filesystem::path& path) {
  text::write_file(path, serialize_checkpoint(model));
}

TransformerClassifier parse_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw DataError("not a worksight model checkpoint");
  Reader r{bytes, sizeof kMagic};
  ModelConfig c;
  c.d_in = r.u64();
  c.d_model = r.u64();
  c.n_heads = r.u64();
  c.n_layers = r.u64();
  c.d_ffn = r.u64();
  c.n_classes = r.u64();
  c.n_tokens = r.u64();
  c.seed = r.u64();
  c.dropout_rate = r.f64();
  c.positional = r.u8() != 0;
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw DataError(std::string("corrupt checkpoint header: ") + e.what());
  }
  TransformerClassifier model(c);
  const std::uint64_t count = r.u64();
  auto& params = model.parameters();
  if (count != params.size()) throw DataError("checkpoint tensor count mismatch");
  for (auto& p : params) {
    const std::uint64_t rows = r.u64();
    const std::uint64_t cols = r.u64();
    if (rows != p.rows || cols != p.cols) throw DataError("checkpoint tensor shape mismatch");
    for (double& d : p.data) d = r.f64();
  }
  if (r.pos != bytes.size()) throw DataError("trailing bytes in checkpoint");
  return model;
}

TransformerClassifier load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(text::read_file(path));
}

GradCheckResult grad_check(TransformerClassifier& model, const Matrix& tokens, std::size_t label, double step,
                           long only_tensor) {
  constexpr double kFloor = 1e-6;
  auto grads = model.zero_grads();
  model.loss_and_grad(tokens, label, &grads);
  auto& params = model.parameters();
  GradCheckResult result;
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (only_tensor >= 0 && static_cast<std::size_t>(only_tensor) != t) continue;
    for (std::size_t i = 0; i < params[t].data.size(); ++i) {
      double& p = params[t].data[i];
      const double saved = p;
      p = saved + step;
      const double up = model.loss_and_grad(tokens, label, nullptr);
      p = saved - step;
      const double down = model.loss_and_grad(tokens, label, nullptr);
      p = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = grads[t].data[i];
      const double rel = std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), kFloor);
      ++result.checked;
      if (rel > result.max_relative_error || result.worst_parameter.empty()) {
        result.max_relative_error = std::max(rel, result.max_relative_error);
        result.worst_parameter = model.parameter_names()[t] + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace worksight::nn
