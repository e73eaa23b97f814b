#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace worksight::nn {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  std::size_t size() const { return data.size(); }

  bool operator==(const Matrix&) const = default;
};

struct ModelConfig {
  std::size_t d_in = 0;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::size_t d_ffn = 128;
  std::size_t n_classes = 0;
  std::size_t n_tokens = 10;
  double dropout_rate = 0.1;
  bool positional = true;  // learned per-token embedding added after projection
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Encoder-only transformer: input projection (+ positional embedding),
/// post-norm encoder layers (multi-head self-attention, GELU feed-forward),
/// mean pooling over tokens, linear classifier, softmax.
class TransformerClassifier {
 public:
  explicit TransformerClassifier(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }

  std::vector<double> logits(const Matrix& tokens) const;
  std::vector<double> predict_proba(const Matrix& tokens) const;
  int predict(const Matrix& tokens) const;

  /// Cross-entropy loss -log p(label). When `grads` is given, adds
  /// weight * dloss/dparam into it (same layout as parameters()). A non-null
  /// `dropout_rng` enables dropout; otherwise the pass is deterministic.
  double loss_and_grad(const Matrix& tokens, std::size_t label, std::vector<Matrix>* grads, double weight = 1.0,
                       std::mt19937_64* dropout_rng = nullptr) const;

  std::vector<Matrix>& parameters() { return params_; }
  const std::vector<Matrix>& parameters() const { return params_; }
  const std::vector<std::string>& parameter_names() const { return names_; }
  std::vector<Matrix> zero_grads() const;
  std::size_t parameter_count() const;

  /// Index of the classifier bias tensor in parameters().
  std::size_t classifier_bias_index() const { return params_.size() - 1; }

 private:
  struct LayerIndex {
    std::size_t wq, bq, wk, bk, wv, bv, wo, bo, ln1_g, ln1_b, w1, b1, w2, b2, ln2_g, ln2_b;
  };

  std::size_t add_param(std::string name, std::size_t rows, std::size_t cols);
  double run(const Matrix& tokens, std::size_t label, std::vector<Matrix>* grads, double weight,
             std::mt19937_64* dropout_rng, std::vector<double>* logits_out) const;

  ModelConfig config_;
  std::vector<Matrix> params_;
  std::vector<std::string> names_;
  std::size_t w_in_ = 0, b_in_ = 0, pos_ = 0, w_cls_ = 0, b_cls_ = 0;
  std::vector<LayerIndex> layers_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(const std::vector<Matrix>& params, const AdamConfig& config);
  void step(std::vector<Matrix>& params, const std::vector<Matrix>& grads);
  std::size_t steps() const { return t_; }

 private:
  AdamConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::size_t t_ = 0;
};

// Checkpoint layout (all integers little-endian):
//   8 bytes  magic "WSTFMR01"
//   u64 x 8  d_in, d_model, n_heads, n_layers, d_ffn, n_classes, n_tokens, seed
//   f64      dropout_rate
//   u8       positional
//   u64      tensor count, then per tensor: u64 rows, u64 cols, rows*cols f64
// Doubles are stored as their IEEE-754 bit pattern in little-endian order.
void save_checkpoint(const TransformerClassifier& model, const std::filesystem::path& path);
std::string serialize_checkpoint(const TransformerClassifier& model);
TransformerClassifier load_checkpoint(const std::filesystem::path& path);
TransformerClassifier parse_checkpoint(const std::string& bytes);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t checked = 0;
};

/// Compares analytic gradients of the loss with central differences for
/// every parameter entry (or only tensor `only_tensor` when set). The model
/// is evaluated without dropout. relative error = |a - n| / max(|a| + |n|, floor).
GradCheckResult grad_check(TransformerClassifier& model, const Matrix& tokens, std::size_t label,
                           double step = 1e-4, long only_tensor = -1);

}  // namespace worksight::nn
