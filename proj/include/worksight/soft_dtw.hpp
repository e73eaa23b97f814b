#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace worksight::dtw {

/// Time-ordered d-dimensional feature vectors, stored row-major.
class FeatureSequence {
 public:
  FeatureSequence() = default;
  FeatureSequence(std::size_t dim, std::vector<double> values);
  static FeatureSequence from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t dim() const { return dim_; }
  std::size_t length() const { return dim_ == 0 ? 0 : values_.size() / dim_; }
  std::span<const double> row(std::size_t t) const { return {values_.data() + t * dim_, dim_}; }
  std::span<double> row(std::size_t t) { return {values_.data() + t * dim_, dim_}; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  /// Copy of rows [first, last).
  FeatureSequence slice(std::size_t first, std::size_t last) const;
  /// Every `stride`-th row, starting at row 0.
  FeatureSequence strided(std::size_t stride) const;

  bool operator==(const FeatureSequence&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

struct SoftDtwParams {
  double gamma = 0.1;

  void validate() const;
};

/// -gamma * log(sum_k exp(-a_k / gamma)), evaluated with a min shift.
double softmin(double a, double b, double c, double gamma);

double squared_distance(std::span<const double> a, std::span<const double> b);

/// Smoothed alignment cost with squared-Euclidean ground cost.
double soft_dtw(const FeatureSequence& x, const FeatureSequence& y, const SoftDtwParams& p = {});

struct SoftDtwGradient {
  double cost = 0.0;
  std::vector<double> grad_x;  // same layout as x.values()
};

/// Cost and exact gradient with respect to x via the backward recursion
/// over the expected-alignment matrix.
SoftDtwGradient soft_dtw_grad(const FeatureSequence& x, const FeatureSequence& y, const SoftDtwParams& p = {});

/// Classic DTW (hard minimum). Used as the gamma -> 0 reference.
double hard_dtw(const FeatureSequence& x, const FeatureSequence& y);

struct LabeledSequence {
  std::string label;
  FeatureSequence sequence;
};

/// Labeled reference sequences. `classes` fixes the declaration order that
/// breaks score ties.
struct ExemplarLibrary {
  std::vector<std::string> classes;
  std::vector<LabeledSequence> exemplars;

  std::size_t dim() const { return exemplars.empty() ? 0 : exemplars.front().sequence.dim(); }
  std::size_t count(const std::string& label) const;
  /// Adds the exemplar, declaring its class on first use.
  void add(std::string label, FeatureSequence sequence);
  void validate() const;
};

// Text layout:
//   worksight-exemplars 1
//   dim <d>
//   classes <label> <label> ...
//   exemplar <label> <length>
//   <d numbers>            (one line per time step)
std::string write_library(const ExemplarLibrary& lib);
ExemplarLibrary parse_library(const std::string& content);
ExemplarLibrary read_library(const std::filesystem::path& path);

struct ClassScore {
  std::string label;
  double score = 0.0;
};

struct Classification {
  std::string label;
  std::vector<ClassScore> scores;  // in class declaration order
};

/// Per-class score is the mean of the k smallest length-normalized costs
/// soft_dtw(q, e) / (|q| + |e|) over that class's exemplars (k clamped to
/// the class size). The label is the argmin; ties go to the earlier class.
Classification classify_by_alignment(const FeatureSequence& query, const ExemplarLibrary& lib,
                                     const SoftDtwParams& p = {}, std::size_t k = 1);

/// Per-dimension z-scoring fitted on a library.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  static Standardizer fit(const ExemplarLibrary& lib);
  FeatureSequence apply(const FeatureSequence& seq) const;
  ExemplarLibrary apply(const ExemplarLibrary& lib) const;
};

}  // namespace worksight::dtw
