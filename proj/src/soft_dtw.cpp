#include "worksight/soft_dtw.hpp"

#include "worksight/error.hpp"
#include "worksight/text_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace worksight::dtw {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_pair(const FeatureSequence& x, const FeatureSequence& y) {
  if (x.length() == 0 || y.length() == 0) throw ValidationError("soft-DTW: empty sequence");
  if (x.dim() != y.dim())
    throw ValidationError("soft-DTW: dimension mismatch (" + std::to_string(x.dim()) + " vs " +
                          std::to_string(y.dim()) + ")");
}

/// (n+1) x (m+1) accumulated-cost lattice with +inf borders and R(0,0)=0.
std::vector<double> forward_lattice(const FeatureSequence& x, const FeatureSequence& y, double gamma,
                                    std::vector<double>* distances) {
  const std::size_t n = x.length();
  const std::size_t m = y.length();
  const std::size_t w = m + 1;
  std::vector<double> r((n + 1) * w, kInf);
  r[0] = 0.0;
  if (distances) distances->assign(n * m, 0.0);
  for (std::size_t i = 1; i <= n; ++i) {
    const auto xi = x.row(i - 1);
    for (std::size_t j = 1; j <= m; ++j) {
      const double d = squared_distance(xi, y.row(j - 1));
      if (distances) (*distances)[(i - 1) * m + (j - 1)] = d;
      r[i * w + j] = d + softmin(r[(i - 1) * w + j], r[i * w + j - 1], r[(i - 1) * w + j - 1], gamma);
    }
  }
  return r;
}

}  // namespace

FeatureSequence::FeatureSequence(std::size_t dim, std::vector<double> values)
    : dim_(dim), values_(std::move(values)) {
  if (dim_ == 0) throw ValidationError("feature sequence dimension must be positive");
  if (values_.size() % dim_ != 0) throw ValidationError("feature sequence values are not a multiple of dim");
  for (double v : values_)
    if (!std::isfinite(v)) throw ValidationError("feature sequence contains non-finite values");
}

FeatureSequence FeatureSequence::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw ValidationError("feature sequence must have at least one row");
  const std::size_t d = rows.front().size();
  std::vector<double> values;
  values.reserve(rows.size() * d);
  for (const auto& r : rows) {
    if (r.size() != d) throw ValidationError("feature rows have non-uniform dimension");
    values.insert(values.end(), r.begin(), r.end());
  }
  return FeatureSequence(d, std::move(values));
}

FeatureSequence FeatureSequence::slice(std::size_t first, std::size_t last) const {
  last = std::min(last, length());
  if (first >= last) throw ValidationError("feature sequence slice is empty");
  return FeatureSequence(dim_, std::vector<double>(values_.begin() + static_cast<std::ptrdiff_t>(first * dim_),
                                                   values_.begin() + static_cast<std::ptrdiff_t>(last * dim_)));
}

FeatureSequence FeatureSequence::strided(std::size_t stride) const {
  if (stride <= 1) return *this;
  std::vector<double> values;
  for (std::size_t t = 0; t < length(); t += stride) {
    const auto r = row(t);
    values.insert(values.end(), r.begin(), r.end());
  }
  return FeatureSequence(dim_, std::move(values));
}

void SoftDtwParams::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ValidationError("soft-DTW gamma must be finite and > 0");
}

double softmin(double a, double b, double c, double gamma) {
  const double lo = std::min({a, b, c});
  if (lo == kInf) return kInf;
  const double s = std::exp(-(a - lo) / gamma) + std::exp(-(b - lo) / gamma) + std::exp(-(c - lo) / gamma);
  return lo - gamma * std::log(s);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

double soft_dtw(const FeatureSequence& x, const FeatureSequence& y, const SoftDtwParams& p) {
  p.validate();
  check_pair(x, y);
  const auto r = forward_lattice(x, y, p.gamma, nullptr);
  return r.back();
}

SoftDtwGradient soft_dtw_grad(const FeatureSequence& x, const FeatureSequence& y, const SoftDtwParams& p) {
  p.validate();
  check_pair(x, y);
  const std::size_t n = x.length();
  const std::size_t m = y.length();
  std::vector<double> dist;
  const auto r_fwd = forward_lattice(x, y, p.gamma, &dist);

  // Padded (n+2) x (m+2) copies; row/column n+1 and m+1 act as the sink.
  const std::size_t w = m + 2;
  std::vector<double> r((n + 2) * w, -kInf);
  std::vector<double> d((n + 2) * w, 0.0);
  std::vector<double> e((n + 2) * w, 0.0);
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j) {
      r[i * w + j] = r_fwd[i * (m + 1) + j];
      d[i * w + j] = dist[(i - 1) * m + (j - 1)];
    }
  r[(n + 1) * w + (m + 1)] = r[n * w + m];
  e[(n + 1) * w + (m + 1)] = 1.0;

  for (std::size_t i = n; i >= 1; --i) {
    for (std::size_t j = m; j >= 1; --j) {
      const double rij = r[i * w + j];
      const double a = std::exp((r[(i + 1) * w + j] - rij - d[(i + 1) * w + j]) / p.gamma);
      const double b = std::exp((r[i * w + j + 1] - rij - d[i * w + j + 1]) / p.gamma);
      const double c = std::exp((r[(i + 1) * w + j + 1] - rij - d[(i + 1) * w + j + 1]) / p.gamma);
      e[i * w + j] = e[(i + 1) * w + j] * a + e[i * w + j + 1] * b + e[(i + 1) * w + j + 1] * c;
    }
  }

  SoftDtwGradient out;
  out.cost = r[n * w + m];
  out.grad_x.assign(x.values().size(), 0.0);
  const std::size_t dim = x.dim();
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = x.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      const double weight = e[(i + 1) * w + (j + 1)];
      if (weight == 0.0) continue;
      const auto yj = y.row(j);
      for (std::size_t k = 0; k < dim; ++k) out.grad_x[i * dim + k] += weight * 2.0 * (xi[k] - yj[k]);
    }
  }
  return out;
}

double hard_dtw(const FeatureSequence& x, const FeatureSequence& y) {
  check_pair(x, y);
  const std::size_t n = x.length();
  const std::size_t m = y.length();
  const std::size_t w = m + 1;
  std::vector<double> r((n + 1) * w, kInf);
  r[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      r[i * w + j] = squared_distance(x.row(i - 1), y.row(j - 1)) +
                     std::min({r[(i - 1) * w + j], r[i * w + j - 1], r[(i - 1) * w + j - 1]});
  return r.back();
}

std::size_t ExemplarLibrary::count(const std::string& label) const {
  return static_cast<std::size_t>(
      std::count_if(exemplars.begin(), exemplars.end(), [&](const auto& e) { return e.label == label; }));
}

void ExemplarLibrary::add(std::string label, FeatureSequence sequence) {
  if (std::find(classes.begin(), classes.end(), label) == classes.end()) classes.push_back(label);
  exemplars.push_back({std::move(label), std::move(sequence)});
}

void ExemplarLibrary::validate() const {
  if (exemplars.empty()) throw ValidationError("empty exemplar library");
  const std::size_t d = dim();
  for (const auto& e : exemplars) {
    if (e.sequence.dim() != d) throw ValidationError("exemplar library mixes feature dimensions");
    if (e.sequence.length() == 0) throw ValidationError("exemplar '" + e.label + "' is empty");
    if (std::find(classes.begin(), classes.end(), e.label) == classes.end())
      throw ValidationError("exemplar label '" + e.label + "' is not a declared class");
  }
}

std::string write_library(const ExemplarLibrary& lib) {
  lib.validate();
  std::string out = "worksight-exemplars 1\ndim " + std::to_string(lib.dim()) + "\nclasses";
  for (const auto& c : lib.classes) out += " " + c;
  out += "\n";
  for (const auto& e : lib.exemplars) {
    out += "exemplar " + e.label + " " + std::to_string(e.sequence.length()) + "\n";
    for (std::size_t t = 0; t < e.sequence.length(); ++t) {
      const auto r = e.sequence.row(t);
      for (std::size_t k = 0; k < r.size(); ++k) {
        if (k) out += " ";
        out += text::format_number(r[k]);
      }
      out += "\n";
    }
  }
  return out;
}

ExemplarLibrary parse_library(const std::string& content) {
  std::istringstream in(content);
  std::string tok;
  int version = 0;
  if (!(in >> tok) || tok != "worksight-exemplars" || !(in >> version) || version != 1)
    throw ValidationError("exemplar library: bad header");
  std::size_t dim = 0;
  if (!(in >> tok) || tok != "dim" || !(in >> dim) || dim == 0) throw ValidationError("exemplar library: bad dim line");
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  std::istringstream cls(line);
  if (!(cls >> tok) || tok != "classes") throw ValidationError("exemplar library: missing classes line");
  ExemplarLibrary lib;
  while (cls >> tok) lib.classes.push_back(tok);

  while (in >> tok) {
    if (tok != "exemplar") throw ValidationError("exemplar library: expected 'exemplar', found '" + tok + "'");
    std::string label;
    std::size_t length = 0;
    if (!(in >> label >> length) || length == 0) throw ValidationError("exemplar library: bad exemplar header");
    std::vector<double> values(length * dim);
    for (auto& v : values) {
      std::string num;
      if (!(in >> num)) throw ValidationError("exemplar library: truncated exemplar '" + label + "'");
      v = text::parse_number(num, "exemplar value");
    }
    lib.exemplars.push_back({label, FeatureSequence(dim, std::move(values))});
  }
  lib.validate();
  return lib;
}

ExemplarLibrary read_library(const std::filesystem::path& path) { return parse_library(text::read_file(path)); }

Classification classify_by_alignment(const FeatureSequence& query, const ExemplarLibrary& lib,
                                     const SoftDtwParams& p, std::size_t k) {
  if (lib.exemplars.empty()) throw ValidationError("empty exemplar library");
  if (k == 0) throw ValidationError("classify_by_alignment: k must be >= 1");
  p.validate();

  std::vector<std::vector<double>> costs(lib.classes.size());
  for (const auto& e : lib.exemplars) {
    const auto it = std::find(lib.classes.begin(), lib.classes.end(), e.label);
    if (it == lib.classes.end()) throw ValidationError("exemplar label '" + e.label + "' is not a declared class");
    const double norm = static_cast<double>(query.length() + e.sequence.length());
    costs[static_cast<std::size_t>(it - lib.classes.begin())].push_back(soft_dtw(query, e.sequence, p) / norm);
  }

  Classification out;
  double best = kInf;
  for (std::size_t c = 0; c < lib.classes.size(); ++c) {
    auto& v = costs[c];
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    const std::size_t take = std::min(k, v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < take; ++i) sum += v[i];
    const double score = sum / static_cast<double>(take);
    out.scores.push_back({lib.classes[c], score});
    if (score < best) {
      best = score;
      out.label = lib.classes[c];
    }
  }
  return out;
}

Standardizer Standardizer::fit(const ExemplarLibrary& lib) {
  lib.validate();
  const std::size_t d = lib.dim();
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.stddev.assign(d, 0.0);
  std::size_t rows = 0;
  for (const auto& e : lib.exemplars)
    for (std::size_t t = 0; t < e.sequence.length(); ++t) {
      const auto r = e.sequence.row(t);
      for (std::size_t k = 0; k < d; ++k) s.mean[k] += r[k];
      ++rows;
    }
  for (auto& m : s.mean) m /= static_cast<double>(rows);
  for (const auto& e : lib.exemplars)
    for (std::size_t t = 0; t < e.sequence.length(); ++t) {
      const auto r = e.sequence.row(t);
      for (std::size_t k = 0; k < d; ++k) s.stddev[k] += (r[k] - s.mean[k]) * (r[k] - s.mean[k]);
    }
  for (auto& v : s.stddev) {
    v = std::sqrt(v / static_cast<double>(rows));
    if (v < 1e-9) v = 1.0;
  }
  return s;
}

FeatureSequence Standardizer::apply(const FeatureSequence& seq) const {
  if (seq.dim() != mean.size()) throw ValidationError("standardizer dimension mismatch");
  FeatureSequence out = seq;
  for (std::size_t t = 0; t < out.length(); ++t) {
    auto r = out.row(t);
    for (std::size_t k = 0; k < r.size(); ++k) r[k] = (r[k] - mean[k]) / stddev[k];
  }
  return out;
}

ExemplarLibrary Standardizer::apply(const ExemplarLibrary& lib) const {
  ExemplarLibrary out;
  out.classes = lib.classes;
  for (const auto& e : lib.exemplars) out.exemplars.push_back({e.label, apply(e.sequence)});
  return out;
}

}  // namespace worksight::dtw
