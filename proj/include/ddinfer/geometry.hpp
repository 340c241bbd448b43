#pragma once

// Phase-space vectors, the member-block metric, affine constraint sets and the
// small amount of dense linear algebra the rest of the library is built on.
//
// Layout convention: a point of Z = R^{2N} is stored as one vector
// (eps_1, ..., eps_m, sig_1, ..., sig_m), each block of length d, N = m d.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ddinfer/errors.hpp"

namespace ddinfer {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Singular values below kRankTolerance * sigma_max are treated as zero.
inline constexpr double kRankTolerance = 1e-10;

class PhaseVector {
 public:
  PhaseVector() = default;

  explicit PhaseVector(Vec values) : values_(std::move(values)) {
    detail::require_dims(values_.size() % 2 == 0,
                         "phase vector must have even length, got " +
                             std::to_string(values_.size()));
    if (!values_.allFinite()) throw DomainError("phase vector has non-finite entries");
  }

  PhaseVector(const Vec& eps, const Vec& sig) {
    detail::require_dims(eps.size() == sig.size(), "eps and sig halves differ in length");
    values_.resize(eps.size() + sig.size());
    values_ << eps, sig;
    if (!values_.allFinite()) throw DomainError("phase vector has non-finite entries");
  }

  static PhaseVector zero(Eigen::Index half) { return PhaseVector(Vec::Zero(2 * half)); }

  [[nodiscard]] Eigen::Index dim() const { return values_.size(); }
  [[nodiscard]] Eigen::Index half_dim() const { return values_.size() / 2; }

  [[nodiscard]] auto eps() const { return values_.head(half_dim()); }
  [[nodiscard]] auto sig() const { return values_.tail(half_dim()); }

  [[nodiscard]] const Vec& vec() const { return values_; }
  [[nodiscard]] double operator[](Eigen::Index i) const { return values_[i]; }

  friend PhaseVector operator+(const PhaseVector& a, const PhaseVector& b) {
    detail::require_dims(a.dim() == b.dim(), "phase vector dimension mismatch");
    return PhaseVector(Vec(a.values_ + b.values_));
  }
  friend PhaseVector operator-(const PhaseVector& a, const PhaseVector& b) {
    detail::require_dims(a.dim() == b.dim(), "phase vector dimension mismatch");
    return PhaseVector(Vec(a.values_ - b.values_));
  }
  friend bool operator==(const PhaseVector& a, const PhaseVector& b) {
    return a.values_.size() == b.values_.size() && a.values_ == b.values_;
  }

 private:
  Vec values_;
};

/// Block-diagonal metric ||z||^2 = sum_e w_e (C_e |eps_e|^2 + C_e^{-1} |sig_e|^2).
class Metric {
 public:
  Metric(std::vector<double> member_weights, std::vector<double> member_moduli,
         int block_dim = 1)
      : weights_(std::move(member_weights)), moduli_(std::move(member_moduli)), d_(block_dim) {
    detail::require_dims(weights_.size() == moduli_.size(),
                         "metric weights and moduli differ in length");
    if (weights_.empty()) throw DomainError("metric needs at least one member");
    if (d_ <= 0) throw DomainError("metric block dimension must be positive");
    for (std::size_t e = 0; e < weights_.size(); ++e) {
      if (!(weights_[e] > 0.0) || !std::isfinite(weights_[e]))
        throw DomainError("member weight w_" + std::to_string(e) + " must be positive");
      if (!(moduli_[e] > 0.0) || !std::isfinite(moduli_[e]))
        throw DomainError("member modulus C_" + std::to_string(e) + " must be positive");
    }
    const auto half = static_cast<Eigen::Index>(weights_.size()) * d_;
    diag_.resize(2 * half);
    for (std::size_t e = 0; e < weights_.size(); ++e) {
      for (int k = 0; k < d_; ++k) {
        const auto i = static_cast<Eigen::Index>(e) * d_ + k;
        diag_[i] = weights_[e] * moduli_[e];
        diag_[half + i] = weights_[e] / moduli_[e];
      }
    }
  }

  /// Plain Euclidean metric on R^{2N}: N unit members with unit moduli.
  static Metric euclidean(int half_dim) {
    return Metric(std::vector<double>(static_cast<std::size_t>(half_dim), 1.0),
                  std::vector<double>(static_cast<std::size_t>(half_dim), 1.0), 1);
  }

  [[nodiscard]] int members() const { return static_cast<int>(weights_.size()); }
  [[nodiscard]] int block_dim() const { return d_; }
  [[nodiscard]] Eigen::Index half_dim() const { return diag_.size() / 2; }
  [[nodiscard]] Eigen::Index dim() const { return diag_.size(); }
  [[nodiscard]] const std::vector<double>& weights() const { return weights_; }
  [[nodiscard]] const std::vector<double>& moduli() const { return moduli_; }

  /// Diagonal of the Gram matrix G on Z.
  [[nodiscard]] const Vec& diag() const { return diag_; }

  [[nodiscard]] double log_det() const { return diag_.array().log().sum(); }

  [[nodiscard]] double inner(const Vec& x, const Vec& y) const {
    check(x);
    check(y);
    return (diag_.array() * x.array() * y.array()).sum();
  }
  [[nodiscard]] double squared_norm(const Vec& x) const {
    check(x);
    return (diag_.array() * x.array().square()).sum();
  }

  void check(const Vec& x) const {
    detail::require_dims(x.size() == diag_.size(),
                         "vector of length " + std::to_string(x.size()) +
                             " does not match metric dimension " + std::to_string(diag_.size()));
  }

  friend bool operator==(const Metric& a, const Metric& b) {
    return a.d_ == b.d_ && a.weights_ == b.weights_ && a.moduli_ == b.moduli_;
  }

 private:
  std::vector<double> weights_;
  std::vector<double> moduli_;
  int d_;
  Vec diag_;
};

/// A dense matrix tagged with what its rows and columns index.
struct LinearMap {
  Mat entries;
  std::string rows;
  std::string cols;

  [[nodiscard]] Eigen::Index row_count() const { return entries.rows(); }
  [[nodiscard]] Eigen::Index col_count() const { return entries.cols(); }
};

/// Flip each column so that its first entry of magnitude above `tol` is positive.
inline void canonicalize_signs(Mat& columns, double tol = 1e-12) {
  for (Eigen::Index j = 0; j < columns.cols(); ++j) {
    for (Eigen::Index i = 0; i < columns.rows(); ++i) {
      if (std::abs(columns(i, j)) > tol) {
        if (columns(i, j) < 0.0) columns.col(j) *= -1.0;
        break;
      }
    }
  }
}

/// Euclidean-orthonormal basis of Ker(M), one vector per column.
inline Mat nullspace_basis(const Mat& m, double tol = kRankTolerance) {
  if (!m.allFinite()) throw DomainError("nullspace_basis: matrix has non-finite entries");
  const Eigen::Index n = m.cols();
  if (m.rows() == 0) return Mat::Identity(n, n);
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double smax = s.size() > 0 ? s[0] : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > tol * smax && s[i] > 0.0) ++rank;
  Mat kernel = svd.matrixV().rightCols(n - rank);
  canonicalize_signs(kernel);
  return kernel;
}

/// Euclidean-orthonormal basis of Range(M).
inline Mat range_basis(const Mat& m, double tol = kRankTolerance) {
  if (m.cols() == 0 || m.rows() == 0) return Mat(m.rows(), 0);
  Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  const double smax = s[0];
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > tol * smax && s[i] > 0.0) ++rank;
  Mat range = svd.matrixU().leftCols(rank);
  canonicalize_signs(range);
  return range;
}

inline Eigen::Index numerical_rank(const Mat& m, double tol = kRankTolerance) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(m);
  const auto& s = svd.singularValues();
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > tol * s[0] && s[i] > 0.0) ++rank;
  return rank;
}

/// Modified Gram-Schmidt (two passes) in the metric. Columns in, columns out.
inline Mat metric_orthonormalize(const Mat& vectors, const Metric& g, double tol = kRankTolerance) {
  detail::require_dims(vectors.rows() == g.dim(), "metric_orthonormalize: dimension mismatch");
  const Vec& w = g.diag();
  Mat q(vectors.rows(), vectors.cols());
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    Vec v = vectors.col(j);
    const double original = std::sqrt((w.array() * v.array().square()).sum());
    if (original == 0.0) throw DomainError("metric_orthonormalize: zero vector in input");
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index k = 0; k < j; ++k) {
        v -= (w.array() * q.col(k).array() * v.array()).sum() * q.col(k);
      }
    }
    const double residual = std::sqrt((w.array() * v.array().square()).sum());
    if (residual <= tol * original)
      throw DomainError("metric_orthonormalize: input vectors are linearly dependent");
    q.col(j) = v / residual;
  }
  canonicalize_signs(q);
  return q;
}

inline double weighted_norm(const PhaseVector& z, const Metric& g) {
  return std::sqrt(g.squared_norm(z.vec()));
}

/// E = origin + span(basis), with metric-orthonormal bases of E0 and of its
/// metric-orthogonal complement stored explicitly.
class AffineSubspace {
 public:
  AffineSubspace(const Vec& origin, const Mat& spanning, const Metric& g)
      : metric_(g), origin_(origin) {
    g.check(origin);
    detail::require_dims(spanning.rows() == g.dim(), "spanning vectors do not live in Z");
    basis_ = spanning.cols() > 0 ? metric_orthonormalize(spanning, g) : Mat(g.dim(), 0);
    const Mat gram_rows = basis_.transpose() * g.diag().asDiagonal();
    const Mat raw_complement =
        basis_.cols() > 0 ? nullspace_basis(gram_rows) : Mat(Mat::Identity(g.dim(), g.dim()));
    complement_ = raw_complement.cols() > 0 ? metric_orthonormalize(raw_complement, g)
                                            : Mat(g.dim(), 0);
    if (basis_.cols() + complement_.cols() != g.dim())
      throw DomainError("affine subspace: basis and complement do not span Z");
  }

  [[nodiscard]] const Metric& metric() const { return metric_; }
  [[nodiscard]] const Vec& origin() const { return origin_; }
  [[nodiscard]] const Mat& basis() const { return basis_; }
  [[nodiscard]] const Mat& complement() const { return complement_; }
  [[nodiscard]] Eigen::Index dim() const { return basis_.cols(); }
  [[nodiscard]] Eigen::Index ambient_dim() const { return origin_.size(); }

  /// Coordinates of P_E y - origin in the metric-orthonormal basis of E0.
  [[nodiscard]] Vec coordinates(const Vec& y) const {
    return basis_.transpose() * (metric_.diag().asDiagonal() * (y - origin_));
  }
  /// Coordinates of y - P_E y in the metric-orthonormal basis of E0^perp.
  [[nodiscard]] Vec normal_coordinates(const Vec& y) const {
    return complement_.transpose() * (metric_.diag().asDiagonal() * (y - origin_));
  }

  /// Removes the normal component, so points of E come back unchanged.
  [[nodiscard]] Vec project(const Vec& y) const {
    metric_.check(y);
    return y - complement_ * normal_coordinates(y);
  }

  /// ||y - P_E y||^2, computed from the complement coordinates.
  [[nodiscard]] double squared_distance(const Vec& y) const {
    return normal_coordinates(y).squaredNorm();
  }

 private:
  Metric metric_;
  Vec origin_;
  Mat basis_;
  Mat complement_;
};

inline PhaseVector project_affine(const PhaseVector& y, const AffineSubspace& e, const Metric& g) {
  if (!(g == e.metric()))
    throw DimensionError("project_affine: metric differs from the one E was built with");
  return PhaseVector(e.project(y.vec()));
}

}  // namespace ddinfer
