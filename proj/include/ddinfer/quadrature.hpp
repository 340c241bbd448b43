#pragma once

// Gaussian averages over a linear subspace: f_hi = E[f(center + basis t)],
// t ~ N(0, I / (2 beta)), basis metric-orthonormal.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "ddinfer/errors.hpp"
#include "ddinfer/geometry.hpp"

namespace ddinfer {

struct GaussHermiteRule {
  Vec nodes;    // roots of H_n
  Vec weights;  // for integral of exp(-x^2) g(x), summing to sqrt(pi)
};

/// Golub-Welsch: eigen-decomposition of the symmetric Jacobi matrix of the
/// physicists' Hermite polynomials.
inline GaussHermiteRule gauss_hermite_rule(int order) {
  if (order < 1) throw DomainError("Gauss-Hermite order must be at least 1");
  Mat jacobi = Mat::Zero(order, order);
  for (int k = 1; k < order; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(0.5 * k);
  Eigen::SelfAdjointEigenSolver<Mat> eig(jacobi);
  GaussHermiteRule rule;
  rule.nodes = eig.eigenvalues();
  rule.weights = std::sqrt(std::numbers::pi) * eig.eigenvectors().row(0).transpose().array().square();
  // symmetrize: the rule is exactly even
  for (int k = 0; k < order / 2; ++k) {
    const int j = order - 1 - k;
    const double x = 0.5 * (rule.nodes[j] - rule.nodes[k]);
    const double w = 0.5 * (rule.weights[j] + rule.weights[k]);
    rule.nodes[k] = -x;
    rule.nodes[j] = x;
    rule.weights[k] = rule.weights[j] = w;
  }
  if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
  return rule;
}

struct QuadratureMethod {
  enum class Kind { automatic, gauss_hermite, monte_carlo };
  Kind kind = Kind::automatic;
  int order = 8;                 // Gauss-Hermite points per direction
  std::int64_t samples = 10000;  // Monte Carlo draws
  std::uint64_t seed = 0;
  int max_tensor_dim = 3;        // automatic: tensor rule up to this dimension

  static QuadratureMethod gauss_hermite(int order) { return {Kind::gauss_hermite, order}; }
  static QuadratureMethod monte_carlo(std::int64_t n, std::uint64_t seed) {
    QuadratureMethod q;
    q.kind = Kind::monte_carlo;
    q.samples = n;
    q.seed = seed;
    return q;
  }
};

struct QuadratureResult {
  double value = 0.0;
  /// Gauss-Hermite: |Q_order - Q_{order-1}|; Monte Carlo: standard error.
  double error_estimate = 0.0;
};

using Univariate = std::function<double(const Vec&)>;

namespace detail {

inline double gh_tensor(const Univariate& f, const Vec& center, const Mat& basis, double beta,
                        const GaussHermiteRule& rule) {
  const Eigen::Index dim = basis.cols();
  const auto n = static_cast<Eigen::Index>(rule.nodes.size());
  const double scale = 1.0 / std::sqrt(beta);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(dim), 0);
  // running weighted mean, so constants come back exactly
  double mean = 0.0;
  double wsum = 0.0;
  while (true) {
    Vec x = center;
    double w = 1.0;
    for (Eigen::Index j = 0; j < dim; ++j) {
      const Eigen::Index k = idx[static_cast<std::size_t>(j)];
      x += basis.col(j) * (rule.nodes[k] * scale);
      w *= rule.weights[k];
    }
    const double fx = f(x);
    if (!std::isfinite(fx)) throw DomainError("quantity of interest is not finite at a quadrature node");
    wsum += w;
    mean += (w / wsum) * (fx - mean);
    Eigen::Index j = 0;
    for (; j < dim; ++j) {
      if (++idx[static_cast<std::size_t>(j)] < n) break;
      idx[static_cast<std::size_t>(j)] = 0;
    }
    if (j == dim) break;
  }
  return mean;
}

inline const GaussHermiteRule& cached_rule(int order) {
  static std::mutex mu;
  static std::map<int, GaussHermiteRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it == cache.end()) it = cache.emplace(order, gauss_hermite_rule(order)).first;
  return it->second;
}

}  // namespace detail

/// Gaussian-weighted mean of f over center + span(basis) with density
/// proportional to exp(-beta |t|^2). `stream` selects the Monte Carlo
/// substream so that results depend only on (seed, stream).
inline QuadratureResult quadrature_f_hi(const Univariate& f, const Vec& center, const Mat& basis,
                                        double beta, const QuadratureMethod& method,
                                        std::uint64_t stream = 0) {
  if (!(beta > 0.0)) throw DomainError("beta must be positive");
  detail::require_dims(basis.rows() == center.size(), "basis and center dimensions differ");
  const Eigen::Index dim = basis.cols();
  QuadratureResult r;
  if (dim == 0) {
    r.value = f(center);
    return r;
  }
  auto kind = method.kind;
  if (kind == QuadratureMethod::Kind::automatic)
    kind = dim <= method.max_tensor_dim ? QuadratureMethod::Kind::gauss_hermite
                                        : QuadratureMethod::Kind::monte_carlo;
  if (kind == QuadratureMethod::Kind::gauss_hermite) {
    if (method.order < 2) throw DomainError("Gauss-Hermite order must be at least 2");
    r.value = detail::gh_tensor(f, center, basis, beta, detail::cached_rule(method.order));
    const double coarse = detail::gh_tensor(f, center, basis, beta, detail::cached_rule(method.order - 1));
    r.error_estimate = std::abs(r.value - coarse);
    return r;
  }
  if (method.samples < 2) throw DomainError("Monte Carlo needs at least 2 samples");
  std::seed_seq seq{static_cast<std::uint32_t>(method.seed), static_cast<std::uint32_t>(method.seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(2.0 * beta));
  double mean = 0.0;
  double m2 = 0.0;
  Vec t(dim);
  for (std::int64_t s = 0; s < method.samples; ++s) {
    for (Eigen::Index j = 0; j < dim; ++j) t[j] = normal(rng);
    const double fx = f(center + basis * t);
    if (!std::isfinite(fx)) throw DomainError("quantity of interest is not finite at a sample");
    const double delta = fx - mean;
    mean += delta / static_cast<double>(s + 1);
    m2 += delta * (fx - mean);
  }
  r.value = mean;
  r.error_estimate = std::sqrt(m2 / static_cast<double>(method.samples - 1) /
                               static_cast<double>(method.samples));
  return r;
}

}  // namespace ddinfer
