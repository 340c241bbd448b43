#pragma once

// Deterministic data-driven solvers: the pair (y, z) in D x E minimizing ||y - z||.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "ddinfer/errors.hpp"
#include "ddinfer/geometry.hpp"
#include "ddinfer/truss.hpp"

namespace ddinfer {

/// Largest product data set that is flattened into a global point cloud.
inline constexpr std::uint64_t kMaxFlattenedProduct = 1'000'000;

/// Material data as a global cloud (one column per point of Z) or as per-member
/// local clouds, each column (eps_e, sig_e) of length 2d.
struct MaterialPointSet {
  Mat global;
  std::vector<Mat> local;

  static MaterialPointSet from_global(Mat points) { return {std::move(points), {}}; }
  static MaterialPointSet from_product(std::vector<Mat> members) {
    return {Mat(), std::move(members)};
  }
  [[nodiscard]] bool is_product() const { return !local.empty(); }
};

struct DDSolution {
  PhaseVector y_star;
  PhaseVector z_star;
  double distance = 0.0;
  int iterations = 0;
  bool converged = false;
  Eigen::Index index = -1;              // global cloud: winning column
  std::vector<Eigen::Index> assignment;  // product: local index per member
  std::vector<double> objective;         // product: ||y - z||^2 per iteration
};

namespace detail {

inline Vec member_block(const Vec& z, int e, int d, Eigen::Index half) {
  Vec out(2 * d);
  out << z.segment(static_cast<Eigen::Index>(e) * d, d),
      z.segment(half + static_cast<Eigen::Index>(e) * d, d);
  return out;
}

inline void set_member_block(Vec& z, int e, int d, Eigen::Index half, const Vec& local) {
  z.segment(static_cast<Eigen::Index>(e) * d, d) = local.head(d);
  z.segment(half + static_cast<Eigen::Index>(e) * d, d) = local.tail(d);
}

inline double member_sqdist(const Vec& a, const Vec& b, double w, double c, int d) {
  const Vec diff = a - b;
  return w * (c * diff.head(d).squaredNorm() + diff.tail(d).squaredNorm() / c);
}

inline void check_product(const MaterialPointSet& data, const Metric& g) {
  if (static_cast<int>(data.local.size()) != g.members())
    throw DimensionError("product data set needs one local cloud per member");
  for (std::size_t e = 0; e < data.local.size(); ++e) {
    if (data.local[e].cols() == 0) throw DomainError("empty data set");
    if (data.local[e].rows() != 2 * g.block_dim())
      throw DimensionError("local data for member " + std::to_string(e) +
                           " must have 2d rows");
    if (!data.local[e].allFinite()) throw DomainError("data set has non-finite entries");
  }
}

}  // namespace detail

/// All combinations of local points, member 0 varying fastest.
inline Mat flatten_product(const MaterialPointSet& data, const Metric& g) {
  detail::check_product(data, g);
  std::uint64_t total = 1;
  for (const Mat& l : data.local) {
    total *= static_cast<std::uint64_t>(l.cols());
    if (total > kMaxFlattenedProduct)
      throw DomainError("product data set too large to flatten (more than 1e6 states)");
  }
  const int d = g.block_dim();
  const Eigen::Index half = g.half_dim();
  Mat out(2 * half, static_cast<Eigen::Index>(total));
  std::vector<Eigen::Index> idx(data.local.size(), 0);
  for (Eigen::Index col = 0; col < out.cols(); ++col) {
    Vec z(2 * half);
    for (int e = 0; e < g.members(); ++e)
      detail::set_member_block(z, e, d, half, data.local[static_cast<std::size_t>(e)].col(idx[static_cast<std::size_t>(e)]));
    out.col(col) = z;
    for (std::size_t e = 0; e < idx.size(); ++e) {
      if (++idx[e] < data.local[e].cols()) break;
      idx[e] = 0;
    }
  }
  return out;
}

/// Exhaustive scan of a global cloud. Ties go to the lowest column index.
inline DDSolution dd_solve_exact(const MaterialPointSet& data, const AffineSubspace& e) {
  const Metric& g = e.metric();
  const Mat points = data.is_product() ? flatten_product(data, g) : data.global;
  if (points.cols() == 0) throw DomainError("empty data set");
  detail::require_dims(points.rows() == g.dim(), "data points do not live in Z");
  if (!points.allFinite()) throw DomainError("data set has non-finite entries");

  double best = std::numeric_limits<double>::infinity();
  Eigen::Index best_i = 0;
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    const PhaseVector y(Vec(points.col(i)));
    const double dist = weighted_norm(y - project_affine(y, e, g), g);
    if (dist < best) {
      best = dist;
      best_i = i;
    }
  }
  DDSolution sol;
  sol.y_star = PhaseVector(Vec(points.col(best_i)));
  sol.z_star = project_affine(sol.y_star, e, g);
  sol.distance = best;
  sol.index = best_i;
  sol.converged = true;
  return sol;
}

/// Projection of the data barycenter onto E.
inline Vec default_start(const MaterialPointSet& data, const AffineSubspace& e) {
  const Metric& g = e.metric();
  Vec bary(g.dim());
  if (data.is_product()) {
    detail::check_product(data, g);
    for (int m = 0; m < g.members(); ++m)
      detail::set_member_block(bary, m, g.block_dim(), g.half_dim(),
                               data.local[static_cast<std::size_t>(m)].rowwise().mean());
  } else {
    if (data.global.cols() == 0) throw DomainError("empty data set");
    bary = data.global.rowwise().mean();
  }
  return e.project(bary);
}

/// Staggered local search: nearest local point per member, then project onto E.
/// Stops when the assignment repeats.
inline DDSolution dd_solve_fixed_point(const MaterialPointSet& data, const AffineSubspace& e,
                                       const std::optional<Vec>& z_init = std::nullopt,
                                       int max_iter = 100) {
  const Metric& g = e.metric();
  if (!data.is_product()) {
    // one member holding the whole cloud
    if (data.global.cols() == 0) throw DomainError("empty data set");
    return dd_solve_exact(data, e);
  }
  detail::check_product(data, g);
  if (max_iter <= 0) throw DomainError("max_iter must be positive");
  const int d = g.block_dim();
  const Eigen::Index half = g.half_dim();

  Vec z = z_init ? *z_init : default_start(data, e);
  g.check(z);
  if (e.squared_distance(z) > 1e-10 * std::max(1.0, g.squared_norm(z)))
    throw DomainError("z_init must lie on E");

  DDSolution sol;
  std::vector<Eigen::Index> assignment(static_cast<std::size_t>(g.members()), -1);
  Vec y(2 * half);
  for (int it = 1; it <= max_iter; ++it) {
    std::vector<Eigen::Index> next(assignment.size());
    for (int m = 0; m < g.members(); ++m) {
      const Mat& cloud = data.local[static_cast<std::size_t>(m)];
      const Vec zm = detail::member_block(z, m, d, half);
      const double w = g.weights()[static_cast<std::size_t>(m)];
      const double c = g.moduli()[static_cast<std::size_t>(m)];
      double best = std::numeric_limits<double>::infinity();
      Eigen::Index best_k = 0;
      for (Eigen::Index k = 0; k < cloud.cols(); ++k) {
        const double dist = detail::member_sqdist(cloud.col(k), zm, w, c, d);
        if (dist < best) {
          best = dist;
          best_k = k;
        }
      }
      next[static_cast<std::size_t>(m)] = best_k;
      detail::set_member_block(y, m, d, half, cloud.col(best_k));
    }
    const bool repeated = next == assignment;
    assignment = next;
    z = e.project(y);
    sol.objective.push_back(g.squared_norm(y - z));
    sol.iterations = it;
    if (repeated) {
      sol.converged = true;
      break;
    }
  }
  sol.assignment = assignment;
  sol.y_star = PhaseVector(y);
  sol.z_star = PhaseVector(z);
  sol.distance = weighted_norm(sol.y_star - sol.z_star, g);
  return sol;
}

struct LinearGraphDistance {
  double squared = 0.0;            // min over the graph of ||y - z||^2
  double displayed_quarter = 0.0;  // sum of w C^{-1} (sig - C eps)^2 / 4
  PhaseVector closest;             // minimizing y on the graph
};

/// Squared distance from z to the linear graph {sig_e = C_e eps_e} in the metric.
/// Per member the minimizer is e* = (eps + sig / C) / 2 and the residual
/// w C^{-1} |sig - C eps|^2 / 2.
inline LinearGraphDistance distance_to_linear_graph(const PhaseVector& z, const Metric& g) {
  g.check(z.vec());
  const int d = g.block_dim();
  const Eigen::Index half = g.half_dim();
  LinearGraphDistance out;
  Vec y(2 * half);
  for (int e = 0; e < g.members(); ++e) {
    const double w = g.weights()[static_cast<std::size_t>(e)];
    const double c = g.moduli()[static_cast<std::size_t>(e)];
    const auto off = static_cast<Eigen::Index>(e) * d;
    const Vec eps = z.vec().segment(off, d);
    const Vec sig = z.vec().segment(half + off, d);
    const double r2 = (sig - c * eps).squaredNorm();
    out.squared += 0.5 * w * r2 / c;
    out.displayed_quarter += 0.25 * w * r2 / c;
    const Vec estar = 0.5 * (eps + sig / c);
    y.segment(off, d) = estar;
    y.segment(half + off, d) = c * estar;
  }
  out.closest = PhaseVector(y);
  return out;
}

/// True iff B^T C B is positive definite.
inline bool coercivity_check(const TrussModel& t, double tol = kRankTolerance) {
  const TrussGeometry geo = truss_geometry(t);
  const Mat b = assemble_B(t).entries;
  const Vec c = Eigen::Map<const Vec>(geo.moduli.data(), b.rows());
  const Mat k = b.transpose() * c.asDiagonal() * b;
  Eigen::SelfAdjointEigenSolver<Mat> eig(k);
  const auto& ev = eig.eigenvalues();
  const double top = ev.cwiseAbs().maxCoeff();
  return top > 0.0 && ev.minCoeff() > tol * top;
}

}  // namespace ddinfer
