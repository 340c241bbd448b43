#pragma once

// Pin-jointed trusses: compatibility matrix B, Airy matrix A, the constraint
// set E and the closed-form Gaussian reference for linear random bars.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "ddinfer/errors.hpp"
#include "ddinfer/geometry.hpp"

namespace ddinfer {

struct Bar {
  int a = 0;  // start node
  int b = 0;  // end node, d_e points from a to b
  double area = 1.0;
  double modulus = 1.0;
};

struct Support {
  int node = 0;
  int component = 0;  // 0 = x, 1 = y, 2 = z
};

struct NodalLoad {
  int node = 0;
  Eigen::Vector3d force = Eigen::Vector3d::Zero();
};

struct TrussModel {
  int dim = 2;  // spatial dimension of node coordinates, 2 or 3
  std::vector<Eigen::Vector3d> nodes;
  std::vector<Bar> bars;
  std::vector<Support> supports;
  std::vector<NodalLoad> loads;
  std::vector<double> prescribed_strain;  // g_e; empty means zero

  [[nodiscard]] int members() const { return static_cast<int>(bars.size()); }
};

/// Geometry derived from a TrussModel. Free dofs are numbered node-major.
struct TrussGeometry {
  std::vector<double> lengths;
  std::vector<Eigen::Vector3d> directions;
  std::vector<std::pair<int, int>> free_dofs;  // (node, component)
  std::vector<double> weights;                 // w_e = A_e L_e
  std::vector<double> moduli;
};

inline TrussGeometry truss_geometry(const TrussModel& t) {
  if (t.dim != 2 && t.dim != 3) throw DomainError("truss dimension must be 2 or 3");
  if (t.bars.empty()) throw DomainError("truss has no bars");
  const int nn = static_cast<int>(t.nodes.size());
  TrussGeometry geo;
  std::vector<int> degree(static_cast<std::size_t>(nn), 0);
  for (std::size_t e = 0; e < t.bars.size(); ++e) {
    const Bar& bar = t.bars[e];
    const std::string tag = "bar " + std::to_string(e);
    if (bar.a < 0 || bar.a >= nn || bar.b < 0 || bar.b >= nn)
      throw DomainError(tag + " references an unknown node");
    if (bar.a == bar.b) throw DomainError(tag + " connects a node to itself");
    if (!(bar.area > 0.0) || !std::isfinite(bar.area))
      throw DomainError(tag + " must have positive area");
    if (!(bar.modulus > 0.0) || !std::isfinite(bar.modulus))
      throw DomainError(tag + " must have positive modulus");
    const Eigen::Vector3d span = t.nodes[static_cast<std::size_t>(bar.b)] -
                                 t.nodes[static_cast<std::size_t>(bar.a)];
    const double len = span.norm();
    if (!(len > 0.0)) throw DomainError(tag + " has zero length");
    geo.lengths.push_back(len);
    geo.directions.emplace_back(span / len);
    geo.weights.push_back(bar.area * len);
    geo.moduli.push_back(bar.modulus);
    ++degree[static_cast<std::size_t>(bar.a)];
    ++degree[static_cast<std::size_t>(bar.b)];
  }
  for (int i = 0; i < nn; ++i)
    if (degree[static_cast<std::size_t>(i)] == 0)
      throw DomainError("dangling node " + std::to_string(i) + " is not attached to any bar");

  std::vector<char> fixed(static_cast<std::size_t>(nn * t.dim), 0);
  for (const Support& s : t.supports) {
    if (s.node < 0 || s.node >= nn || s.component < 0 || s.component >= t.dim)
      throw DomainError("support references an unknown node or component");
    fixed[static_cast<std::size_t>(s.node * t.dim + s.component)] = 1;
  }
  for (int i = 0; i < nn; ++i)
    for (int k = 0; k < t.dim; ++k)
      if (!fixed[static_cast<std::size_t>(i * t.dim + k)]) geo.free_dofs.emplace_back(i, k);
  if (geo.free_dofs.empty()) throw DomainError("no free dofs");
  return geo;
}

inline Metric truss_metric(const TrussModel& t) {
  const TrussGeometry geo = truss_geometry(t);
  return Metric(geo.weights, geo.moduli, 1);
}

/// Row e holds d_e / L_e on the dofs of node b and -d_e / L_e on node a.
inline LinearMap assemble_B(const TrussModel& t) {
  const TrussGeometry geo = truss_geometry(t);
  const auto m = static_cast<Eigen::Index>(t.bars.size());
  const auto n = static_cast<Eigen::Index>(geo.free_dofs.size());
  Mat b = Mat::Zero(m, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto [node, comp] = geo.free_dofs[static_cast<std::size_t>(j)];
    for (Eigen::Index e = 0; e < m; ++e) {
      const Bar& bar = t.bars[static_cast<std::size_t>(e)];
      const double c = geo.directions[static_cast<std::size_t>(e)][comp] /
                       geo.lengths[static_cast<std::size_t>(e)];
      if (bar.b == node) b(e, j) += c;
      if (bar.a == node) b(e, j) -= c;
    }
  }
  return {b, "members", "free dofs"};
}

/// Force vector on the free dofs.
inline Vec assemble_load(const TrussModel& t) {
  const TrussGeometry geo = truss_geometry(t);
  Vec f = Vec::Zero(static_cast<Eigen::Index>(geo.free_dofs.size()));
  for (const NodalLoad& load : t.loads) {
    if (load.node < 0 || load.node >= static_cast<int>(t.nodes.size()))
      throw DomainError("load references an unknown node");
    // components on supported dofs go straight into the support
    for (std::size_t j = 0; j < geo.free_dofs.size(); ++j)
      if (geo.free_dofs[j].first == load.node)
        f[static_cast<Eigen::Index>(j)] += load.force[geo.free_dofs[j].second];
  }
  return f;
}

inline Vec prescribed_strain(const TrussModel& t) {
  const auto m = static_cast<Eigen::Index>(t.bars.size());
  if (t.prescribed_strain.empty()) return Vec::Zero(m);
  detail::require_dims(static_cast<Eigen::Index>(t.prescribed_strain.size()) == m,
                       "prescribed strains must have one entry per bar");
  return Eigen::Map<const Vec>(t.prescribed_strain.data(), m);
}

/// Orthonormal basis of Ker(B^T W): self-equilibrated member forces.
inline LinearMap constraint_airy(const TrussModel& t) {
  const TrussGeometry geo = truss_geometry(t);
  const Mat b = assemble_B(t).entries;
  const Vec w = Eigen::Map<const Vec>(geo.weights.data(), static_cast<Eigen::Index>(geo.weights.size()));
  const Mat btw = b.transpose() * w.asDiagonal();
  return {nullspace_basis(btw), "members", "redundants"};
}

namespace detail {

inline void require_full_column_rank(const Mat& b) {
  if (numerical_rank(b) < b.cols())
    throw DomainError("mechanism: rank(B) = " + std::to_string(numerical_rank(b)) + " < n = " +
                      std::to_string(b.cols()));
}

}  // namespace detail

/// Particular solution of B^T W sigma = f with least Euclidean norm.
inline Vec equilibrium_particular(const Mat& b, const Vec& w, const Vec& f) {
  const Mat btw = b.transpose() * w.asDiagonal();
  const Vec sig0 = btw.completeOrthogonalDecomposition().solve(f);
  const double scale = std::max(1.0, f.norm());
  if ((btw * sig0 - f).norm() > 1e-9 * scale) throw DomainError("unequilibrable load");
  return sig0;
}

/// E = z0 + {(B u, sigma) : B^T W sigma = 0}, z0 = (g, sigma0).
inline AffineSubspace build_constraint_set(const TrussModel& t) {
  const TrussGeometry geo = truss_geometry(t);
  const Mat b = assemble_B(t).entries;
  detail::require_full_column_rank(b);
  const auto m = b.rows();
  const Vec w = Eigen::Map<const Vec>(geo.weights.data(), m);
  const Vec sig0 = equilibrium_particular(b, w, assemble_load(t));
  const Mat airy = constraint_airy(t).entries;

  Mat span = Mat::Zero(2 * m, b.cols() + airy.cols());
  span.topLeftCorner(m, b.cols()) = b;
  span.bottomRightCorner(m, airy.cols()) = airy;
  Vec origin(2 * m);
  origin << prescribed_strain(t), sig0;
  return AffineSubspace(origin, span, Metric(geo.weights, geo.moduli, 1));
}

struct GaussianTrussOracle {
  Vec mean_u;
  Vec mean_v;
  Mat stiffness;   // B^T C B
  Mat compliance;  // A^T C^{-1} A
  double normalization = 0.0;  // integral of L(u, v) du dv
  double jacobian = 1.0;       // sqrt(det(A^T A) det(B^T B)), with the A used here
  Mat b;
  Mat airy;
  Vec eps0;
  Vec sig0;
  Vec moduli;

  /// Integral of the product likelihood over E against N-dimensional Hausdorff measure.
  [[nodiscard]] double hausdorff_normalization() const { return jacobian * normalization; }

  /// Displacements u with eps = eps0 + B u (least squares off E).
  [[nodiscard]] Vec u_of(const Vec& eps) const {
    return b.colPivHouseholderQr().solve(eps - eps0);
  }
  [[nodiscard]] Vec v_of(const Vec& sig) const {
    if (airy.cols() == 0) return Vec(0);
    return airy.colPivHouseholderQr().solve(sig - sig0);
  }
};

/// Closed-form mean and normalization for unit-weight Gaussian bars. `airy`
/// overrides the Airy matrix; by default the orthonormal basis of Ker(B^T) is
/// used, for which det(A^T A) = 1 and only det(B^T B) enters the Jacobian.
inline GaussianTrussOracle truss_oracle(const TrussModel& t,
                                        const std::optional<Mat>& airy = std::nullopt) {
  const TrussGeometry geo = truss_geometry(t);
  for (std::size_t e = 0; e < geo.weights.size(); ++e)
    if (std::abs(geo.weights[e] - 1.0) > 1e-12)
      throw DomainError("truss_oracle needs unit member weights (area = 1 / length); bar " +
                        std::to_string(e) + " has w = " + std::to_string(geo.weights[e]));
  GaussianTrussOracle o;
  o.b = assemble_B(t).entries;
  detail::require_full_column_rank(o.b);
  const auto m = o.b.rows();
  o.moduli = Eigen::Map<const Vec>(geo.moduli.data(), m);
  o.airy = airy ? *airy : constraint_airy(t).entries;
  detail::require_dims(o.airy.rows() == m, "Airy matrix must have one row per bar");
  if (o.airy.cols() + o.b.cols() != m)
    throw DomainError("Airy matrix must have m - n columns");
  if ((o.b.transpose() * o.airy).norm() > 1e-10 * std::max(1.0, o.airy.norm()))
    throw DomainError("Airy matrix columns are not self-equilibrated");
  o.eps0 = prescribed_strain(t);
  o.sig0 = equilibrium_particular(o.b, Vec::Ones(m), assemble_load(t));

  Mat direct(m, m);
  direct << o.airy, o.moduli.asDiagonal() * o.b;
  Eigen::JacobiSVD<Mat> svd(direct);
  const auto& s = svd.singularValues();
  if (!(s[m - 1] > 0.0) || s[0] / s[m - 1] > 1e12)
    throw DomainError("Z is not the direct sum of A R^l and C B R^n");

  const Vec cinv = o.moduli.cwiseInverse();
  o.stiffness = o.b.transpose() * o.moduli.asDiagonal() * o.b;
  o.compliance = o.airy.transpose() * cinv.asDiagonal() * o.airy;
  o.mean_u = o.stiffness.ldlt().solve(o.b.transpose() * (o.sig0 - o.moduli.cwiseProduct(o.eps0)));
  if (o.airy.cols() > 0)
    o.mean_v = o.compliance.ldlt().solve(o.airy.transpose() * (o.eps0 - cinv.cwiseProduct(o.sig0)));
  else
    o.mean_v = Vec(0);

  const double two_pi = 2.0 * std::numbers::pi;
  const double log_det_k = (o.stiffness / two_pi).ldlt().vectorD().array().log().sum();
  const double log_det_c =
      o.airy.cols() > 0 ? (o.compliance / two_pi).ldlt().vectorD().array().log().sum() : 0.0;
  o.normalization = std::exp(-0.5 * (log_det_k + log_det_c));
  const double det_btb = (o.b.transpose() * o.b).determinant();
  const double det_ata = o.airy.cols() > 0 ? (o.airy.transpose() * o.airy).determinant() : 1.0;
  o.jacobian = std::sqrt(det_ata * det_btb);
  return o;
}

/// Normalized density of outcomes in (u, v) coordinates.
inline double oracle_density(const GaussianTrussOracle& o, const Vec& u, const Vec& v) {
  detail::require_dims(u.size() == o.mean_u.size() && v.size() == o.mean_v.size(),
                       "oracle_density: coordinate lengths do not match the oracle");
  const Vec du = u - o.mean_u;
  const Vec dv = v - o.mean_v;
  double q = du.dot(o.stiffness * du);
  if (dv.size() > 0) q += dv.dot(o.compliance * dv);
  return std::exp(-0.5 * q) / o.normalization;
}

}  // namespace ddinfer
