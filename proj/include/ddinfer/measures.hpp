#pragma once

// Likelihood models, empirical measures and their thermalization.
//
// Weights are stored as natural logs throughout; a zero weight is -inf.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "ddinfer/errors.hpp"
#include "ddinfer/geometry.hpp"
#include "ddinfer/numerics.hpp"

namespace ddinfer {

/// Weighted atoms {(c_i, y_i)} or {(c_i, (y_i, z_i))}; one column per atom.
class EmpiricalMeasure {
 public:
  EmpiricalMeasure() = default;

  /// Material-only measure from nonnegative weights.
  static EmpiricalMeasure material(Mat y, const Vec& c) { return from_weights(std::move(y), Mat(), c); }
  static EmpiricalMeasure paired(Mat y, Mat z, const Vec& c) {
    return from_weights(std::move(y), std::move(z), c);
  }

  static EmpiricalMeasure from_log_weights(Mat y, Mat z, Vec log_c) {
    EmpiricalMeasure mu;
    mu.y_ = std::move(y);
    mu.z_ = std::move(z);
    mu.log_c_ = std::move(log_c);
    mu.validate();
    return mu;
  }

  [[nodiscard]] Eigen::Index size() const { return log_c_.size(); }
  [[nodiscard]] bool is_paired() const { return z_.cols() > 0 || (size() == 0 && z_.rows() > 0); }
  [[nodiscard]] Eigen::Index point_dim() const { return y_.rows(); }
  [[nodiscard]] const Mat& y() const { return y_; }
  [[nodiscard]] const Mat& z() const { return z_; }
  /// log c_i, including the common scale.
  [[nodiscard]] Vec log_weights() const { return (log_c_.array() + log_scale_).matrix(); }
  [[nodiscard]] Vec weights() const { return log_weights().array().exp(); }
  /// log c_i up to the common factor exp(log_scale()); normalized quantities use only these.
  [[nodiscard]] const Vec& relative_log_weights() const { return log_c_; }
  [[nodiscard]] double log_scale() const { return log_scale_; }

  /// log of the total mass; -inf for the zero measure.
  [[nodiscard]] double log_mass() const { return log_sum_exp(log_c_) + log_scale_; }

  /// Same atoms with every weight multiplied by exp(log_factor). The factor is
  /// kept apart from the per-atom weights so normalized results are unchanged bit for bit.
  [[nodiscard]] EmpiricalMeasure rescaled(double log_factor) const {
    if (!std::isfinite(log_factor)) throw DomainError("rescale factor must be finite and positive");
    EmpiricalMeasure out = *this;
    out.log_scale_ += log_factor;
    return out;
  }

 private:
  static EmpiricalMeasure from_weights(Mat y, Mat z, const Vec& c) {
    Vec log_c(c.size());
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      if (!std::isfinite(c[i])) throw DomainError("weight " + std::to_string(i) + " is not finite");
      if (c[i] < 0.0) throw DomainError("negative weight at atom " + std::to_string(i));
      log_c[i] = c[i] > 0.0 ? std::log(c[i]) : kNegInf;
    }
    return from_log_weights(std::move(y), std::move(z), std::move(log_c));
  }

  void validate() const {
    detail::require_dims(y_.cols() == log_c_.size(), "one weight per atom required");
    if (z_.size() > 0 || z_.cols() > 0)
      detail::require_dims(z_.rows() == y_.rows() && z_.cols() == y_.cols(),
                           "paired atoms need y and z of equal shape");
    if (!y_.allFinite() || !z_.allFinite()) throw DomainError("atoms have non-finite coordinates");
    for (Eigen::Index i = 0; i < log_c_.size(); ++i)
      if (std::isnan(log_c_[i]) || log_c_[i] == kInf)
        throw DomainError("invalid log-weight at atom " + std::to_string(i));
  }

  Mat y_;
  Mat z_;
  Vec log_c_;
  double log_scale_ = 0.0;
};

struct ThermalizationParams {
  double beta = 1.0;
  double beta0 = 1.0;

  ThermalizationParams() = default;
  ThermalizationParams(double b, double b0 = 1.0) : beta(b), beta0(b0) {
    if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("beta must be positive");
    if (!(beta0 > 0.0) || !std::isfinite(beta0)) throw DomainError("beta0 must be positive");
  }
  [[nodiscard]] double lambda() const { return std::sqrt(beta / beta0); }
};

// ---- likelihood models -----------------------------------------------------

/// Per-member exp(-C^{-1} |sig - C eps|^2 / 2) on Z.
struct GaussianGraph {
  std::vector<double> moduli;
  int block_dim = 1;
};

/// L_D(y) = exp(-|a1 y1 + a2 y2|^2 / 2), L_E(z) = exp(-|b1 z1 + b2 z2|^2 / 2) on R^N x R^N.
struct SlidingGaussian {
  double a1 = 1.0, a2 = 0.0, b1 = 0.0, b2 = 1.0;
  int half_dim = 1;

  static SlidingGaussian rotated(double a1, double a2, double theta, int n = 1) {
    return {a1, a2, a1 * std::cos(theta) - a2 * std::sin(theta),
            a1 * std::sin(theta) + a2 * std::cos(theta), n};
  }
};

/// Product of local densities L_e(eps_e, sig_e).
struct ProductOfLocals {
  std::vector<std::function<double(const Vec&)>> locals;
  int block_dim = 1;
};

struct DiscreteEmpirical {
  EmpiricalMeasure measure;
};

/// Arbitrary density on Z (material) or Z x Z (paired: argument is (y, z) stacked).
struct CustomDensity {
  std::function<double(const Vec&)> density;
  bool paired = false;
};

using LikelihoodModel =
    std::variant<GaussianGraph, SlidingGaussian, ProductOfLocals, DiscreteEmpirical, CustomDensity>;

/// -log L with L = 0 mapped to +inf.
inline double material_potential(double likelihood) {
  if (std::isnan(likelihood) || likelihood < 0.0)
    throw DomainError("likelihood values must be nonnegative");
  if (likelihood == 0.0) return kInf;
  return -std::log(likelihood);
}

/// log L at a point of Z (material models) or of Z x Z (paired models).
inline double log_likelihood(const LikelihoodModel& model, const Vec& x) {
  return std::visit(
      [&](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, GaussianGraph>) {
          const auto d = static_cast<Eigen::Index>(m.block_dim);
          const auto half = static_cast<Eigen::Index>(m.moduli.size()) * d;
          detail::require_dims(x.size() == 2 * half, "gaussian_graph: point is not in Z");
          double phi = 0.0;
          for (std::size_t e = 0; e < m.moduli.size(); ++e) {
            const double c = m.moduli[e];
            const auto off = static_cast<Eigen::Index>(e) * d;
            phi += 0.5 * (x.segment(half + off, d) - c * x.segment(off, d)).squaredNorm() / c;
          }
          return -phi;
        } else if constexpr (std::is_same_v<T, SlidingGaussian>) {
          const Eigen::Index n = m.half_dim;
          detail::require_dims(x.size() == 4 * n, "sliding_gaussian: point is not in Z x Z");
          const Vec ay = m.a1 * x.segment(0, n) + m.a2 * x.segment(n, n);
          const Vec bz = m.b1 * x.segment(2 * n, n) + m.b2 * x.segment(3 * n, n);
          return -0.5 * ay.squaredNorm() - 0.5 * bz.squaredNorm();
        } else if constexpr (std::is_same_v<T, ProductOfLocals>) {
          const auto d = static_cast<Eigen::Index>(m.block_dim);
          const auto half = static_cast<Eigen::Index>(m.locals.size()) * d;
          detail::require_dims(x.size() == 2 * half, "product_of_locals: point is not in Z");
          double lp = 0.0;
          for (std::size_t e = 0; e < m.locals.size(); ++e) {
            const auto off = static_cast<Eigen::Index>(e) * d;
            Vec local(2 * d);
            local << x.segment(off, d), x.segment(half + off, d);
            lp -= material_potential(m.locals[e](local));
          }
          return lp;
        } else if constexpr (std::is_same_v<T, DiscreteEmpirical>) {
          throw DomainError("discrete_empirical has no density; use its atoms directly");
        } else {
          return -material_potential(m.density(x));
        }
      },
      model);
}

// ---- normalization constants -------------------------------------------------

/// log of B_beta = integral over Z of exp(-beta ||xi||^2) d xi = (pi / beta)^N / sqrt(det G).
inline double log_B_beta(double beta, const Metric& g) {
  if (!(beta > 0.0)) throw DomainError("beta must be positive");
  return static_cast<double>(g.half_dim()) * std::log(std::numbers::pi / beta) - 0.5 * g.log_det();
}
inline double B_beta(double beta, const Metric& g) { return std::exp(log_B_beta(beta, g)); }

/// log of C_beta = integral over E0 of exp(-beta ||xi||^2) dH, in metric-orthonormal
/// coordinates of E0: (pi / beta)^{dim E0 / 2}.
inline double log_C_beta(double beta, Eigen::Index subspace_dim) {
  if (!(beta > 0.0)) throw DomainError("beta must be positive");
  return 0.5 * static_cast<double>(subspace_dim) * std::log(std::numbers::pi / beta);
}
inline double log_C_beta(double beta, const AffineSubspace& e) { return log_C_beta(beta, e.dim()); }
inline double C_beta(double beta, const AffineSubspace& e) { return std::exp(log_C_beta(beta, e)); }

// ---- thermalization ------------------------------------------------------------

inline double log_thermal_weight(const Vec& y, const Vec& z, const ThermalizationParams& p,
                                 const Metric& g) {
  return -p.beta * g.squared_norm(y - z) - log_B_beta(p.beta, g);
}
inline double thermal_weight(const Vec& y, const Vec& z, const ThermalizationParams& p,
                             const Metric& g) {
  return std::exp(log_thermal_weight(y, z, p, g));
}

/// Pair weights c_i w_beta(y_i, z_i), kept as logs.
inline EmpiricalMeasure thermalize_discrete(const EmpiricalMeasure& mu, const ThermalizationParams& p,
                                            const Metric& g) {
  if (!mu.is_paired()) throw DomainError("thermalize_discrete needs a paired measure");
  detail::require_dims(mu.point_dim() == g.dim(), "measure and metric dimensions differ");
  const double lb = log_B_beta(p.beta, g);
  Vec lw(mu.size());
  bool any = false;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    lw[i] = mu.relative_log_weights()[i] - p.beta * g.squared_norm(mu.y().col(i) - mu.z().col(i));
    any = any || lw[i] != kNegInf;
  }
  if (!any) throw DegenerateError("degenerate thermalization: every weight is zero");
  return EmpiricalMeasure::from_log_weights(mu.y(), mu.z(), std::move(lw)).rescaled(mu.log_scale() - lb);
}

/// Deterministic loading: atoms (y_i, P_E y_i) with weights
/// c_i B_beta^{-1} C_beta exp(-beta ||y_i - P_E y_i||^2).
inline EmpiricalMeasure thermalize_det_loading(const EmpiricalMeasure& mu_d, const AffineSubspace& e,
                                               const ThermalizationParams& p) {
  const Metric& g = e.metric();
  detail::require_dims(mu_d.point_dim() == g.dim(), "measure and metric dimensions differ");
  const double shift = log_C_beta(p.beta, e) - log_B_beta(p.beta, g);
  Mat z(mu_d.y().rows(), mu_d.size());
  Vec lw(mu_d.size());
  bool any = false;
  for (Eigen::Index i = 0; i < mu_d.size(); ++i) {
    const Vec y = mu_d.y().col(i);
    z.col(i) = e.project(y);
    lw[i] = mu_d.relative_log_weights()[i] - p.beta * e.squared_distance(y);
    any = any || lw[i] != kNegInf;
  }
  if (!any) throw DegenerateError("degenerate thermalization: every weight is zero");
  return EmpiricalMeasure::from_log_weights(mu_d.y(), std::move(z), std::move(lw)).rescaled(mu_d.log_scale() + shift);
}

inline double log_total_variation(const EmpiricalMeasure& mu) { return mu.log_mass(); }
inline double total_variation(const EmpiricalMeasure& mu) { return std::exp(mu.log_mass()); }

// ---- Kullback-Leibler ------------------------------------------------------------

namespace detail {

inline std::vector<double> atom_key(const EmpiricalMeasure& mu, Eigen::Index i) {
  std::vector<double> key(mu.y().col(i).data(), mu.y().col(i).data() + mu.point_dim());
  if (mu.is_paired()) key.insert(key.end(), mu.z().col(i).data(), mu.z().col(i).data() + mu.point_dim());
  return key;
}

/// mu h(nu / mu) with h(t) = t log t - t + 1, from log masses.
inline double kl_term(double log_nu, double log_mu) {
  if (log_mu == kNegInf) return log_nu == kNegInf ? 0.0 : kInf;
  const double mu = std::exp(log_mu);
  if (log_nu == kNegInf) return mu;
  const double r = log_nu - log_mu;
  const double t = std::exp(r);
  return mu * (t * r - t + 1.0);
}

}  // namespace detail

/// Discrete G(nu) = sum nu log(nu / mu) - |nu| + |mu|. Atoms are matched by
/// exact coordinates; mass of nu outside the support of mu gives +inf.
inline double kl_divergence(const EmpiricalMeasure& nu, const EmpiricalMeasure& mu) {
  detail::require_dims(nu.point_dim() == mu.point_dim() && nu.is_paired() == mu.is_paired(),
                       "kl_divergence: measures live on different spaces");
  std::map<std::vector<double>, std::pair<LogSumExp, LogSumExp>> atoms;  // (nu, mu)
  const Vec lmu = mu.log_weights(), lnu = nu.log_weights();
  for (Eigen::Index i = 0; i < mu.size(); ++i) atoms[detail::atom_key(mu, i)].second.add(lmu[i]);
  for (Eigen::Index i = 0; i < nu.size(); ++i) atoms[detail::atom_key(nu, i)].first.add(lnu[i]);
  double g = 0.0;
  for (const auto& [key, pair] : atoms) {
    g += detail::kl_term(pair.first.value(), pair.second.value());
    if (g == kInf) return kInf;
  }
  return g;
}

// ---- diagonal concentration diagnostics -------------------------------------------

/// Total mass of the atoms with ||y - z|| >= delta.
inline double offdiagonal_mass(const EmpiricalMeasure& mu, double delta, const Metric& g) {
  if (!mu.is_paired()) throw DomainError("offdiagonal_mass needs a paired measure");
  LogSumExp acc;
  for (Eigen::Index i = 0; i < mu.size(); ++i)
    if (std::sqrt(g.squared_norm(mu.y().col(i) - mu.z().col(i))) >= delta) acc.add(mu.relative_log_weights()[i]);
  return std::exp(acc.value() + mu.log_scale());
}

/// Fraction of the total mass carried by atoms with ||y - z|| >= delta.
inline double offdiagonal_fraction(const EmpiricalMeasure& mu, double delta, const Metric& g) {
  return offdiagonal_mass(mu.rescaled(-mu.log_mass()), delta, g);
}

/// B_1^{-1} beta^N exp(-beta delta^2) times the untempered off-diagonal mass.
inline double offdiagonal_bound(const EmpiricalMeasure& untempered, double beta, double delta,
                                const Metric& g) {
  const double mass = offdiagonal_mass(untempered, delta, g);
  if (mass == 0.0) return 0.0;
  return std::exp(-log_B_beta(1.0, g) + static_cast<double>(g.half_dim()) * std::log(beta) -
                  beta * delta * delta + std::log(mass));
}

// ---- sliding Gaussians ---------------------------------------------------------------

struct SlidingGaussianReference {
  Mat q;                    // 2N x 2N
  Vec eigenvalues;          // numeric, ascending
  double lambda_min = 0.0;  // |a|^2 (1 - |cos theta|), rotated parameterization only
  double lambda_max = 0.0;
  bool rotated = false;
  bool transversal = false;

  /// Second moments of the limit measure in y: the inverse of Q.
  [[nodiscard]] Mat limit_covariance() const {
    if (!transversal) throw DomainError("aligned sliding Gaussians have no finite limit measure");
    return q.inverse();
  }
};

inline Mat sliding_gaussian_q(const SlidingGaussian& s) {
  const Eigen::Index n = s.half_dim;
  const Mat i = Mat::Identity(n, n);
  Mat q(2 * n, 2 * n);
  q << (s.a1 * s.a1 + s.b1 * s.b1) * i, (s.a1 * s.a2 + s.b1 * s.b2) * i,
      (s.a1 * s.a2 + s.b1 * s.b2) * i, (s.a2 * s.a2 + s.b2 * s.b2) * i;
  return q;
}

inline SlidingGaussianReference sliding_gaussian_reference(const SlidingGaussian& s) {
  if (s.half_dim <= 0) throw DomainError("sliding Gaussian needs N >= 1");
  if (!(s.a1 * s.a1 + s.a2 * s.a2 > 0.0) || !(s.b1 * s.b1 + s.b2 * s.b2 > 0.0))
    throw DomainError("degenerate sliding Gaussian coefficients");
  SlidingGaussianReference r;
  r.q = sliding_gaussian_q(s);
  Eigen::SelfAdjointEigenSolver<Mat> eig(r.q);
  r.eigenvalues = eig.eigenvalues();
  const double top = r.eigenvalues.maxCoeff();
  r.transversal = r.eigenvalues.minCoeff() > 1e-12 * top;
  r.lambda_min = r.eigenvalues.minCoeff();
  r.lambda_max = top;
  return r;
}

inline SlidingGaussianReference sliding_gaussian_reference(double a1, double a2, double theta,
                                                           int n = 1) {
  SlidingGaussianReference r = sliding_gaussian_reference(SlidingGaussian::rotated(a1, a2, theta, n));
  const double a2norm = a1 * a1 + a2 * a2;
  const double c = std::abs(std::cos(theta));
  r.rotated = true;
  r.lambda_min = a2norm * (1.0 - c);
  r.lambda_max = a2norm * (1.0 + c);
  r.transversal = std::abs(std::sin(theta)) > 1e-12;
  return r;
}

}  // namespace ddinfer
