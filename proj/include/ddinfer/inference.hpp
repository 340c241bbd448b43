#pragma once

// Thermalized expectations computed directly from empirical data.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>

#include "ddinfer/errors.hpp"
#include "ddinfer/geometry.hpp"
#include "ddinfer/measures.hpp"
#include "ddinfer/numerics.hpp"
#include "ddinfer/quadrature.hpp"

namespace ddinfer {

/// f(y, z) on Z x Z, or f(z) on Z when `bivariate` is empty.
struct QuantityOfInterest {
  std::string name;
  Univariate univariate;
  std::function<double(const Vec&, const Vec&)> bivariate;
  bool affine = false;  // affine in z: Gaussian smoothing is the identity
  std::optional<double> bound;

  static QuantityOfInterest of_z(std::string name, Univariate f, bool affine = false) {
    return {std::move(name), std::move(f), {}, affine, std::nullopt};
  }
  static QuantityOfInterest of_pair(std::string name, std::function<double(const Vec&, const Vec&)> f) {
    return {std::move(name), {}, std::move(f), false, std::nullopt};
  }
  static QuantityOfInterest constant(double c) {
    return {"const", [c](const Vec&) { return c; }, {}, true, std::abs(c)};
  }
  /// z -> grad . z + offset
  static QuantityOfInterest linear(std::string name, Vec grad, double offset = 0.0) {
    return {std::move(name), [grad = std::move(grad), offset](const Vec& z) { return grad.dot(z) + offset; },
            {}, true, std::nullopt};
  }

  [[nodiscard]] bool is_bivariate() const { return static_cast<bool>(bivariate); }

  [[nodiscard]] double operator()(const Vec& y, const Vec& z) const {
    const double v = bivariate ? bivariate(y, z) : univariate(z);
    if (!std::isfinite(v)) throw DomainError("quantity of interest '" + name + "' is not finite");
    return v;
  }
};

struct InferenceResult {
  double expectation = 0.0;
  double total_variation = 0.0;
  double log_total_variation = kNegInf;
  double effective_sample_size = 0.0;
  bool degenerate = true;
};

/// One-pass log-domain weighted mean of k-vectors. Weights enter as logs; the
/// running maximum is factored out so nothing underflows. The mean is updated
/// as E += (w / W)(f - E), which keeps constants exact and the result inside
/// the hull of the inputs.
class ThermalAccumulator {
 public:
  explicit ThermalAccumulator(Eigen::Index components = 1)
      : mean_(Vec::Zero(components)),
        lo_(Vec::Constant(components, kInf)),
        hi_(Vec::Constant(components, -kInf)) {}

  void add(double log_weight, const Vec& values) {
    detail::require_dims(values.size() == mean_.size(), "accumulator component count mismatch");
    if (std::isnan(log_weight) || log_weight == kInf) throw DomainError("invalid log-weight");
    if (log_weight == kNegInf) return;
    double w;
    if (log_weight > max_) {
      const double r = std::exp(max_ - log_weight);
      sum_ *= r;
      sum_sq_ *= r * r;
      max_ = log_weight;
      w = 1.0;
    } else {
      w = std::exp(log_weight - max_);
    }
    sum_ += w;
    sum_sq_ += w * w;
    ++count_;
    if (w > 0.0) {
      const double t = w / sum_;
      for (Eigen::Index k = 0; k < mean_.size(); ++k) {
        mean_[k] += t * (values[k] - mean_[k]);
        lo_[k] = std::min(lo_[k], values[k]);
        hi_[k] = std::max(hi_[k], values[k]);
      }
    }
  }

  void add(double log_weight, double value) {
    Vec v(1);
    v[0] = value;
    add(log_weight, v);
  }

  [[nodiscard]] bool empty() const { return max_ == kNegInf; }
  [[nodiscard]] std::int64_t count() const { return count_; }
  [[nodiscard]] double log_total() const { return empty() ? kNegInf : max_ + std::log(sum_); }
  [[nodiscard]] double effective_sample_size() const { return empty() ? 0.0 : sum_ * sum_ / sum_sq_; }

  [[nodiscard]] Vec mean() const {
    if (empty()) throw DegenerateError("degenerate thermalization: every weight is zero");
    return mean_.cwiseMax(lo_).cwiseMin(hi_);
  }

  /// `log_prefactor` multiplies the total mass (e.g. -log B_beta).
  [[nodiscard]] InferenceResult result(double log_prefactor = 0.0, Eigen::Index component = 0) const {
    InferenceResult r;
    r.expectation = mean()[component];
    r.log_total_variation = log_total() + log_prefactor;
    r.total_variation = std::exp(r.log_total_variation);
    r.effective_sample_size = effective_sample_size();
    r.degenerate = r.effective_sample_size < 2.0;
    return r;
  }

 private:
  double max_ = kNegInf;
  double sum_ = 0.0;
  double sum_sq_ = 0.0;
  std::int64_t count_ = 0;
  Vec mean_;
  Vec lo_;
  Vec hi_;
};

/// sum f(y_i, z_i) c_i exp(-beta ||y_i - z_i||^2) / sum c_i exp(-beta ||y_i - z_i||^2).
/// B_beta cancels; it only enters the reported total variation.
inline InferenceResult expect_random_loading(const EmpiricalMeasure& mu, const QuantityOfInterest& f,
                                             const ThermalizationParams& p, const Metric& g) {
  if (!mu.is_paired()) throw DomainError("random loading needs a paired measure");
  if (mu.size() == 0) throw DomainError("empty data set");
  detail::require_dims(mu.point_dim() == g.dim(), "measure and metric dimensions differ");
  ThermalAccumulator acc;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    const Vec y = mu.y().col(i);
    const Vec z = mu.z().col(i);
    const double lw = mu.relative_log_weights()[i] - p.beta * g.squared_norm(y - z);
    if (lw == kNegInf) continue;
    acc.add(lw, f(y, z));
  }
  if (acc.empty()) throw DegenerateError("degenerate thermalization: every weight is zero");
  return acc.result(mu.log_scale() - log_B_beta(p.beta, g));
}

/// Deterministic loading: z_i = P_E y_i, f_hi the Gaussian average of f over
/// z_i + E0, weights c_i exp(-beta ||y_i - z_i||^2).
inline InferenceResult expect_det_loading(const EmpiricalMeasure& mu_d, const AffineSubspace& e,
                                          const QuantityOfInterest& f, const ThermalizationParams& p,
                                          const QuadratureMethod& quad = {}) {
  if (f.is_bivariate()) throw DomainError("deterministic loading needs a quantity of interest on Z");
  if (mu_d.size() == 0) throw DomainError("empty data set");
  const Metric& g = e.metric();
  detail::require_dims(mu_d.point_dim() == g.dim(), "measure and metric dimensions differ");
  ThermalAccumulator acc;
  for (Eigen::Index i = 0; i < mu_d.size(); ++i) {
    const Vec y = mu_d.y().col(i);
    const double lw = mu_d.relative_log_weights()[i] - p.beta * e.squared_distance(y);
    if (lw == kNegInf) continue;
    const Vec z = e.project(y);
    const double fhi = f.affine ? f.univariate(z)
                                : quadrature_f_hi(f.univariate, z, e.basis(), p.beta, quad,
                                                  static_cast<std::uint64_t>(i))
                                      .value;
    if (!std::isfinite(fhi)) throw DomainError("quantity of interest '" + f.name + "' is not finite");
    acc.add(lw, fhi);
  }
  if (acc.empty()) throw DegenerateError("degenerate thermalization: every weight is zero");
  return acc.result(mu_d.log_scale() + log_C_beta(p.beta, e) - log_B_beta(p.beta, g));
}

/// |E[f(y)] - E[f(z)]| under the normalized thermalized measure.
inline double marginal_gap(const EmpiricalMeasure& mu, const Univariate& f, const ThermalizationParams& p,
                           const Metric& g) {
  if (!mu.is_paired()) throw DomainError("marginal_gap needs a paired measure");
  if (mu.size() == 0) throw DomainError("empty data set");
  ThermalAccumulator acc(2);
  Vec v(2);
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    const Vec y = mu.y().col(i);
    const Vec z = mu.z().col(i);
    const double lw = mu.relative_log_weights()[i] - p.beta * g.squared_norm(y - z);
    if (lw == kNegInf) continue;
    v << f(y), f(z);
    acc.add(lw, v);
  }
  const Vec m = acc.mean();
  return std::abs(m[0] - m[1]);
}

}  // namespace ddinfer
