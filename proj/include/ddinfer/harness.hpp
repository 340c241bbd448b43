#pragma once

// Quenching schedules, empirical data generation and the convergence studies.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ddinfer/errors.hpp"
#include "ddinfer/geometry.hpp"
#include "ddinfer/inference.hpp"
#include "ddinfer/lattice.hpp"
#include "ddinfer/measures.hpp"
#include "ddinfer/numerics.hpp"
#include "ddinfer/truss.hpp"

namespace ddinfer {

// ---- schedules -------------------------------------------------------------------

struct QuenchSchedule {
  double beta0 = 1.0;          // reference in lambda = sqrt(beta / beta0)
  std::vector<double> deltas;  // delta_1 .. delta_H
  std::vector<double> betas;   // beta_1 .. beta_H

  /// delta_h = delta1 ratio^{h-1}, beta_h = beta1 (delta1 / delta_h)^exponent.
  /// exponent 1 is the default slow quench, lambda delta ~ delta^{1/2}.
  static QuenchSchedule geometric(double beta0, double delta1, double ratio, int horizon,
                                  double exponent = 1.0, std::optional<double> beta1 = std::nullopt) {
    if (!(beta0 > 0.0)) throw DomainError("beta0 must be positive");
    if (!(delta1 > 0.0)) throw DomainError("delta1 must be positive");
    if (!(ratio > 0.0 && ratio < 1.0)) throw DomainError("resolution ratio must lie in (0, 1)");
    if (horizon < 1) throw DomainError("horizon must be at least 1");
    QuenchSchedule s;
    s.beta0 = beta0;
    const double b1 = beta1.value_or(beta0);
    for (int h = 1; h <= horizon; ++h) {
      const double delta = delta1 * std::pow(ratio, h - 1);
      s.deltas.push_back(delta);
      s.betas.push_back(b1 * std::pow(delta1 / delta, exponent));
    }
    return s;
  }

  [[nodiscard]] int horizon() const { return static_cast<int>(deltas.size()); }
  [[nodiscard]] double lambda(int h) const { return std::sqrt(betas.at(static_cast<std::size_t>(h)) / beta0); }
  [[nodiscard]] double lambda_delta(int h) const { return lambda(h) * deltas.at(static_cast<std::size_t>(h)); }
};

struct ScheduleValidation {
  bool valid = false;
  double slope = 0.0;           // least-squares slope of log(lambda_h delta_h) per level
  double limit_estimate = 0.0;  // extrapolated limit of lambda_h delta_h
  std::vector<double> lambda_delta;
  std::string reason;
};

/// Minimum decay rate: lambda delta must fall by 4x every 7 levels.
inline const double kMinScheduleDecay = std::log(4.0) / 7.0;

/// Valid iff lambda_h delta_h is strictly decreasing and its geometric fit
/// decays at least as fast as kMinScheduleDecay per level.
inline ScheduleValidation schedule_validate(const QuenchSchedule& s) {
  const int horizon = s.horizon();
  if (static_cast<int>(s.betas.size()) != horizon) throw DomainError("schedule needs one beta per level");
  if (horizon < 3) throw DomainError("schedule validation needs a horizon of at least 3 levels");
  if (!(s.beta0 > 0.0)) throw DomainError("beta0 must be positive");
  for (int h = 0; h < horizon; ++h) {
    if (!(s.betas[static_cast<std::size_t>(h)] > 0.0) || !(s.deltas[static_cast<std::size_t>(h)] > 0.0))
      throw DomainError("schedule entries must be positive");
    if (h > 0 && !(s.betas[static_cast<std::size_t>(h)] > s.betas[static_cast<std::size_t>(h - 1)]))
      throw DomainError("beta_h must be strictly increasing");
    if (h > 0 && !(s.deltas[static_cast<std::size_t>(h)] < s.deltas[static_cast<std::size_t>(h - 1)]))
      throw DomainError("delta_h must be strictly decreasing");
  }
  ScheduleValidation v;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (int h = 0; h < horizon; ++h) {
    const double ld = s.lambda_delta(h);
    v.lambda_delta.push_back(ld);
    const double x = h + 1.0;
    const double y = std::log(ld);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = horizon;
  v.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  bool decreasing = true;
  for (int h = 1; h < horizon; ++h)
    decreasing = decreasing && v.lambda_delta[static_cast<std::size_t>(h)] < v.lambda_delta[static_cast<std::size_t>(h - 1)];
  const double scale = std::max(1e-12, 1e-9 * std::abs(sy / n));
  if (v.slope > scale) {
    v.limit_estimate = kInf;
    v.reason = "quench too fast: lambda_h delta_h grows";
  } else if (v.slope >= -scale) {
    v.limit_estimate = v.lambda_delta.back();
    v.reason = "quench too fast: lambda_h delta_h does not decay";
  } else if (!decreasing) {
    v.limit_estimate = 0.0;
    v.reason = "quench too fast: lambda_h delta_h is not monotone";
  } else if (v.slope > -kMinScheduleDecay) {
    v.limit_estimate = 0.0;
    v.reason = "quench too fast: lambda_h delta_h decays too slowly";
  } else {
    v.valid = true;
    v.limit_estimate = 0.0;
  }
  return v;
}

// ---- empirical measures ----------------------------------------------------------

struct GridSpec {
  double delta = 1.0;
  Vec lo;
  Vec hi;
};

struct SampleSpec {
  std::int64_t n = 1000;
  std::uint64_t seed = 0;
  Vec lo;  // rejection box
  Vec hi;
  double density_bound = 1.0;  // envelope for rejection sampling
};

namespace detail {

inline bool model_is_paired(const LikelihoodModel& model) {
  if (std::holds_alternative<SlidingGaussian>(model)) return true;
  if (const auto* c = std::get_if<CustomDensity>(&model)) return c->paired;
  if (const auto* d = std::get_if<DiscreteEmpirical>(&model)) return d->measure.is_paired();
  return false;
}

inline EmpiricalMeasure split_measure(const Mat& points, const Vec& log_c, bool paired) {
  if (!paired) return EmpiricalMeasure::from_log_weights(points, Mat(), log_c);
  const Eigen::Index half = points.rows() / 2;
  return EmpiricalMeasure::from_log_weights(points.topRows(half), points.bottomRows(half), log_c);
}

inline Mat stacked_points(const EmpiricalMeasure& mu) {
  if (!mu.is_paired()) return mu.y();
  Mat out(2 * mu.point_dim(), mu.size());
  out << mu.y(), mu.z();
  return out;
}

inline std::seed_seq seed_sequence(std::uint64_t seed, std::uint64_t stream) {
  return std::seed_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
}

}  // namespace detail

/// Midpoint rule on the cells of a box: weight = density x cell volume.
/// Discrete data are pushed forward by grid_transport instead.
inline EmpiricalMeasure make_empirical(const LikelihoodModel& model, const GridSpec& grid) {
  const bool paired = detail::model_is_paired(model);
  if (const auto* disc = std::get_if<DiscreteEmpirical>(&model)) {
    const Mat pts = detail::stacked_points(disc->measure);
    std::map<std::vector<double>, std::size_t> index;
    std::vector<Vec> atoms;
    std::vector<LogSumExp> mass;
    const Vec lw = disc->measure.log_weights();
    for (Eigen::Index i = 0; i < pts.cols(); ++i) {
      const Vec p = grid_transport(pts.col(i), grid.delta);
      std::vector<double> key(p.data(), p.data() + p.size());
      auto [it, fresh] = index.emplace(key, atoms.size());
      if (fresh) {
        atoms.push_back(p);
        mass.emplace_back();
      }
      mass[it->second].add(lw[i]);
    }
    Mat out(pts.rows(), static_cast<Eigen::Index>(atoms.size()));
    Vec log_c(out.cols());
    for (std::size_t j = 0; j < atoms.size(); ++j) {
      out.col(static_cast<Eigen::Index>(j)) = atoms[j];
      log_c[static_cast<Eigen::Index>(j)] = mass[j].value();
    }
    return detail::split_measure(out, log_c, paired);
  }
  const double log_cell = static_cast<double>(grid.lo.size()) * std::log(grid.delta);
  std::vector<Vec> pts;
  std::vector<double> lcs;
  for_each_box_cell(grid.lo, grid.hi, grid.delta, [&](const Vec& x) {
    const double ll = log_likelihood(model, x);
    if (ll == kNegInf) return;
    pts.push_back(x);
    lcs.push_back(ll + log_cell);
  });
  if (pts.empty()) throw DomainError("zero total mass in box");
  Mat out(grid.lo.size(), static_cast<Eigen::Index>(pts.size()));
  for (std::size_t j = 0; j < pts.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = pts[j];
  return detail::split_measure(out, Eigen::Map<const Vec>(lcs.data(), static_cast<Eigen::Index>(lcs.size())),
                               paired);
}

/// i.i.d. draws with uniform weights 1/n: rejection sampling in a box for
/// densities, resampling proportional to c for discrete data.
inline EmpiricalMeasure make_empirical(const LikelihoodModel& model, const SampleSpec& spec) {
  if (spec.n < 1) throw DomainError("sample size must be positive");
  const bool paired = detail::model_is_paired(model);
  auto seq = detail::seed_sequence(spec.seed, 0);
  std::mt19937_64 rng(seq);
  const Vec log_c = Vec::Constant(spec.n, -std::log(static_cast<double>(spec.n)));
  if (const auto* disc = std::get_if<DiscreteEmpirical>(&model)) {
    const Mat pts = detail::stacked_points(disc->measure);
    const Vec w = disc->measure.rescaled(-disc->measure.log_mass()).weights();
    if (!(w.sum() > 0.0)) throw DomainError("zero total mass");
    std::discrete_distribution<Eigen::Index> pick(w.data(), w.data() + w.size());
    Mat out(pts.rows(), spec.n);
    for (std::int64_t s = 0; s < spec.n; ++s) out.col(s) = pts.col(pick(rng));
    return detail::split_measure(out, log_c, paired);
  }
  detail::require_dims(spec.lo.size() == spec.hi.size() && spec.lo.size() > 0, "sampling box is malformed");
  if (!(spec.density_bound > 0.0)) throw DomainError("density bound must be positive");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Eigen::Index dim = spec.lo.size();
  Mat out(dim, spec.n);
  Vec x(dim);
  const std::int64_t max_tries = 1000 * spec.n + 100000;
  std::int64_t accepted = 0;
  for (std::int64_t tries = 0; accepted < spec.n; ++tries) {
    if (tries > max_tries) throw DomainError("zero total mass in box (rejection sampling stalled)");
    for (Eigen::Index i = 0; i < dim; ++i) x[i] = spec.lo[i] + (spec.hi[i] - spec.lo[i]) * unit(rng);
    const double dens = std::exp(log_likelihood(model, x));
    if (dens > spec.density_bound * (1.0 + 1e-12))
      throw DomainError("density exceeds the rejection envelope");
    if (unit(rng) * spec.density_bound < dens) out.col(accepted++) = x;
  }
  return detail::split_measure(out, log_c, paired);
}

// ---- reports ------------------------------------------------------------------------

struct LevelRecord {
  int h = 0;
  double beta = 0.0;
  double delta = 0.0;
  double lambda_delta = 0.0;
  Vec expectation;
  Vec reference;
  double abs_err = 0.0;
  double rel_err = 0.0;
  double ess = 0.0;
  double tv = 0.0;
  std::int64_t points = 0;
  bool degenerate = false;
};

struct ExperimentReport {
  std::string kind;
  std::vector<std::string> components;  // names of the expectation entries
  std::vector<LevelRecord> levels;
  bool converging = false;
  std::string verdict_reason;
  std::map<std::string, double> scalars;  // oracle values and other summaries
};

/// Minimum ESS at the last level for a converging verdict.
inline constexpr double kMinFinalEss = 10.0;

/// Converging iff the error strictly decreases over the last 3 levels and the
/// final level keeps an effective sample size of at least 10.
inline void assign_verdict(ExperimentReport& r) {
  const auto n = r.levels.size();
  if (n < 3) {
    r.converging = false;
    r.verdict_reason = "fewer than 3 levels";
    return;
  }
  for (std::size_t k = n - 3; k < n; ++k) {
    if (r.levels[k].degenerate || !std::isfinite(r.levels[k].rel_err)) {
      r.converging = false;
      r.verdict_reason = "degenerate level " + std::to_string(r.levels[k].h);
      return;
    }
  }
  const bool decreasing = r.levels[n - 1].abs_err < r.levels[n - 2].abs_err &&
                          r.levels[n - 2].abs_err < r.levels[n - 3].abs_err;
  const bool exact = r.levels[n - 1].abs_err == 0.0 && r.levels[n - 2].abs_err == 0.0 &&
                     r.levels[n - 3].abs_err == 0.0;
  if (!(decreasing || exact)) {
    r.converging = false;
    r.verdict_reason = "error does not decrease over the last 3 levels";
  } else if (r.levels[n - 1].ess < kMinFinalEss) {
    r.converging = false;
    r.verdict_reason = "effective sample size collapsed at the last level";
  } else {
    r.converging = true;
    r.verdict_reason = "converging";
  }
}

namespace detail {

/// sqrt(sum omega (e - r)^2), relative to sqrt(sum omega r^2).
inline void fill_errors(LevelRecord& rec, const Vec& omega) {
  const Vec diff = rec.expectation - rec.reference;
  rec.abs_err = std::sqrt((omega.array() * diff.array().square()).sum());
  const double ref = std::sqrt((omega.array() * rec.reference.array().square()).sum());
  rec.rel_err = ref > 0.0 ? rec.abs_err / ref : (rec.abs_err == 0.0 ? 0.0 : kInf);
}

/// Runs `pass(radius2)` on growing ellipsoids until the truncated region sits
/// at least `margin` below the best weight found. `pass` returns the largest
/// log-weight it saw (or -inf) relative to the continuum maximum.
template <class Pass>
void adaptive_ellipsoid_pass(double cut, double margin, Pass&& pass) {
  for (int attempt = 0; attempt < 8; ++attempt) {
    const double found = pass(2.0 * cut);
    if (found != kNegInf && found >= margin - cut) return;
    cut = found == kNegInf ? 4.0 * cut : (margin - found) + 1.0;
  }
}

inline void mark_degenerate(LevelRecord& rec, Eigen::Index comps) {
  rec.degenerate = true;
  rec.expectation = Vec::Constant(comps, std::numeric_limits<double>::quiet_NaN());
  rec.abs_err = rec.rel_err = kInf;
  rec.ess = 0.0;
  rec.tv = 0.0;
}

}  // namespace detail

// ---- deterministic loading: Gaussian truss ---------------------------------------------

struct DetTrussStudy {
  TrussModel truss;
  QuenchSchedule schedule;
  std::string qoi = "u";          // "u": free displacements; "const": f = 1
  double cut = 36.0;              // log-weight truncation below the continuum maximum
  double lattice_offset = 0.5;    // cell centers delta (k + offset)
};

/// Material grid data from exp(-C^{-1} |sig - C eps|^2 / 2), deterministic
/// loading on E of the truss, vs the closed-form mean displacement.
inline ExperimentReport run_convergence_study(const DetTrussStudy& study) {
  const TrussModel& t = study.truss;
  const GaussianTrussOracle oracle = truss_oracle(t);
  const AffineSubspace e = build_constraint_set(t);
  const Metric& g = e.metric();
  const Eigen::Index dim = g.dim();
  const Eigen::Index half = g.half_dim();
  const Eigen::Index n = oracle.b.cols();

  // -log L_D = y^T K y / 2
  Mat k = Mat::Zero(dim, dim);
  for (Eigen::Index m = 0; m < half; ++m) {
    const double c = g.moduli()[static_cast<std::size_t>(m)];
    k(m, m) = c;
    k(m, half + m) = k(half + m, m) = -1.0;
    k(half + m, half + m) = 1.0 / c;
  }
  const Mat gc = g.diag().asDiagonal() * e.complement();  // d^2 = |gc^T (y - z0)|^2
  const Mat m_thermal = gc * gc.transpose();
  const Vec& z0 = e.origin();
  // u(P_E y) = lu (y - z0)
  const Mat proj = e.basis() * e.basis().transpose() * g.diag().asDiagonal();
  const Mat lu = oracle.b.colPivHouseholderQr().solve(Mat(proj.topRows(half)));

  ExperimentReport report;
  report.kind = "converge";
  const bool constant = study.qoi == "const";
  if (!constant && study.qoi != "u") throw DomainError("unknown quantity of interest '" + study.qoi + "'");
  const Eigen::Index comps = constant ? 1 : n;
  for (Eigen::Index j = 0; j < comps; ++j)
    report.components.push_back(constant ? std::string("const") : "u" + std::to_string(j + 1));
  for (Eigen::Index j = 0; j < n; ++j) report.scalars["oracle.u" + std::to_string(j + 1)] = oracle.mean_u[j];
  for (Eigen::Index j = 0; j < oracle.mean_v.size(); ++j)
    report.scalars["oracle.v" + std::to_string(j + 1)] = oracle.mean_v[j];
  report.scalars["oracle.normalization"] = oracle.normalization;

  const Vec reference = constant ? Vec::Ones(1) : oracle.mean_u;
  const Vec offset = Vec::Constant(dim, study.lattice_offset);
  Vec r(comps), nc(gc.cols()), dy(dim), val(comps);
  for (int h = 0; h < study.schedule.horizon(); ++h) {
    const double beta = study.schedule.betas[static_cast<std::size_t>(h)];
    const double delta = study.schedule.deltas[static_cast<std::size_t>(h)];
    LevelRecord rec;
    rec.h = h + 1;
    rec.beta = beta;
    rec.delta = delta;
    rec.lambda_delta = study.schedule.lambda_delta(h);
    rec.reference = reference;

    const Mat hess = k + 2.0 * beta * m_thermal;
    const Vec center = hess.ldlt().solve(2.0 * beta * m_thermal * z0);
    auto log_weight = [&](const Vec& y) {
      dy.noalias() = y - z0;
      nc.noalias() = gc.transpose() * dy;
      return -0.5 * y.dot(k * y) - beta * nc.squaredNorm();
    };
    const double top = log_weight(center);
    const double log_cell = static_cast<double>(dim) * std::log(delta);

    ThermalAccumulator acc(comps);
    std::int64_t count = 0;
    detail::adaptive_ellipsoid_pass(study.cut, 36.0, [&](double radius2) {
      acc = ThermalAccumulator(comps);
      double best = kNegInf;
      count = for_each_lattice_point_in_ellipsoid(hess, center, offset * delta, delta, radius2, [&](const Vec& y) {
        const double lw = log_weight(y);
        best = std::max(best, lw - top);
        if (constant) {
          val[0] = 1.0;
        } else {
          val.noalias() = lu * dy;  // dy set by log_weight
        }
        acc.add(lw + log_cell, val);
      });
      return best;
    });
    rec.points = count;
    if (acc.empty()) {
      detail::mark_degenerate(rec, comps);
    } else {
      rec.expectation = acc.mean();
      rec.ess = acc.effective_sample_size();
      rec.tv = std::exp(acc.log_total() + log_C_beta(beta, e) - log_B_beta(beta, g));
      detail::fill_errors(rec, Vec::Ones(comps));
    }
    report.levels.push_back(rec);
  }
  assign_verdict(report);
  return report;
}

// ---- random loading: sliding Gaussians -------------------------------------------------

/// Limit measure of the sliding-Gaussian example, from dense 2-D quadrature of
/// exp(-<xi, Q xi> / 4) and the substitution y = xi / sqrt(2).
struct SlidingOracle {
  double xi_mass = 0.0;   // integral of exp(-<xi, Q xi> / 4)
  Mat xi_moments;         // normalized second moments of xi
  double limit_mass = 0.0;  // 2^{-N} xi_mass
  Mat y_moments;          // xi_moments / 2
};

inline SlidingOracle sliding_quadrature_oracle(const SlidingGaussian& s, int points_per_axis = 801) {
  if (s.half_dim != 1) throw DomainError("sliding-Gaussian quadrature oracle supports N = 1");
  const SlidingGaussianReference ref = sliding_gaussian_reference(s);
  if (!ref.transversal) throw DomainError("aligned sliding Gaussians: no finite limit measure (not transversal)");
  // box half-width: 12 standard deviations of the softest direction of Q / 2
  const double half_width = 12.0 * std::sqrt(2.0 / ref.eigenvalues.minCoeff());
  const double step = 2.0 * half_width / (points_per_axis - 1);
  double mass = 0.0, m11 = 0.0, m12 = 0.0, m22 = 0.0;
  for (int i = 0; i < points_per_axis; ++i) {
    const double x1 = -half_width + step * i;
    for (int j = 0; j < points_per_axis; ++j) {
      const double x2 = -half_width + step * j;
      const double q = ref.q(0, 0) * x1 * x1 + 2.0 * ref.q(0, 1) * x1 * x2 + ref.q(1, 1) * x2 * x2;
      const double w = std::exp(-0.25 * q);
      mass += w;
      m11 += w * x1 * x1;
      m12 += w * x1 * x2;
      m22 += w * x2 * x2;
    }
  }
  SlidingOracle o;
  o.xi_mass = mass * step * step;
  o.xi_moments.resize(2, 2);
  o.xi_moments << m11 / mass, m12 / mass, m12 / mass, m22 / mass;
  o.limit_mass = 0.5 * o.xi_mass;
  o.y_moments = 0.5 * o.xi_moments;
  return o;
}

struct SlidingStudy {
  SlidingGaussian model;
  QuenchSchedule schedule;
  std::string qoi = "moments";  // "moments": E[y y^T]; "const": f = 1
  bool unnormalized = false;    // track mu_{h,beta}(f) itself, mass included
  /// (u_h, v_h) shifts of the data in Z x Z, per level (index h - 1); empty = none.
  std::vector<std::pair<Vec, Vec>> shifts;
  double cut = 36.0;
  double lattice_offset = 0.5;
};

/// Paired grid data on Z x Z = R^4, thermalized at beta_h, vs the limit
/// measure of the sliding-Gaussian example.
inline ExperimentReport run_convergence_study(const SlidingStudy& study) {
  const SlidingGaussian& s = study.model;
  if (s.half_dim != 1) throw DomainError("sliding-Gaussian studies support N = 1");
  const SlidingGaussianReference ref = sliding_gaussian_reference(s);
  if (!ref.transversal) throw DomainError("aligned sliding Gaussians are not transversal");
  const SlidingOracle oracle = sliding_quadrature_oracle(s);
  const Metric g = Metric::euclidean(1);
  const bool constant = study.qoi == "const";
  if (!constant && study.qoi != "moments") throw DomainError("unknown quantity of interest '" + study.qoi + "'");

  ExperimentReport report;
  report.kind = study.shifts.empty() ? "sliding" : "shift";
  std::vector<std::string> names = constant ? std::vector<std::string>{"const"}
                                            : std::vector<std::string>{"m11", "m12", "m22"};
  Vec omega = constant ? Vec::Ones(1) : Vec(Eigen::Vector3d(1.0, 2.0, 1.0));
  Vec reference = constant ? Vec::Ones(1)
                           : Vec(Eigen::Vector3d(oracle.y_moments(0, 0), oracle.y_moments(0, 1),
                                                 oracle.y_moments(1, 1)));
  if (study.unnormalized) {
    names.insert(names.begin(), "mass");
    Vec om(omega.size() + 1), rf(reference.size() + 1);
    om << 1.0, omega;
    rf << oracle.limit_mass, oracle.limit_mass * reference;
    omega = om;
    reference = rf;
  }
  report.components = names;
  const auto comps = static_cast<Eigen::Index>(names.size());
  report.scalars["oracle.limit_mass"] = oracle.limit_mass;
  report.scalars["oracle.m11"] = oracle.y_moments(0, 0);
  report.scalars["oracle.m12"] = oracle.y_moments(0, 1);
  report.scalars["oracle.m22"] = oracle.y_moments(1, 1);
  report.scalars["q.lambda_min"] = ref.eigenvalues.minCoeff();
  report.scalars["q.lambda_max"] = ref.eigenvalues.maxCoeff();

  const Eigen::Vector2d a(s.a1, s.a2), b(s.b1, s.b2);
  Vec val(constant ? 1 : 3);
  for (int h = 0; h < study.schedule.horizon(); ++h) {
    const double beta = study.schedule.betas[static_cast<std::size_t>(h)];
    const double delta = study.schedule.deltas[static_cast<std::size_t>(h)];
    LevelRecord rec;
    rec.h = h + 1;
    rec.beta = beta;
    rec.delta = delta;
    rec.lambda_delta = study.schedule.lambda_delta(h);
    rec.reference = reference;

    Vec shift = Vec::Zero(4);
    if (!study.shifts.empty()) {
      const auto& [u, v] = study.shifts.at(static_cast<std::size_t>(h));
      detail::require_dims(u.size() == 2 && v.size() == 2, "shifts must live in Z = R^2");
      shift << u, v;
    }
    // -log weight = (x - shift)^T A (x - shift) / 2 + beta x^T T x
    Mat amat = Mat::Zero(4, 4);
    amat.topLeftCorner(2, 2) = a * a.transpose();
    amat.bottomRightCorner(2, 2) = b * b.transpose();
    Mat tmat(4, 4);
    tmat << Mat::Identity(2, 2), -Mat::Identity(2, 2), -Mat::Identity(2, 2), Mat::Identity(2, 2);
    const Mat hess = amat + 2.0 * beta * tmat;
    const Vec center = hess.ldlt().solve(amat * shift);
    auto log_weight = [&](const Vec& x) {
      const double ay = s.a1 * (x[0] - shift[0]) + s.a2 * (x[1] - shift[1]);
      const double bz = s.b1 * (x[2] - shift[2]) + s.b2 * (x[3] - shift[3]);
      const double d1 = x[0] - x[2];
      const double d2 = x[1] - x[3];
      return -0.5 * ay * ay - 0.5 * bz * bz - beta * (d1 * d1 + d2 * d2);
    };
    const double top = log_weight(center);
    const double log_cell = 4.0 * std::log(delta);
    const Vec offset = Vec::Constant(4, study.lattice_offset * delta);

    ThermalAccumulator acc(val.size());
    std::int64_t count = 0;
    detail::adaptive_ellipsoid_pass(study.cut, 36.0, [&](double radius2) {
      acc = ThermalAccumulator(val.size());
      double best = kNegInf;
      count = for_each_lattice_point_in_ellipsoid(hess, center, offset, delta, radius2, [&](const Vec& x) {
        const double lw = log_weight(x);
        best = std::max(best, lw - top);
        if (constant) {
          val[0] = 1.0;
        } else {
          val[0] = x[0] * x[0];
          val[1] = x[0] * x[1];
          val[2] = x[1] * x[1];
        }
        acc.add(lw + log_cell, val);
      });
      return best;
    });
    rec.points = count;
    if (acc.empty()) {
      detail::mark_degenerate(rec, comps);
    } else {
      rec.ess = acc.effective_sample_size();
      rec.tv = std::exp(acc.log_total() - log_B_beta(beta, g));
      const Vec mean = acc.mean();
      if (study.unnormalized) {
        rec.expectation.resize(comps);
        rec.expectation << rec.tv, rec.tv * mean;
      } else {
        rec.expectation = mean;
      }
      detail::fill_errors(rec, omega);
    }
    report.levels.push_back(rec);
  }
  assign_verdict(report);
  return report;
}

/// Sliding-Gaussian data shifted by (u_h, v_h) at level h; tracks the
/// unnormalized thermalized measure against the unshifted limit.
inline ExperimentReport shifting_error_experiment(const SlidingGaussian& model,
                                                  const std::vector<std::pair<Vec, Vec>>& shifts,
                                                  const QuenchSchedule& schedule,
                                                  const std::string& qoi = "moments") {
  if (static_cast<int>(shifts.size()) != schedule.horizon())
    throw DimensionError("one shift pair per level required");
  SlidingStudy study;
  study.model = model;
  study.schedule = schedule;
  study.qoi = qoi;
  study.unnormalized = true;
  study.shifts = shifts;
  ExperimentReport r = run_convergence_study(study);
  r.kind = "shift";
  return r;
}

}  // namespace ddinfer
