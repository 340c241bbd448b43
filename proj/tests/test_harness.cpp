#include <gtest/gtest.h>

#include <numbers>
#include <random>

#include "ddinfer/harness.hpp"
#include "ddinfer/lattice.hpp"
#include "oracles.hpp"

using namespace ddinfer;

namespace {

Eigen::Vector3d p2(double x, double y) { return {x, y, 0.0}; }

TrussModel three_bar() {
  TrussModel t;
  t.nodes = {p2(0, 0), p2(-1, 1.2), p2(0.35, 1), p2(1.5, 0.8)};
  const double c[3] = {1.0, 2.0, 1.5};
  for (int e = 0; e < 3; ++e) {
    const double len = (t.nodes[static_cast<std::size_t>(e + 1)] - t.nodes[0]).norm();
    t.bars.push_back({e + 1, 0, 1.0 / len, c[e]});
  }
  for (int n = 1; n <= 3; ++n) t.supports.push_back({n, 0}), t.supports.push_back({n, 1});
  t.loads = {{0, Eigen::Vector3d(0.5, -2, 0)}};
  return t;
}

DetTrussStudy truss_study(double exponent) {
  DetTrussStudy s;
  s.truss = three_bar();
  s.schedule = QuenchSchedule::geometric(64.0, 1.4, 0.65, 6, exponent);
  return s;
}

SlidingStudy sliding_study(double theta) {
  SlidingStudy s;
  s.model = SlidingGaussian::rotated(1.0, 0.0, theta);
  s.schedule = QuenchSchedule::geometric(0.5, 0.25, 0.65, 4, 1.0, 16.0);
  return s;
}

/// u_h - v_h = scale 2^{-h} along (1, 1) / sqrt(2); v_h = u_h when `equal`.
std::vector<std::pair<Vec, Vec>> shifts(int horizon, double scale, bool equal) {
  std::vector<std::pair<Vec, Vec>> out;
  for (int h = 1; h <= horizon; ++h) {
    const Vec u = Vec::Constant(2, scale * std::pow(2.0, -h) / std::numbers::sqrt2);
    out.emplace_back(u, equal ? u : Vec(Vec::Zero(2)));
  }
  return out;
}

QuenchSchedule shift_schedule(double exponent) { return QuenchSchedule::geometric(0.5, 0.4, 0.5, 4, exponent, 8.0); }

void expect_well_formed(const ExperimentReport& r, int horizon) {
  ASSERT_EQ(static_cast<int>(r.levels.size()), horizon);
  for (int h = 0; h < horizon; ++h) {
    const auto& l = r.levels[static_cast<std::size_t>(h)];
    EXPECT_EQ(l.h, h + 1);
    EXPECT_GE(l.abs_err, 0.0);
    EXPECT_GE(l.rel_err, 0.0);
  }
}

}  // namespace

TEST(QuenchSchedule, GeometricLevels) {
  const auto s = QuenchSchedule::geometric(2.0, 0.5, 0.5, 4, 1.0, 4.0);
  ASSERT_EQ(s.horizon(), 4);
  for (int h = 1; h <= 4; ++h) {
    EXPECT_DOUBLE_EQ(s.deltas[static_cast<std::size_t>(h - 1)], std::pow(2.0, -h));
    EXPECT_DOUBLE_EQ(s.betas[static_cast<std::size_t>(h - 1)], 2.0 * std::pow(2.0, h));
    EXPECT_NEAR(s.lambda_delta(h - 1), std::pow(2.0, -h / 2.0), 1e-15);
  }
  EXPECT_THROW(QuenchSchedule::geometric(0.0, 1, 0.5, 3), DomainError);
  EXPECT_THROW(QuenchSchedule::geometric(1.0, 1, 1.5, 3), DomainError);
}

TEST(ScheduleValidate, SlowQuenchIsValid) {
  const auto v = schedule_validate(QuenchSchedule::geometric(1.0, 0.5, 0.5, 6, 1.0, 2.0));
  EXPECT_TRUE(v.valid);
  EXPECT_NEAR(v.slope, -0.5 * std::log(2.0), 1e-12);
  EXPECT_EQ(v.limit_estimate, 0.0);
}

TEST(ScheduleValidate, FastQuenchDiverges) {
  const auto v = schedule_validate(QuenchSchedule::geometric(1.0, 0.5, 0.5, 6, 4.0, 16.0));
  EXPECT_FALSE(v.valid);
  EXPECT_NEAR(v.slope, std::log(2.0), 1e-12);
  EXPECT_EQ(v.limit_estimate, std::numeric_limits<double>::infinity());
  EXPECT_NE(v.reason.find("quench too fast"), std::string::npos);
}

TEST(ScheduleValidate, BorderlineHasNoDecay) {
  const auto v = schedule_validate(QuenchSchedule::geometric(1.0, 0.5, 0.5, 6, 2.0, 4.0));
  EXPECT_FALSE(v.valid);
  for (double ld : v.lambda_delta) EXPECT_NEAR(ld, 1.0, 1e-14);
  EXPECT_NE(v.reason.find("does not decay"), std::string::npos);
}

TEST(ScheduleValidate, Errors) {
  EXPECT_THROW(schedule_validate(QuenchSchedule::geometric(1.0, 0.5, 0.5, 2)), DomainError);
  QuenchSchedule s = QuenchSchedule::geometric(1.0, 0.5, 0.5, 4);
  s.betas[2] = s.betas[1];
  EXPECT_THROW(schedule_validate(s), DomainError);
}

TEST(ScheduleValidate, ValidImpliesQuantifiedDecay) {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> ratio(0.3, 0.9), expo(0.2, 3.0), b(0.1, 50.0);
  int valid = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int horizon = 8 + trial % 5;
    const auto s = QuenchSchedule::geometric(b(rng), 1.0, ratio(rng), horizon, expo(rng), b(rng));
    const auto v = schedule_validate(s);
    if (!v.valid) continue;
    ++valid;
    EXPECT_LT(v.lambda_delta.back(), v.lambda_delta.front() / 4.0);
  }
  EXPECT_GT(valid, 50);
}

TEST(GridTransport, Examples) {
  Vec y(3);
  y << 0.5, -0.5, 2.0;
  const Vec t = grid_transport(y, 1.0);
  EXPECT_EQ(t[0], 1.0);
  EXPECT_EQ(t[1], 0.0);
  EXPECT_EQ(t[2], 2.0);
  EXPECT_THROW(grid_transport(y, 0.0), DomainError);
}

TEST(GridTransport, IdempotentBoundedLipschitz) {
  std::mt19937_64 rng(52);
  std::normal_distribution<double> g(0.0, 3.0);
  for (double delta : {0.1, 0.37, 1.0}) {
    for (int trial = 0; trial < 200; ++trial) {
      Vec y(4), y2(4);
      for (int i = 0; i < 4; ++i) y[i] = g(rng), y2[i] = g(rng);
      const Vec t = grid_transport(y, delta);
      EXPECT_LE((t - y).cwiseAbs().maxCoeff(), delta / 2 * (1 + 1e-12));
      EXPECT_EQ(grid_transport(t, delta), t);
      EXPECT_LE((t - grid_transport(y2, delta)).cwiseAbs().maxCoeff(),
                (y - y2).cwiseAbs().maxCoeff() + delta * (1 + 1e-12));
    }
  }
}

TEST(MakeEmpirical, UniformBoxMidpointRule) {
  const CustomDensity uniform{[](const Vec& x) { return (x.array() >= 0).all() && (x.array() <= 1).all() ? 1.0 : 0.0; },
                              false};
  GridSpec grid{0.5, Vec::Zero(2), Vec::Ones(2)};
  const auto mu = make_empirical(uniform, grid);
  ASSERT_EQ(mu.size(), 4);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(mu.weights()[i], 0.25, 1e-15);
  EXPECT_NEAR(total_variation(mu), 1.0, 1e-15);
  EXPECT_NEAR(mu.y()(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(mu.y()(0, 1), 0.75, 1e-15);
  EXPECT_FALSE(mu.is_paired());
}

TEST(MakeEmpirical, RefinementHalvesCellSize) {
  const CustomDensity uniform{[](const Vec&) { return 1.0; }, false};
  for (double delta : {0.5, 0.25, 0.125}) {
    const auto mu = make_empirical(uniform, GridSpec{delta, Vec::Zero(2), Vec::Ones(2)});
    EXPECT_EQ(mu.size(), static_cast<Eigen::Index>(std::lround(1.0 / (delta * delta))));
    double spacing = 1e300;
    for (Eigen::Index i = 1; i < mu.size(); ++i) spacing = std::min(spacing, (mu.y().col(i) - mu.y().col(0)).norm());
    EXPECT_NEAR(spacing, delta, 1e-14);
  }
}

TEST(MakeEmpirical, ZeroMassThrows) {
  const CustomDensity zero{[](const Vec&) { return 0.0; }, false};
  EXPECT_THROW(make_empirical(zero, GridSpec{0.5, Vec::Zero(2), Vec::Ones(2)}), DomainError);
}

TEST(MakeEmpirical, GaussianSampleMean) {
  const double sd = 0.5;
  Vec mean(2);
  mean << 0.3, -0.2;
  const CustomDensity gauss{
      [&](const Vec& x) { return std::exp(-0.5 * (x - mean).squaredNorm() / (sd * sd)); }, false};
  SampleSpec spec;
  spec.n = 4000;
  spec.seed = 7;
  spec.lo = mean.array() - 6 * sd;
  spec.hi = mean.array() + 6 * sd;
  const auto mu = make_empirical(gauss, spec);
  ASSERT_EQ(mu.size(), 4000);
  const Vec m = mu.y().rowwise().mean();
  for (int i = 0; i < 2; ++i) EXPECT_LT(std::abs(m[i] - mean[i]), 3 * sd / std::sqrt(4000.0));
  EXPECT_NEAR(total_variation(mu), 1.0, 1e-12);
  // same seed, same draws
  EXPECT_EQ(make_empirical(gauss, spec).y(), mu.y());
}

TEST(MakeEmpirical, DiscreteDataPushedToGrid) {
  Mat y(2, 3), z(2, 3);
  y << 0.1, 0.12, 0.9, 0.0, 0.01, 0.4;
  z = y;
  Vec c(3);
  c << 1.0, 2.0, 0.5;
  const auto mu = make_empirical(DiscreteEmpirical{EmpiricalMeasure::paired(y, z, c)}, GridSpec{0.5, {}, {}});
  EXPECT_TRUE(mu.is_paired());
  EXPECT_EQ(mu.size(), 2);
  EXPECT_NEAR(total_variation(mu), 3.5, 1e-14);
}

TEST(DetTrussStudy, ConstantHasZeroError) {
  DetTrussStudy s = truss_study(1.0);
  s.qoi = "const";
  s.schedule = QuenchSchedule::geometric(64.0, 1.4, 0.65, 3, 1.0);
  const auto r = run_convergence_study(s);
  expect_well_formed(r, 3);
  for (const auto& l : r.levels) EXPECT_EQ(l.abs_err, 0.0);
  EXPECT_TRUE(r.converging);
}

TEST(DetTrussStudy, SlowQuenchConverges) {
  const auto r = run_convergence_study(truss_study(1.0));
  expect_well_formed(r, 6);
  EXPECT_TRUE(r.converging) << r.verdict_reason;
  for (std::size_t k = 3; k < 6; ++k) EXPECT_LT(r.levels[k].abs_err, r.levels[k - 1].abs_err);
  EXPECT_LT(r.levels.back().rel_err, 0.05);
}

TEST(DetTrussStudy, FastQuenchFails) {
  const auto slow = run_convergence_study(truss_study(1.0));
  const auto fast = run_convergence_study(truss_study(4.0));
  expect_well_formed(fast, 6);
  EXPECT_FALSE(fast.converging);
  EXPECT_LT(fast.levels.back().ess, slow.levels.back().ess);
  EXPECT_LT(fast.levels.back().ess, kMinFinalEss);
}

TEST(SlidingStudy, SecondMomentsApproachQuadratureOracle) {
  for (double theta : {std::numbers::pi / 2, std::numbers::pi / 4}) {
    const SlidingStudy s = sliding_study(theta);
    const auto r = run_convergence_study(s);
    expect_well_formed(r, 4);
    EXPECT_TRUE(r.converging) << r.verdict_reason;
    // reference is the independent dense quadrature of exp(-<xi, Q xi> / 4)
    const Mat qinv = sliding_gaussian_reference(s.model).q.inverse();
    const auto& ref = r.levels.back().reference;
    ASSERT_EQ(ref.size(), 3);
    EXPECT_NEAR(ref[0], qinv(0, 0), 1e-6);
    EXPECT_NEAR(ref[1], qinv(0, 1), 1e-6);
    EXPECT_NEAR(ref[2], qinv(1, 1), 1e-6);
    EXPECT_LT(r.levels.back().rel_err, 0.05);
  }
}

TEST(SlidingOracle, MassAndMoments) {
  const auto s = SlidingGaussian::rotated(1.0, 0.0, std::numbers::pi / 3);
  const auto o = sliding_quadrature_oracle(s);
  const Mat q = sliding_gaussian_reference(s).q;
  EXPECT_NEAR(o.xi_mass, 4 * std::numbers::pi / std::sqrt(q.determinant()), 1e-8);
  EXPECT_LT((o.y_moments - q.inverse()).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_THROW(sliding_quadrature_oracle(SlidingGaussian::rotated(1.0, 0.0, 0.0)), DomainError);
}

TEST(ShiftingError, EqualShiftsConverge) {
  const auto r = shifting_error_experiment(SlidingGaussian::rotated(1.0, 0.0, std::numbers::pi / 2),
                                           shifts(4, 1.0, true), shift_schedule(1.0));
  expect_well_formed(r, 4);
  EXPECT_EQ(r.kind, "shift");
  EXPECT_TRUE(r.converging) << r.verdict_reason;
}

TEST(ShiftingError, SlowScheduleConvergesFastFails) {
  const auto model = SlidingGaussian::rotated(1.0, 0.0, std::numbers::pi / 2);
  const auto slow = shifting_error_experiment(model, shifts(4, 1.0, false), shift_schedule(1.0));
  const auto fast = shifting_error_experiment(model, shifts(4, 1.0, false), shift_schedule(4.0));
  EXPECT_TRUE(slow.converging) << slow.verdict_reason;
  EXPECT_FALSE(fast.converging);
  EXPECT_THROW(shifting_error_experiment(model, shifts(3, 1.0, false), shift_schedule(1.0)), DimensionError);
}

TEST(Determinism, IdenticalInputsGiveIdenticalReports) {
  const auto a = run_convergence_study(sliding_study(std::numbers::pi / 4));
  const auto b = run_convergence_study(sliding_study(std::numbers::pi / 4));
  ASSERT_EQ(a.levels.size(), b.levels.size());
  for (std::size_t k = 0; k < a.levels.size(); ++k) {
    EXPECT_EQ(a.levels[k].expectation, b.levels[k].expectation);
    EXPECT_EQ(a.levels[k].ess, b.levels[k].ess);
    EXPECT_EQ(a.levels[k].tv, b.levels[k].tv);
  }
  EXPECT_EQ(a.scalars, b.scalars);
}

TEST(AssignVerdict, Rules) {
  ExperimentReport r;
  for (int h = 1; h <= 4; ++h) {
    LevelRecord l;
    l.h = h;
    l.abs_err = 1.0 / h;
    l.rel_err = l.abs_err;
    l.ess = 50;
    r.levels.push_back(l);
  }
  assign_verdict(r);
  EXPECT_TRUE(r.converging);
  r.levels.back().ess = 9.9;
  assign_verdict(r);
  EXPECT_FALSE(r.converging);
  r.levels.back().ess = 50;
  r.levels[2].abs_err = 0.1;  // 0.5, 0.1, 0.25: not decreasing
  assign_verdict(r);
  EXPECT_FALSE(r.converging);
  r.levels.resize(2);
  assign_verdict(r);
  EXPECT_FALSE(r.converging);
}
