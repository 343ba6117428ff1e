#include "geonuts/harmonic.hpp"
#include "geonuts/integrators.hpp"
#include "geonuts/targets.hpp"
#include "geonuts/trajectory.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace geonuts;
using namespace geonuts::harmonic;

namespace {

constexpr double kPi = std::numbers::pi;

ModeState random_state(std::mt19937_64& rng, Index d) {
  std::uniform_real_distribution<double> amp(0.1, 2.0), phase(0.0, kTwoPi);
  ModeState s{Vec(d), Vec(d)};
  for (Index j = 0; j < d; ++j) {
    s.amplitude(j) = amp(rng);
    s.phase(j) = phase(rng);
  }
  return s;
}

}  // namespace

TEST(Eigenfrequencies, CorrelatedGaussianWithIdentityMass) {
  const double rho = 0.95;
  const auto gauss = GaussianTarget::correlated(rho);
  const NormalModes modes = eigenfrequencies(Matrix::Identity(2, 2), gauss.precision());
  EXPECT_NEAR(modes.omega(0), 1.0 / std::sqrt(1.0 + rho), 1e-12);
  EXPECT_NEAR(modes.omega(1), 1.0 / std::sqrt(1.0 - rho), 1e-12);
  EXPECT_NEAR(modes.omega(0), 0.716115, 1e-6);
  EXPECT_NEAR(modes.omega(1), 4.472136, 1e-6);
  EXPECT_FALSE(all_degenerate(modes.omega));
}

TEST(Eigenfrequencies, DegenerateWhenMassMatchesStiffness) {
  const auto gauss = GaussianTarget::correlated(0.95);
  const NormalModes modes = eigenfrequencies(gauss.precision(), gauss.precision());
  EXPECT_NEAR(modes.omega(0), 1.0, 1e-12);
  EXPECT_NEAR(modes.omega(1), 1.0, 1e-12);
  EXPECT_TRUE(all_degenerate(modes.omega));
}

TEST(Eigenfrequencies, IdentitySystem) {
  const NormalModes modes = eigenfrequencies(Matrix::Identity(3, 3), Matrix::Identity(3, 3));
  EXPECT_TRUE(modes.omega.isApprox(Vec::Ones(3), 1e-14));
  EXPECT_TRUE((modes.directions.transpose() * modes.directions).isApprox(Matrix::Identity(3, 3), 1e-14));
  EXPECT_TRUE(modes.directions.cwiseAbs().isApprox(Matrix::Identity(3, 3), 1e-14));
}

TEST(Eigenfrequencies, ScalarExample) {
  const NormalModes modes = eigenfrequencies(Matrix{{2.0}}, Matrix{{8.0}});
  EXPECT_NEAR(modes.omega(0), 2.0, 1e-14);
  EXPECT_NEAR(modes.period(0), kPi, 1e-14);
}

TEST(Eigenfrequencies, RejectsNonSpd) {
  EXPECT_THROW(eigenfrequencies(Matrix::Identity(2, 2), Matrix{{1.0, 0.0}, {0.0, -1.0}}), NumericalError);
  EXPECT_THROW(eigenfrequencies(Matrix{{1.0, 2.0}, {2.0, 1.0}}, Matrix::Identity(2, 2)), NumericalError);
  EXPECT_THROW(eigenfrequencies(Matrix::Identity(2, 2), Matrix::Identity(3, 3)), DimensionError);
}

TEST(Eigenfrequencies, ModesAreOrthonormalAndSolveGeneralizedProblem) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Index d = 2 + trial % 3;
    const Matrix m = test_support::random_spd(rng, d);
    const Matrix w = test_support::random_spd(rng, d);
    const NormalModes modes = eigenfrequencies(m, w);
    const Matrix m_inv = m.inverse();
    EXPECT_TRUE((modes.directions.transpose() * m_inv * modes.directions)
                    .isApprox(Matrix::Identity(d, d), 1e-10));
    for (Index j = 0; j < d; ++j) {
      const Vec n = modes.directions.col(j);
      // W M^-1 N_j = omega_j^2 N_j
      EXPECT_LE((w * m_inv * n - modes.omega(j) * modes.omega(j) * n).norm(), 1e-10 * w.norm());
      if (j > 0) EXPECT_LE(modes.omega(j - 1), modes.omega(j));
    }
  }
}

TEST(AnalyticState, PhaseConventionExample) {
  const NormalModes modes = eigenfrequencies(Matrix{{1.0}}, Matrix{{1.0}});
  const ModeState s{Vec{{1.0}}, Vec{{kPi / 2.0}}};
  EXPECT_NEAR(analytic_state(modes, s, 0.0).p(0), 0.0, 1e-15);
  for (double t : {0.3, 1.0, 2.5, 7.0}) EXPECT_NEAR(analytic_state(modes, s, t).p(0), -std::sin(t), 1e-14);
}

TEST(AnalyticState, ConservesEnergyAndSatisfiesHamiltonsEquations) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> time(0.0, 20.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Index d = 2 + trial % 2;
    const Matrix m = test_support::random_spd(rng, d);
    const Matrix w = test_support::random_spd(rng, d);
    const NormalModes modes = eigenfrequencies(m, w);
    const ModeState s = random_state(rng, d);
    const Matrix m_inv = m.inverse();
    auto energy = [&](const PhasePoint& z) { return 0.5 * z.p.dot(m_inv * z.p) + 0.5 * z.q.dot(w * z.q); };
    const double expected = 0.5 * s.amplitude.squaredNorm();
    for (int k = 0; k < 5; ++k) {
      const double t = time(rng);
      const PhasePoint z = analytic_state(modes, s, t);
      EXPECT_NEAR(energy(z), expected, 1e-10 * expected);
      const double h = 1e-5;
      const PhasePoint up = analytic_state(modes, s, t + h);
      const PhasePoint down = analytic_state(modes, s, t - h);
      const Vec dq = (up.q - down.q) / (2.0 * h);
      const Vec dp = (up.p - down.p) / (2.0 * h);
      EXPECT_LE((dq - m_inv * z.p).norm(), 1e-6 * std::max(1.0, dq.norm()));
      EXPECT_LE((dp + w * z.q).norm(), 1e-6 * std::max(1.0, dp.norm()));
    }
  }
}

TEST(AnalyticState, MatchesLeapfrogOverOnePeriod) {
  const auto gauss = GaussianTarget::correlated(0.95);
  const auto metric = EuclideanMetric::identity(2);
  const NormalModes modes = eigenfrequencies(Matrix::Identity(2, 2), gauss.precision());
  const PhasePoint start(Vec{{0.6, -0.2}}, Vec{{0.3, 0.8}});
  const ModeState s = fit_initial_conditions(modes, start.q, start.p);
  IntegratorConfig ic;
  ic.step_size = 1e-3;
  const auto n = static_cast<std::size_t>(std::ceil(modes.period(0) / ic.step_size));
  PhasePoint z = start;
  double worst = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    z = integrator_step(z, gauss, metric, ic);
    worst = std::max(worst, (z.q - analytic_state(modes, s, k * ic.step_size).q).norm());
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(FitInitialConditions, Examples) {
  const auto gauss = GaussianTarget::correlated(0.95);
  const NormalModes modes = eigenfrequencies(Matrix::Identity(2, 2), gauss.precision());
  // released from rest along the first mode
  const ModeState rest = fit_initial_conditions(modes, modes.dual.col(0), Vec::Zero(2));
  EXPECT_GT(rest.amplitude(0), 0.0);
  EXPECT_NEAR(rest.amplitude(1), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(std::remainder(rest.phase(0) - kPi / 2.0, kPi)), 0.0, 1e-12);
  // kicked from the center along the first mode
  const ModeState kick = fit_initial_conditions(modes, Vec::Zero(2), modes.directions.col(0));
  EXPECT_NEAR(kick.amplitude(0), 1.0, 1e-12);
  EXPECT_NEAR(kick.phase(0), 0.0, 1e-12);
  EXPECT_NEAR(kick.amplitude(1), 0.0, 1e-12);
}

TEST(FitInitialConditions, RoundTripsRandomStates) {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 50; ++trial) {
    const Index d = 1 + trial % 4;
    const NormalModes modes = eigenfrequencies(test_support::random_spd(rng, d), test_support::random_spd(rng, d));
    const Vec q0 = test_support::random_vec(rng, d, 2.0);
    const Vec p0 = test_support::random_vec(rng, d, 2.0);
    const ModeState s = fit_initial_conditions(modes, q0, p0);
    for (Index j = 0; j < d; ++j) {
      EXPECT_GE(s.phase(j), 0.0);
      EXPECT_LT(s.phase(j), kTwoPi);
    }
    const PhasePoint z = analytic_state(modes, s, 0.0);
    EXPECT_LT((z.q - q0).norm(), 1e-10);
    EXPECT_LT((z.p - p0).norm(), 1e-10);
  }
}

TEST(PredictedZeroTime, Examples) {
  EXPECT_NEAR(predicted_zero_time(Vec{{kPi / 2.0}}, 1.0, 1, PhaseRegime::Coherent), kPi, 1e-14);
  EXPECT_NEAR(predicted_zero_time(Vec(), 1.0, 0, PhaseRegime::Incoherent), kPi, 1e-14);
  EXPECT_NEAR(predicted_zero_time(Vec{{0.0}}, 2.0, 0, PhaseRegime::Coherent), kPi / 2.0, 1e-14);
  // two modes averaging to pi/2
  EXPECT_NEAR(predicted_zero_time(Vec{{kPi / 4.0, 3.0 * kPi / 4.0}}, 1.0, 1, PhaseRegime::Averaged),
              kPi, 1e-14);
}

TEST(PredictedZeroTime, Errors) {
  EXPECT_THROW(predicted_zero_time(Vec{{kPi / 2.0}}, 1.0, 0, PhaseRegime::Coherent), std::domain_error);
  EXPECT_THROW(predicted_zero_time(Vec{{0.1, 1.0}}, 1.0, 1, PhaseRegime::Coherent), std::invalid_argument);
  EXPECT_THROW(predicted_zero_time(Vec{{0.0}}, 0.0, 1, PhaseRegime::Coherent), std::invalid_argument);
}

TEST(PredictedZeroTime, CoherenceIsModuloPi) {
  EXPECT_TRUE(phases_coherent(Vec{{kPi / 2.0, 3.0 * kPi / 2.0}}));
  EXPECT_FALSE(phases_coherent(Vec{{0.0, kPi / 2.0}}));
  EXPECT_NEAR(first_predicted_zero_time(Vec{{3.0 * kPi / 2.0, kPi / 2.0}}, 1.0, PhaseRegime::Coherent),
              kPi, 1e-14);
}

// Released from rest, every active mode passes through rest together, so the
// classic criterion's first zero is the predicted coherent time.
TEST(PredictedZeroTime, MatchesLeapfrogFromRestOnRandomSystems) {
  std::mt19937_64 rng(34);
  IntegratorConfig ic;
  ic.step_size = 1e-3;
  for (int trial = 0; trial < 6; ++trial) {
    const Index d = 2 + trial % 2;
    const Matrix m = test_support::random_spd(rng, d);
    const bool degenerate = trial % 3 == 0;
    const Matrix w = degenerate ? Matrix(2.0 * m) : test_support::random_spd(rng, d);
    const test_support::QuadraticTarget target(w);
    const EuclideanMetric metric(m);
    const NormalModes modes = eigenfrequencies(m, w);

    std::vector<Vec> starts;
    if (degenerate) {
      starts.push_back(test_support::random_vec(rng, d));
    } else {
      for (Index j = 0; j < d; ++j) starts.push_back(modes.dual.col(j) * (j % 2 ? -1.0 : 1.0));
    }
    for (const Vec& q0 : starts) {
      const ModeState s = fit_initial_conditions(modes, q0, Vec::Zero(d));
      std::vector<double> phases;
      double omega = 0.0;
      for (Index j = 0; j < d; ++j) {
        if (s.amplitude(j) > 1e-9 * s.amplitude.maxCoeff()) {
          phases.push_back(s.phase(j));
          omega = modes.omega(j);
        }
      }
      const Vec ph = Eigen::Map<const Vec>(phases.data(), static_cast<Index>(phases.size()));
      const double predicted = first_predicted_zero_time(ph, omega, PhaseRegime::Coherent);
      const auto n = static_cast<std::size_t>(std::ceil(1.5 * predicted / ic.step_size));
      const TrajectoryTrace trace =
          integrate_trajectory(PhasePoint(q0, Vec::Zero(d)), n, target, metric, ic);
      std::size_t k = 1;
      while (k < trace.entries.size() && !trace.entries[k].fired_classic()) ++k;
      ASSERT_LT(k, trace.entries.size());
      EXPECT_NEAR(trace.entries[k].t, predicted, 0.02 * predicted) << "trial " << trial;
    }
  }
}
