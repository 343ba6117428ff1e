#pragma once

#include "geonuts/phase.hpp"

#include <algorithm>
#include <numbers>
#include <numeric>
#include <vector>

// Closed-form simple harmonic motion for quadratic potentials
// V(q) = q^T W q / 2 under kinetic energy p^T M^-1 p / 2.
//
// Conventions (real projection of the complex-exponential form):
//   p(t) = sum_j A_j cos(w_j t + phi_j)        N_j
//   q(t) = sum_j A_j cos(w_j t + phi_j + pi/2) N^j
// with N_j = sqrt(M) n_j and the dual direction N^j = -M^-1 N_j / w_j,
// which makes (q, p) satisfy Hamilton's equations exactly.

namespace geonuts::harmonic {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Relative gap below which two frequencies count as degenerate.
inline constexpr double kDegeneracyTol = 1e-8;

struct NormalModes {
  Vec omega;             ///< ascending
  Matrix directions;     ///< columns N_j = sqrt(M) n_j
  Matrix dual;           ///< columns N^j = -M^-1 N_j / omega_j
  Matrix unit;           ///< columns n_j (orthonormal)
  Matrix sqrt_mass;
  Matrix inv_sqrt_mass;
  Matrix inverse_mass;

  Index count() const { return omega.size(); }
  double period(Index j) const { return kTwoPi / omega(j); }
};

/// One oscillation: frequency, direction, phase, amplitude.
struct HarmonicMode {
  double omega = 1.0;
  Vec direction;
  double phase = 0.0;
  double amplitude = 0.0;
};

/// Amplitudes and phases of every mode; phases in [0, 2pi).
struct ModeState {
  Vec amplitude;
  Vec phase;
};

/**
 * @brief Normal modes of `M^-1/2 W M^-1/2`.
 *
 * Throws NumericalError if either matrix is not symmetric positive-definite.
 */
inline NormalModes eigenfrequencies(const Matrix& mass, const Matrix& stiffness) {
  if (mass.rows() != mass.cols() || stiffness.rows() != stiffness.cols() ||
      mass.rows() != stiffness.rows() || mass.rows() < 1) {
    throw DimensionError("eigenfrequencies: M and W must be square with equal size");
  }
  if (!mass.isApprox(mass.transpose(), 1e-12) || !stiffness.isApprox(stiffness.transpose(), 1e-12)) {
    throw NumericalError("eigenfrequencies: M and W must be symmetric");
  }
  if (Eigen::LLT<Matrix>(mass).info() != Eigen::Success ||
      Eigen::LLT<Matrix>(stiffness).info() != Eigen::Success) {
    throw NumericalError("eigenfrequencies: M and W must be positive-definite");
  }

  NormalModes out;
  out.sqrt_mass = spd_power(mass, 0.5);
  out.inv_sqrt_mass = spd_power(mass, -0.5);
  out.inverse_mass = out.inv_sqrt_mass * out.inv_sqrt_mass;

  Matrix reduced = out.inv_sqrt_mass * stiffness * out.inv_sqrt_mass;
  reduced = 0.5 * (reduced + reduced.transpose());
  const SymmetricEigen eig = symmetric_eigen(reduced);
  if (eig.values.minCoeff() <= 0.0) {
    throw NumericalError("eigenfrequencies: reduced stiffness is not positive-definite");
  }
  out.omega = eig.values.cwiseSqrt();
  out.unit = eig.vectors;
  out.directions = out.sqrt_mass * out.unit;
  out.dual = out.inv_sqrt_mass * out.unit;
  for (Index j = 0; j < out.count(); ++j) out.dual.col(j) *= -1.0 / out.omega(j);
  return out;
}

/// True if every pair of frequencies is within the degeneracy tolerance.
inline bool all_degenerate(const Vec& omega) {
  return omega.maxCoeff() - omega.minCoeff() < kDegeneracyTol * omega.maxCoeff();
}

inline double wrap_phase(double phi) {
  double out = std::fmod(phi, kTwoPi);
  if (out < 0.0) out += kTwoPi;
  if (out >= kTwoPi) out -= kTwoPi;
  return out;
}

inline PhasePoint analytic_state(const NormalModes& modes, const ModeState& state, double t) {
  if (state.amplitude.size() != modes.count() || state.phase.size() != modes.count()) {
    throw DimensionError("analytic_state: mode state does not match the mode count");
  }
  Vec q = Vec::Zero(modes.count());
  Vec p = Vec::Zero(modes.count());
  for (Index j = 0; j < modes.count(); ++j) {
    const double angle = modes.omega(j) * t + state.phase(j);
    p += state.amplitude(j) * std::cos(angle) * modes.directions.col(j);
    q += state.amplitude(j) * std::cos(angle + std::numbers::pi / 2.0) * modes.dual.col(j);
  }
  return {std::move(q), std::move(p)};
}

/**
 * @brief Amplitudes and phases reproducing `(q0, p0)` at t = 0.
 *
 * Inactive modes get amplitude 0 and phase 0.
 */
inline ModeState fit_initial_conditions(const NormalModes& modes, const Vec& q0, const Vec& p0) {
  require_same_dimension(q0, p0, "fit_initial_conditions");
  if (q0.size() != modes.count()) {
    throw DimensionError("fit_initial_conditions: state does not match the mode count");
  }
  const Eigen::FullPivLU<Matrix> lu(modes.unit);
  if (!lu.isInvertible()) throw NumericalError("fit_initial_conditions: degenerate mode matrix");

  // Mode coordinates: x = sqrt(M) q, y = M^-1/2 p, projected onto n_j.
  const Vec c = lu.solve(modes.sqrt_mass * q0);
  const Vec d = lu.solve(modes.inv_sqrt_mass * p0);

  ModeState out{Vec::Zero(modes.count()), Vec::Zero(modes.count())};
  for (Index j = 0; j < modes.count(); ++j) {
    const double sin_part = modes.omega(j) * c(j);  // A sin(phi)
    const double cos_part = d(j);                   // A cos(phi)
    out.amplitude(j) = std::hypot(sin_part, cos_part);
    out.phase(j) = out.amplitude(j) > 0.0 ? wrap_phase(std::atan2(sin_part, cos_part)) : 0.0;
  }
  return out;
}

inline std::vector<HarmonicMode> describe(const NormalModes& modes, const ModeState& state) {
  std::vector<HarmonicMode> out;
  for (Index j = 0; j < modes.count(); ++j) {
    out.push_back({modes.omega(j), modes.directions.col(j), state.phase(j), state.amplitude(j)});
  }
  return out;
}

/**
 * True if all phases agree modulo pi. A phase shift of pi is a sign flip
 * of the amplitude, so such modes still pass through rest together.
 */
inline bool phases_coherent(const Vec& phases, double tol = 1e-8) {
  for (Index j = 1; j < phases.size(); ++j) {
    if (std::abs(std::remainder(phases(j) - phases(0), std::numbers::pi)) > tol) return false;
  }
  return true;
}

/// Which closed form to use for the zero of the contracted criterion.
enum class PhaseRegime {
  Coherent,    ///< all phases equal
  Incoherent,  ///< phases spread out; zero at the opposite point of the orbit
  Averaged,    ///< beating; zero at the average of the turning points
};

/**
 * @brief Predicted zero time of the turning-point criterion.
 *
 * Coherent:   t = (T/2) [n + (1 - 2 phi / pi)], phases equal modulo pi
 * Incoherent: t = T/2 (branch index unused)
 * Averaged:   t = (T/2) [n + (1 - (2/pi) * mean(phi))]
 *
 * The averaged form divides the phase sum by the number of contributing
 * modes. Throws std::domain_error if the requested branch gives t <= 0.
 */
inline double predicted_zero_time(const Vec& phases, double omega, int n, PhaseRegime regime) {
  if (!(omega > 0.0)) throw std::invalid_argument("predicted_zero_time: omega must be positive");
  const double half_period = std::numbers::pi / omega;
  double t = 0.0;
  switch (regime) {
    case PhaseRegime::Incoherent:
      return half_period;
    case PhaseRegime::Coherent: {
      if (phases.size() < 1) throw std::invalid_argument("predicted_zero_time: no phases");
      if (!phases_coherent(phases)) {
        throw std::invalid_argument("predicted_zero_time: phases are not coherent");
      }
      t = half_period * (n + (1.0 - 2.0 * phases(0) / std::numbers::pi));
      break;
    }
    case PhaseRegime::Averaged: {
      if (phases.size() < 1) throw std::invalid_argument("predicted_zero_time: no phases");
      t = half_period * (n + (1.0 - 2.0 / std::numbers::pi * phases.mean()));
      break;
    }
  }
  if (!(t > 0.0)) {
    throw std::domain_error("predicted_zero_time: branch " + std::to_string(n) +
                            " has no positive-time zero");
  }
  return t;
}

/// The earliest strictly positive zero over branches n = 0, 1, 2, ...
inline double first_predicted_zero_time(const Vec& phases, double omega, PhaseRegime regime) {
  for (int n = 0; n < 64; ++n) {
    try {
      return predicted_zero_time(phases, omega, n, regime);
    } catch (const std::domain_error&) {
    }
  }
  throw std::domain_error("first_predicted_zero_time: no positive zero found");
}

}  // namespace geonuts::harmonic
