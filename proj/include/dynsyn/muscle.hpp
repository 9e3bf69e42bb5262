#pragma once

// Hill-type muscle-tendon unit: first-order activation dynamics and the
// force = f_max * (F_l * F_v * act + F_p) product.

#include <algorithm>
#include <cmath>

#include "dynsyn/errors.hpp"

namespace dynsyn::muscle {

struct MuscleParams {
  double f_max = 100.0;     // N
  double l_opt = 0.1;       // m
  double v_max = 10.0;      // optimal lengths per second
  double tau_act = 0.010;   // s
  double tau_deact = 0.040; // s

  bool valid() const {
    return f_max > 0 && l_opt > 0 && v_max > 0 && tau_act > 0 &&
           tau_act <= tau_deact;
  }
};

struct MuscleState {
  double act = 0.0;
  double l_norm = 1.0;
  double v_norm = 0.0;
  double force = 0.0;
};

// Number of RK4 substeps taken per control step by activation_step.
inline constexpr int kActivationSubsteps = 8;

namespace detail {
inline double rate_unchecked(double ctrl, double act, const MuscleParams& p) {
  const double scale = 0.5 + 1.5 * act;
  const double tau = ctrl > act ? p.tau_act * scale : p.tau_deact / scale;
  return (ctrl - act) / tau;
}
}  // namespace detail

// d(act)/dt of the asymmetric first-order activation filter.
inline double activation_derivative(double ctrl, double act,
                                    const MuscleParams& params) {
  if (!(ctrl >= 0.0 && ctrl <= 1.0))
    throw DomainError("activation_derivative: ctrl outside [0,1]");
  if (!(act >= 0.0 && act <= 1.0))
    throw DomainError("activation_derivative: act outside [0,1]");
  return detail::rate_unchecked(ctrl, act, params);
}

// Advances activation over one control step of length dt (<= 0.01 s) with
// kActivationSubsteps classical RK4 substeps, clamping to [0,1] after each.
inline MuscleState activation_step(double ctrl, MuscleState state, double dt,
                                   const MuscleParams& params = {}) {
  if (!(dt > 0.0 && dt <= 0.01 + 1e-12))
    throw DomainError("activation_step: dt must lie in (0, 0.01]");
  // Validates the inputs once; substeps stay inside [0,1] by the clamp.
  (void)activation_derivative(ctrl, state.act, params);

  const double h = dt / kActivationSubsteps;
  double a = state.act;
  for (int i = 0; i < kActivationSubsteps; ++i) {
    // Intermediate stages may leave [0,1] slightly; clamp before evaluating.
    auto f = [&](double x) {
      return detail::rate_unchecked(ctrl, std::clamp(x, 0.0, 1.0), params);
    };
    const double k1 = f(a);
    const double k2 = f(a + 0.5 * h * k1);
    const double k3 = f(a + 0.5 * h * k2);
    const double k4 = f(a + h * k3);
    a = std::clamp(a + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4), 0.0, 1.0);
  }
  state.act = a;
  return state;
}

// Gaussian active force-length curve, width 0.45.
inline double force_length_active(double l_norm) {
  if (!(l_norm > 0.0)) throw DomainError("force_length_active: l_norm <= 0");
  const double d = l_norm - 1.0;
  return std::exp(-d * d / 0.2025);
}

// Hill hyperbola for shortening (v < 0), saturating hyperbola for
// lengthening (v > 0) with limit 1.5; slopes match at v = 0.
inline double force_velocity(double v_norm) {
  if (v_norm <= -1.0) return 0.0;
  if (v_norm <= 0.0) return (1.0 + v_norm) / (1.0 - v_norm / 0.25);
  return (1.0 + 15.0 * v_norm) / (1.0 + 10.0 * v_norm);
}

inline double force_velocity_slope(double v_norm) {
  if (v_norm <= -1.0) return 0.0;
  if (v_norm <= 0.0) {
    const double d = 1.0 - 4.0 * v_norm;
    return 5.0 / (d * d);
  }
  const double d = 1.0 + 10.0 * v_norm;
  return 5.0 / (d * d);
}

// Exponential passive element: 0 up to optimal length, 0.5 at l_norm = 1.3.
inline double passive_force(double l_norm) {
  if (!(l_norm > 0.0)) throw DomainError("passive_force: l_norm <= 0");
  if (l_norm <= 1.0) return 0.0;
  return 0.5 * std::expm1(5.0 * (l_norm - 1.0)) / std::expm1(1.5);
}

// Integral of passive_force over normalized length from 1 to l_norm; the
// stored elastic energy is f_max * l_opt times this value.
inline double passive_energy_normalized(double l_norm) {
  if (l_norm <= 1.0) return 0.0;
  const double x = l_norm - 1.0;
  return 0.5 * (std::expm1(5.0 * x) / 5.0 - x) / std::expm1(1.5);
}

inline double muscle_force(const MuscleState& s, const MuscleParams& p) {
  const double active =
      force_length_active(s.l_norm) * force_velocity(s.v_norm) * s.act;
  return std::max(0.0, p.f_max * (active + passive_force(s.l_norm)));
}

}  // namespace dynsyn::muscle
