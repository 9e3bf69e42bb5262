#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dynsyn/muscle.hpp"

namespace {

using namespace dynsyn::muscle;

// Brute-force explicit Euler with a fixed 1e-6 s step, written from the
// filter equation directly.
double reference_activation(double ctrl, double act, double horizon) {
  const double h = 1e-6;
  const long steps = std::lround(horizon / h);
  for (long i = 0; i < steps; ++i) {
    const double tau = ctrl > act ? 0.010 * (0.5 + 1.5 * act) : 0.040 / (0.5 + 1.5 * act);
    act += h * (ctrl - act) / tau;
  }
  return act;
}

TEST(ActivationDerivative, EquilibriumIsZero) {
  EXPECT_EQ(activation_derivative(0.5, 0.5, {}), 0.0);
}

TEST(ActivationDerivative, FullExcitationFromRest) {
  // tau = 0.010 * 0.5
  EXPECT_DOUBLE_EQ(activation_derivative(1.0, 0.0, {}), 200.0);
}

TEST(ActivationDerivative, FullRelaxationFromSaturation) {
  // tau = 0.040 / 2.0
  EXPECT_DOUBLE_EQ(activation_derivative(0.0, 1.0, {}), -50.0);
}

TEST(ActivationDerivative, RejectsOutOfRangeInputs) {
  EXPECT_THROW(activation_derivative(1.1, 0.0, {}), dynsyn::DomainError);
  EXPECT_THROW(activation_derivative(0.5, -0.1, {}), dynsyn::DomainError);
  EXPECT_THROW(activation_derivative(NAN, 0.5, {}), dynsyn::DomainError);
}

TEST(ActivationStep, Equilibrium) {
  MuscleState s;
  s.act = 0.3;
  EXPECT_DOUBLE_EQ(activation_step(0.3, s, 0.01).act, 0.3);
  s.act = 0.0;
  EXPECT_EQ(activation_step(0.0, s, 0.01).act, 0.0);
}

TEST(ActivationStep, MatchesFineReferenceFromRest) {
  MuscleState s;
  const double got = activation_step(1.0, s, 0.01).act;
  EXPECT_NEAR(got, reference_activation(1.0, 0.0, 0.01), 1e-3);
}

TEST(ActivationStep, RejectsBadStep) {
  EXPECT_THROW(activation_step(0.5, {}, 0.0), dynsyn::DomainError);
  EXPECT_THROW(activation_step(0.5, {}, 0.02), dynsyn::DomainError);
}

TEST(ActivationStep, ConvergesMonotonicallyWithoutOvershoot) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double ctrl = u(rng);
    const double dt = 0.001 + 0.009 * u(rng);
    MuscleState s;
    s.act = u(rng);
    double prev_gap = std::abs(ctrl - s.act);
    const bool above = s.act > ctrl;
    for (int k = 0; k < 200; ++k) {
      s = activation_step(ctrl, s, dt);
      const double gap = std::abs(ctrl - s.act);
      ASSERT_LE(gap, prev_gap + 1e-15);
      if (gap > 0) ASSERT_EQ(s.act > ctrl, above) << "overshoot at trial " << trial;
      prev_gap = gap;
    }
  }
}

TEST(ActivationStep, RisesFasterThanItDecays) {
  auto time_to = [](double ctrl, double start, auto done) {
    MuscleState s;
    s.act = start;
    int steps = 0;
    while (!done(s.act)) {
      s = activation_step(ctrl, s, 0.01);
      ++steps;
    }
    return steps;
  };
  const int rise = time_to(1.0, 0.0, [](double a) { return a >= 0.95; });
  const int fall = time_to(0.0, 1.0, [](double a) { return a <= 0.05; });
  EXPECT_LT(rise, fall);
}

TEST(ForceLength, PeakAndTails) {
  EXPECT_DOUBLE_EQ(force_length_active(1.0), 1.0);
  EXPECT_LT(force_length_active(0.2), 0.05);
  EXPECT_LT(force_length_active(1.8), 0.05);
  EXPECT_NEAR(force_length_active(1.15), std::exp(-0.0225 / 0.2025), 1e-15);
  EXPECT_NEAR(force_length_active(1.15), 0.8948, 1e-4);
  EXPECT_THROW(force_length_active(0.0), dynsyn::DomainError);
}

TEST(ForceVelocity, Branches) {
  EXPECT_DOUBLE_EQ(force_velocity(0.0), 1.0);
  EXPECT_DOUBLE_EQ(force_velocity(-1.0), 0.0);
  EXPECT_DOUBLE_EQ(force_velocity(-3.0), 0.0);
  // (1 + 15 v) / (1 + 10 v) at v = 0.5
  EXPECT_NEAR(force_velocity(0.5), 8.5 / 6.0, 1e-15);
  EXPECT_LE(force_velocity(1e6), 1.5);
  double prev = 0.0;
  for (double v = -1.0; v <= 3.0; v += 0.01) {
    const double f = force_velocity(v);
    EXPECT_GE(f, prev);
    prev = f;
  }
}

TEST(PassiveForce, OnsetAtOptimalLength) {
  EXPECT_EQ(passive_force(0.9), 0.0);
  EXPECT_EQ(passive_force(1.0), 0.0);
  // 0.5 * (e^{1.5} - 1) / (e^{1.5} - 1)
  EXPECT_NEAR(passive_force(1.3), 0.5, 1e-15);
  double prev = 0.0;
  for (double l = 1.001; l < 1.6; l += 0.01) {
    EXPECT_GT(passive_force(l), prev);
    prev = passive_force(l);
  }
}

TEST(PassiveEnergy, DerivativeIsPassiveForce) {
  for (double l : {1.05, 1.2, 1.4}) {
    const double h = 1e-6;
    const double fd = (passive_energy_normalized(l + h) - passive_energy_normalized(l - h)) / (2 * h);
    EXPECT_NEAR(fd, passive_force(l), 1e-8);
  }
}

TEST(MuscleForce, Cases) {
  MuscleParams p;
  p.f_max = 250.0;
  MuscleState s;
  s.act = 0.0;
  s.l_norm = 1.0;
  s.v_norm = -0.4;
  EXPECT_EQ(muscle_force(s, p), 0.0);
  s.act = 1.0;
  s.v_norm = 0.0;
  EXPECT_DOUBLE_EQ(muscle_force(s, p), 250.0);

  s.act = 0.5;
  s.l_norm = 1.2;
  s.v_norm = -0.3;
  const double fl = std::exp(-0.04 / 0.2025);
  const double fv = 0.7 / (1.0 + 0.3 / 0.25);
  const double fp = 0.5 * (std::exp(1.0) - 1.0) / (std::exp(1.5) - 1.0);
  EXPECT_NEAR(muscle_force(s, p), 250.0 * (fl * fv * 0.5 + fp), 1e-12);
}

TEST(MuscleForce, NeverNegative) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    MuscleState s;
    s.act = u(rng);
    s.l_norm = 0.05 + 2.0 * u(rng);
    s.v_norm = -3.0 + 6.0 * u(rng);
    EXPECT_GE(muscle_force(s, {}), 0.0);
  }
}

TEST(ActivationStep, AgreesWithReferenceOverOneSecond) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const double ctrl = u(rng);
    MuscleState s;
    s.act = u(rng);
    double ref = s.act;
    for (int k = 0; k < 100; ++k) {
      s = activation_step(ctrl, s, 0.01);
      ref = reference_activation(ctrl, ref, 0.01);
      worst = std::max(worst, std::abs(s.act - ref));
    }
  }
  EXPECT_LE(worst, 1e-3);
}

}  // namespace
