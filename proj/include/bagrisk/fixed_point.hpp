#pragma once

#include "bagrisk/spectrum.hpp"

#include <limits>

namespace bagrisk {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Solution of 1/v = lambda + theta * int r / (1 + v r) dH(r) for one
/// (lambda, theta), plus the spectral moment the derived constants need.
///
/// Branches are explicit: `v` is +inf for the ridgeless interpolation regime
/// (lambda = 0, theta <= 1) and 0 for theta = +inf. `moment2` holds
/// int r^2 / (1 + v r)^2 dH and is only meaningful when v is finite and
/// positive.
struct FixedPointSolution {
  double lambda = 0.0;
  double theta = 0.0;
  double v = 0.0;
  double moment2 = 0.0;

  bool v_infinite() const { return v == kInf; }
  bool theta_infinite() const { return theta == kInf; }
};

/// Constants derived from v at (lambda, vartheta, theta).
struct FixedPointBundle {
  double lambda = 0.0;
  double vartheta = 0.0;
  double theta = 0.0;
  double v = 0.0;
  double tv = 0.0;
  double tc = 0.0;
  double tv_b = 0.0;
  double tv_v = 0.0;
};

/// Bisection on the strictly decreasing map v -> 1/v - lambda - theta*int r/(1+vr) dH.
/// Throws std::invalid_argument on lambda < 0 or theta <= 0, and
/// std::runtime_error if no sign change can be bracketed.
double solve_v(double lambda, double theta, const SpectralDistribution& H);

FixedPointSolution solve_fixed_point(double lambda, double theta,
                                     const SpectralDistribution& H);

/// Residual 1/v - lambda - theta * int r/(1+vr) dH at a finite positive v.
double fixed_point_residual(double v, double lambda, double theta,
                            const SpectralDistribution& H);

/// tv(-lambda; vartheta, theta). Requires vartheta <= theta.
double tv_of(const FixedPointSolution& fp, double vartheta);
double tv_of(double lambda, double vartheta, double theta, const SpectralDistribution& H);

/// tc(-lambda; theta) = int r / (1 + v r)^2 dG.
double tc_of(const FixedPointSolution& fp, const SignalDistribution& G);
double tc_of(double lambda, double theta, const SignalDistribution& G,
             const SpectralDistribution& H);

/// Resolvent constants of the bias and variance terms, tv_b = tv(.; theta, theta).
double tv_b_of(double lambda, double theta, const SpectralDistribution& H);
double tv_v_of(double lambda, double theta, const SpectralDistribution& H);

FixedPointBundle evaluate_bundle(double lambda, double vartheta, double theta,
                                 const SpectralDistribution& H, const SignalDistribution& G);

/// Closed form of v for H = delta_a. lambda = 0 returns 1/(a(phi-1)) for
/// phi > 1 and +inf otherwise.
double closed_form_v_isotropic(double lambda, double phi, double scale);

}  // namespace bagrisk
