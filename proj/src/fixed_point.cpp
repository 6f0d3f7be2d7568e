#include "bagrisk/fixed_point.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace bagrisk {

namespace {

constexpr int kBisectionCap = 200;
constexpr int kDoublingCap = 1100;

double mean_resolvent(double v, const SpectralDistribution& H) {
  double acc = 0.0;
  for (const auto& a : H.atoms()) acc += a.weight * a.value / (1.0 + v * a.value);
  return acc;
}

double second_moment(double v, const SpectralDistribution& H) {
  double acc = 0.0;
  for (const auto& a : H.atoms()) {
    const double d = 1.0 + v * a.value;
    acc += a.weight * a.value * a.value / (d * d);
  }
  return acc;
}

void check_arguments(double lambda, double theta) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("lambda must be finite and nonnegative");
  }
  if (!(theta > 0.0)) {
    throw std::invalid_argument("theta must be positive");
  }
}

}  // namespace

double fixed_point_residual(double v, double lambda, double theta,
                            const SpectralDistribution& H) {
  return 1.0 / v - lambda - theta * mean_resolvent(v, H);
}

double solve_v(double lambda, double theta, const SpectralDistribution& H) {
  check_arguments(lambda, theta);
  if (theta == kInf) return 0.0;
  if (lambda == 0.0 && theta <= 1.0) return kInf;

  auto f = [&](double v) { return fixed_point_residual(v, lambda, theta, H); };

  // f(lo) >= 0 because int r/(1+vr) dH < r_max.
  double lo = 1.0 / (lambda + theta * H.max_value());
  double hi = 0.0;
  if (lambda > 0.0) {
    hi = 1.0 / lambda;
  } else {
    hi = lo;
    int j = 0;
    while (f(hi) >= 0.0) {
      if (++j > kDoublingCap) {
        throw std::runtime_error("fixed point: no sign change for theta=" +
                                 std::to_string(theta));
      }
      lo = hi;
      hi *= 2.0;
    }
  }
  if (f(lo) < 0.0 || f(hi) > 0.0) {
    throw std::runtime_error("fixed point: bracket has no sign change");
  }

  for (int i = 0; i < kBisectionCap; ++i) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::abs(f(lo)) <= std::abs(f(hi)) ? lo : hi;
}

FixedPointSolution solve_fixed_point(double lambda, double theta,
                                     const SpectralDistribution& H) {
  FixedPointSolution fp;
  fp.lambda = lambda;
  fp.theta = theta;
  fp.v = solve_v(lambda, theta, H);
  if (std::isfinite(fp.v) && fp.v > 0.0) fp.moment2 = second_moment(fp.v, H);
  return fp;
}

double tv_of(const FixedPointSolution& fp, double vartheta) {
  if (!(vartheta > 0.0)) {
    throw std::invalid_argument("vartheta must be positive");
  }
  if (vartheta > fp.theta) {
    throw std::invalid_argument("tv requires vartheta <= theta");
  }
  if (fp.theta_infinite()) return 0.0;
  if (fp.v_infinite()) {
    return vartheta < 1.0 ? vartheta / (1.0 - vartheta) : kInf;
  }
  const double numerator = vartheta * fp.moment2;
  const double denominator = 1.0 / (fp.v * fp.v) - numerator;
  if (denominator > 0.0) return numerator / denominator;
  if (vartheta < fp.theta) {
    throw std::runtime_error("tv: nonpositive denominator");
  }
  return kInf;
}

double tv_of(double lambda, double vartheta, double theta, const SpectralDistribution& H) {
  if (vartheta > theta) {
    throw std::invalid_argument("tv requires vartheta <= theta");
  }
  return tv_of(solve_fixed_point(lambda, theta, H), vartheta);
}

double tc_of(const FixedPointSolution& fp, const SignalDistribution& G) {
  if (fp.v_infinite()) return 0.0;
  if (fp.theta_infinite()) return G.measure().mean();
  double acc = 0.0;
  for (const auto& a : G.atoms()) {
    const double d = 1.0 + fp.v * a.value;
    acc += a.weight * a.value / (d * d);
  }
  return acc;
}

double tc_of(double lambda, double theta, const SignalDistribution& G,
             const SpectralDistribution& H) {
  return tc_of(solve_fixed_point(lambda, theta, H), G);
}

double tv_b_of(double lambda, double theta, const SpectralDistribution& H) {
  return tv_of(lambda, theta, theta, H);
}

double tv_v_of(double lambda, double theta, const SpectralDistribution& H) {
  const auto fp = solve_fixed_point(lambda, theta, H);
  if (fp.theta_infinite()) return 0.0;
  if (fp.v_infinite()) return kInf;
  const double denominator = 1.0 / (fp.v * fp.v) - theta * fp.moment2;
  return denominator > 0.0 ? 1.0 / denominator : kInf;
}

FixedPointBundle evaluate_bundle(double lambda, double vartheta, double theta,
                                 const SpectralDistribution& H, const SignalDistribution& G) {
  const auto fp = solve_fixed_point(lambda, theta, H);
  FixedPointBundle b;
  b.lambda = lambda;
  b.vartheta = vartheta;
  b.theta = theta;
  b.v = fp.v;
  b.tv = tv_of(fp, vartheta);
  b.tc = tc_of(fp, G);
  b.tv_b = tv_of(fp, theta);
  b.tv_v = tv_v_of(lambda, theta, H);
  return b;
}

double closed_form_v_isotropic(double lambda, double phi, double scale) {
  check_arguments(lambda, phi);
  if (!(scale > 0.0)) throw std::invalid_argument("scale must be positive");
  if (phi == kInf) return 0.0;
  if (lambda == 0.0) return phi > 1.0 ? 1.0 / (scale * (phi - 1.0)) : kInf;
  // Positive root of lambda*a*v^2 + (lambda + a(phi-1)) v - 1 = 0.
  const double b = lambda + scale * (phi - 1.0);
  const double disc = std::sqrt(b * b + 4.0 * lambda * scale);
  return b > 0.0 ? 2.0 / (b + disc) : (disc - b) / (2.0 * lambda * scale);
}

}  // namespace bagrisk
