#pragma once

#include "bagrisk/fixed_point.hpp"
#include "bagrisk/spectrum.hpp"

#include <cstddef>
#include <optional>
#include <string>

namespace bagrisk {

/// Number of bags: a positive integer, or infinity (theory only).
class Bags {
 public:
  static Bags finite(std::size_t m);
  static Bags infinite() { return Bags(); }

  bool is_infinite() const { return !count_.has_value(); }
  std::size_t count() const;
  /// 1/M, zero for M = inf.
  double inverse() const { return count_ ? 1.0 / static_cast<double>(*count_) : 0.0; }

  std::string to_string() const;
  friend bool operator==(const Bags&, const Bags&) = default;

 private:
  Bags() = default;
  explicit Bags(std::size_t m) : count_(m) {}
  std::optional<std::size_t> count_;
};

/// Parses "inf" or a positive integer.
Bags parse_bags(const std::string& text);

enum class Strategy { Subag, Splag };

std::string to_string(Strategy s);

struct RiskComponents {
  double sigma_sq = 0.0;
  double bias = 0.0;
  double variance = 0.0;
  double total = 0.0;
};

struct RiskPoint {
  double lambda = 0.0;
  Bags bags = Bags::finite(1);
  double phi = 0.0;
  double phi_s = 0.0;
  Strategy strategy = Strategy::Subag;
  RiskComponents components;
};

/// B_lambda(vartheta, theta) = rho^2 (1 + tv) tc.
double bias_term(double lambda, double vartheta, double theta, const SpectralDistribution& H,
                 const SignalDistribution& G);
/// V_lambda(vartheta, theta) = sigma^2 tv.
double variance_term(double lambda, double vartheta, double theta,
                     const SpectralDistribution& H, const SignalDistribution& G);
/// C_lambda(theta) = rho^2 tc, the bias shared by disjoint splits.
double cross_bias_term(double lambda, double theta, const SpectralDistribution& H,
                       const SignalDistribution& G);

/// Asymptotic risk of the subagged ridge(less) predictor with M bags.
RiskComponents risk_subag(double lambda, Bags bags, double phi, double phi_s,
                          const SpectralDistribution& H, const SignalDistribution& G);

/// Asymptotic risk of the splagged predictor. M is clamped to floor(phi_s/phi).
RiskComponents risk_splag(double lambda, Bags bags, double phi, double phi_s,
                          const SpectralDistribution& H, const SignalDistribution& G);

RiskPoint evaluate_risk(Strategy strategy, double lambda, Bags bags, double phi,
                        double phi_s, const SpectralDistribution& H,
                        const SignalDistribution& G);

/// Largest meaningful split count floor(phi_s/phi); infinite when phi_s is.
Bags splag_bag_limit(double phi, double phi_s);

/// Risk at M bags from the M = 1 and M = 2 values: (2a2 - a1) + 2(a1 - a2)/M.
double combine_bags(double a1, double a2, Bags bags);

/// (N - M)_+ / (N - 1), the finite-population factor for bags drawn
/// without replacement from N candidate subsets.
double wor_correction(std::size_t population, std::size_t bags);

struct PhiSGrid {
  std::size_t points = 400;
  double upper_factor = 1e3;
  double refine_tolerance = 1e-8;
};

struct OptimalRatio {
  double phi_s = 0.0;
  RiskComponents risk;
};

/// argmin over phi_s in [phi, inf] of the optimally-bagged risk: M = inf for
/// subagging and M = floor(phi_s/phi) for splagging. Ties go to smaller phi_s.
OptimalRatio optimize_phis(double lambda, Strategy strategy, double phi,
                           const SpectralDistribution& H, const SignalDistribution& G,
                           const PhiSGrid& grid = {});

/// Risk of full-data ridge at lambda* = phi sigma^2 / rho^2 under H = G = delta_1.
double optimal_ridge_risk_isotropic(double phi, double rho_sq, double sigma_sq);

}  // namespace bagrisk
