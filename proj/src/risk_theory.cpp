#include "bagrisk/risk_theory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace bagrisk {

Bags Bags::finite(std::size_t m) {
  if (m == 0) throw std::invalid_argument("bag count must be positive");
  return Bags(m);
}

std::size_t Bags::count() const {
  if (!count_) throw std::logic_error("infinite bag count has no integer value");
  return *count_;
}

std::string Bags::to_string() const {
  return count_ ? std::to_string(*count_) : std::string("inf");
}

Bags parse_bags(const std::string& text) {
  if (text == "inf" || text == "Inf" || text == "INF") return Bags::infinite();
  std::size_t used = 0;
  long long value = 0;
  try {
    value = std::stoll(text, &used);
  } catch (const std::logic_error&) {
    throw std::invalid_argument("invalid bag count '" + text + "'");
  }
  if (used != text.size() || value <= 0) {
    throw std::invalid_argument("invalid bag count '" + text + "'");
  }
  return Bags::finite(static_cast<std::size_t>(value));
}

std::string to_string(Strategy s) { return s == Strategy::Subag ? "subag" : "splag"; }

namespace {

// w1*a + w2*b where a zero weight suppresses its term even if the term is inf.
double mix(double w1, double a, double w2, double b) {
  double out = 0.0;
  if (w1 != 0.0) out += w1 * a;
  if (w2 != 0.0) out += w2 * b;
  return out;
}

double bias_from(const FixedPointSolution& fp, double vartheta, const SignalDistribution& G) {
  if (G.rho_sq() == 0.0) return 0.0;
  if (fp.lambda == 0.0 && fp.theta <= 1.0) return 0.0;
  const double tc = tc_of(fp, G);
  if (tc == 0.0) return 0.0;
  return G.rho_sq() * (1.0 + tv_of(fp, vartheta)) * tc;
}

double variance_from(const FixedPointSolution& fp, double vartheta,
                     const SignalDistribution& G) {
  if (G.sigma_sq() == 0.0) return 0.0;
  return G.sigma_sq() * tv_of(fp, vartheta);
}

void check_ratios(double phi, double phi_s) {
  if (!(phi > 0.0) || !std::isfinite(phi)) {
    throw std::invalid_argument("phi must be positive and finite");
  }
  if (!(phi_s >= phi)) throw std::invalid_argument("phi_s must be >= phi");
}

RiskComponents assemble(double sigma_sq, double bias, double variance) {
  RiskComponents r;
  r.sigma_sq = sigma_sq;
  r.bias = bias;
  r.variance = variance;
  r.total = (bias == kInf || variance == kInf) ? kInf : sigma_sq + bias + variance;
  return r;
}

}  // namespace

double bias_term(double lambda, double vartheta, double theta, const SpectralDistribution& H,
                 const SignalDistribution& G) {
  if (vartheta > theta) throw std::invalid_argument("bias term requires vartheta <= theta");
  return bias_from(solve_fixed_point(lambda, theta, H), vartheta, G);
}

double variance_term(double lambda, double vartheta, double theta,
                     const SpectralDistribution& H, const SignalDistribution& G) {
  if (vartheta > theta) {
    throw std::invalid_argument("variance term requires vartheta <= theta");
  }
  return variance_from(solve_fixed_point(lambda, theta, H), vartheta, G);
}

double cross_bias_term(double lambda, double theta, const SpectralDistribution& H,
                       const SignalDistribution& G) {
  if (G.rho_sq() == 0.0) return 0.0;
  return G.rho_sq() * tc_of(solve_fixed_point(lambda, theta, H), G);
}

RiskComponents risk_subag(double lambda, Bags bags, double phi, double phi_s,
                          const SpectralDistribution& H, const SignalDistribution& G) {
  check_ratios(phi, phi_s);
  const auto fp = solve_fixed_point(lambda, phi_s, H);
  const double w_single = bags.inverse();
  const double w_pair = 1.0 - w_single;
  const double bias = mix(w_single, w_single != 0.0 ? bias_from(fp, phi_s, G) : 0.0, w_pair,
                          w_pair != 0.0 ? bias_from(fp, phi, G) : 0.0);
  const double variance =
      mix(w_single, w_single != 0.0 ? variance_from(fp, phi_s, G) : 0.0, w_pair,
          w_pair != 0.0 ? variance_from(fp, phi, G) : 0.0);
  return assemble(G.sigma_sq(), bias, variance);
}

Bags splag_bag_limit(double phi, double phi_s) {
  check_ratios(phi, phi_s);
  if (phi_s == kInf) return Bags::infinite();
  // Guard against phi_s/phi landing just below an integer, e.g. 0.3/0.1.
  const double ratio = phi_s / phi;
  const double m = std::floor(ratio * (1.0 + 1e-12));
  return Bags::finite(static_cast<std::size_t>(std::max(1.0, m)));
}

RiskComponents risk_splag(double lambda, Bags bags, double phi, double phi_s,
                          const SpectralDistribution& H, const SignalDistribution& G) {
  check_ratios(phi, phi_s);
  const Bags limit = splag_bag_limit(phi, phi_s);
  if (!limit.is_infinite() && (bags.is_infinite() || bags.count() > limit.count())) {
    bags = limit;
  }
  const auto fp = solve_fixed_point(lambda, phi_s, H);
  const double w_single = bags.inverse();
  const double w_cross = 1.0 - w_single;
  double cross = 0.0;
  if (w_cross != 0.0 && G.rho_sq() != 0.0) cross = G.rho_sq() * tc_of(fp, G);
  const double bias =
      mix(w_single, w_single != 0.0 ? bias_from(fp, phi_s, G) : 0.0, w_cross, cross);
  const double variance = w_single != 0.0 ? w_single * variance_from(fp, phi_s, G) : 0.0;
  return assemble(G.sigma_sq(), bias, variance);
}

RiskPoint evaluate_risk(Strategy strategy, double lambda, Bags bags, double phi,
                        double phi_s, const SpectralDistribution& H,
                        const SignalDistribution& G) {
  RiskPoint point;
  point.lambda = lambda;
  point.phi = phi;
  point.phi_s = phi_s;
  point.strategy = strategy;
  if (strategy == Strategy::Subag) {
    point.bags = bags;
    point.components = risk_subag(lambda, bags, phi, phi_s, H, G);
  } else {
    const Bags limit = splag_bag_limit(phi, phi_s);
    point.bags = (!limit.is_infinite() && (bags.is_infinite() || bags.count() > limit.count()))
                     ? limit
                     : bags;
    point.components = risk_splag(lambda, bags, phi, phi_s, H, G);
  }
  return point;
}

double combine_bags(double a1, double a2, Bags bags) {
  return (2.0 * a2 - a1) + 2.0 * (a1 - a2) * bags.inverse();
}

double wor_correction(std::size_t population, std::size_t bags) {
  if (population < 2) throw std::invalid_argument("population must be at least 2");
  if (bags >= population) return 0.0;
  return static_cast<double>(population - bags) / static_cast<double>(population - 1);
}

namespace {

double optimized_objective(double lambda, Strategy strategy, double phi, double phi_s,
                           const SpectralDistribution& H, const SignalDistribution& G,
                           RiskComponents* out = nullptr) {
  const auto r = strategy == Strategy::Subag
                     ? risk_subag(lambda, Bags::infinite(), phi, phi_s, H, G)
                     : risk_splag(lambda, Bags::infinite(), phi, phi_s, H, G);
  if (out) *out = r;
  return r.total;
}

}  // namespace

OptimalRatio optimize_phis(double lambda, Strategy strategy, double phi,
                           const SpectralDistribution& H, const SignalDistribution& G,
                           const PhiSGrid& grid) {
  if (!(phi > 0.0) || !std::isfinite(phi)) {
    throw std::invalid_argument("phi must be positive and finite");
  }
  if (grid.points < 3) throw std::invalid_argument("phi_s grid needs at least 3 points");
  auto objective = [&](double phi_s) {
    return optimized_objective(lambda, strategy, phi, phi_s, H, G);
  };

  const double lower = std::max(phi, lambda == 0.0 ? 1.0001 : 0.0);
  const double upper = grid.upper_factor * std::max(1.0, phi);

  // Candidates are kept sorted by phi_s so a strict comparison breaks ties
  // toward the smaller ratio.
  std::vector<double> log_grid(grid.points);
  const double step = std::log(upper / lower) / static_cast<double>(grid.points - 1);
  for (std::size_t i = 0; i < grid.points; ++i) {
    log_grid[i] = lower * std::exp(step * static_cast<double>(i));
  }
  log_grid.back() = upper;
  std::vector<double> values(grid.points);
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < grid.points; ++i) {
    values[i] = objective(log_grid[i]);
    if (values[i] < values[best_i]) best_i = i;
  }

  std::vector<double> candidates{phi};
  candidates.push_back(log_grid[best_i]);

  // Golden-section search on the bracket around the best grid point.
  double a = log_grid[best_i == 0 ? 0 : best_i - 1];
  double b = log_grid[std::min(best_i + 1, grid.points - 1)];
  const double inv_golden = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_golden * (b - a);
  double d = a + inv_golden * (b - a);
  double fc = objective(c);
  double fd = objective(d);
  for (int iter = 0; iter < 500 && (b - a) > grid.refine_tolerance; ++iter) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_golden * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_golden * (b - a);
      fd = objective(d);
    }
  }
  candidates.push_back(fc <= fd ? c : d);
  candidates.push_back(kInf);
  std::sort(candidates.begin(), candidates.end());

  OptimalRatio best;
  best.phi_s = kInf;
  best.risk.total = kInf;
  bool found = false;
  for (double phi_s : candidates) {
    if (phi_s < phi) continue;
    RiskComponents r;
    const double value = optimized_objective(lambda, strategy, phi, phi_s, H, G, &r);
    if (!found || value < best.risk.total) {
      best.phi_s = phi_s;
      best.risk = r;
      found = true;
    }
  }
  return best;
}

double optimal_ridge_risk_isotropic(double phi, double rho_sq, double sigma_sq) {
  if (!(rho_sq > 0.0)) {
    throw std::invalid_argument("optimal ridge risk needs positive signal energy");
  }
  const double lambda_star = phi * sigma_sq / rho_sq;
  const auto H = make_isotropic(1.0);
  const auto G = make_isotropic_signal(1.0, rho_sq, sigma_sq);
  return risk_subag(lambda_star, Bags::finite(1), phi, phi, H, G).total;
}

}  // namespace bagrisk
