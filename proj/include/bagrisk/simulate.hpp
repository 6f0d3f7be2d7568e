#pragma once

#include "bagrisk/risk_theory.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace bagrisk {

enum class ModelTag { IsoLinear, Ar1Linear, Nonlinear, External };

std::string to_string(ModelTag tag);

/// Feature covariance of a synthetic model: identity, or a dense matrix with
/// its symmetric square root.
class Covariance {
 public:
  static Covariance identity(std::size_t p);
  static Covariance dense(std::shared_ptr<const Eigen::MatrixXd> sigma,
                          std::shared_ptr<const Eigen::MatrixXd> sqrt_sigma);

  std::size_t dim() const { return dim_; }
  bool is_identity() const { return !sigma_; }
  double quad_form(const Eigen::VectorXd& d) const;
  double trace() const;
  /// Rows of z are iid N(0, I); rows of the result are iid N(0, Sigma).
  Eigen::MatrixXd color(const Eigen::MatrixXd& z) const;
  Eigen::MatrixXd matrix() const;

 private:
  std::size_t dim_ = 0;
  std::shared_ptr<const Eigen::MatrixXd> sigma_;
  std::shared_ptr<const Eigen::MatrixXd> sqrt_sigma_;
};

/// A design matrix and response. Synthetic linear data also carries the
/// ground truth needed for exact risks.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::optional<Covariance> covariance;
  Eigen::VectorXd beta0;
  double sigma_sq = 0.0;
  ModelTag tag = ModelTag::External;

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
  bool has_linear_truth() const {
    return covariance.has_value() &&
           (tag == ModelTag::IsoLinear || tag == ModelTag::Ar1Linear);
  }
};

Dataset gen_iso(std::size_t n, std::size_t p, double rho_sq, double sigma_sq,
                std::uint64_t seed);
Dataset gen_ar1(std::size_t n, std::size_t p, double rho_ar, double sigma_sq,
                std::uint64_t seed);
/// y = x'beta0 + (|x|^2 - tr Sigma)/p + eps with AR(1) features.
Dataset gen_nonlinear(std::size_t n, std::size_t p, double rho_ar, double sigma_sq,
                      std::uint64_t seed);

/// Fresh rows from the model that generated `source` (same beta0 and Sigma).
Dataset draw_like(const Dataset& source, std::size_t n, std::uint64_t seed);

/// Rows `rows` of `data`, keeping its ground truth.
Dataset take_rows(const Dataset& data, const std::vector<Eigen::Index>& rows);

/// CSV with a header row `x1,...,xp,y`.
Dataset load_dataset_csv(const std::filesystem::path& path);

enum class Sampling { SubagWR, SubagWOR, SplagWOR };

std::string to_string(Sampling s);
Sampling parse_sampling(const std::string& text);
Strategy theory_strategy(Sampling s);

using IndexSet = std::vector<Eigen::Index>;

struct EnsembleSpec {
  Sampling strategy = Sampling::SubagWR;
  std::size_t k = 1;
  std::size_t bags = 1;
  std::uint64_t seed = 0;

  /// min(M, floor(n/k)) for splagging, M otherwise.
  std::size_t effective_bags(std::size_t n) const;
};

struct FittedEnsemble {
  Eigen::VectorXd beta_tilde;
  std::vector<Eigen::VectorXd> per_bag_betas;
  std::vector<IndexSet> index_sets;

  /// Average of the first m per-bag coefficients.
  Eigen::VectorXd prefix_mean(std::size_t m) const;
};

/// Solves (X'X/k + lambda I) b = X'y/k; uses the k x k dual system when k < p.
Eigen::VectorXd fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda);

/// Minimum-norm least squares. Cholesky on the smaller Gram matrix, falling
/// back to fit_ridgeless_svd when it is numerically singular.
Eigen::VectorXd fit_ridgeless(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// Pseudoinverse solution from a thin SVD with cutoff s_max * max(k, p) * eps.
Eigen::VectorXd fit_ridgeless_svd(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// lambda > 0 dispatches to fit_ridge, lambda == 0 to fit_ridgeless.
Eigen::VectorXd fit_base(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda);

std::vector<IndexSet> draw_indices(const EnsembleSpec& spec, std::size_t n);

FittedEnsemble fit_on_indices(const Dataset& data, std::vector<IndexSet> index_sets,
                              double lambda);
FittedEnsemble fit_ensemble(const Dataset& data, const EnsembleSpec& spec, double lambda);

/// sigma^2 + (beta0 - beta)' Sigma (beta0 - beta). Linear synthetic data only.
double exact_conditional_risk(const Dataset& data, const Eigen::VectorXd& beta);

double testset_risk(const Eigen::VectorXd& beta, const Eigen::MatrixXd& X_test,
                    const Eigen::VectorXd& y_test);

struct ComponentEstimate {
  double bias = 0.0;
  double variance = 0.0;
};

/// Bias and variance of the bagged predictor around an M_big-bag proxy of
/// the infinite ensemble.
ComponentEstimate bias_variance_components(const Dataset& data, const EnsembleSpec& spec,
                                           double lambda, std::size_t m_big = 500);

// ---------------------------------------------------------------------------
// Monte Carlo experiment grid

struct ModelConfig {
  ModelTag tag = ModelTag::IsoLinear;
  double rho_sq = 1.0;
  double sigma_sq = 1.0;
  double rho_ar = 0.25;
  std::filesystem::path data_path;
};

Dataset generate(const ModelConfig& model, std::size_t n, std::size_t p, std::uint64_t seed);

struct ExperimentConfig {
  ModelConfig model;
  std::size_t n = 0;
  std::size_t p = 0;
  Sampling strategy = Sampling::SubagWR;
  std::vector<double> lambdas{0.0};
  std::vector<std::size_t> ks;
  std::vector<std::size_t> bags{1};
  std::size_t reps = 1;
  std::uint64_t seed = 0;
  /// Held-out rows for risk_test; 0 disables it for linear models.
  std::size_t n_test = 0;
  /// Bags used for bias/variance estimates; 0 disables them.
  std::size_t m_big = 0;
  std::size_t threads = 1;
};

struct SimRecord {
  Sampling strategy = Sampling::SubagWR;
  double lambda = 0.0;
  std::size_t k = 0;
  double phi_s = 0.0;
  std::size_t bags = 0;
  std::size_t rep = 0;
  std::optional<double> risk_exact;
  std::optional<double> risk_test;
  std::optional<double> bias_est;
  std::optional<double> var_est;
};

/// One record per (rep, lambda, k, effective M), ordered by that key.
std::vector<SimRecord> run_experiment(const ExperimentConfig& config);

}  // namespace bagrisk
