#pragma once

#include "bagrisk/simulate.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace bagrisk {

enum class Centering { Avg, MedianOfMeans };

Centering parse_centering(const std::string& text);

struct CvConfig {
  std::size_t n_test = 0;
  double nu = 0.5;
  std::size_t bags = 10;
  Sampling strategy = Sampling::SubagWR;
  Centering centering = Centering::Avg;
  /// Failure probability for median-of-means; only read when centering is MOM.
  double eta = 0.5;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  /// Adds the zero predictor as a candidate (reported with k = 0).
  bool include_null = true;
  std::size_t threads = 1;

  /// ceil(0.063 n).
  static std::size_t default_n_test(std::size_t n);
};

struct CvGridEntry {
  std::size_t k = 0;  // 0 marks the null predictor
  double phi_s = 0.0;
  std::size_t effective_bags = 0;
  double risk_est = 0.0;
  Eigen::VectorXd beta;

  bool is_null() const { return k == 0; }
};

struct CvResult {
  std::size_t k_hat = 0;
  double risk_hat = 0.0;
  std::vector<CvGridEntry> grid;
  Eigen::VectorXd final_beta;
  /// Plain mean squared error of the selected predictor on the test split.
  double final_test_risk = 0.0;
  std::vector<Eigen::Index> train_rows;
  std::vector<Eigen::Index> test_rows;
};

/// {k0, 2k0, ..., floor(n/k0) k0} with k0 = floor(n^nu), n = n_train.
std::vector<std::size_t> build_grid(std::size_t n_train, double nu);

/// B = ceil(8 log(1/eta)).
std::size_t mom_folds(double eta);

/// Mean squared error, or the median over B random folds of the per-fold
/// mean squared error. The fold partition depends only on `seed`.
double estimate_risk(const Eigen::VectorXd& predictions, const Eigen::VectorXd& y_test,
                     Centering centering, double eta, std::uint64_t seed);

/// Cross-validation over the subsample size of a bagged ridge(less) predictor.
CvResult run_cv(const Dataset& data, const CvConfig& config);

}  // namespace bagrisk
