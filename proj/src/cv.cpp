#include "bagrisk/cv.hpp"

#include "bagrisk/parallel.hpp"
#include "bagrisk/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace bagrisk {

namespace {

constexpr std::uint64_t kSplitStream = 21;
constexpr std::uint64_t kFoldStream = 22;
constexpr std::uint64_t kBagStream = 23;

std::vector<Eigen::Index> shuffled_range(std::size_t n, Engine& engine) {
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(engine)]);
  }
  return order;
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size();
  return m % 2 == 1 ? values[m / 2] : 0.5 * (values[m / 2 - 1] + values[m / 2]);
}

}  // namespace

Centering parse_centering(const std::string& text) {
  if (text == "avg") return Centering::Avg;
  if (text == "mom") return Centering::MedianOfMeans;
  throw std::invalid_argument("unknown centering '" + text + "'");
}

std::size_t CvConfig::default_n_test(std::size_t n) {
  return static_cast<std::size_t>(std::ceil(0.063 * static_cast<double>(n)));
}

std::vector<std::size_t> build_grid(std::size_t n_train, double nu) {
  if (!(nu > 0.0 && nu < 1.0)) throw std::invalid_argument("nu must lie in (0, 1)");
  if (n_train < 2) throw std::invalid_argument("need at least two training rows");
  const auto k0 = static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(n_train), nu)));
  if (k0 == 0) throw std::invalid_argument("empty subsample grid");
  std::vector<std::size_t> grid;
  for (std::size_t j = 1; j <= n_train / k0; ++j) grid.push_back(j * k0);
  if (grid.empty()) throw std::invalid_argument("empty subsample grid");
  return grid;
}

std::size_t mom_folds(double eta) {
  if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("eta must lie in (0, 1)");
  return static_cast<std::size_t>(std::ceil(8.0 * std::log(1.0 / eta)));
}

double estimate_risk(const Eigen::VectorXd& predictions, const Eigen::VectorXd& y_test,
                     Centering centering, double eta, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(y_test.size());
  if (n == 0) throw std::invalid_argument("empty test set");
  if (predictions.size() != y_test.size()) {
    throw std::invalid_argument("prediction and response sizes differ");
  }
  const Eigen::ArrayXd sq = (y_test - predictions).array().square();
  if (centering == Centering::Avg) return sq.mean();

  const std::size_t folds = mom_folds(eta);
  if (folds > n) throw std::invalid_argument("more median-of-means folds than test rows");
  auto engine = make_engine(seed);
  const auto order = shuffled_range(n, engine);
  std::vector<double> fold_risk;
  fold_risk.reserve(folds);
  for (std::size_t b = 0; b < folds; ++b) {
    // Near-equal contiguous blocks of the shuffled order.
    const std::size_t begin = b * n / folds;
    const std::size_t end = (b + 1) * n / folds;
    double acc = 0.0;
    for (std::size_t i = begin; i < end; ++i) acc += sq(order[i]);
    fold_risk.push_back(acc / static_cast<double>(end - begin));
  }
  return median(std::move(fold_risk));
}

CvResult run_cv(const Dataset& data, const CvConfig& config) {
  const auto n = static_cast<std::size_t>(data.n());
  if (config.n_test == 0 || config.n_test >= n) {
    throw std::invalid_argument("need 0 < n_test < n");
  }
  if (config.bags == 0) throw std::invalid_argument("bag count must be positive");
  if (config.centering == Centering::MedianOfMeans && mom_folds(config.eta) > config.n_test) {
    throw std::invalid_argument("more median-of-means folds than test rows");
  }

  CvResult result;
  {
    auto engine = make_engine(config.seed, {kSplitStream});
    auto order = shuffled_range(n, engine);
    result.test_rows.assign(order.begin(),
                            order.begin() + static_cast<std::ptrdiff_t>(config.n_test));
    result.train_rows.assign(order.begin() + static_cast<std::ptrdiff_t>(config.n_test),
                             order.end());
    std::sort(result.test_rows.begin(), result.test_rows.end());
    std::sort(result.train_rows.begin(), result.train_rows.end());
  }
  const Dataset train = take_rows(data, result.train_rows);
  const Eigen::MatrixXd X_test = data.X(result.test_rows, Eigen::placeholders::all);
  const Eigen::VectorXd y_test = data.y(result.test_rows);
  const auto n_train = result.train_rows.size();
  const double p = static_cast<double>(data.p());
  const std::uint64_t fold_seed = derive_seed(config.seed, {kFoldStream});

  const auto ks = build_grid(n_train, config.nu);
  std::vector<CvGridEntry> entries(ks.size());
  parallel_for(ks.size(), config.threads, [&](std::size_t i) {
    EnsembleSpec spec;
    spec.strategy = config.strategy;
    spec.k = ks[i];
    spec.bags = config.bags;
    spec.seed = derive_seed(config.seed, {kBagStream, ks[i]});
    const auto fit = fit_ensemble(train, spec, config.lambda);
    auto& e = entries[i];
    e.k = ks[i];
    e.phi_s = p / static_cast<double>(ks[i]);
    e.effective_bags = fit.per_bag_betas.size();
    e.risk_est = estimate_risk(X_test * fit.beta_tilde, y_test, config.centering, config.eta,
                               fold_seed);
    e.beta = fit.beta_tilde;
  });
  if (config.include_null) {
    CvGridEntry null_entry;
    null_entry.k = 0;
    null_entry.phi_s = kInf;
    null_entry.effective_bags = 0;
    null_entry.beta = Eigen::VectorXd::Zero(data.p());
    null_entry.risk_est = estimate_risk(Eigen::VectorXd::Zero(y_test.size()), y_test,
                                        config.centering, config.eta, fold_seed);
    entries.insert(entries.begin(), std::move(null_entry));
  }

  // Entries are in increasing k, so a strict comparison keeps the smallest k on ties.
  std::size_t best = 0;
  for (std::size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].risk_est < entries[best].risk_est) best = i;
  }
  result.k_hat = entries[best].k;
  result.risk_hat = entries[best].risk_est;
  result.final_beta = entries[best].beta;
  result.final_test_risk = testset_risk(result.final_beta, X_test, y_test);
  result.grid = std::move(entries);
  return result;
}

}  // namespace bagrisk
