#include "bagrisk/simulate.hpp"

#include "bagrisk/parallel.hpp"
#include "bagrisk/rng.hpp"
#include "bagrisk/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace bagrisk {

namespace {

// Stream tags under a dataset seed.
constexpr std::uint64_t kFeatureStream = 0;
constexpr std::uint64_t kSignalStream = 1;
constexpr std::uint64_t kNoiseStream = 2;

constexpr double kRidgelessRcond = 1e-10;

void require_finite(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) throw std::invalid_argument("X and y row counts differ");
  if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("non-finite data");
}

Eigen::VectorXd response(const Eigen::MatrixXd& X, const Eigen::VectorXd& beta0,
                         double sigma_sq, ModelTag tag, double trace, Engine& noise) {
  Eigen::VectorXd y = X * beta0;
  if (tag == ModelTag::Nonlinear) {
    const double p = static_cast<double>(X.cols());
    y.array() += (X.rowwise().squaredNorm().array() - trace) / p;
  }
  if (sigma_sq > 0.0) y += std::sqrt(sigma_sq) * standard_normal(X.rows(), noise);
  return y;
}

Dataset assemble(std::size_t n, Covariance cov, Eigen::VectorXd beta0, double sigma_sq,
                 ModelTag tag, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("dataset needs n >= 1");
  Dataset d;
  auto features = make_engine(seed, {kFeatureStream});
  auto noise = make_engine(seed, {kNoiseStream});
  d.X = cov.color(standard_normal(static_cast<Eigen::Index>(n),
                                  static_cast<Eigen::Index>(cov.dim()), features));
  d.y = response(d.X, beta0, sigma_sq, tag, cov.trace(), noise);
  d.covariance = std::move(cov);
  d.beta0 = std::move(beta0);
  d.sigma_sq = sigma_sq;
  d.tag = tag;
  return d;
}

Covariance ar1_covariance(const std::shared_ptr<const Ar1Model>& model) {
  return Covariance::dense(std::shared_ptr<const Eigen::MatrixXd>(model, &model->sigma),
                           std::shared_ptr<const Eigen::MatrixXd>(model, &model->sqrt_sigma));
}

// Saturating binomial coefficient, enough to compare against a bag count.
double binomial_at_least(std::size_t n, std::size_t k) {
  k = std::min(k, n - k);
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    if (c > 1e18) return c;
  }
  return std::round(c);
}

IndexSet random_subset(std::size_t n, std::size_t k, Engine& engine) {
  std::vector<Eigen::Index> pool(n);
  std::iota(pool.begin(), pool.end(), Eigen::Index{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(pool[i], pool[pick(engine)]);
  }
  IndexSet out(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::string to_string(ModelTag tag) {
  switch (tag) {
    case ModelTag::IsoLinear: return "iso";
    case ModelTag::Ar1Linear: return "ar1";
    case ModelTag::Nonlinear: return "nonlinear";
    case ModelTag::External: return "external";
  }
  return "unknown";
}

Covariance Covariance::identity(std::size_t p) {
  Covariance c;
  c.dim_ = p;
  return c;
}

Covariance Covariance::dense(std::shared_ptr<const Eigen::MatrixXd> sigma,
                             std::shared_ptr<const Eigen::MatrixXd> sqrt_sigma) {
  if (!sigma || !sqrt_sigma || sigma->rows() != sigma->cols() ||
      sqrt_sigma->rows() != sigma->rows() || sqrt_sigma->cols() != sigma->cols()) {
    throw std::invalid_argument("dense covariance needs matching square factors");
  }
  Covariance c;
  c.dim_ = static_cast<std::size_t>(sigma->rows());
  c.sigma_ = std::move(sigma);
  c.sqrt_sigma_ = std::move(sqrt_sigma);
  return c;
}

double Covariance::quad_form(const Eigen::VectorXd& d) const {
  if (static_cast<std::size_t>(d.size()) != dim_) {
    throw std::invalid_argument("quad_form dimension mismatch");
  }
  if (!sigma_) return d.squaredNorm();
  return d.dot(sigma_->selfadjointView<Eigen::Lower>() * d);
}

double Covariance::trace() const {
  return sigma_ ? sigma_->trace() : static_cast<double>(dim_);
}

Eigen::MatrixXd Covariance::color(const Eigen::MatrixXd& z) const {
  if (!sigma_) return z;
  return z * (*sqrt_sigma_);
}

Eigen::MatrixXd Covariance::matrix() const {
  if (!sigma_) {
    const auto p = static_cast<Eigen::Index>(dim_);
    return Eigen::MatrixXd::Identity(p, p);
  }
  return *sigma_;
}

Dataset gen_iso(std::size_t n, std::size_t p, double rho_sq, double sigma_sq,
                std::uint64_t seed) {
  if (p == 0) throw std::invalid_argument("dataset needs p >= 1");
  if (rho_sq < 0.0 || sigma_sq < 0.0) throw std::invalid_argument("negative variance");
  auto signal = make_engine(seed, {kSignalStream});
  Eigen::VectorXd beta0 = std::sqrt(rho_sq / static_cast<double>(p)) *
                          standard_normal(static_cast<Eigen::Index>(p), signal);
  return assemble(n, Covariance::identity(p), std::move(beta0), sigma_sq, ModelTag::IsoLinear,
                  seed);
}

Dataset gen_ar1(std::size_t n, std::size_t p, double rho_ar, double sigma_sq,
                std::uint64_t seed) {
  if (sigma_sq < 0.0) throw std::invalid_argument("negative noise variance");
  const auto model = ar1_model(rho_ar, p);
  return assemble(n, ar1_covariance(model), model->beta0, sigma_sq, ModelTag::Ar1Linear, seed);
}

Dataset gen_nonlinear(std::size_t n, std::size_t p, double rho_ar, double sigma_sq,
                      std::uint64_t seed) {
  if (sigma_sq < 0.0) throw std::invalid_argument("negative noise variance");
  const auto model = ar1_model(rho_ar, p);
  return assemble(n, ar1_covariance(model), model->beta0, sigma_sq, ModelTag::Nonlinear, seed);
}

Dataset draw_like(const Dataset& source, std::size_t n, std::uint64_t seed) {
  if (!source.covariance) {
    throw std::invalid_argument("cannot draw new rows for external data");
  }
  return assemble(n, *source.covariance, source.beta0, source.sigma_sq, source.tag, seed);
}

Dataset take_rows(const Dataset& data, const std::vector<Eigen::Index>& rows) {
  Dataset out;
  out.X = data.X(rows, Eigen::placeholders::all);
  out.y = data.y(rows);
  out.covariance = data.covariance;
  out.beta0 = data.beta0;
  out.sigma_sq = data.sigma_sq;
  out.tag = data.tag;
  return out;
}

Dataset load_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2 || header.back() != "y") {
    throw std::runtime_error(path.string() + ": header must be x1,...,xp,y");
  }
  const std::size_t p = header.size() - 1;
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t cols = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::logic_error&) {
        throw std::runtime_error(path.string() + ": malformed number '" + cell + "'");
      }
      ++cols;
    }
    if (cols != p + 1) {
      throw std::runtime_error(path.string() + ": row " + std::to_string(rows + 1) +
                               " has " + std::to_string(cols) + " columns");
    }
    ++rows;
  }
  if (rows == 0) throw std::runtime_error(path.string() + ": no data rows");
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
      table(values.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(p + 1));
  Dataset d;
  d.X = table.leftCols(static_cast<Eigen::Index>(p));
  d.y = table.col(static_cast<Eigen::Index>(p));
  d.tag = ModelTag::External;
  return d;
}

std::string to_string(Sampling s) {
  switch (s) {
    case Sampling::SubagWR: return "subag-wr";
    case Sampling::SubagWOR: return "subag-wor";
    case Sampling::SplagWOR: return "splag";
  }
  return "unknown";
}

Sampling parse_sampling(const std::string& text) {
  if (text == "subag-wr") return Sampling::SubagWR;
  if (text == "subag-wor") return Sampling::SubagWOR;
  if (text == "splag") return Sampling::SplagWOR;
  throw std::invalid_argument("unknown strategy '" + text + "'");
}

Strategy theory_strategy(Sampling s) {
  return s == Sampling::SplagWOR ? Strategy::Splag : Strategy::Subag;
}

std::size_t EnsembleSpec::effective_bags(std::size_t n) const {
  if (strategy != Sampling::SplagWOR || k == 0) return bags;
  return std::min(bags, n / k);
}

Eigen::VectorXd FittedEnsemble::prefix_mean(std::size_t m) const {
  if (m == 0 || m > per_bag_betas.size()) {
    throw std::out_of_range("prefix size outside the fitted bags");
  }
  Eigen::VectorXd acc = per_bag_betas.front();
  for (std::size_t i = 1; i < m; ++i) acc += per_bag_betas[i];
  return acc / static_cast<double>(m);
}

Eigen::VectorXd fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("ridge needs a positive finite lambda");
  }
  require_finite(X, y);
  const auto k = X.rows();
  const auto p = X.cols();
  const double scale = 1.0 / static_cast<double>(k);
  if (k >= p) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose(), scale);
    gram.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) throw std::runtime_error("ridge Cholesky failed");
    return llt.solve(scale * (X.transpose() * y));
  }
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k, k);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(X, scale);
  gram.diagonal().array() += lambda;
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) throw std::runtime_error("ridge Cholesky failed");
  return X.transpose() * llt.solve(scale * y);
}

Eigen::VectorXd fit_ridgeless_svd(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  require_finite(X, y);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw std::runtime_error("SVD failed");
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return Eigen::VectorXd::Zero(X.cols());
  const double cutoff = s(0) * static_cast<double>(std::max(X.rows(), X.cols())) *
                        std::numeric_limits<double>::epsilon();
  Eigen::VectorXd coeff = svd.matrixU().transpose() * y;
  for (Eigen::Index i = 0; i < s.size(); ++i) coeff(i) = s(i) > cutoff ? coeff(i) / s(i) : 0.0;
  return svd.matrixV() * coeff;
}

Eigen::VectorXd fit_ridgeless(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  require_finite(X, y);
  const auto k = X.rows();
  const auto p = X.cols();
  if (k >= p) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(p, p);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() == Eigen::Success && llt.rcond() > kRidgelessRcond) {
      return llt.solve(X.transpose() * y);
    }
  } else {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(k, k);
    gram.selfadjointView<Eigen::Lower>().rankUpdate(X);
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() == Eigen::Success && llt.rcond() > kRidgelessRcond) {
      return X.transpose() * llt.solve(y);
    }
  }
  return fit_ridgeless_svd(X, y);
}

Eigen::VectorXd fit_base(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
  return lambda > 0.0 ? fit_ridge(X, y, lambda) : fit_ridgeless(X, y);
}

std::vector<IndexSet> draw_indices(const EnsembleSpec& spec, std::size_t n) {
  if (spec.k == 0 || spec.k > n) throw std::invalid_argument("subsample size must be in [1, n]");
  if (spec.bags == 0) throw std::invalid_argument("bag count must be positive");
  std::vector<IndexSet> out;
  switch (spec.strategy) {
    case Sampling::SubagWR: {
      out.reserve(spec.bags);
      for (std::size_t l = 0; l < spec.bags; ++l) {
        auto engine = make_engine(spec.seed, {l});
        out.push_back(random_subset(n, spec.k, engine));
      }
      break;
    }
    case Sampling::SubagWOR: {
      if (binomial_at_least(n, spec.k) < static_cast<double>(spec.bags)) {
        throw std::invalid_argument("more bags requested than distinct subsets exist");
      }
      std::set<IndexSet> seen;
      out.reserve(spec.bags);
      for (std::size_t l = 0; l < spec.bags; ++l) {
        for (std::uint64_t attempt = 0;; ++attempt) {
          auto engine = make_engine(spec.seed, {l, attempt});
          auto subset = random_subset(n, spec.k, engine);
          if (seen.insert(subset).second) {
            out.push_back(std::move(subset));
            break;
          }
        }
      }
      break;
    }
    case Sampling::SplagWOR: {
      auto engine = make_engine(spec.seed, {0x5b1a6ULL});
      std::vector<Eigen::Index> order(n);
      std::iota(order.begin(), order.end(), Eigen::Index{0});
      for (std::size_t i = n; i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(order[i - 1], order[pick(engine)]);
      }
      const std::size_t blocks = spec.effective_bags(n);
      out.reserve(blocks);
      for (std::size_t b = 0; b < blocks; ++b) {
        IndexSet block(order.begin() + static_cast<std::ptrdiff_t>(b * spec.k),
                       order.begin() + static_cast<std::ptrdiff_t>((b + 1) * spec.k));
        std::sort(block.begin(), block.end());
        out.push_back(std::move(block));
      }
      break;
    }
  }
  return out;
}

FittedEnsemble fit_on_indices(const Dataset& data, std::vector<IndexSet> index_sets,
                              double lambda) {
  if (index_sets.empty()) throw std::invalid_argument("ensemble needs at least one bag");
  FittedEnsemble fit;
  fit.per_bag_betas.reserve(index_sets.size());
  for (const auto& rows : index_sets) {
    const Eigen::MatrixXd X = data.X(rows, Eigen::placeholders::all);
    const Eigen::VectorXd y = data.y(rows);
    fit.per_bag_betas.push_back(fit_base(X, y, lambda));
  }
  fit.index_sets = std::move(index_sets);
  fit.beta_tilde = fit.prefix_mean(fit.per_bag_betas.size());
  return fit;
}

FittedEnsemble fit_ensemble(const Dataset& data, const EnsembleSpec& spec, double lambda) {
  return fit_on_indices(data, draw_indices(spec, static_cast<std::size_t>(data.n())), lambda);
}

double exact_conditional_risk(const Dataset& data, const Eigen::VectorXd& beta) {
  if (!data.has_linear_truth()) {
    throw std::logic_error("exact risk needs linear synthetic data, got " +
                           to_string(data.tag));
  }
  return data.sigma_sq + data.covariance->quad_form(data.beta0 - beta);
}

double testset_risk(const Eigen::VectorXd& beta, const Eigen::MatrixXd& X_test,
                    const Eigen::VectorXd& y_test) {
  if (X_test.rows() == 0) throw std::invalid_argument("empty test set");
  if (X_test.rows() != y_test.size() || X_test.cols() != beta.size()) {
    throw std::invalid_argument("test set shape mismatch");
  }
  return (y_test - X_test * beta).squaredNorm() / static_cast<double>(X_test.rows());
}

ComponentEstimate bias_variance_components(const Dataset& data, const EnsembleSpec& spec,
                                           double lambda, std::size_t m_big) {
  if (m_big < 50) throw std::invalid_argument("M_big below 50 gives a noisy estimate");
  if (!data.has_linear_truth()) {
    throw std::logic_error("bias/variance components need linear synthetic data");
  }
  EnsembleSpec big = spec;
  big.bags = m_big;
  const auto fit = fit_ensemble(data, big, lambda);
  ComponentEstimate est;
  est.bias = data.covariance->quad_form(data.beta0 - fit.beta_tilde);
  for (const auto& b : fit.per_bag_betas) {
    est.variance += data.covariance->quad_form(b - fit.beta_tilde);
  }
  est.variance /= static_cast<double>(fit.per_bag_betas.size());
  return est;
}

Dataset generate(const ModelConfig& model, std::size_t n, std::size_t p, std::uint64_t seed) {
  switch (model.tag) {
    case ModelTag::IsoLinear: return gen_iso(n, p, model.rho_sq, model.sigma_sq, seed);
    case ModelTag::Ar1Linear: return gen_ar1(n, p, model.rho_ar, model.sigma_sq, seed);
    case ModelTag::Nonlinear: return gen_nonlinear(n, p, model.rho_ar, model.sigma_sq, seed);
    case ModelTag::External: return load_dataset_csv(model.data_path);
  }
  throw std::logic_error("unknown model");
}

namespace {

constexpr std::uint64_t kDataStream = 11;
constexpr std::uint64_t kTestStream = 12;
constexpr std::uint64_t kBagStream = 13;
constexpr std::uint64_t kComponentStream = 14;
constexpr std::uint64_t kSplitStream = 15;

std::vector<SimRecord> run_replication(const ExperimentConfig& cfg, std::size_t rep,
                                       const Dataset* external) {
  Dataset train;
  Eigen::MatrixXd X_test;
  Eigen::VectorXd y_test;
  if (external) {
    if (cfg.n_test == 0 || cfg.n_test >= static_cast<std::size_t>(external->n())) {
      throw std::invalid_argument("external data needs 0 < n_test < n");
    }
    auto engine = make_engine(cfg.seed, {rep, kSplitStream});
    const auto order = [&] {
      std::vector<Eigen::Index> v(static_cast<std::size_t>(external->n()));
      std::iota(v.begin(), v.end(), Eigen::Index{0});
      std::shuffle(v.begin(), v.end(), engine);
      return v;
    }();
    std::vector<Eigen::Index> test(order.begin(),
                                   order.begin() + static_cast<std::ptrdiff_t>(cfg.n_test));
    std::vector<Eigen::Index> rest(order.begin() + static_cast<std::ptrdiff_t>(cfg.n_test),
                                   order.end());
    std::sort(test.begin(), test.end());
    std::sort(rest.begin(), rest.end());
    train = take_rows(*external, rest);
    X_test = external->X(test, Eigen::placeholders::all);
    y_test = external->y(test);
  } else {
    train = generate(cfg.model, cfg.n, cfg.p, derive_seed(cfg.seed, {rep, kDataStream}));
    const bool need_test = cfg.n_test > 0 || !train.has_linear_truth();
    if (need_test) {
      const std::size_t n_test = cfg.n_test > 0 ? cfg.n_test : cfg.n;
      auto test = draw_like(train, n_test, derive_seed(cfg.seed, {rep, kTestStream}));
      X_test = std::move(test.X);
      y_test = std::move(test.y);
    }
  }
  const double p = static_cast<double>(train.p());
  const std::size_t max_bags = *std::max_element(cfg.bags.begin(), cfg.bags.end());

  std::vector<SimRecord> out;
  for (std::size_t li = 0; li < cfg.lambdas.size(); ++li) {
    const double lambda = cfg.lambdas[li];
    for (std::size_t ki = 0; ki < cfg.ks.size(); ++ki) {
      EnsembleSpec spec;
      spec.strategy = cfg.strategy;
      spec.k = cfg.ks[ki];
      spec.bags = max_bags;
      // Bags are shared across lambda so the lambda comparison is paired.
      spec.seed = derive_seed(cfg.seed, {rep, kBagStream, ki});
      const auto fit = fit_ensemble(train, spec, lambda);
      std::optional<ComponentEstimate> components;
      if (cfg.m_big > 0 && train.has_linear_truth()) {
        EnsembleSpec comp = spec;
        comp.seed = derive_seed(cfg.seed, {rep, kComponentStream, ki});
        components = bias_variance_components(train, comp, lambda, cfg.m_big);
      }
      std::set<std::size_t> emitted;
      for (std::size_t m : cfg.bags) {
        const std::size_t m_eff = std::min(m, fit.per_bag_betas.size());
        if (!emitted.insert(m_eff).second) continue;
        const auto beta = fit.prefix_mean(m_eff);
        SimRecord r;
        r.strategy = cfg.strategy;
        r.lambda = lambda;
        r.k = spec.k;
        r.phi_s = p / static_cast<double>(spec.k);
        r.bags = m_eff;
        r.rep = rep;
        if (train.has_linear_truth()) r.risk_exact = exact_conditional_risk(train, beta);
        if (X_test.rows() > 0) r.risk_test = testset_risk(beta, X_test, y_test);
        if (components) {
          r.bias_est = components->bias;
          r.var_est = components->variance;
        }
        out.push_back(r);
      }
    }
  }
  return out;
}

}  // namespace

std::vector<SimRecord> run_experiment(const ExperimentConfig& config) {
  if (config.reps == 0) throw std::invalid_argument("need at least one replication");
  if (config.ks.empty() || config.bags.empty() || config.lambdas.empty()) {
    throw std::invalid_argument("experiment grid is empty");
  }
  if (std::find(config.bags.begin(), config.bags.end(), std::size_t{0}) != config.bags.end()) {
    throw std::invalid_argument("bag counts must be positive");
  }
  std::optional<Dataset> external;
  if (config.model.tag == ModelTag::External) external = load_dataset_csv(config.model.data_path);

  std::vector<std::vector<SimRecord>> per_rep(config.reps);
  parallel_for(config.reps, config.threads, [&](std::size_t rep) {
    per_rep[rep] = run_replication(config, rep, external ? &*external : nullptr);
  });
  std::vector<SimRecord> out;
  for (auto& block : per_rep) {
    out.insert(out.end(), block.begin(), block.end());
  }
  return out;
}

}  // namespace bagrisk
