#include "bagrisk/rng.hpp"
#include "bagrisk/simulate.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

using namespace bagrisk;

namespace {

std::size_t overlap(IndexSet a, IndexSet b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  IndexSet both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
  return both.size();
}

// Dense oracle: sigma^2 + d' Sigma d with Sigma materialized.
double dense_risk(const Dataset& d, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd diff = d.beta0 - beta;
  return d.sigma_sq + diff.dot(d.covariance->matrix() * diff);
}

}  // namespace

TEST_CASE("isotropic generator") {
  SUBCASE("signal energy averages to rho^2") {
    const int draws = 200;
    std::vector<double> norms;
    for (int s = 0; s < draws; ++s) norms.push_back(gen_iso(2, 50, 2.0, 1.0, 1000 + s).beta0.squaredNorm());
    const double mean = std::accumulate(norms.begin(), norms.end(), 0.0) / draws;
    double var = 0;
    for (double x : norms) var += (x - mean) * (x - mean);
    const double se = std::sqrt(var / (draws - 1) / draws);
    CHECK(std::abs(mean - 2.0) < 3 * se);
  }
  SUBCASE("noiseless responses are exactly linear") {
    const auto d = gen_iso(20, 5, 1.0, 0.0, 3);
    CHECK((d.y - d.X * d.beta0).norm() == 0.0);
  }
  SUBCASE("seeded determinism") {
    const auto a = gen_iso(30, 10, 1.0, 1.0, 77);
    const auto b = gen_iso(30, 10, 1.0, 1.0, 77);
    const auto c = gen_iso(30, 10, 1.0, 1.0, 78);
    CHECK(a.X == b.X);
    CHECK(a.y == b.y);
    CHECK(a.X != c.X);
  }
}

TEST_CASE("AR(1) generator") {
  const std::size_t p = 20;
  const auto d = gen_ar1(10 * p * 20, p, 0.5, 1.0, 5);
  CHECK(d.beta0.squaredNorm() == doctest::Approx(0.2).epsilon(1e-12));
  const Eigen::MatrixXd S = d.X.transpose() * d.X / static_cast<double>(d.n());
  const Eigen::MatrixXd truth = d.covariance->matrix();
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) {
      CHECK(std::abs(S(i, j) - truth(i, j)) < 0.1 * std::max(std::abs(truth(i, j)), 0.25));
    }
  }
  const auto again = gen_ar1(10 * p * 20, p, 0.5, 1.0, 5);
  CHECK(again.y == d.y);
}

TEST_CASE("nonlinear generator") {
  const std::size_t p = 40;
  const auto d = gen_nonlinear(10000, p, 0.25, 0.0, 9);
  const Eigen::VectorXd extra = d.y - d.X * d.beta0;
  const double mean = extra.mean();
  const double sd = std::sqrt((extra.array() - mean).square().sum() / (extra.size() - 1));
  CHECK(std::abs(mean) < 3 * sd / std::sqrt(static_cast<double>(extra.size())));
  CHECK_FALSE(d.has_linear_truth());
  CHECK_THROWS_AS(exact_conditional_risk(d, d.beta0), std::logic_error);

  const auto flat = gen_nonlinear(50, 8, 0.0, 0.0, 4);
  const Eigen::VectorXd direct =
      flat.X * flat.beta0 +
      ((flat.X.rowwise().squaredNorm().array() - 8.0) / 8.0).matrix();
  CHECK((flat.y - direct).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("ridge solutions") {
  const std::size_t p = 6;
  const Eigen::MatrixXd X = Eigen::MatrixXd::Identity(p, p);
  Eigen::VectorXd y(p);
  y << 1, -2, 3, 0.5, 4, -1;
  const auto b = fit_ridge(X, y, 1.0);
  CHECK((b - (y / p) / (1.0 / p + 1.0)).norm() < 1e-12);

  auto engine = make_engine(11);
  for (auto [k, q] : {std::pair{40, 15}, std::pair{10, 25}}) {
    const Eigen::MatrixXd A = standard_normal(k, q, engine);
    const Eigen::VectorXd z = standard_normal(k, engine);
    const double lambda = 0.3;
    const auto beta = fit_ridge(A, z, lambda);
    const Eigen::VectorXd lhs =
        (A.transpose() * A / k + lambda * Eigen::MatrixXd::Identity(q, q)) * beta;
    const Eigen::VectorXd rhs = A.transpose() * z / k;
    CHECK((lhs - rhs).norm() < 1e-8 * rhs.norm());
  }

  const Eigen::MatrixXd A = standard_normal(30, 8, engine);
  const Eigen::VectorXd z = standard_normal(30, engine);
  double prev = kInf;
  for (double lambda : {0.01, 0.1, 1.0, 10.0, 100.0}) {
    const double norm = fit_ridge(A, z, lambda).norm();
    CHECK(norm < prev);
    prev = norm;
  }
  CHECK((fit_ridge(A, z, 1e-10) - fit_ridgeless(A, z)).norm() < 1e-6);
}

TEST_CASE("ridgeless solutions") {
  auto engine = make_engine(12);
  const Eigen::MatrixXd A = standard_normal(15, 40, engine);
  const Eigen::VectorXd z = standard_normal(15, engine);
  const auto beta = fit_ridgeless(A, z);
  CHECK((A * beta - z).norm() < 1e-8 * z.norm());
  const Eigen::VectorXd oracle = A.transpose() * (A * A.transpose()).inverse() * z;
  CHECK((beta - oracle).norm() < 1e-9 * oracle.norm());
  CHECK((fit_ridgeless_svd(A, z) - oracle).norm() < 1e-9 * oracle.norm());
  CHECK(fit_ridgeless(A, Eigen::VectorXd::Zero(15)).norm() == 0.0);

  // rank deficient: duplicated columns still give the minimum norm solution
  Eigen::MatrixXd D(20, 4);
  D.leftCols(2) = standard_normal(20, 2, engine);
  D.rightCols(2) = D.leftCols(2);
  const Eigen::VectorXd w = standard_normal(20, engine);
  const auto pinv = D.completeOrthogonalDecomposition().pseudoInverse() * w;
  CHECK((fit_ridgeless(D, w) - pinv).norm() < 1e-8 * pinv.norm());
}

TEST_CASE("index sets") {
  SUBCASE("splag blocks are disjoint and sized k") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      EnsembleSpec spec{Sampling::SplagWOR, 7, 10, seed};
      const auto sets = draw_indices(spec, 50);
      CHECK(sets.size() == 7);
      std::set<Eigen::Index> seen;
      for (const auto& s : sets) {
        CHECK(s.size() == 7);
        for (auto i : s) {
          CHECK(i < 50);
          CHECK(seen.insert(i).second);
        }
      }
    }
  }
  SUBCASE("with-replacement subsets have k distinct rows") {
    EnsembleSpec spec{Sampling::SubagWR, 30, 5, 3};
    for (const auto& s : draw_indices(spec, 40)) {
      CHECK(std::set<Eigen::Index>(s.begin(), s.end()).size() == 30);
    }
    CHECK_THROWS(draw_indices(EnsembleSpec{Sampling::SubagWR, 41, 1, 0}, 40));
  }
  SUBCASE("without-replacement subsets are distinct") {
    EnsembleSpec spec{Sampling::SubagWOR, 2, 6, 8};
    const auto sets = draw_indices(spec, 4);  // all 6 pairs of 4 rows
    std::set<IndexSet> unique(sets.begin(), sets.end());
    CHECK(unique.size() == 6);
    spec.bags = 7;
    CHECK_THROWS(draw_indices(spec, 4));
  }
  SUBCASE("pair overlap has mean k^2/n") {
    const std::size_t n = 1000, k = 100, draws = 4000;
    for (auto strategy : {Sampling::SubagWR, Sampling::SubagWOR}) {
      double sum = 0, sumsq = 0;
      for (std::size_t t = 0; t < draws; ++t) {
        const auto sets = draw_indices(EnsembleSpec{strategy, k, 2, 100 + t}, n);
        const double o = static_cast<double>(overlap(sets[0], sets[1]));
        sum += o;
        sumsq += o * o;
      }
      const double mean = sum / draws;
      const double se = std::sqrt((sumsq / draws - mean * mean) / draws);
      CHECK(std::abs(mean - 10.0) < 3 * se);
    }
  }
  SUBCASE("overlap proportion approaches k/n") {
    double total = 0;
    for (std::uint64_t t = 0; t < 20; ++t) {
      const auto sets = draw_indices(EnsembleSpec{Sampling::SubagWR, 1000, 2, t}, 10000);
      total += static_cast<double>(overlap(sets[0], sets[1])) / 1000.0;
    }
    CHECK(std::abs(total / 20 - 0.1) < 0.01);
  }
}

TEST_CASE("ensemble averaging") {
  const auto data = gen_ar1(60, 12, 0.25, 1.0, 21);
  EnsembleSpec one{Sampling::SubagWR, 30, 1, 4};
  const auto single = fit_ensemble(data, one, 0.1);
  const Eigen::MatrixXd Xs = data.X(single.index_sets[0], Eigen::placeholders::all);
  const Eigen::VectorXd ys = data.y(single.index_sets[0]);
  CHECK((single.beta_tilde - fit_ridge(Xs, ys, 0.1)).norm() < 1e-12);

  const auto twice = fit_on_indices(data, {single.index_sets[0], single.index_sets[0]}, 0.1);
  CHECK((twice.beta_tilde - single.beta_tilde).norm() < 1e-12);

  EnsembleSpec many{Sampling::SubagWR, 20, 6, 4};
  const auto fit = fit_ensemble(data, many, 0.0);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(12);
  for (const auto& b : fit.per_bag_betas) mean += b;
  mean /= 6.0;
  CHECK((fit.beta_tilde - mean).norm() < 1e-12);
  CHECK((fit.prefix_mean(6) - mean).norm() < 1e-12);
}

TEST_CASE("exact and test-set risk") {
  const auto data = gen_ar1(40, 10, 0.25, 0.7, 31);
  CHECK(exact_conditional_risk(data, data.beta0) == doctest::Approx(0.7));
  const double null_risk = 0.7 + data.beta0.dot(data.covariance->matrix() * data.beta0);
  CHECK(exact_conditional_risk(data, Eigen::VectorXd::Zero(10)) == doctest::Approx(null_risk));

  const Eigen::VectorXd beta = fit_ridgeless(data.X, data.y);
  CHECK(exact_conditional_risk(data, beta) == doctest::Approx(dense_risk(data, beta)));

  const auto test = draw_like(data, 100000, 99);
  const double empirical = testset_risk(beta, test.X, test.y);
  const Eigen::ArrayXd sq = (test.y - test.X * beta).array().square();
  const double se = std::sqrt((sq - sq.mean()).square().sum() / (sq.size() - 1) / sq.size());
  CHECK(std::abs(empirical - exact_conditional_risk(data, beta)) < 4 * se);

  CHECK(testset_risk(Eigen::VectorXd::Zero(10), test.X, test.y) ==
        doctest::Approx(test.y.squaredNorm() / 100000.0));
  const auto clean = gen_iso(30, 5, 1.0, 0.0, 2);
  CHECK(testset_risk(clean.beta0, clean.X, clean.y) < 1e-28);
  CHECK_THROWS(testset_risk(beta, Eigen::MatrixXd(0, 10), Eigen::VectorXd(0)));
}

TEST_CASE("exact risk of an M-bag ensemble decomposes into one- and two-bag risks") {
  const auto data = gen_ar1(80, 12, 0.25, 1.0, 41);
  for (auto strategy : {Sampling::SubagWR, Sampling::SubagWOR, Sampling::SplagWOR}) {
    for (double lambda : {0.0, 0.1}) {
      const auto fit = fit_ensemble(data, EnsembleSpec{strategy, 15, 5, 6}, lambda);
      const auto& b = fit.per_bag_betas;
      const std::size_t M = b.size();
      double r1 = 0, r2 = 0;
      for (std::size_t i = 0; i < M; ++i) {
        r1 += dense_risk(data, b[i]);
        for (std::size_t j = 0; j < M; ++j) {
          if (i != j) r2 += dense_risk(data, 0.5 * (b[i] + b[j]));
        }
      }
      const double m = static_cast<double>(M);
      const double combined = -(1 / m - 2 / (m * m)) * r1 + 2 / (m * m) * r2;
      const double direct = exact_conditional_risk(data, fit.beta_tilde);
      CHECK(std::abs(combined - direct) < 1e-8 * direct);
    }
  }
}

TEST_CASE("bias-variance components") {
  const auto data = gen_ar1(40, 10, 0.25, 1.0, 51);
  const auto full = bias_variance_components(data, EnsembleSpec{Sampling::SubagWR, 40, 1, 0}, 0.0, 60);
  CHECK(full.variance < 1e-20);
  const auto part = bias_variance_components(data, EnsembleSpec{Sampling::SubagWR, 20, 1, 0}, 0.1, 60);
  CHECK(part.bias >= 0);
  CHECK(part.variance >= 0);
  CHECK_THROWS(bias_variance_components(data, EnsembleSpec{Sampling::SubagWR, 20, 1, 0}, 0.1, 10));
}

TEST_CASE("bias-variance components predict the M-bag risk") {
  // R(M) = sigma^2 + B + V/M: mean exact risk over fresh M-bag draws on one
  // dataset should agree within Monte Carlo error.
  const auto data = gen_ar1(100, 20, 0.25, 1.0, 61);
  const std::size_t M = 4;
  const auto comp = bias_variance_components(data, EnsembleSpec{Sampling::SubagWR, 40, M, 1}, 0.0, 2000);
  std::vector<double> risks;
  for (std::uint64_t rep = 0; rep < 400; ++rep) {
    const auto fit = fit_ensemble(data, EnsembleSpec{Sampling::SubagWR, 40, M, 1000 + rep}, 0.0);
    risks.push_back(exact_conditional_risk(data, fit.beta_tilde));
  }
  const double mean = std::accumulate(risks.begin(), risks.end(), 0.0) / risks.size();
  double var = 0;
  for (double r : risks) var += (r - mean) * (r - mean);
  const double se = std::sqrt(var / (risks.size() - 1) / risks.size());
  const double predicted = 1.0 + comp.bias + comp.variance / M;
  // the proxy for the infinite ensemble adds its own error; allow a margin on top of 3 SE
  CHECK(std::abs(mean - predicted) < 3 * se + 0.01 * predicted);
}

TEST_CASE("experiment grid") {
  ExperimentConfig cfg;
  cfg.model.tag = ModelTag::Ar1Linear;
  cfg.n = 80;
  cfg.p = 20;
  cfg.ks = {10, 40};
  cfg.bags = {1, 3};
  cfg.lambdas = {0.0, 0.5};
  cfg.reps = 2;
  cfg.seed = 5;
  cfg.threads = 2;
  const auto a = run_experiment(cfg);
  CHECK(a.size() == 2 * 2 * 2 * 2);
  cfg.threads = 1;
  const auto b = run_experiment(cfg);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].risk_exact == b[i].risk_exact);
    CHECK(a[i].k == b[i].k);
  }

  cfg.strategy = Sampling::SplagWOR;
  cfg.ks = {40};
  cfg.bags = {1, 2, 5};
  const auto s = run_experiment(cfg);
  for (const auto& r : s) CHECK(r.bags <= 2);

  // noiseless overdetermined least squares recovers the truth
  ExperimentConfig exact;
  exact.model.sigma_sq = 0.0;
  exact.n = 40;
  exact.p = 20;
  exact.ks = {40};
  const auto rec = run_experiment(exact);
  CHECK(*rec.front().risk_exact < 1e-20);
}

TEST_CASE("dataset files") {
  const auto path = std::filesystem::temp_directory_path() / "bagrisk_test_data.csv";
  {
    std::ofstream f(path);
    f << "x1,x2,y\n1,2,3\n4,5,6\n7,8.5,-1\n";
  }
  const auto d = load_dataset_csv(path);
  CHECK(d.n() == 3);
  CHECK(d.p() == 2);
  CHECK(d.X(2, 1) == 8.5);
  CHECK(d.y(2) == -1);
  CHECK(d.tag == ModelTag::External);
  std::filesystem::remove(path);
}
