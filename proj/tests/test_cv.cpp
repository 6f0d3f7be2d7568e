#include "bagrisk/cv.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace bagrisk;

TEST_CASE("subsample grid") {
  const auto g = build_grid(1000, 0.5);
  CHECK(g.size() == 32);
  CHECK(g.front() == 31);
  CHECK(g.back() == 992);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == 31 * (i + 1));

  const auto h = build_grid(100, 0.5);
  CHECK(h.size() == 10);
  CHECK(h.front() == 10);
  CHECK(h.back() == 100);

  CHECK(build_grid(3, 0.01).front() == 1);
  CHECK_THROWS(build_grid(100, 1.0));
}

TEST_CASE("risk estimates") {
  const Eigen::VectorXd y = Eigen::VectorXd::Ones(3);
  CHECK(estimate_risk(Eigen::VectorXd::Zero(3), y, Centering::Avg, 0.5, 0) == 1.0);

  CHECK(mom_folds(0.5) == 6);
  CHECK(mom_folds(std::exp(-1.0 / 8.0)) == 1);

  Eigen::VectorXd z(12);
  z << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(12);
  const double avg = estimate_risk(zero, z, Centering::Avg, 0.5, 0);
  CHECK(avg == doctest::Approx(z.squaredNorm() / 12));
  // eta close to 1 gives a single fold
  CHECK(estimate_risk(zero, z, Centering::MedianOfMeans, 0.9, 3) == doctest::Approx(avg));

  // six folds of two: the result is a median of fold means, so lies between the extremes
  const double mom = estimate_risk(zero, z, Centering::MedianOfMeans, 0.5, 3);
  CHECK(mom >= 1.0);
  CHECK(mom <= 144.0);
  CHECK(mom == estimate_risk(zero, z, Centering::MedianOfMeans, 0.5, 3));

  CHECK_THROWS(estimate_risk(Eigen::VectorXd::Zero(4), Eigen::VectorXd::Ones(4),
                             Centering::MedianOfMeans, 0.5, 0));
  CHECK_THROWS(estimate_risk(Eigen::VectorXd(0), Eigen::VectorXd(0), Centering::Avg, 0.5, 0));
}

TEST_CASE("cross-validation picks the grid minimum") {
  const auto data = gen_ar1(300, 60, 0.25, 1.0, 8);
  CvConfig cfg;
  cfg.n_test = CvConfig::default_n_test(300);
  cfg.bags = 5;
  cfg.seed = 12;
  const auto r = run_cv(data, cfg);
  CHECK(cfg.n_test == 19);
  CHECK(r.test_rows.size() == 19);
  CHECK(r.train_rows.size() == 281);
  REQUIRE(r.grid.front().is_null());
  CHECK(r.grid.size() == build_grid(281, 0.5).size() + 1);

  const auto best = std::min_element(r.grid.begin(), r.grid.end(), [](auto& a, auto& b) {
    return a.risk_est < b.risk_est;
  });
  CHECK(r.k_hat == best->k);
  CHECK(r.risk_hat == best->risk_est);
  CHECK(r.final_test_risk == doctest::Approx(r.risk_hat));
  CHECK((r.final_beta - best->beta).norm() == 0.0);

  const auto again = run_cv(data, cfg);
  CHECK(again.k_hat == r.k_hat);
  CHECK(again.risk_hat == r.risk_hat);

  cfg.threads = 3;
  const auto threaded = run_cv(data, cfg);
  CHECK(threaded.risk_hat == r.risk_hat);
}

TEST_CASE("cross-validation with splitting clamps the bag count") {
  const auto data = gen_ar1(200, 30, 0.25, 1.0, 9);
  CvConfig cfg;
  cfg.n_test = 20;
  cfg.bags = 50;
  cfg.strategy = Sampling::SplagWOR;
  cfg.centering = Centering::MedianOfMeans;
  const auto r = run_cv(data, cfg);
  for (const auto& e : r.grid) {
    if (!e.is_null()) CHECK(e.effective_bags == std::min<std::size_t>(50, 180 / e.k));
  }
}

TEST_CASE("noise-only data stays near the best grid point") {
  // With no signal every predictor has risk at least sigma^2; the CV choice
  // should be within estimation noise of the grid oracle.
  ModelConfig model;
  model.tag = ModelTag::IsoLinear;
  model.rho_sq = 0.0;
  const auto data = generate(model, 400, 40, 3);
  CvConfig cfg;
  cfg.n_test = 100;
  cfg.bags = 5;
  const auto r = run_cv(data, cfg);
  double oracle = kInf;
  for (const auto& e : r.grid) oracle = std::min(oracle, exact_conditional_risk(data, e.beta));
  const double chosen = exact_conditional_risk(data, r.final_beta);
  // 3 SE of a 100-row mean of sigma^2 chi^2_1 errors
  CHECK(chosen <= oracle + 3 * std::sqrt(2.0 / 100.0));
}

TEST_CASE("cross-validation input checks") {
  const auto data = gen_iso(50, 10, 1.0, 1.0, 1);
  CvConfig cfg;
  cfg.n_test = 50;
  CHECK_THROWS(run_cv(data, cfg));
  cfg.n_test = 4;
  cfg.centering = Centering::MedianOfMeans;
  CHECK_THROWS(run_cv(data, cfg));
  CHECK(parse_centering("mom") == Centering::MedianOfMeans);
  CHECK_THROWS(parse_centering("median"));
}
