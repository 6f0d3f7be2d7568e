#include "bagrisk/cli.hpp"

#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <memory>
#include <sstream>

using namespace bagrisk;

namespace {

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

RunConfig iso_theory() {
  RunConfig c;
  c.command = Command::Theory;
  c.strategy = Sampling::SubagWR;
  c.phis = {1.1};
  c.phi_s_values = {2.0};
  return c;
}

std::string run_binary(const std::string& args) {
  const char* bin = std::getenv("BAGRISK_CLI");
  if (bin == nullptr) return {};
  const std::string cmd = std::string(bin) + " " + args + " 2>&1";
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
  std::string out;
  char buf[4096];
  while (std::size_t got = std::fread(buf, 1, sizeof buf, pipe.get())) out.append(buf, got);
  return out;
}

}  // namespace

TEST_CASE("number formatting") {
  CHECK(format_real(2.5) == "2.5");
  CHECK(format_real(1.0 / 3.0) == "0.3333333333");
  CHECK(format_real(kInf) == "inf");
}

TEST_CASE("grid parsing") {
  const auto g = parse_phi_s_grid("1:100:3");
  REQUIRE(g.size() == 3);
  CHECK(g[0] == 1.0);
  CHECK(g[1] == doctest::Approx(10.0));
  CHECK(g[2] == 100.0);
  const auto lin = parse_phi_s_grid("1:3:3:lin");
  CHECK(lin[1] == doctest::Approx(2.0));
  CHECK_THROWS(parse_phi_s_grid("0:1:3"));
  CHECK_THROWS(parse_phi_s_grid("1:2"));

  CHECK(parse_k_grid("5,10,20") == std::vector<std::size_t>{5, 10, 20});
  CHECK(parse_k_grid("10:40:10") == std::vector<std::size_t>{10, 20, 30, 40});
  CHECK_THROWS(parse_k_grid("0,3"));
}

TEST_CASE("theory table") {
  auto c = iso_theory();
  c.bags = {Bags::finite(1), Bags::finite(2)};
  c.phi_s_values = {2.0, kInf};
  const auto out = lines(cmd_theory(c));
  CHECK(out[0].rfind("# command=theory, seed=0, version=", 0) == 0);
  CHECK(out[2] == "strategy,lambda,M,phi,phi_s,bias,variance,risk");
  REQUIRE(out.size() == 7);
  CHECK(fields(out[3])[7] == "2.5");
  CHECK(std::stod(fields(out[5])[7]) == doctest::Approx(2.1120690).epsilon(1e-7));
  CHECK(fields(out[4])[7] == "2");
  CHECK(fields(out[6])[4] == "inf");

  c.model.tag = ModelTag::Nonlinear;
  CHECK_THROWS(cmd_theory(c));
  c.model.tag = ModelTag::External;
  CHECK_THROWS(cmd_theory(c));
}

TEST_CASE("optimize table") {
  RunConfig c;
  c.command = Command::Optimize;
  c.phis = {0.5, 1.0, 3.0};
  const auto out = lines(cmd_optimize(c));
  CHECK(out[3] == "phi,strategy,phi_s_star,risk_star,ridge_risk_star");
  REQUIRE(out.size() == 10);
  for (std::size_t row = 4; row < out.size(); row += 2) {
    const auto sub = fields(out[row]);
    const auto spl = fields(out[row + 1]);
    CHECK(sub[1] == "subag");
    CHECK(spl[1] == "splag");
    CHECK(std::stod(sub[2]) > 1.0);
    CHECK(std::stod(sub[3]) <= std::stod(spl[3]));
    CHECK(std::stod(sub[3]) == doctest::Approx(std::stod(sub[4])).epsilon(1e-8));
  }
  const auto phi1 = fields(out[6]);
  CHECK(std::stod(phi1[2]) == doctest::Approx(2.618034).epsilon(1e-6));
  CHECK(std::stod(phi1[3]) == doctest::Approx(1.618034).epsilon(1e-6));
}

TEST_CASE("simulate table") {
  RunConfig c;
  c.command = Command::Simulate;
  c.model.tag = ModelTag::IsoLinear;
  c.model.sigma_sq = 0.0;
  c.p = 20;
  c.phis = {0.5};
  c.phi_s_values = {0.5};
  c.seed = 3;
  const std::string text = cmd_simulate(c);
  const auto out = lines(text);
  CHECK(out[3] == "strategy,lambda,k,phi_s,M,rep,risk_exact,risk_test,bias_est,var_est");
  const auto row = fields(out[4]);
  CHECK(row[2] == "40");
  CHECK(std::stod(row[6]) < 1e-20);
  CHECK(row[7].empty());
  CHECK(fields(out.back())[5] == "mean");
  CHECK(cmd_simulate(c) == text);

  c.bags = {Bags::infinite()};
  CHECK_THROWS(cmd_simulate(c));
}

TEST_CASE("cv table") {
  RunConfig c;
  c.command = Command::Cv;
  c.model.tag = ModelTag::Ar1Linear;
  c.n = 200;
  c.p = 40;
  c.bags = {Bags::finite(3)};
  c.reps = 2;
  const std::string text = cmd_cv(c);
  const auto out = lines(text);
  CHECK(out[3] == "# rep=0");
  CHECK(out[4] == "k,phi_s,M_eff,risk_est");
  CHECK(out[5].rfind("0,inf,0,", 0) == 0);
  CHECK(text.find("k_hat,risk_hat,final_test_risk") != std::string::npos);
  CHECK(text.find("# rep=1") != std::string::npos);
  c.threads = 2;
  CHECK(cmd_cv(c) == text);

  c.bags = {Bags::finite(3), Bags::finite(4)};
  CHECK_THROWS(cmd_cv(c));
}

TEST_CASE("command-line front end") {
  if (std::getenv("BAGRISK_CLI") == nullptr) return;
  const auto out = run_binary("theory --phi 1.1 --phi-s 2 --M 1 --M 2 --strategy subag-wr");
  const auto rows = lines(out);
  REQUIRE(rows.size() == 5);
  CHECK(fields(rows[3])[7] == "2.5");
  CHECK(run_binary("theory --phi 1.1 --phi-s 2 --M 1 --strategy subag-wr --threads 1") ==
        run_binary("theory --phi 1.1 --phi-s 2 --M 1 --strategy subag-wr --threads 3"));
  CHECK(run_binary("simulate --p 10 --n 20 --phi-s 1 --M inf").find("M=inf") !=
        std::string::npos);
}
