#include "bagrisk/cli.hpp"
#include "bagrisk/parallel.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace bagrisk;

int main(int argc, char** argv) {
  CLI::App app{"Asymptotic and simulated risk of bagged ridge(less) predictors"};
  app.set_config("--config", "", "key=value configuration file; flags take precedence");
  app.set_version_flag("--version", std::string(BAGRISK_VERSION));

  std::string command;
  std::string model = "iso";
  std::string strategy;
  std::vector<std::string> bag_text;
  std::string phi_s_grid;
  std::string k_grid;
  std::string centering = "avg";
  std::string out_path;
  std::string data_path;
  std::size_t n = 0;
  std::size_t p = 0;
  long long n_test = -1;
  RunConfig config;
  config.threads = default_threads();
  config.lambdas.clear();

  app.add_option("command", command, "theory | simulate | cv | optimize")
      ->required()
      ->check(CLI::IsMember({"theory", "simulate", "cv", "optimize"}));
  app.add_option("--model", model, "iso | ar1 | nonlinear | external")
      ->check(CLI::IsMember({"iso", "ar1", "nonlinear", "external"}));
  app.add_option("--rho-ar", config.model.rho_ar, "AR(1) correlation");
  app.add_option("--rho-sq", config.model.rho_sq, "signal energy (isotropic model)");
  app.add_option("--sigma-sq", config.model.sigma_sq, "noise variance");
  app.add_option("--lambda", config.lambdas, "ridge penalty (repeatable)");
  app.add_option("--M", bag_text, "bag count, or inf (repeatable)");
  app.add_option("--phi", config.phis, "p/n (repeatable)");
  app.add_option("--phi-s", config.phi_s_values, "p/k (repeatable)");
  app.add_option("--phi-s-grid", phi_s_grid, "lo:hi:points[:lin|:log]");
  app.add_option("--n", n, "sample size");
  app.add_option("--p", p, "feature dimension");
  app.add_option("--k-grid", k_grid, "subsample sizes: a,b,c or lo:hi:step");
  app.add_option("--strategy", strategy, "subag-wr | subag-wor | splag")
      ->check(CLI::IsMember({"subag-wr", "subag-wor", "splag"}));
  app.add_option("--reps", config.reps, "replications");
  app.add_option("--seed", config.seed, "root seed");
  app.add_option("--n-test", n_test, "held-out rows");
  app.add_option("--nu", config.nu, "grid exponent for cv");
  app.add_option("--centering", centering, "avg | mom")->check(CLI::IsMember({"avg", "mom"}));
  app.add_option("--eta", config.eta, "median-of-means failure probability");
  app.add_option("--m-big", config.m_big, "bags for bias/variance estimates (0 disables)");
  app.add_option("--out", out_path, "output file (default stdout)");
  app.add_option("--threads", config.threads, "worker threads");
  app.add_option("--data", data_path, "CSV with columns x1..xp,y");
  app.add_option("--spectrum", config.spectrum_path, "eigenvalue,weight CSV for H");
  app.add_option("--signal", config.signal_path, "eigenvalue,weight CSV for G");

  CLI11_PARSE(app, argc, argv);

  try {
    config.command = parse_command(command);
    if (model == "iso") config.model.tag = ModelTag::IsoLinear;
    if (model == "ar1") config.model.tag = ModelTag::Ar1Linear;
    if (model == "nonlinear") config.model.tag = ModelTag::Nonlinear;
    if (model == "external") {
      config.model.tag = ModelTag::External;
      config.model.data_path = data_path;
    }
    if (!strategy.empty()) config.strategy = parse_sampling(strategy);
    if (config.lambdas.empty()) config.lambdas.push_back(0.0);
    if (!bag_text.empty()) {
      config.bags.clear();
      for (const auto& b : bag_text) config.bags.push_back(parse_bags(b));
    }
    if (!phi_s_grid.empty()) {
      const auto grid = parse_phi_s_grid(phi_s_grid);
      config.phi_s_values.insert(config.phi_s_values.end(), grid.begin(), grid.end());
    }
    if (!k_grid.empty()) config.ks = parse_k_grid(k_grid);
    if (n > 0) config.n = n;
    if (p > 0) config.p = p;
    if (n_test >= 0) config.n_test = static_cast<std::size_t>(n_test);
    config.centering = parse_centering(centering);
    if (config.threads == 0) config.threads = 1;

    const std::string text = run_command(config);
    if (out_path.empty()) {
      std::cout << text;
    } else {
      std::ofstream file(out_path);
      if (!file) throw std::runtime_error("cannot open " + out_path);
      file << text;
    }
  } catch (const std::exception& e) {
    std::cerr << "bagrisk: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
