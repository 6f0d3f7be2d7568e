#pragma once

#include "bagrisk/cv.hpp"
#include "bagrisk/risk_theory.hpp"
#include "bagrisk/simulate.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace bagrisk {

enum class Command { Theory, Simulate, Cv, Optimize };

Command parse_command(const std::string& text);
std::string to_string(Command c);

struct RunConfig {
  Command command = Command::Theory;
  ModelConfig model;
  /// H and G files for theory on external data.
  std::filesystem::path spectrum_path;
  std::filesystem::path signal_path;
  /// Unset means "both subagging and splagging" for theory/optimize and
  /// subag-wr for simulate/cv.
  std::optional<Sampling> strategy;
  std::vector<double> lambdas{0.0};
  std::vector<Bags> bags{Bags::finite(1)};
  std::vector<double> phis;
  std::optional<std::size_t> n;
  std::optional<std::size_t> p;
  std::vector<double> phi_s_values;
  std::vector<std::size_t> ks;
  std::size_t reps = 1;
  std::uint64_t seed = 0;
  std::optional<std::size_t> n_test;
  double nu = 0.5;
  Centering centering = Centering::Avg;
  double eta = 0.5;
  std::size_t m_big = 0;
  std::size_t threads = 1;
};

/// Doubles are written with 10 significant digits; infinities as "inf".
std::string format_real(double x);

/// "lo:hi:points" (log spacing) or "lo:hi:points:lin".
std::vector<double> parse_phi_s_grid(const std::string& text);

/// Comma-separated list, or "lo:hi:step".
std::vector<std::size_t> parse_k_grid(const std::string& text);

std::string cmd_theory(const RunConfig& config);
std::string cmd_simulate(const RunConfig& config);
std::string cmd_cv(const RunConfig& config);
std::string cmd_optimize(const RunConfig& config);

std::string run_command(const RunConfig& config);

}  // namespace bagrisk
