#include "bagrisk/cli.hpp"

#include "bagrisk/parallel.hpp"
#include "bagrisk/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace bagrisk {

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, sep)) out.push_back(part);
  return out;
}

double parse_real(const std::string& text) {
  if (text == "inf" || text == "Inf") return kInf;
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::logic_error&) {
    throw std::invalid_argument("invalid number '" + text + "'");
  }
  if (used != text.size()) throw std::invalid_argument("invalid number '" + text + "'");
  return value;
}

std::size_t parse_count(const std::string& text) {
  std::size_t used = 0;
  long long value = 0;
  try {
    value = std::stoll(text, &used);
  } catch (const std::logic_error&) {
    throw std::invalid_argument("invalid integer '" + text + "'");
  }
  if (used != text.size() || value < 0) {
    throw std::invalid_argument("invalid integer '" + text + "'");
  }
  return static_cast<std::size_t>(value);
}

std::string optional_real(const std::optional<double>& x) {
  return x ? format_real(*x) : std::string();
}

void write_header(std::ostringstream& out, const RunConfig& c) {
  out << "# command=" << to_string(c.command) << ", seed=" << c.seed
      << ", version=" << BAGRISK_VERSION << "\n";
  out << "# model=" << to_string(c.model.tag);
  switch (c.model.tag) {
    case ModelTag::IsoLinear:
      out << ", rho_sq=" << format_real(c.model.rho_sq)
          << ", sigma_sq=" << format_real(c.model.sigma_sq);
      break;
    case ModelTag::Ar1Linear:
    case ModelTag::Nonlinear:
      out << ", rho_ar=" << format_real(c.model.rho_ar)
          << ", sigma_sq=" << format_real(c.model.sigma_sq);
      break;
    case ModelTag::External:
      break;
  }
  out << "\n";
}

struct TheoryModel {
  SpectralDistribution H;
  SignalDistribution G;
};

TheoryModel theory_model(const RunConfig& c) {
  switch (c.model.tag) {
    case ModelTag::IsoLinear:
      return {make_isotropic(1.0), make_isotropic_signal(1.0, c.model.rho_sq, c.model.sigma_sq)};
    case ModelTag::Ar1Linear: {
      auto [H, G] = make_ar1(c.model.rho_ar, c.p.value_or(500), c.model.sigma_sq);
      return {std::move(H), std::move(G)};
    }
    case ModelTag::Nonlinear:
      throw std::invalid_argument("no asymptotic theory for the nonlinear model");
    case ModelTag::External:
      if (c.spectrum_path.empty() || c.signal_path.empty()) {
        throw std::invalid_argument("theory on external data needs --spectrum and --signal");
      }
      return {load_spectrum_csv(c.spectrum_path), load_signal_csv(c.signal_path)};
  }
  throw std::logic_error("unknown model");
}

std::vector<Strategy> theory_strategies(const RunConfig& c) {
  if (c.strategy) return {theory_strategy(*c.strategy)};
  return {Strategy::Subag, Strategy::Splag};
}

void reject_infinite_bags(const RunConfig& c) {
  for (const auto& b : c.bags) {
    if (b.is_infinite()) {
      throw std::invalid_argument("M=inf is only valid for theory and optimize");
    }
  }
}

std::pair<std::size_t, std::size_t> sample_shape(const RunConfig& c) {
  if (c.model.tag == ModelTag::External) {
    const auto d = load_dataset_csv(c.model.data_path);
    return {static_cast<std::size_t>(d.n()), static_cast<std::size_t>(d.p())};
  }
  if (!c.p) throw std::invalid_argument("--p is required");
  if (c.n) return {*c.n, *c.p};
  if (c.phis.size() == 1) {
    return {static_cast<std::size_t>(std::floor(static_cast<double>(*c.p) / c.phis.front())),
            *c.p};
  }
  throw std::invalid_argument("--n (or a single --phi) is required");
}

}  // namespace

Command parse_command(const std::string& text) {
  if (text == "theory") return Command::Theory;
  if (text == "simulate") return Command::Simulate;
  if (text == "cv") return Command::Cv;
  if (text == "optimize") return Command::Optimize;
  throw std::invalid_argument("unknown command '" + text + "'");
}

std::string to_string(Command c) {
  switch (c) {
    case Command::Theory: return "theory";
    case Command::Simulate: return "simulate";
    case Command::Cv: return "cv";
    case Command::Optimize: return "optimize";
  }
  return "unknown";
}

std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::vector<double> parse_phi_s_grid(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() != 3 && parts.size() != 4) {
    throw std::invalid_argument("phi_s grid must be lo:hi:points[:lin|:log]");
  }
  const double lo = parse_real(parts[0]);
  const double hi = parse_real(parts[1]);
  const std::size_t points = parse_count(parts[2]);
  const bool linear = parts.size() == 4 && parts[3] == "lin";
  if (parts.size() == 4 && parts[3] != "lin" && parts[3] != "log") {
    throw std::invalid_argument("phi_s grid spacing must be lin or log");
  }
  if (!(lo > 0.0) || !(hi >= lo) || !std::isfinite(hi) || points == 0) {
    throw std::invalid_argument("invalid phi_s grid '" + text + "'");
  }
  std::vector<double> out(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double t = points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(points - 1);
    out[i] = linear ? lo + t * (hi - lo) : lo * std::pow(hi / lo, t);
  }
  out.back() = hi;
  return out;
}

std::vector<std::size_t> parse_k_grid(const std::string& text) {
  std::vector<std::size_t> out;
  if (text.find(':') != std::string::npos) {
    const auto parts = split(text, ':');
    if (parts.size() != 3) throw std::invalid_argument("k grid must be lo:hi:step");
    const auto lo = parse_count(parts[0]);
    const auto hi = parse_count(parts[1]);
    const auto step = parse_count(parts[2]);
    if (lo == 0 || step == 0 || hi < lo) throw std::invalid_argument("invalid k grid");
    for (auto k = lo; k <= hi; k += step) out.push_back(k);
  } else {
    for (const auto& part : split(text, ',')) {
      const auto k = parse_count(part);
      if (k == 0) throw std::invalid_argument("subsample sizes must be positive");
      out.push_back(k);
    }
  }
  if (out.empty()) throw std::invalid_argument("empty k grid");
  return out;
}

std::string cmd_theory(const RunConfig& c) {
  if (c.phis.empty()) throw std::invalid_argument("theory needs --phi");
  if (c.phi_s_values.empty()) throw std::invalid_argument("theory needs --phi-s or --phi-s-grid");
  const auto model = theory_model(c);

  struct Row {
    Strategy strategy;
    double lambda;
    Bags bags;
    double phi;
    double phi_s;
  };
  std::vector<Row> rows;
  for (auto strategy : theory_strategies(c)) {
    for (double lambda : c.lambdas) {
      for (const auto& bags : c.bags) {
        for (double phi : c.phis) {
          for (double phi_s : c.phi_s_values) {
            if (phi_s >= phi) rows.push_back({strategy, lambda, bags, phi, phi_s});
          }
        }
      }
    }
  }
  if (rows.empty()) throw std::invalid_argument("no grid point satisfies phi_s >= phi");

  std::vector<RiskPoint> points(rows.size());
  parallel_for(rows.size(), c.threads, [&](std::size_t i) {
    const auto& r = rows[i];
    points[i] = evaluate_risk(r.strategy, r.lambda, r.bags, r.phi, r.phi_s, model.H, model.G);
  });

  std::ostringstream out;
  write_header(out, c);
  out << "strategy,lambda,M,phi,phi_s,bias,variance,risk\n";
  for (const auto& pt : points) {
    out << to_string(pt.strategy) << ',' << format_real(pt.lambda) << ','
        << pt.bags.to_string() << ',' << format_real(pt.phi) << ',' << format_real(pt.phi_s)
        << ',' << format_real(pt.components.bias) << ','
        << format_real(pt.components.variance) << ',' << format_real(pt.components.total)
        << '\n';
  }
  return out.str();
}

std::string cmd_simulate(const RunConfig& c) {
  reject_infinite_bags(c);
  const auto [n, p] = sample_shape(c);
  ExperimentConfig e;
  e.model = c.model;
  e.n = n;
  e.p = p;
  e.strategy = c.strategy.value_or(Sampling::SubagWR);
  e.lambdas = c.lambdas;
  e.reps = c.reps;
  e.seed = c.seed;
  e.n_test = c.n_test.value_or(0);
  e.m_big = c.m_big;
  e.threads = c.threads;
  e.bags.clear();
  for (const auto& b : c.bags) e.bags.push_back(b.count());
  e.ks = c.ks;
  for (double phi_s : c.phi_s_values) {
    if (!std::isfinite(phi_s)) continue;
    e.ks.push_back(static_cast<std::size_t>(std::floor(static_cast<double>(p) / phi_s)));
  }
  if (e.ks.empty()) throw std::invalid_argument("simulate needs --k-grid or --phi-s values");
  const std::size_t n_train = c.model.tag == ModelTag::External ? n - e.n_test : n;
  for (auto k : e.ks) {
    if (k == 0 || k > n_train) {
      throw std::invalid_argument("subsample size " + std::to_string(k) + " outside [1, n]");
    }
  }

  const auto records = run_experiment(e);

  std::ostringstream out;
  write_header(out, c);
  out << "# n=" << n << ", p=" << p << ", reps=" << c.reps << "\n";
  out << "strategy,lambda,k,phi_s,M,rep,risk_exact,risk_test,bias_est,var_est\n";
  auto row_prefix = [&](const SimRecord& r) {
    out << to_string(r.strategy) << ',' << format_real(r.lambda) << ',' << r.k << ','
        << format_real(r.phi_s) << ',' << r.bags << ',';
  };
  for (const auto& r : records) {
    row_prefix(r);
    out << r.rep << ',' << optional_real(r.risk_exact) << ',' << optional_real(r.risk_test)
        << ',' << optional_real(r.bias_est) << ',' << optional_real(r.var_est) << '\n';
  }

  // Mean over replications, keyed in first-seen order.
  using Key = std::tuple<double, std::size_t, std::size_t>;
  struct Acc {
    const SimRecord* first = nullptr;
    std::size_t count = 0;
    double exact = 0, test = 0, bias = 0, var = 0;
  };
  std::vector<Key> order;
  std::map<Key, Acc> acc;
  for (const auto& r : records) {
    Key key{r.lambda, r.k, r.bags};
    auto [it, inserted] = acc.try_emplace(key);
    if (inserted) {
      order.push_back(key);
      it->second.first = &r;
    }
    auto& a = it->second;
    ++a.count;
    a.exact += r.risk_exact.value_or(0.0);
    a.test += r.risk_test.value_or(0.0);
    a.bias += r.bias_est.value_or(0.0);
    a.var += r.var_est.value_or(0.0);
  }
  for (const auto& key : order) {
    const auto& a = acc.at(key);
    const auto& r = *a.first;
    const double m = static_cast<double>(a.count);
    auto mean_of = [&](const std::optional<double>& present, double sum) {
      return present ? format_real(sum / m) : std::string();
    };
    row_prefix(r);
    out << "mean," << mean_of(r.risk_exact, a.exact) << ',' << mean_of(r.risk_test, a.test)
        << ',' << mean_of(r.bias_est, a.bias) << ',' << mean_of(r.var_est, a.var) << '\n';
  }
  return out.str();
}

std::string cmd_cv(const RunConfig& c) {
  reject_infinite_bags(c);
  if (c.bags.size() != 1) throw std::invalid_argument("cv takes exactly one --M");
  if (c.lambdas.size() != 1) throw std::invalid_argument("cv takes exactly one --lambda");
  const auto [n, p] = sample_shape(c);

  CvConfig cv;
  cv.n_test = c.n_test.value_or(CvConfig::default_n_test(n));
  cv.nu = c.nu;
  cv.bags = c.bags.front().count();
  cv.strategy = c.strategy.value_or(Sampling::SubagWR);
  cv.centering = c.centering;
  cv.eta = c.eta;
  cv.lambda = c.lambdas.front();
  cv.threads = 1;

  std::optional<Dataset> external;
  if (c.model.tag == ModelTag::External) external = load_dataset_csv(c.model.data_path);

  std::vector<CvResult> results(c.reps);
  std::vector<std::optional<double>> exact(c.reps);
  parallel_for(c.reps, c.threads, [&](std::size_t rep) {
    CvConfig local = cv;
    local.seed = derive_seed(c.seed, {rep, 1});
    const Dataset data =
        external ? *external : generate(c.model, n, p, derive_seed(c.seed, {rep, 0}));
    results[rep] = run_cv(data, local);
    if (data.has_linear_truth()) exact[rep] = exact_conditional_risk(data, results[rep].final_beta);
  });

  std::ostringstream out;
  write_header(out, c);
  out << "# n=" << n << ", p=" << p << ", n_test=" << cv.n_test << ", nu=" << format_real(cv.nu)
      << ", M=" << cv.bags << ", strategy=" << to_string(cv.strategy) << "\n";
  for (std::size_t rep = 0; rep < c.reps; ++rep) {
    const auto& r = results[rep];
    out << "# rep=" << rep << "\n";
    out << "k,phi_s,M_eff,risk_est\n";
    for (const auto& e : r.grid) {
      out << e.k << ',' << format_real(e.phi_s) << ',' << e.effective_bags << ','
          << format_real(e.risk_est) << '\n';
    }
    out << "k_hat,risk_hat,final_test_risk\n";
    out << r.k_hat << ',' << format_real(r.risk_hat) << ',' << format_real(r.final_test_risk)
        << '\n';
    if (exact[rep]) out << "# final_exact_risk=" << format_real(*exact[rep]) << "\n";
  }
  return out.str();
}

std::string cmd_optimize(const RunConfig& c) {
  if (c.phis.empty()) throw std::invalid_argument("optimize needs --phi");
  if (c.lambdas.size() != 1) throw std::invalid_argument("optimize takes exactly one --lambda");
  const auto model = theory_model(c);
  const double lambda = c.lambdas.front();
  const bool isotropic = c.model.tag == ModelTag::IsoLinear;
  const auto strategies = theory_strategies(c);

  struct Row {
    double phi;
    Strategy strategy;
  };
  std::vector<Row> rows;
  for (double phi : c.phis) {
    for (auto s : strategies) rows.push_back({phi, s});
  }
  std::vector<OptimalRatio> best(rows.size());
  std::vector<std::optional<double>> ridge(rows.size());
  parallel_for(rows.size(), c.threads, [&](std::size_t i) {
    best[i] = optimize_phis(lambda, rows[i].strategy, rows[i].phi, model.H, model.G);
    if (isotropic && model.G.rho_sq() > 0.0) {
      ridge[i] = optimal_ridge_risk_isotropic(rows[i].phi, model.G.rho_sq(), model.G.sigma_sq());
    }
  });

  std::ostringstream out;
  write_header(out, c);
  out << "# lambda=" << format_real(lambda) << "\n";
  out << "phi,strategy,phi_s_star,risk_star" << (isotropic ? ",ridge_risk_star" : "") << "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << format_real(rows[i].phi) << ',' << to_string(rows[i].strategy) << ','
        << format_real(best[i].phi_s) << ',' << format_real(best[i].risk.total);
    if (isotropic) out << ',' << optional_real(ridge[i]);
    out << '\n';
  }
  return out.str();
}

std::string run_command(const RunConfig& config) {
  switch (config.command) {
    case Command::Theory: return cmd_theory(config);
    case Command::Simulate: return cmd_simulate(config);
    case Command::Cv: return cmd_cv(config);
    case Command::Optimize: return cmd_optimize(config);
  }
  throw std::logic_error("unknown command");
}

}  // namespace bagrisk
