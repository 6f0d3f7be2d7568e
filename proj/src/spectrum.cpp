#include "bagrisk/spectrum.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

namespace bagrisk {

namespace {

constexpr double kWeightTolerance = 1e-6;

bool is_metadata(const std::string& line) {
  return !line.empty() && line.front() == '#';
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

struct AtomFile {
  std::vector<Atom> atoms;
  std::map<std::string, double> metadata;
};

AtomFile read_atom_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open spectrum file " + path.string());
  }
  AtomFile out;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (is_metadata(line)) {
      auto body = trim(line.substr(1));
      auto eq = body.find('=');
      if (eq != std::string::npos) {
        out.metadata[trim(body.substr(0, eq))] = std::stod(trim(body.substr(eq + 1)));
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      if (line != "eigenvalue,weight") {
        throw std::runtime_error(path.string() +
                                 ": expected header 'eigenvalue,weight'");
      }
      continue;
    }
    auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected two columns");
    }
    try {
      out.atoms.push_back({std::stod(line.substr(0, comma)),
                           std::stod(line.substr(comma + 1))});
    } catch (const std::logic_error&) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": malformed number");
    }
  }
  if (out.atoms.empty()) {
    throw std::runtime_error(path.string() + ": no atoms");
  }
  return out;
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.empty()) {
    throw std::invalid_argument("discrete measure needs at least one atom");
  }
  double total = 0.0;
  min_value_ = std::numeric_limits<double>::infinity();
  max_value_ = 0.0;
  for (const auto& a : atoms_) {
    if (!std::isfinite(a.value) || a.value <= 0.0) {
      throw std::invalid_argument("atom location must be positive and finite");
    }
    if (!std::isfinite(a.weight) || a.weight < 0.0) {
      throw std::invalid_argument("atom weight must be nonnegative");
    }
    total += a.weight;
    min_value_ = std::min(min_value_, a.value);
    max_value_ = std::max(max_value_, a.value);
  }
  if (std::abs(total - 1.0) > kWeightTolerance) {
    throw std::invalid_argument("atom weights sum to " + std::to_string(total));
  }
  for (auto& a : atoms_) a.weight /= total;
}

double DiscreteMeasure::integrate(const std::function<double(double)>& f) const {
  double acc = 0.0;
  for (const auto& a : atoms_) {
    const double fx = f(a.value);
    if (!std::isfinite(fx)) {
      throw std::domain_error("integrand not finite at r=" + std::to_string(a.value));
    }
    acc += a.weight * fx;
  }
  return acc;
}

double DiscreteMeasure::mean() const {
  double acc = 0.0;
  for (const auto& a : atoms_) acc += a.weight * a.value;
  return acc;
}

SpectralDistribution::SpectralDistribution(DiscreteMeasure measure, SpectrumKind kind,
                                           double parameter, std::size_t dim)
    : measure_(std::move(measure)), kind_(kind), parameter_(parameter), dim_(dim) {}

SignalDistribution::SignalDistribution(DiscreteMeasure measure, double rho_sq,
                                       double sigma_sq)
    : measure_(std::move(measure)), rho_sq_(rho_sq), sigma_sq_(sigma_sq) {
  if (!(rho_sq >= 0.0) || !std::isfinite(rho_sq)) {
    throw std::invalid_argument("rho_sq must be finite and nonnegative");
  }
  if (!(sigma_sq >= 0.0) || !std::isfinite(sigma_sq)) {
    throw std::invalid_argument("sigma_sq must be finite and nonnegative");
  }
}

double SignalDistribution::snr() const {
  if (rho_sq_ == 0.0 && sigma_sq_ == 0.0) {
    throw std::domain_error("SNR undefined when rho_sq and sigma_sq are both zero");
  }
  if (sigma_sq_ == 0.0) return std::numeric_limits<double>::infinity();
  return rho_sq_ / sigma_sq_;
}

double SignalDistribution::null_excess_snr() const {
  if (rho_sq_ == 0.0 && sigma_sq_ == 0.0) {
    throw std::domain_error("SNR undefined when rho_sq and sigma_sq are both zero");
  }
  if (sigma_sq_ == 0.0) return std::numeric_limits<double>::infinity();
  return rho_sq_ * measure_.mean() / sigma_sq_;
}

double SignalDistribution::null_risk() const {
  return sigma_sq_ + rho_sq_ * measure_.mean();
}

SpectralDistribution make_isotropic(double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw std::invalid_argument("isotropic scale must be positive");
  }
  return {DiscreteMeasure({{scale, 1.0}}), SpectrumKind::Isotropic, scale};
}

SignalDistribution make_isotropic_signal(double scale, double rho_sq, double sigma_sq) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw std::invalid_argument("isotropic scale must be positive");
  }
  return {DiscreteMeasure({{scale, 1.0}}), rho_sq, sigma_sq};
}

namespace {

std::shared_ptr<const Ar1Model> build_ar1(double rho, std::size_t p) {
  auto model = std::make_shared<Ar1Model>();
  model->rho = rho;
  model->p = p;
  const auto n = static_cast<Eigen::Index>(p);
  model->sigma.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      model->sigma(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(model->sigma);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("AR(1) eigendecomposition failed");
  }
  model->eigenvalues = solver.eigenvalues();
  model->eigenvectors = solver.eigenvectors();
  model->sqrt_sigma = model->eigenvectors *
                      model->eigenvalues.cwiseSqrt().asDiagonal() *
                      model->eigenvectors.transpose();
  model->beta0 = model->eigenvectors.rightCols(5).rowwise().sum() / 5.0;
  return model;
}

}  // namespace

std::shared_ptr<const Ar1Model> ar1_model(double rho, std::size_t p) {
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw std::invalid_argument("AR(1) correlation must lie in [0, 1)");
  }
  if (p < 5) {
    throw std::invalid_argument("AR(1) model needs p >= 5");
  }
  static std::mutex mutex;
  static std::map<std::pair<double, std::size_t>, std::shared_ptr<const Ar1Model>> cache;
  std::lock_guard lock(mutex);
  auto key = std::make_pair(rho, p);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  auto model = build_ar1(rho, p);
  cache.emplace(key, model);
  return model;
}

std::pair<SpectralDistribution, SignalDistribution> make_ar1(double rho_ar, std::size_t p,
                                                             double sigma_sq) {
  if (!(rho_ar > 0.0 && rho_ar < 1.0)) {
    throw std::invalid_argument("rho_ar must lie in (0, 1)");
  }
  const auto model = ar1_model(rho_ar, p);
  std::vector<Atom> h;
  h.reserve(p);
  const double w = 1.0 / static_cast<double>(p);
  for (Eigen::Index i = 0; i < model->eigenvalues.size(); ++i) {
    h.push_back({model->eigenvalues(i), w});
  }
  // beta0 has squared projection 1/25 on each of the top five eigenvectors.
  std::vector<Atom> g;
  const auto n = model->eigenvalues.size();
  for (Eigen::Index i = n - 5; i < n; ++i) g.push_back({model->eigenvalues(i), 0.2});
  return {SpectralDistribution(DiscreteMeasure(std::move(h)), SpectrumKind::Ar1, rho_ar, p),
          SignalDistribution(DiscreteMeasure(std::move(g)), 0.2, sigma_sq)};
}

std::pair<SpectralDistribution, SignalDistribution> make_empirical(
    const Eigen::MatrixXd& sigma, const Eigen::VectorXd& beta0, double sigma_sq) {
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0) {
    throw std::invalid_argument("covariance must be a nonempty square matrix");
  }
  if (beta0.size() != sigma.rows()) {
    throw std::invalid_argument("signal dimension does not match covariance");
  }
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sigma);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("eigendecomposition failed");
  }
  const auto& values = solver.eigenvalues();
  if (values.minCoeff() <= 0.0) {
    throw std::invalid_argument("covariance is not positive definite");
  }
  const auto p = values.size();
  const double rho_sq = beta0.squaredNorm();
  std::vector<Atom> h;
  std::vector<Atom> g;
  const Eigen::VectorXd proj = solver.eigenvectors().transpose() * beta0;
  for (Eigen::Index i = 0; i < p; ++i) {
    h.push_back({values(i), 1.0 / static_cast<double>(p)});
    // A zero signal leaves G arbitrary; reuse H so downstream integrals stay defined.
    g.push_back({values(i), rho_sq > 0.0 ? proj(i) * proj(i) / rho_sq
                                         : 1.0 / static_cast<double>(p)});
  }
  return {SpectralDistribution(DiscreteMeasure(std::move(h)), SpectrumKind::Empirical, 0.0,
                               static_cast<std::size_t>(p)),
          SignalDistribution(DiscreteMeasure(std::move(g)), rho_sq, sigma_sq)};
}

SpectralDistribution load_spectrum_csv(const std::filesystem::path& path) {
  auto file = read_atom_csv(path);
  return {DiscreteMeasure(std::move(file.atoms)), SpectrumKind::Empirical};
}

SignalDistribution load_signal_csv(const std::filesystem::path& path) {
  auto file = read_atom_csv(path);
  auto rho = file.metadata.find("rho_sq");
  auto sigma = file.metadata.find("sigma_sq");
  if (rho == file.metadata.end() || sigma == file.metadata.end()) {
    throw std::runtime_error(path.string() + ": missing '# rho_sq=' or '# sigma_sq=' line");
  }
  return {DiscreteMeasure(std::move(file.atoms)), rho->second, sigma->second};
}

}  // namespace bagrisk
