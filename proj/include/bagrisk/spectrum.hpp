#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace bagrisk {

/// One point mass of a discrete distribution over eigenvalues.
struct Atom {
  double value;
  double weight;
};

/// Finite probability measure on (0, inf) stored as a list of atoms.
///
/// Weights are renormalized on construction. A weight sum further than 1e-6
/// from one, a negative weight, or a non-positive / non-finite eigenvalue is
/// rejected with std::invalid_argument.
class DiscreteMeasure {
 public:
  DiscreteMeasure() = default;
  explicit DiscreteMeasure(std::vector<Atom> atoms);

  const std::vector<Atom>& atoms() const { return atoms_; }
  std::size_t size() const { return atoms_.size(); }
  double min_value() const { return min_value_; }
  double max_value() const { return max_value_; }

  /// Weighted sum of f over the atoms. Throws std::domain_error if f is not
  /// finite on some atom.
  double integrate(const std::function<double(double)>& f) const;

  /// Mean of the eigenvalue, i.e. integrate(r -> r).
  double mean() const;

 private:
  std::vector<Atom> atoms_;
  double min_value_ = 0.0;
  double max_value_ = 0.0;
};

enum class SpectrumKind { Isotropic, Ar1, Empirical };

/// Limiting spectral distribution H of the feature covariance.
class SpectralDistribution {
 public:
  SpectralDistribution(DiscreteMeasure measure, SpectrumKind kind,
                       double parameter = 0.0, std::size_t dim = 0);

  const DiscreteMeasure& measure() const { return measure_; }
  const std::vector<Atom>& atoms() const { return measure_.atoms(); }
  double integrate(const std::function<double(double)>& f) const {
    return measure_.integrate(f);
  }
  double min_value() const { return measure_.min_value(); }
  double max_value() const { return measure_.max_value(); }

  SpectrumKind kind() const { return kind_; }
  /// Isotropic scale a, or the AR(1) correlation; 0 for empirical spectra.
  double parameter() const { return parameter_; }
  /// Matrix dimension the spectrum was computed from (0 when not applicable).
  std::size_t dim() const { return dim_; }

 private:
  DiscreteMeasure measure_;
  SpectrumKind kind_;
  double parameter_;
  std::size_t dim_;
};

/// Distribution G of the squared signal projections onto the eigenvectors
/// of the covariance, together with the signal energy and noise level.
class SignalDistribution {
 public:
  SignalDistribution(DiscreteMeasure measure, double rho_sq, double sigma_sq);

  const DiscreteMeasure& measure() const { return measure_; }
  const std::vector<Atom>& atoms() const { return measure_.atoms(); }
  double integrate(const std::function<double(double)>& f) const {
    return measure_.integrate(f);
  }

  /// Limiting squared norm of the signal.
  double rho_sq() const { return rho_sq_; }
  double sigma_sq() const { return sigma_sq_; }

  /// rho^2 / sigma^2. Throws if both are zero; +inf when only sigma^2 is 0.
  double snr() const;
  /// Excess null risk over the noise level: rho^2 * int r dG / sigma^2.
  /// This is the quantity figure captions for correlated designs call SNR.
  double null_excess_snr() const;
  /// sigma^2 + rho^2 * int r dG, the risk of the zero predictor.
  double null_risk() const;

  SignalDistribution with_noise(double sigma_sq) const {
    return {measure_, rho_sq_, sigma_sq};
  }
  SignalDistribution with_energy(double rho_sq) const {
    return {measure_, rho_sq, sigma_sq_};
  }

 private:
  DiscreteMeasure measure_;
  double rho_sq_;
  double sigma_sq_;
};

SpectralDistribution make_isotropic(double scale);

/// Isotropic signal distribution G = delta_a.
SignalDistribution make_isotropic_signal(double scale, double rho_sq,
                                         double sigma_sq);

/// Eigensystem of the p x p AR(1) covariance (Sigma)_ij = rho^|i-j|.
///
/// beta0 is the average of the eigenvectors of the five largest eigenvalues.
/// Computed once per (rho, p) and cached for the lifetime of the process.
struct Ar1Model {
  double rho = 0.0;
  std::size_t p = 0;
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd sqrt_sigma;
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // columns match eigenvalues
  Eigen::VectorXd beta0;
};

/// Accepts rho in [0, 1) so the nonlinear model can use rho = 0.
std::shared_ptr<const Ar1Model> ar1_model(double rho, std::size_t p);

/// Spectral and signal distributions of the M-AR1-LI model.
std::pair<SpectralDistribution, SignalDistribution> make_ar1(double rho_ar,
                                                             std::size_t p,
                                                             double sigma_sq = 1.0);

/// H_p and G_p for an explicit covariance and signal.
std::pair<SpectralDistribution, SignalDistribution> make_empirical(
    const Eigen::MatrixXd& sigma, const Eigen::VectorXd& beta0,
    double sigma_sq = 1.0);

/// Reads `eigenvalue,weight` rows. Lines starting with '#' are metadata.
SpectralDistribution load_spectrum_csv(const std::filesystem::path& path);

/// Reads `eigenvalue,weight` rows plus `# rho_sq=...` and `# sigma_sq=...`.
SignalDistribution load_signal_csv(const std::filesystem::path& path);

}  // namespace bagrisk
