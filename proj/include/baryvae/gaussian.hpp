#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "baryvae/linalg.hpp"

namespace baryvae {

inline constexpr double kSigmaFloor = 1e-6;
inline constexpr double kMinCovEigenvalue = 1e-12;

// Gaussian with diagonal covariance, parameterized by standard deviations.
// Sigmas below kSigmaFloor are raised to it; negative or non-finite sigmas
// are rejected.
class DiagGaussian {
 public:
  DiagGaussian(std::vector<double> mean, std::vector<double> sigma);

  static DiagGaussian standard(std::size_t dim);

  std::size_t dim() const { return mean_.size(); }
  std::span<const double> mean() const { return mean_; }
  std::span<const double> sigma() const { return sigma_; }

  friend bool operator==(const DiagGaussian&, const DiagGaussian&) = default;

 private:
  std::vector<double> mean_;
  std::vector<double> sigma_;
};

class FullGaussian {
 public:
  FullGaussian(std::vector<double> mean, SymMatrix cov);

  static FullGaussian from_diag(const DiagGaussian& g);

  std::size_t dim() const { return mean_.size(); }
  std::span<const double> mean() const { return mean_; }
  const SymMatrix& cov() const { return cov_; }

 private:
  std::vector<double> mean_;
  SymMatrix cov_;
};

inline constexpr double kWeightSumTolerance = 1e-12;

// Finite mixture of diagonal Gaussians; weights must sum to one within 1e-12.
class GaussianMixture {
 public:
  GaussianMixture(std::vector<DiagGaussian> components,
                  std::vector<double> weights);

  std::size_t dim() const { return components_.front().dim(); }
  std::size_t size() const { return components_.size(); }
  const std::vector<DiagGaussian>& components() const { return components_; }
  std::span<const double> weights() const { return weights_; }

  // Weighted average of component means.
  std::vector<double> mean() const;

 private:
  std::vector<DiagGaussian> components_;
  std::vector<double> weights_;
};

// Closed-form D(p || q). Reverse KL is kl_diag(q, p).
double kl_diag(const DiagGaussian& p, const DiagGaussian& q);

// Squared 2-Wasserstein distance for diagonal covariances:
// |mu_p - mu_q|^2 + |sigma_p - sigma_q|^2.
double w2sq_diag(const DiagGaussian& p, const DiagGaussian& q);

// Squared 2-Wasserstein distance between full-covariance Gaussians,
// |mu1 - mu2|^2 + Tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2).
double w2sq_full(const FullGaussian& p, const FullGaussian& q);

double log_density(const DiagGaussian& g, std::span<const double> x);
// Log-sum-exp over components; never returns NaN for finite input.
double log_density(const GaussianMixture& g, std::span<const double> x);

// Reparameterized draw mu + sigma * noise.
std::vector<double> sample(const DiagGaussian& g, std::span<const double> noise);

double entropy_diag(const DiagGaussian& g);

// A one-dimensional law described by its CDF, survival function and density,
// plus a window [lo, hi] that brackets essentially all of its mass.
struct Distribution1D {
  std::function<double(double)> cdf;
  std::function<double(double)> sf;
  std::function<double(double)> pdf;
  double lo = 0.0;
  double hi = 0.0;
};

Distribution1D as_distribution(const DiagGaussian& g);
Distribution1D as_distribution(const GaussianMixture& g);

inline constexpr std::size_t kQuantileGridSize = 20001;

// Brute-force W2^2 = int_0^1 (F_p^-1(u) - F_q^-1(u))^2 du by inverting both
// CDFs numerically. The quantile levels are u = Phi(t) on a uniform t-grid
// over [-8.5, 8.5] and the integral is taken with Simpson's rule in t, which
// keeps the tails in the quadrature. Throws NumericError when a CDF is not
// monotone.
double w2sq_1d_quantile(const Distribution1D& p, const Distribution1D& q);

// Quantile of a 1-D law for lower-tail probability `lower` (used when
// lower <= 0.5) or upper-tail probability `upper` (otherwise).
double quantile_1d(const Distribution1D& d, double lower, double upper,
                   double guess);

}  // namespace baryvae
