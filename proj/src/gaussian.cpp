#include "baryvae/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "baryvae/errors.hpp"

namespace baryvae {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void require_same_dim(std::size_t a, std::size_t b, const char* where) {
  if (a != b) {
    throw DimensionError(std::string(where) + ": dimension mismatch (" +
                         std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }
double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

DiagGaussian::DiagGaussian(std::vector<double> mean, std::vector<double> sigma)
    : mean_(std::move(mean)), sigma_(std::move(sigma)) {
  require_same_dim(mean_.size(), sigma_.size(), "DiagGaussian");
  if (mean_.empty()) throw DimensionError("DiagGaussian: empty mean");
  for (std::size_t i = 0; i < sigma_.size(); ++i) {
    if (!std::isfinite(mean_[i]) || !std::isfinite(sigma_[i]) || sigma_[i] < 0.0) {
      throw InvalidArgument("DiagGaussian: invalid mean/sigma at index " +
                            std::to_string(i));
    }
    sigma_[i] = std::max(sigma_[i], kSigmaFloor);
  }
}

DiagGaussian DiagGaussian::standard(std::size_t dim) {
  return DiagGaussian(std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0));
}

FullGaussian::FullGaussian(std::vector<double> mean, SymMatrix cov)
    : mean_(std::move(mean)), cov_(std::move(cov)) {
  require_same_dim(mean_.size(), cov_.dim(), "FullGaussian");
  const auto eig = sym_eig(cov_);
  if (eig.values.front() < kMinCovEigenvalue) {
    throw NotPsdError("FullGaussian: covariance is not positive definite "
                      "(eigenvalue " +
                          std::to_string(eig.values.front()) + ")",
                      eig.values.front());
  }
}

FullGaussian FullGaussian::from_diag(const DiagGaussian& g) {
  std::vector<double> var(g.dim());
  for (std::size_t i = 0; i < g.dim(); ++i) var[i] = g.sigma()[i] * g.sigma()[i];
  return FullGaussian({g.mean().begin(), g.mean().end()}, SymMatrix::diagonal(var));
}

GaussianMixture::GaussianMixture(std::vector<DiagGaussian> components,
                                 std::vector<double> weights)
    : components_(std::move(components)), weights_(std::move(weights)) {
  if (components_.empty()) throw InvalidArgument("GaussianMixture: no components");
  require_same_dim(components_.size(), weights_.size(), "GaussianMixture weights");
  double total = 0.0;
  for (std::size_t k = 0; k < components_.size(); ++k) {
    require_same_dim(components_[k].dim(), components_.front().dim(),
                     "GaussianMixture components");
    if (!(weights_[k] >= 0.0)) {
      throw InvalidArgument("GaussianMixture: negative weight");
    }
    total += weights_[k];
  }
  if (std::abs(total - 1.0) > kWeightSumTolerance) {
    throw InvalidArgument("GaussianMixture: weights sum to " +
                          std::to_string(total) + ", expected 1");
  }
}

std::vector<double> GaussianMixture::mean() const {
  std::vector<double> m(dim(), 0.0);
  for (std::size_t k = 0; k < size(); ++k) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      m[i] += weights_[k] * components_[k].mean()[i];
    }
  }
  return m;
}

double kl_diag(const DiagGaussian& p, const DiagGaussian& q) {
  require_same_dim(p.dim(), q.dim(), "kl_diag");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const double sp = p.sigma()[i];
    const double sq = q.sigma()[i];
    const double dm = p.mean()[i] - q.mean()[i];
    kl += std::log(sq / sp) + (sp * sp + dm * dm) / (2.0 * sq * sq) - 0.5;
  }
  return std::max(kl, 0.0);
}

double w2sq_diag(const DiagGaussian& p, const DiagGaussian& q) {
  require_same_dim(p.dim(), q.dim(), "w2sq_diag");
  double w = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const double dm = p.mean()[i] - q.mean()[i];
    const double ds = p.sigma()[i] - q.sigma()[i];
    w += dm * dm + ds * ds;
  }
  return w;
}

double w2sq_full(const FullGaussian& p, const FullGaussian& q) {
  require_same_dim(p.dim(), q.dim(), "w2sq_full");
  double mean_term = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const double dm = p.mean()[i] - q.mean()[i];
    mean_term += dm * dm;
  }
  const SymMatrix root_p = sqrtm_psd(p.cov());
  const SymMatrix cross = sqrtm_psd(congruence(root_p, q.cov()));
  const double cov_term =
      p.cov().trace() + q.cov().trace() - 2.0 * cross.trace();
  const double scale = 1.0 + p.cov().trace() + q.cov().trace();
  if (cov_term < -kPsdClampTolerance * scale) {
    throw NumericError("w2sq_full: negative covariance term " +
                           std::to_string(cov_term),
                       cov_term);
  }
  return mean_term + std::max(cov_term, 0.0);
}

double log_density(const DiagGaussian& g, std::span<const double> x) {
  require_same_dim(g.dim(), x.size(), "log_density");
  double lp = -0.5 * static_cast<double>(g.dim()) * kLog2Pi;
  for (std::size_t i = 0; i < g.dim(); ++i) {
    const double z = (x[i] - g.mean()[i]) / g.sigma()[i];
    lp -= 0.5 * z * z + std::log(g.sigma()[i]);
  }
  return lp;
}

double log_density(const GaussianMixture& g, std::span<const double> x) {
  require_same_dim(g.dim(), x.size(), "log_density");
  std::vector<double> terms;
  terms.reserve(g.size());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (g.weights()[k] <= 0.0) continue;
    const double t = std::log(g.weights()[k]) + log_density(g.components()[k], x);
    terms.push_back(t);
    best = std::max(best, t);
  }
  double s = 0.0;
  for (double t : terms) s += std::exp(t - best);
  return best + std::log(s);
}

std::vector<double> sample(const DiagGaussian& g, std::span<const double> noise) {
  require_same_dim(g.dim(), noise.size(), "sample");
  std::vector<double> z(g.dim());
  for (std::size_t i = 0; i < z.size(); ++i) {
    z[i] = g.mean()[i] + g.sigma()[i] * noise[i];
  }
  return z;
}

double entropy_diag(const DiagGaussian& g) {
  double h = 0.5 * static_cast<double>(g.dim()) * (1.0 + kLog2Pi);
  for (double s : g.sigma()) h += std::log(s);
  return h;
}

Distribution1D as_distribution(const DiagGaussian& g) {
  if (g.dim() != 1) throw DimensionError("as_distribution: expected 1-D Gaussian");
  const double mu = g.mean()[0];
  const double s = g.sigma()[0];
  Distribution1D d;
  d.cdf = [mu, s](double x) { return normal_cdf((x - mu) / s); };
  d.sf = [mu, s](double x) { return normal_sf((x - mu) / s); };
  d.pdf = [mu, s](double x) { return normal_pdf((x - mu) / s) / s; };
  d.lo = mu - 40.0 * s;
  d.hi = mu + 40.0 * s;
  return d;
}

Distribution1D as_distribution(const GaussianMixture& g) {
  if (g.dim() != 1) throw DimensionError("as_distribution: expected 1-D mixture");
  std::vector<double> mu, s, w;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t k = 0; k < g.size(); ++k) {
    mu.push_back(g.components()[k].mean()[0]);
    s.push_back(g.components()[k].sigma()[0]);
    w.push_back(g.weights()[k]);
    lo = std::min(lo, mu.back() - 40.0 * s.back());
    hi = std::max(hi, mu.back() + 40.0 * s.back());
  }
  auto sum = [mu, s, w](auto f) {
    return [mu, s, w, f](double x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < mu.size(); ++k) acc += w[k] * f((x - mu[k]) / s[k], s[k]);
      return acc;
    };
  };
  Distribution1D d;
  d.cdf = sum([](double z, double) { return normal_cdf(z); });
  d.sf = sum([](double z, double) { return normal_sf(z); });
  d.pdf = sum([](double z, double sk) { return normal_pdf(z) / sk; });
  d.lo = lo;
  d.hi = hi;
  return d;
}

double quantile_1d(const Distribution1D& d, double lower, double upper,
                   double guess) {
  const bool use_lower = lower <= 0.5;
  // g(x) is increasing in x with root at the requested quantile.
  auto g = [&](double x) {
    return use_lower ? d.cdf(x) - lower : upper - d.sf(x);
  };
  double lo = d.lo;
  double hi = d.hi;
  for (int grow = 0; g(lo) > 0.0; ++grow) {
    if (grow == 64) throw NumericError("quantile_1d: cannot bracket the lower end");
    lo -= (hi - lo);
  }
  for (int grow = 0; g(hi) < 0.0; ++grow) {
    if (grow == 64) throw NumericError("quantile_1d: cannot bracket the upper end");
    hi += (hi - lo);
  }
  double x = std::clamp(guess, lo, hi);
  for (int it = 0; it < 300; ++it) {
    const double gx = g(x);
    if (gx == 0.0) return x;
    if (gx < 0.0) lo = x; else hi = x;
    const double slope = d.pdf(x);
    double next = slope > 0.0 ? x - gx / slope : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-13 * (1.0 + std::abs(x)) ||
        hi - lo <= 1e-13 * (1.0 + std::abs(x))) {
      return next;
    }
    x = next;
  }
  return x;
}

namespace {

void check_monotone_cdf(const Distribution1D& d, const char* which) {
  constexpr std::size_t kScan = 4001;
  double prev = -1.0;
  for (std::size_t i = 0; i < kScan; ++i) {
    const double x = d.lo + (d.hi - d.lo) * static_cast<double>(i) / (kScan - 1);
    const double c = d.cdf(x);
    if (!(c >= prev - 1e-12) || c < -1e-12 || c > 1.0 + 1e-12) {
      throw NumericError(std::string("w2sq_1d_quantile: CDF of ") + which +
                         " is not monotone near x = " + std::to_string(x));
    }
    prev = std::max(prev, c);
  }
}

}  // namespace

double w2sq_1d_quantile(const Distribution1D& p, const Distribution1D& q) {
  check_monotone_cdf(p, "p");
  check_monotone_cdf(q, "q");
  constexpr double kTMax = 8.5;
  const std::size_t n = kQuantileGridSize;
  const double h = 2.0 * kTMax / static_cast<double>(n - 1);
  double prev_p = -std::numeric_limits<double>::infinity();
  double prev_q = prev_p;
  double guess_p = p.lo, guess_q = q.lo;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = -kTMax + h * static_cast<double>(i);
    const double lower = normal_cdf(t);
    const double upper = normal_sf(t);
    const double xp = quantile_1d(p, lower, upper, guess_p);
    const double xq = quantile_1d(q, lower, upper, guess_q);
    // Quantiles of a valid law never decrease; allow solver-level jitter.
    if (xp < prev_p - 1e-9 * (1.0 + std::abs(xp)) ||
        xq < prev_q - 1e-9 * (1.0 + std::abs(xq))) {
      throw NumericError("w2sq_1d_quantile: CDF is not monotone near t = " +
                         std::to_string(t));
    }
    prev_p = xp;
    prev_q = xq;
    guess_p = xp;
    guess_q = xq;
    const double simpson = (i == 0 || i == n - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    const double diff = xp - xq;
    acc += simpson * diff * diff * normal_pdf(t);
  }
  return acc * h / 3.0;
}

}  // namespace baryvae
