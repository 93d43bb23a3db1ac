#pragma once

// Generators and independent numeric oracles shared by the unit and
// acceptance tests.

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <vector>

#include "baryvae/barycenter.hpp"
#include "baryvae/gaussian.hpp"
#include "baryvae/linalg.hpp"
#include "baryvae/rng.hpp"

namespace testing {

using namespace baryvae;

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed, 0x74657374) {}

  double uniform(double lo, double hi) { return lo + (hi - lo) * rng_.uniform(); }
  double normal() { return rng_.normal(); }
  std::size_t size(std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng_.below(hi - lo + 1));
  }

  DiagGaussian diag(std::size_t d, double mu_range = 3.0, double s_lo = 0.2,
                    double s_hi = 3.0) {
    std::vector<double> mu(d), sigma(d);
    for (std::size_t i = 0; i < d; ++i) {
      mu[i] = uniform(-mu_range, mu_range);
      sigma[i] = uniform(s_lo, s_hi);
    }
    return DiagGaussian(mu, sigma);
  }

  std::vector<double> simplex(std::size_t m) {
    std::vector<double> w(m);
    double total = 0.0;
    for (double& v : w) total += (v = uniform(0.05, 1.0));
    for (double& v : w) v /= total;
    // Push the rounding residue into the last weight.
    double head = 0.0;
    for (std::size_t k = 0; k + 1 < m; ++k) head += w[k];
    w[m - 1] = 1.0 - head;
    return w;
  }

  DiagFamily diag_family(std::size_t d, std::size_t m) {
    std::vector<DiagGaussian> members;
    for (std::size_t k = 0; k < m; ++k) members.push_back(diag(d));
    return DiagFamily(members, simplex(m));
  }

  // Orthogonal matrix from Gram-Schmidt on a Gaussian matrix, row-major.
  std::vector<double> orthogonal(std::size_t d) {
    std::vector<double> q(d * d);
    for (double& v : q) v = normal();
    for (std::size_t c = 0; c < d; ++c) {
      for (std::size_t p = 0; p < c; ++p) {
        double dot = 0.0;
        for (std::size_t r = 0; r < d; ++r) dot += q[r * d + c] * q[r * d + p];
        for (std::size_t r = 0; r < d; ++r) q[r * d + c] -= dot * q[r * d + p];
      }
      double norm = 0.0;
      for (std::size_t r = 0; r < d; ++r) norm += q[r * d + c] * q[r * d + c];
      norm = std::sqrt(norm);
      for (std::size_t r = 0; r < d; ++r) q[r * d + c] /= norm;
    }
    return q;
  }

  // Q diag(values) Q^T.
  static SymMatrix conjugate(const std::vector<double>& q, const std::vector<double>& values) {
    const std::size_t d = values.size();
    std::vector<double> out(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = 0; k < d; ++k) out[i * d + j] += q[i * d + k] * values[k] * q[j * d + k];
      }
    }
    return SymMatrix(d, out);
  }

  SymMatrix spd(std::size_t d, double lo = 0.1, double hi = 4.0) {
    std::vector<double> values(d);
    for (double& v : values) v = uniform(lo, hi);
    return conjugate(orthogonal(d), values);
  }

  CounterRng& rng() { return rng_; }

 private:
  CounterRng rng_;
};

inline double normal_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
}

inline double normal_log_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

// Composite Simpson rule with n (even) intervals.
inline double simpson(const std::function<double(double)>& f, double lo, double hi,
                      std::size_t n) {
  if (n % 2 == 1) ++n;
  const double h = (hi - lo) / static_cast<double>(n);
  double s = f(lo) + f(hi);
  for (std::size_t i = 1; i < n; ++i) {
    s += (i % 2 == 1 ? 4.0 : 2.0) * f(lo + h * static_cast<double>(i));
  }
  return s * h / 3.0;
}

// 1-D mixture density sum_k w_k N(x; mu_k, s_k).
struct Mixture1D {
  std::vector<double> w, mu, s;

  double pdf(double x) const {
    double p = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) p += w[k] * normal_pdf(x, mu[k], s[k]);
    return p;
  }
  double log_pdf(double x) const {
    double hi = -INFINITY;
    for (std::size_t k = 0; k < w.size(); ++k) {
      hi = std::max(hi, std::log(w[k]) + normal_log_pdf(x, mu[k], s[k]));
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      acc += std::exp(std::log(w[k]) + normal_log_pdf(x, mu[k], s[k]) - hi);
    }
    return hi + std::log(acc);
  }
  double lo() const {
    double v = INFINITY;
    for (std::size_t k = 0; k < w.size(); ++k) v = std::min(v, mu[k] - 14.0 * s[k]);
    return v;
  }
  double hi() const {
    double v = -INFINITY;
    for (std::size_t k = 0; k < w.size(); ++k) v = std::max(v, mu[k] + 14.0 * s[k]);
    return v;
  }
};

// D(p || N(mu, s)) for a 1-D mixture p, by Simpson quadrature of p log(p/q).
inline double kl_mixture_gaussian_quadrature(const Mixture1D& p, double mu, double s,
                                             std::size_t n = 200000) {
  return simpson(
      [&](double x) {
        const double px = p.pdf(x);
        if (px <= 0.0) return 0.0;
        return px * (p.log_pdf(x) - normal_log_pdf(x, mu, s));
      },
      p.lo(), p.hi(), n);
}

// D(N(mp, sp) || N(mq, sq)) by quadrature.
inline double kl_quadrature(double mp, double sp, double mq, double sq,
                            std::size_t n = 200000) {
  Mixture1D p{{1.0}, {mp}, {sp}};
  return kl_mixture_gaussian_quadrature(p, mq, sq, n);
}

// Dense row-major helpers for small square matrices.
inline std::vector<double> dense(const SymMatrix& a) {
  return {a.entries().begin(), a.entries().end()};
}

inline std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b,
                                  std::size_t n) {
  std::vector<double> c(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += a[i * n + k] * b[k * n + j];
    }
  }
  return c;
}

inline std::vector<double> transpose(const std::vector<double>& a, std::size_t n) {
  std::vector<double> t(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) t[j * n + i] = a[i * n + j];
  }
  return t;
}

inline double frobenius_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

inline double frobenius(const std::vector<double>& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

// ||S - sum_m w_m (S^1/2 S_m S^1/2)^1/2||_F computed from scratch.
inline double fixed_point_residual(const FullFamily& family, const SymMatrix& s) {
  const SymMatrix root = sqrtm_psd(s);
  const std::size_t d = s.dim();
  std::vector<double> t(d * d, 0.0);
  for (std::size_t m = 0; m < family.size(); ++m) {
    const auto inner = matmul(matmul(dense(root), dense(family[m].cov()), d), dense(root), d);
    const SymMatrix r = sqrtm_psd(SymMatrix(d, inner));
    for (std::size_t i = 0; i < d * d; ++i) t[i] += family.weights()[m] * r.entries()[i];
  }
  return frobenius_diff(dense(s), t);
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), 1e-300);
}

}  // namespace testing
