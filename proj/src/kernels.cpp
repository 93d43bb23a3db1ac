#include "baryvae/kernels.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "baryvae/errors.hpp"

namespace baryvae::kernels {
namespace {

// Below this many multiply-adds the fork/join cost dominates.
constexpr std::size_t kParallelWork = 1 << 15;

void check_sizes(std::size_t a, std::size_t b, std::size_t c, std::size_t na,
                 std::size_t nb, std::size_t nc) {
  if (a != na || b != nb || c != nc) throw DimensionError("kernel: operand size mismatch");
}

// Row kernels shared by the serial and parallel drivers.
inline void matmul_row(const double* a, const double* b, double* c,
                       std::size_t i, std::size_t k, std::size_t m) {
  double* ci = c + i * m;
  for (std::size_t j = 0; j < m; ++j) ci[j] = 0.0;
  for (std::size_t p = 0; p < k; ++p) {
    const double aip = a[i * k + p];
    const double* bp = b + p * m;
    for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
  }
}

inline void matmul_tn_row(const double* a, const double* b, double* c,
                          std::size_t i, std::size_t n, std::size_t k,
                          std::size_t m) {
  double* ci = c + i * m;
  for (std::size_t j = 0; j < m; ++j) ci[j] = 0.0;
  for (std::size_t p = 0; p < k; ++p) {
    const double api = a[p * n + i];
    const double* bp = b + p * m;
    for (std::size_t j = 0; j < m; ++j) ci[j] += api * bp[j];
  }
}

inline void matmul_nt_row(const double* a, const double* b, double* c,
                          std::size_t i, std::size_t k, std::size_t m) {
  const double* ai = a + i * k;
  for (std::size_t j = 0; j < m; ++j) {
    const double* bj = b + j * k;
    double s = 0.0;
    for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
    c[i * m + j] = s;
  }
}

void check_family(std::span<const Matrix> mus, std::span<const Matrix> sigmas,
                  std::span<const double> weights, Matrix& out_mu,
                  Matrix& out_sigma) {
  if (mus.empty() || mus.size() != sigmas.size() || mus.size() != weights.size()) {
    throw DimensionError("batch aggregation: member count mismatch");
  }
  for (std::size_t m = 0; m < mus.size(); ++m) {
    if (mus[m].rows != mus[0].rows || mus[m].cols != mus[0].cols ||
        sigmas[m].rows != mus[0].rows || sigmas[m].cols != mus[0].cols) {
      throw DimensionError("batch aggregation: member shape mismatch");
    }
  }
  out_mu = Matrix(mus[0].rows, mus[0].cols);
  out_sigma = Matrix(mus[0].rows, mus[0].cols);
}

inline void wb_row(std::span<const Matrix> mus, std::span<const Matrix> sigmas,
                   std::span<const double> w, Matrix& out_mu, Matrix& out_sigma,
                   std::size_t b) {
  const std::size_t d = out_mu.cols;
  for (std::size_t i = 0; i < d; ++i) {
    double mu = 0.0, sigma = 0.0;
    for (std::size_t m = 0; m < mus.size(); ++m) {
      mu += w[m] * mus[m].data[b * d + i];
      sigma += w[m] * sigmas[m].data[b * d + i];
    }
    out_mu.data[b * d + i] = mu;
    out_sigma.data[b * d + i] = sigma;
  }
}

inline void poe_row(std::span<const Matrix> mus, std::span<const Matrix> sigmas,
                    std::span<const double> alpha, Matrix& out_mu,
                    Matrix& out_sigma, std::size_t b) {
  const std::size_t d = out_mu.cols;
  for (std::size_t i = 0; i < d; ++i) {
    double precision = 0.0, weighted = 0.0;
    for (std::size_t m = 0; m < mus.size(); ++m) {
      const double s = sigmas[m].data[b * d + i];
      const double p = alpha[m] / (s * s);
      precision += p;
      weighted += p * mus[m].data[b * d + i];
    }
    out_mu.data[b * d + i] = weighted / precision;
    out_sigma.data[b * d + i] = std::sqrt(1.0 / precision);
  }
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void matmul(std::span<const double> a, std::span<const double> b,
            std::span<double> c, std::size_t n, std::size_t k, std::size_t m) {
  check_sizes(a.size(), b.size(), c.size(), n * k, k * m, n * m);
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n * k * m > kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    matmul_row(a.data(), b.data(), c.data(), static_cast<std::size_t>(i), k, m);
  }
}

void matmul_tn(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t n, std::size_t k, std::size_t m) {
  check_sizes(a.size(), b.size(), c.size(), k * n, k * m, n * m);
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n * k * m > kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    matmul_tn_row(a.data(), b.data(), c.data(), static_cast<std::size_t>(i), n,
                  k, m);
  }
}

void matmul_nt(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t n, std::size_t k, std::size_t m) {
  check_sizes(a.size(), b.size(), c.size(), n * k, m * k, n * m);
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) if (n * k * m > kParallelWork)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    matmul_nt_row(a.data(), b.data(), c.data(), static_cast<std::size_t>(i), k, m);
  }
}

void wb_diag_batch(std::span<const Matrix> mus, std::span<const Matrix> sigmas,
                   std::span<const double> weights, Matrix& out_mu,
                   Matrix& out_sigma) {
  check_family(mus, sigmas, weights, out_mu, out_sigma);
  const auto rows = static_cast<std::ptrdiff_t>(out_mu.rows);
  const std::size_t work = out_mu.size() * mus.size();
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (std::ptrdiff_t b = 0; b < rows; ++b) {
    wb_row(mus, sigmas, weights, out_mu, out_sigma, static_cast<std::size_t>(b));
  }
}

void poe_batch(std::span<const Matrix> mus, std::span<const Matrix> sigmas,
               std::span<const double> exponents, Matrix& out_mu,
               Matrix& out_sigma) {
  check_family(mus, sigmas, exponents, out_mu, out_sigma);
  const auto rows = static_cast<std::ptrdiff_t>(out_mu.rows);
  const std::size_t work = out_mu.size() * mus.size();
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (std::ptrdiff_t b = 0; b < rows; ++b) {
    poe_row(mus, sigmas, exponents, out_mu, out_sigma, static_cast<std::size_t>(b));
  }
}

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b,
            std::span<double> c, std::size_t n, std::size_t k, std::size_t m) {
  check_sizes(a.size(), b.size(), c.size(), n * k, k * m, n * m);
  for (std::size_t i = 0; i < n; ++i) matmul_row(a.data(), b.data(), c.data(), i, k, m);
}

void matmul_tn(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t n, std::size_t k, std::size_t m) {
  check_sizes(a.size(), b.size(), c.size(), k * n, k * m, n * m);
  for (std::size_t i = 0; i < n; ++i) {
    matmul_tn_row(a.data(), b.data(), c.data(), i, n, k, m);
  }
}

void matmul_nt(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t n, std::size_t k, std::size_t m) {
  check_sizes(a.size(), b.size(), c.size(), n * k, m * k, n * m);
  for (std::size_t i = 0; i < n; ++i) matmul_nt_row(a.data(), b.data(), c.data(), i, k, m);
}

void wb_diag_batch(std::span<const Matrix> mus, std::span<const Matrix> sigmas,
                   std::span<const double> weights, Matrix& out_mu,
                   Matrix& out_sigma) {
  check_family(mus, sigmas, weights, out_mu, out_sigma);
  for (std::size_t b = 0; b < out_mu.rows; ++b) {
    wb_row(mus, sigmas, weights, out_mu, out_sigma, b);
  }
}

void poe_batch(std::span<const Matrix> mus, std::span<const Matrix> sigmas,
               std::span<const double> exponents, Matrix& out_mu,
               Matrix& out_sigma) {
  check_family(mus, sigmas, exponents, out_mu, out_sigma);
  for (std::size_t b = 0; b < out_mu.rows; ++b) {
    poe_row(mus, sigmas, exponents, out_mu, out_sigma, b);
  }
}

}  // namespace serial
}  // namespace baryvae::kernels
