#pragma once

#include <cstddef>
#include <span>

#include "baryvae/matrix.hpp"

// Data-parallel inner loops. Every kernel has a serial reference in
// kernels::serial; the OpenMP versions split work over output rows only, so
// each output element is accumulated in the same order and results are
// bit-identical to the reference regardless of thread count.
namespace baryvae::kernels {

// C(n x m) = A(n x k) * B(k x m)
void matmul(std::span<const double> a, std::span<const double> b,
            std::span<double> c, std::size_t n, std::size_t k, std::size_t m);
// C(n x m) = A(k x n)^T * B(k x m)
void matmul_tn(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t n, std::size_t k, std::size_t m);
// C(n x m) = A(n x k) * B(m x k)^T
void matmul_nt(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t n, std::size_t k, std::size_t m);

// Row-wise diagonal Wasserstein barycenter over a batch: for every row b and
// coordinate i, mu = sum_m w_m mu_m(b, i) and sigma = sum_m w_m sigma_m(b, i).
void wb_diag_batch(std::span<const Matrix> mus, std::span<const Matrix> sigmas,
                   std::span<const double> weights, Matrix& out_mu,
                   Matrix& out_sigma);
// Row-wise product of experts with exponents alpha_m.
void poe_batch(std::span<const Matrix> mus, std::span<const Matrix> sigmas,
               std::span<const double> exponents, Matrix& out_mu,
               Matrix& out_sigma);

int max_threads();

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b,
            std::span<double> c, std::size_t n, std::size_t k, std::size_t m);
void matmul_tn(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t n, std::size_t k, std::size_t m);
void matmul_nt(std::span<const double> a, std::span<const double> b,
               std::span<double> c, std::size_t n, std::size_t k, std::size_t m);
void wb_diag_batch(std::span<const Matrix> mus, std::span<const Matrix> sigmas,
                   std::span<const double> weights, Matrix& out_mu,
                   Matrix& out_sigma);
void poe_batch(std::span<const Matrix> mus, std::span<const Matrix> sigmas,
               std::span<const double> exponents, Matrix& out_mu,
               Matrix& out_sigma);

}  // namespace serial
}  // namespace baryvae::kernels
