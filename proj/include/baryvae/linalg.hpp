#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace baryvae {

// Dense symmetric matrix, row-major. Construction symmetrizes the input as
// (A + A^T) / 2 so entries(i, j) == entries(j, i) holds bit-exactly.
class SymMatrix {
 public:
  explicit SymMatrix(std::size_t dim);
  SymMatrix(std::size_t dim, std::vector<double> entries);

  static SymMatrix identity(std::size_t dim);
  static SymMatrix diagonal(std::span<const double> diag);

  std::size_t dim() const { return dim_; }
  double operator()(std::size_t i, std::size_t j) const {
    return entries_[i * dim_ + j];
  }
  std::span<const double> entries() const { return entries_; }

  double trace() const;
  double frobenius_norm() const;
  bool is_diagonal() const;

  SymMatrix& operator+=(const SymMatrix& other);
  SymMatrix& operator*=(double s);
  friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
  friend SymMatrix operator-(const SymMatrix& a, const SymMatrix& b);
  friend SymMatrix operator*(double s, SymMatrix a) { return a *= s; }
  friend bool operator==(const SymMatrix&, const SymMatrix&) = default;

 private:
  std::size_t dim_;
  std::vector<double> entries_;
};

struct EigenDecomposition {
  std::vector<double> values;   // ascending
  std::vector<double> vectors;  // row-major dim x dim; column k is eigenvector k
  std::size_t sweeps = 0;
};

inline constexpr std::size_t kJacobiMaxSweeps = 100;
inline constexpr double kJacobiTolerance = 1e-12;
inline constexpr double kPsdClampTolerance = 1e-10;

// Cyclic Jacobi eigensolver. Throws NumericError (carrying the off-diagonal
// residual) when the sweep cap is hit.
EigenDecomposition sym_eig(const SymMatrix& a);

// Principal square root of a PSD matrix. Eigenvalues in [-1e-10, 0) are
// clamped to zero; anything more negative raises NotPsdError.
SymMatrix sqrtm_psd(const SymMatrix& a);

// V * diag(f(w)) * V^T for a decomposition.
template <class F>
SymMatrix reconstruct(const EigenDecomposition& eig, F&& f) {
  const std::size_t n = eig.values.size();
  std::vector<double> fw(n);
  for (std::size_t k = 0; k < n; ++k) fw[k] = f(eig.values[k]);
  std::vector<double> out(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        s += eig.vectors[i * n + k] * fw[k] * eig.vectors[j * n + k];
      }
      out[i * n + j] = s;
      out[j * n + i] = s;
    }
  }
  return SymMatrix(n, std::move(out));
}

// General square product a * b (row-major, n x n); not symmetric in general.
std::vector<double> square_matmul(std::span<const double> a,
                                  std::span<const double> b, std::size_t n);

// s * m * s for symmetric s, m; the result is symmetric up to rounding and is
// symmetrized on return.
SymMatrix congruence(const SymMatrix& s, const SymMatrix& m);

}  // namespace baryvae
