#include "baryvae/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "baryvae/errors.hpp"

namespace baryvae {

SymMatrix::SymMatrix(std::size_t dim) : dim_(dim), entries_(dim * dim, 0.0) {
  if (dim == 0) throw DimensionError("SymMatrix dimension must be >= 1");
}

SymMatrix::SymMatrix(std::size_t dim, std::vector<double> entries)
    : dim_(dim), entries_(std::move(entries)) {
  if (dim == 0) throw DimensionError("SymMatrix dimension must be >= 1");
  if (entries_.size() != dim * dim) {
    throw DimensionError("SymMatrix of dim " + std::to_string(dim) +
                         " needs " + std::to_string(dim * dim) +
                         " entries, got " + std::to_string(entries_.size()));
  }
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i + 1; j < dim; ++j) {
      const double avg = 0.5 * (entries_[i * dim + j] + entries_[j * dim + i]);
      entries_[i * dim + j] = avg;
      entries_[j * dim + i] = avg;
    }
  }
}

SymMatrix SymMatrix::identity(std::size_t dim) {
  SymMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i) m.entries_[i * dim + i] = 1.0;
  return m;
}

SymMatrix SymMatrix::diagonal(std::span<const double> diag) {
  SymMatrix m(diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) {
    m.entries_[i * diag.size() + i] = diag[i];
  }
  return m;
}

double SymMatrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) t += entries_[i * dim_ + i];
  return t;
}

double SymMatrix::frobenius_norm() const {
  double s = 0.0;
  for (double v : entries_) s += v * v;
  return std::sqrt(s);
}

bool SymMatrix::is_diagonal() const {
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = 0; j < dim_; ++j) {
      if (i != j && entries_[i * dim_ + j] != 0.0) return false;
    }
  }
  return true;
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& other) {
  if (other.dim_ != dim_) throw DimensionError("SymMatrix dimension mismatch");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    entries_[i] += other.entries_[i];
  }
  return *this;
}

SymMatrix& SymMatrix::operator*=(double s) {
  for (double& v : entries_) v *= s;
  return *this;
}

SymMatrix operator-(const SymMatrix& a, const SymMatrix& b) {
  if (a.dim() != b.dim()) throw DimensionError("SymMatrix dimension mismatch");
  std::vector<double> out(a.entries().begin(), a.entries().end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.entries()[i];
  return SymMatrix(a.dim(), std::move(out));
}

namespace {

double off_diagonal_norm(const std::vector<double>& a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) s += a[i * n + j] * a[i * n + j];
    }
  }
  return std::sqrt(s);
}

}  // namespace

EigenDecomposition sym_eig(const SymMatrix& input) {
  const std::size_t n = input.dim();
  std::vector<double> a(input.entries().begin(), input.entries().end());
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

  // Relative stopping rule: an absolute 1e-12 is below rounding for large
  // matrices.
  const double scale = std::max(input.frobenius_norm(), 1e-300);
  const double threshold = kJacobiTolerance * scale;

  std::size_t sweep = 0;
  double off = off_diagonal_norm(a, n);
  while (off > threshold) {
    if (sweep == kJacobiMaxSweeps) {
      throw NumericError("sym_eig: Jacobi iteration did not converge after " +
                             std::to_string(sweep) + " sweeps (residual " +
                             std::to_string(off) + ")",
                         off, sweep);
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (apq == 0.0) continue;
        const double app = a[p * n + p];
        const double aqq = a[q * n + q];
        // Rotation angle chosen to annihilate a(p, q); the smaller root keeps
        // the rotation stable.
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p];
          const double akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k];
          const double aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        a[p * n + q] = 0.0;
        a[q * n + p] = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p];
          const double vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
    ++sweep;
    off = off_diagonal_norm(a, n);
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return a[x * n + x] < a[y * n + y];
  });

  EigenDecomposition out;
  out.values.resize(n);
  out.vectors.resize(n * n);
  out.sweeps = sweep;
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a[order[k] * n + order[k]];
    for (std::size_t i = 0; i < n; ++i) {
      out.vectors[i * n + k] = v[i * n + order[k]];
    }
  }
  return out;
}

SymMatrix sqrtm_psd(const SymMatrix& a) {
  const EigenDecomposition eig = sym_eig(a);
  if (eig.values.front() < -kPsdClampTolerance) {
    throw NotPsdError("sqrtm_psd: matrix is not positive semidefinite "
                      "(eigenvalue " +
                          std::to_string(eig.values.front()) + ")",
                      eig.values.front());
  }
  return reconstruct(eig, [](double w) { return std::sqrt(std::max(w, 0.0)); });
}

std::vector<double> square_matmul(std::span<const double> a,
                                  std::span<const double> b, std::size_t n) {
  std::vector<double> c(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double aik = a[i * n + k];
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += aik * b[k * n + j];
    }
  }
  return c;
}

SymMatrix congruence(const SymMatrix& s, const SymMatrix& m) {
  if (s.dim() != m.dim()) throw DimensionError("congruence: dimension mismatch");
  const std::size_t n = s.dim();
  const auto sm = square_matmul(s.entries(), m.entries(), n);
  return SymMatrix(n, square_matmul(sm, s.entries(), n));
}

}  // namespace baryvae
