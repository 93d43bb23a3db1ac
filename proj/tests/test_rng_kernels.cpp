#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "baryvae/kernels.hpp"
#include "baryvae/rng.hpp"

using namespace baryvae;

TEST_CASE("CounterRng is reproducible and splittable") {
  CounterRng a(1, 2), b(1, 2);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CounterRng c(1, 3);
  CHECK(CounterRng(1, 2).next_u64() != c.next_u64());

  const CounterRng root(5, 0);
  CounterRng s1 = root.split(1), s1b = root.split(1), s2 = root.split(2);
  CHECK(s1.next_u64() == s1b.next_u64());
  CHECK(root.split(1).next_u64() != s2.next_u64());
  CHECK(root.counter() == 0);

  CounterRng r(8, 0);
  r.uniform();
  r.uniform();
  const auto saved = r.counter();
  const double next = r.uniform();
  CounterRng restored(8, 0);
  restored.set_counter(saved);
  CHECK(restored.uniform() == next);
}

TEST_CASE("CounterRng distributions") {
  CounterRng r(11, 0);
  const int n = 200000;
  double s = 0.0, s2 = 0.0, u = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
    const double v = r.uniform();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    u += v;
  }
  CHECK(std::abs(s / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(u / n - 0.5) < 4.0 * std::sqrt(1.0 / 12.0 / n));

  std::vector<int> hist(7, 0);
  for (int i = 0; i < 70000; ++i) ++hist[r.below(7)];
  for (int h : hist) CHECK(std::abs(h - 10000) < 500);

  auto perm = r.permutation(50);
  std::sort(perm.begin(), perm.end());
  std::vector<std::size_t> iota(50);
  std::iota(iota.begin(), iota.end(), std::size_t{0});
  CHECK(perm == iota);
}

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, CounterRng& rng) {
  Matrix m(r, c);
  for (double& v : m.data) v = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("matmul kernels match a naive triple loop and the serial reference") {
  CounterRng rng(12, 0);
  for (auto [n, k, m] : {std::tuple{1, 1, 1}, {3, 5, 2}, {70, 40, 90}, {300, 20, 200}}) {
    const Matrix a = random_matrix(n, k, rng), b = random_matrix(k, m, rng);
    Matrix naive(n, m);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) {
        double s = 0.0;
        for (int l = 0; l < k; ++l) s += a(i, l) * b(l, j);
        naive(i, j) = s;
      }
    }
    Matrix c(n, m), ref(n, m);
    kernels::matmul(a.data, b.data, c.data, n, k, m);
    kernels::serial::matmul(a.data, b.data, ref.data, n, k, m);
    CHECK(c == ref);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c.data[i] == doctest::Approx(naive.data[i]));

    // A^T B with A stored k x n.
    Matrix at(k, n);
    for (int i = 0; i < n; ++i) {
      for (int l = 0; l < k; ++l) at(l, i) = a(i, l);
    }
    Matrix tn(n, m), tn_ref(n, m);
    kernels::matmul_tn(at.data, b.data, tn.data, n, k, m);
    kernels::serial::matmul_tn(at.data, b.data, tn_ref.data, n, k, m);
    CHECK(tn == tn_ref);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(tn.data[i] == doctest::Approx(naive.data[i]));

    // A B^T with B stored m x k.
    Matrix bt(m, k);
    for (int l = 0; l < k; ++l) {
      for (int j = 0; j < m; ++j) bt(j, l) = b(l, j);
    }
    Matrix nt(n, m), nt_ref(n, m);
    kernels::matmul_nt(a.data, bt.data, nt.data, n, k, m);
    kernels::serial::matmul_nt(a.data, bt.data, nt_ref.data, n, k, m);
    CHECK(nt == nt_ref);
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(nt.data[i] == doctest::Approx(naive.data[i]));
  }
}

TEST_CASE("batch aggregation kernels match the serial reference and the closed forms") {
  CounterRng rng(13, 0);
  std::vector<Matrix> mus, sigmas;
  for (int m = 0; m < 3; ++m) {
    mus.push_back(random_matrix(2000, 16, rng));
    Matrix s(2000, 16);
    for (double& v : s.data) v = 0.1 + rng.uniform();
    sigmas.push_back(s);
  }
  const std::vector<double> w = {0.2, 0.3, 0.5};
  Matrix mu, sigma, mu_ref, sigma_ref;
  kernels::wb_diag_batch(mus, sigmas, w, mu, sigma);
  kernels::serial::wb_diag_batch(mus, sigmas, w, mu_ref, sigma_ref);
  CHECK(mu == mu_ref);
  CHECK(sigma == sigma_ref);
  CHECK(mu(7, 3) == doctest::Approx(0.2 * mus[0](7, 3) + 0.3 * mus[1](7, 3) + 0.5 * mus[2](7, 3)));
  CHECK(sigma(7, 3) ==
        doctest::Approx(0.2 * sigmas[0](7, 3) + 0.3 * sigmas[1](7, 3) + 0.5 * sigmas[2](7, 3)));

  const std::vector<double> alpha = {1.0, 0.5, 2.0};
  kernels::poe_batch(mus, sigmas, alpha, mu, sigma);
  kernels::serial::poe_batch(mus, sigmas, alpha, mu_ref, sigma_ref);
  CHECK(mu == mu_ref);
  CHECK(sigma == sigma_ref);
  double prec = 0.0, weighted = 0.0;
  for (int m = 0; m < 3; ++m) {
    const double p = alpha[m] / (sigmas[m](9, 1) * sigmas[m](9, 1));
    prec += p;
    weighted += p * mus[m](9, 1);
  }
  CHECK(sigma(9, 1) == doctest::Approx(1.0 / std::sqrt(prec)));
  CHECK(mu(9, 1) == doctest::Approx(weighted / prec));
}
