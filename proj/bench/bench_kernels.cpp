// Serial reference kernels vs the OpenMP versions: timing and bitwise agreement.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "baryvae/kernels.hpp"
#include "baryvae/matrix.hpp"
#include "baryvae/rng.hpp"

using namespace baryvae;

namespace {

double seconds_per_call(const std::function<void()>& f, double budget) {
  using clock = std::chrono::steady_clock;
  std::size_t calls = 0;
  const auto start = clock::now();
  double elapsed = 0.0;
  do {
    f();
    ++calls;
    elapsed = std::chrono::duration<double>(clock::now() - start).count();
  } while (elapsed < budget);
  return elapsed / static_cast<double>(calls);
}

Matrix random_matrix(std::size_t r, std::size_t c, CounterRng& rng, double shift = 0.0) {
  Matrix m(r, c);
  for (double& v : m.data) v = rng.uniform() + shift;
  return m;
}

bool report(const char* name, std::size_t n, double serial, double parallel, bool same) {
  std::printf("%-14s %6zu %12.1f %12.1f %8.2f %s\n", name, n, serial * 1e6, parallel * 1e6,
              serial / parallel, same ? "identical" : "MISMATCH");
  return same;
}

}  // namespace

int main(int argc, char** argv) {
  const bool quick = argc > 1 && std::strcmp(argv[1], "--quick") == 0;
  const double budget = quick ? 0.01 : 0.2;
  const std::vector<std::size_t> sizes = quick ? std::vector<std::size_t>{64, 256}
                                               : std::vector<std::size_t>{64, 256, 512, 1024};
  CounterRng rng(7, 0);
  bool ok = true;
  std::printf("threads: %d\n", kernels::max_threads());
  std::printf("%-14s %6s %12s %12s %8s\n", "kernel", "n", "serial_us", "openmp_us", "speedup");

  for (std::size_t n : sizes) {
    const Matrix a = random_matrix(n, n, rng), b = random_matrix(n, n, rng);
    Matrix c1(n, n), c2(n, n);
    const double ts = seconds_per_call(
        [&] { kernels::serial::matmul(a.data, b.data, c1.data, n, n, n); }, budget);
    const double tp =
        seconds_per_call([&] { kernels::matmul(a.data, b.data, c2.data, n, n, n); }, budget);
    ok &= report("matmul", n, ts, tp, c1 == c2);

    const double ts_tn = seconds_per_call(
        [&] { kernels::serial::matmul_tn(a.data, b.data, c1.data, n, n, n); }, budget);
    const double tp_tn = seconds_per_call(
        [&] { kernels::matmul_tn(a.data, b.data, c2.data, n, n, n); }, budget);
    ok &= report("matmul_tn", n, ts_tn, tp_tn, c1 == c2);

    const double ts_nt = seconds_per_call(
        [&] { kernels::serial::matmul_nt(a.data, b.data, c1.data, n, n, n); }, budget);
    const double tp_nt = seconds_per_call(
        [&] { kernels::matmul_nt(a.data, b.data, c2.data, n, n, n); }, budget);
    ok &= report("matmul_nt", n, ts_nt, tp_nt, c1 == c2);
  }

  for (std::size_t rows : sizes) {
    const std::size_t m = 8, d = 64;
    std::vector<Matrix> mus, sigmas;
    for (std::size_t k = 0; k < m; ++k) {
      mus.push_back(random_matrix(rows * 8, d, rng));
      sigmas.push_back(random_matrix(rows * 8, d, rng, 0.1));
    }
    const std::vector<double> w(m, 1.0 / static_cast<double>(m));
    Matrix mu1, s1, mu2, s2;
    const double ts = seconds_per_call(
        [&] { kernels::serial::wb_diag_batch(mus, sigmas, w, mu1, s1); }, budget);
    const double tp =
        seconds_per_call([&] { kernels::wb_diag_batch(mus, sigmas, w, mu2, s2); }, budget);
    ok &= report("wb_diag_batch", rows * 8, ts, tp, mu1 == mu2 && s1 == s2);

    const std::vector<double> ones(m, 1.0);
    const double ts_p = seconds_per_call(
        [&] { kernels::serial::poe_batch(mus, sigmas, ones, mu1, s1); }, budget);
    const double tp_p =
        seconds_per_call([&] { kernels::poe_batch(mus, sigmas, ones, mu2, s2); }, budget);
    ok &= report("poe_batch", rows * 8, ts_p, tp_p, mu1 == mu2 && s1 == s2);
  }
  return ok ? 0 : 1;
}
