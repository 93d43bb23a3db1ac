#include "doctest.h"

#include <cmath>
#include <numbers>

#include "baryvae/errors.hpp"
#include "baryvae/gaussian.hpp"
#include "support.hpp"

using namespace baryvae;
using testing::Gen;

namespace {

DiagGaussian g1(double mu, double sigma) { return DiagGaussian({mu}, {sigma}); }

}  // namespace

TEST_CASE("DiagGaussian enforces its invariants") {
  CHECK_THROWS_AS(DiagGaussian({0.0, 1.0}, {1.0}), DimensionError);
  CHECK_THROWS_AS(DiagGaussian({0.0}, {-1.0}), InvalidArgument);
  CHECK_THROWS_AS(DiagGaussian({0.0}, {NAN}), InvalidArgument);
  CHECK(DiagGaussian({0.0}, {0.0}).sigma()[0] == kSigmaFloor);
  CHECK(DiagGaussian({0.0}, {1e-9}).sigma()[0] == kSigmaFloor);
  const auto s = DiagGaussian::standard(3);
  CHECK(s.dim() == 3);
  CHECK(s.sigma()[2] == 1.0);
}

TEST_CASE("FullGaussian and mixtures validate") {
  const std::vector<double> bad = {1.0, 1e-14};
  CHECK_THROWS_AS(FullGaussian({0.0, 0.0}, SymMatrix::diagonal(bad)), NotPsdError);
  CHECK_THROWS_AS(FullGaussian({0.0}, SymMatrix::identity(2)), DimensionError);
  CHECK_THROWS_AS(GaussianMixture({g1(0, 1), g1(1, 1)}, {0.5, 0.6}), InvalidArgument);
  CHECK_THROWS_AS(GaussianMixture({g1(0, 1), DiagGaussian::standard(2)}, {0.5, 0.5}),
                  DimensionError);
  const GaussianMixture mix({g1(0, 1), g1(4, 1)}, {0.25, 0.75});
  CHECK(mix.mean()[0] == 3.0);
}

TEST_CASE("kl_diag examples against quadrature") {
  CHECK(kl_diag(g1(0, 1), g1(0, 1)) == 0.0);
  const double q1 = testing::kl_quadrature(2.0, 1.0, 0.0, 1.0);
  CHECK(q1 == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(kl_diag(g1(2, 1), g1(0, 1)) == doctest::Approx(q1).epsilon(1e-9));
  const double q2 = testing::kl_quadrature(0.0, 2.0, 0.0, 1.0);
  CHECK(q2 == doctest::Approx(0.80685).epsilon(1e-5));
  CHECK(kl_diag(g1(0, 2), g1(0, 1)) == doctest::Approx(q2).epsilon(1e-9));
  CHECK_THROWS_AS(kl_diag(g1(0, 1), DiagGaussian::standard(2)), DimensionError);
}

TEST_CASE("property: kl_diag is nonnegative and asymmetric") {
  Gen gen(21);
  int asymmetric = 0;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t d = gen.size(1, 6);
    const auto p = gen.diag(d), q = gen.diag(d);
    CHECK(kl_diag(p, q) >= 0.0);
    CHECK(kl_diag(p, p) == 0.0);
    if (std::abs(kl_diag(p, q) - kl_diag(q, p)) > 1e-6) ++asymmetric;
  }
  CHECK(asymmetric > 900);
}

TEST_CASE("w2sq_diag examples") {
  CHECK(w2sq_diag(g1(0, 1), g1(0, 1)) == 0.0);
  CHECK(w2sq_diag(g1(2, 1), g1(0, 1)) == 4.0);
  CHECK(w2sq_diag(g1(0, 1), g1(0, 3)) == 4.0);
}

TEST_CASE("property: sqrt(w2sq_diag) is a metric") {
  Gen gen(22);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t d = gen.size(1, 6);
    const auto p = gen.diag(d), q = gen.diag(d), r = gen.diag(d);
    const double pq = std::sqrt(w2sq_diag(p, q));
    CHECK(w2sq_diag(p, q) == w2sq_diag(q, p));
    CHECK(pq > 0.0);
    CHECK(w2sq_diag(p, p) == 0.0);
    CHECK(pq <= std::sqrt(w2sq_diag(p, r)) + std::sqrt(w2sq_diag(r, q)) + 1e-9);
  }
}

TEST_CASE("w2sq_full examples") {
  Gen gen(23);
  const FullGaussian p({1.0, 2.0}, gen.spd(2));
  CHECK(w2sq_full(p, p) == doctest::Approx(0.0).epsilon(1e-10));
  const std::vector<double> d1 = {1.0, 4.0}, d2 = {4.0, 1.0};
  const FullGaussian a({0.0, 0.0}, SymMatrix::diagonal(d1));
  const FullGaussian b({0.0, 0.0}, SymMatrix::diagonal(d2));
  CHECK(w2sq_full(a, b) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("property: w2sq_full is symmetric and reduces on commuting pairs") {
  Gen gen(24);
  for (int i = 0; i < 300; ++i) {
    const std::size_t d = gen.size(1, 8);
    std::vector<double> mu1(d), mu2(d);
    for (std::size_t k = 0; k < d; ++k) {
      mu1[k] = gen.uniform(-2, 2);
      mu2[k] = gen.uniform(-2, 2);
    }
    const FullGaussian p(mu1, gen.spd(d)), q(mu2, gen.spd(d));
    CHECK(std::abs(w2sq_full(p, q) - w2sq_full(q, p)) <= 1e-8);
    CHECK(w2sq_full(p, q) >= 0.0);

    // Shared eigenbasis: the distance is the per-axis diagonal formula.
    const auto basis = gen.orthogonal(d);
    std::vector<double> e1(d), e2(d);
    double expect = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      e1[k] = gen.uniform(0.1, 4.0);
      e2[k] = gen.uniform(0.1, 4.0);
      expect += (mu1[k] - mu2[k]) * (mu1[k] - mu2[k]) +
                (std::sqrt(e1[k]) - std::sqrt(e2[k])) * (std::sqrt(e1[k]) - std::sqrt(e2[k]));
    }
    const FullGaussian c1(mu1, Gen::conjugate(basis, e1)), c2(mu2, Gen::conjugate(basis, e2));
    CHECK(w2sq_full(c1, c2) == doctest::Approx(expect).epsilon(1e-8));

    const auto a = gen.diag(d), b = gen.diag(d);
    CHECK(std::abs(w2sq_full(FullGaussian::from_diag(a), FullGaussian::from_diag(b)) -
                   w2sq_diag(a, b)) <= 1e-8);
  }
}

TEST_CASE("quantile oracle") {
  const auto n01 = as_distribution(g1(0, 1));
  CHECK(w2sq_1d_quantile(n01, n01) <= 1e-8);
  CHECK(w2sq_1d_quantile(as_distribution(g1(2, 1)), n01) == doctest::Approx(4.0).epsilon(1e-4));
  const GaussianMixture mix({g1(-2, 1), g1(2, 1)}, {0.5, 0.5});
  const double ab = w2sq_1d_quantile(as_distribution(mix), n01);
  const double ba = w2sq_1d_quantile(n01, as_distribution(mix));
  CHECK(std::isfinite(ab));
  CHECK(ab > 0.0);
  CHECK(ab == doctest::Approx(ba).epsilon(1e-10));

  Distribution1D broken = n01;
  broken.cdf = [](double x) { return 0.5 + 0.4 * std::sin(x); };
  broken.sf = [](double x) { return 0.5 - 0.4 * std::sin(x); };
  CHECK_THROWS_AS(w2sq_1d_quantile(broken, n01), NumericError);
}

TEST_CASE("log_density") {
  const std::vector<double> zero = {0.0};
  CHECK(log_density(g1(0, 1), zero) ==
        doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-15));
  const GaussianMixture twin({g1(0.3, 1.7), g1(0.3, 1.7)}, {0.5, 0.5});
  const std::vector<double> x = {1.1};
  CHECK(log_density(twin, x) == doctest::Approx(log_density(g1(0.3, 1.7), x)).epsilon(1e-14));

  const GaussianMixture mix({g1(-3, 0.5), g1(1, 2.0), g1(4, 1.0)}, {0.2, 0.5, 0.3});
  // Trapezoid rule on [-30, 30].
  const std::size_t n = 600000;
  const double h = 60.0 / static_cast<double>(n);
  double integral = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    const std::vector<double> pt = {-30.0 + h * static_cast<double>(i)};
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    integral += w * std::exp(log_density(mix, pt));
  }
  CHECK(integral * h == doctest::Approx(1.0).epsilon(1e-6));

  // Far tails stay finite instead of collapsing to -inf or NaN.
  const std::vector<double> far = {1e3};
  CHECK(std::isfinite(log_density(mix, far)));
  CHECK_THROWS_AS(log_density(mix, std::vector<double>{0.0, 1.0}), DimensionError);
}

TEST_CASE("sample") {
  const DiagGaussian g({1.0, -2.0}, {0.5, 3.0});
  const std::vector<double> zero = {0.0, 0.0};
  CHECK(sample(g, zero) == std::vector<double>{1.0, -2.0});
  const std::vector<double> eps = {0.7, -1.3};
  CHECK(sample(DiagGaussian::standard(2), eps) == eps);
  CHECK_THROWS_AS(sample(g, std::vector<double>{1.0}), DimensionError);

  CounterRng rng(5, 1);
  const std::size_t n = 100000;
  double s0 = 0.0, s1 = 0.0;
  std::vector<double> noise(2);
  for (std::size_t i = 0; i < n; ++i) {
    rng.fill_normal(noise);
    const auto x = sample(g, noise);
    s0 += x[0];
    s1 += x[1];
  }
  const double root_n = std::sqrt(static_cast<double>(n));
  CHECK(std::abs(s0 / n - 1.0) <= 4.0 * 0.5 / root_n);
  CHECK(std::abs(s1 / n + 2.0) <= 4.0 * 3.0 / root_n);
}

TEST_CASE("entropy_diag") {
  CHECK(entropy_diag(g1(0, 1)) ==
        doctest::Approx(0.5 * (1.0 + std::log(2.0 * std::numbers::pi))).epsilon(1e-15));
  const DiagGaussian a({0.0, 1.0}, {0.7, 1.3}), b({0.0, 1.0}, {1.4, 2.6});
  CHECK(entropy_diag(b) - entropy_diag(a) == doctest::Approx(2.0 * std::log(2.0)));
  const double quad = -testing::simpson(
      [](double x) {
        const double p = testing::normal_pdf(x, 0.4, 1.7);
        return p * testing::normal_log_pdf(x, 0.4, 1.7);
      },
      -30.0, 30.0, 200000);
  CHECK(std::abs(entropy_diag(g1(0.4, 1.7)) - quad) <= 1e-6);
}

TEST_CASE("property: MoE density covers each expert's mode") {
  const double lambda = 0.5;
  const DiagGaussian a = g1(-4, 1), b = g1(4, 1);
  const GaussianMixture mix({a, b}, {lambda, lambda});
  const double peak = testing::normal_pdf(0.0, 0.0, 1.0);
  for (double m : {-4.0, 4.0}) {
    const std::vector<double> x = {m};
    CHECK(std::exp(log_density(mix, x)) >= lambda * peak);
  }
}
