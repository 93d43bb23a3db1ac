#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "baryvae/mmvae.hpp"

namespace testing {

// z ~ N(0, 1), x | z ~ N(a z + b, s^2) with s the fixed decoder sigma, so
// p(x) = N(b, a^2 + s^2) and the posterior is Gaussian with an affine mean.
struct LinearGaussian {
  double a = 1.3;
  double b = 0.2;

  double s() const { return baryvae::kGaussianLikelihoodSigma; }
  double log_marginal(double x) const {
    const double v = a * a + s() * s();
    return -0.5 * std::log(2.0 * std::numbers::pi * v) - 0.5 * (x - b) * (x - b) / v;
  }
  double posterior_precision() const { return 1.0 + a * a / (s() * s()); }
  double posterior_mean(double x) const {
    return a / (s() * s()) * (x - b) / posterior_precision();
  }
  double posterior_sigma() const { return 1.0 / std::sqrt(posterior_precision()); }

  // E_q[log p(x | z)] - KL(q || N(0, 1)) for q = N(m, t^2).
  double elbo(double x, double m, double t) const {
    const double r = x - b - a * m;
    const double rec = -0.5 * std::log(2.0 * std::numbers::pi * s() * s()) -
                       (r * r + a * a * t * t) / (2.0 * s() * s());
    const double kl = 0.5 * (m * m + t * t - 1.0 - 2.0 * std::log(t));
    return rec - kl;
  }

  // Single-modality VAE whose decoder is the model above. The encoder is the
  // exact posterior with its mean shifted by `mean_shift` and its sigma
  // scaled by `sigma_scale`.
  baryvae::MultimodalVae vae(double mean_shift = 0.0, double sigma_scale = 1.0) const {
    baryvae::ModelConfig cfg;
    cfg.input_dims = {1};
    cfg.latent_dim = 1;
    cfg.hidden = {};
    cfg.likelihood = baryvae::Likelihood::kGaussian;
    cfg.aggregation = baryvae::Aggregation::kWb;
    baryvae::MultimodalVae out(cfg);
    auto& p = out.params();
    const double gain = a / (s() * s()) / posterior_precision();
    const double t = posterior_sigma() * sigma_scale - 1e-6;
    p.value("enc0.mu.w").data = {gain};
    p.value("enc0.mu.b").data = {-gain * b + mean_shift};
    p.value("enc0.sigma.w").data = {0.0};
    p.value("enc0.sigma.b").data = {std::log(std::expm1(t))};
    p.value("dec0.out.w").data = {a};
    p.value("dec0.out.b").data = {b};
    return out;
  }
};

}  // namespace testing
