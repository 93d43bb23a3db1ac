#include "baryvae/barycenter.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace baryvae {

std::size_t SubsetIndex::size() const { return std::popcount(mask); }

std::vector<std::size_t> SubsetIndex::members() const {
  std::vector<std::size_t> out;
  for (std::size_t m = 0; m < 32; ++m) {
    if (contains(m)) out.push_back(m);
  }
  return out;
}

std::vector<SubsetIndex> subsets(std::size_t m) {
  if (m < 1 || m > kMaxModalities) {
    throw InvalidArgument("subsets: modality count " + std::to_string(m) +
                          " outside [1, 16]");
  }
  std::vector<SubsetIndex> out(std::size_t{1} << m);
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k].mask = static_cast<std::uint32_t>(k);
  }
  return out;
}

DiagGaussian poe(const DiagFamily& family, std::span<const double> exponents) {
  if (exponents.size() != family.size()) {
    throw DimensionError("poe: exponent count does not match members");
  }
  bool any = false;
  for (double a : exponents) {
    if (!(a >= 0.0)) throw InvalidArgument("poe: negative exponent");
    any = any || a > 0.0;
  }
  if (!any) throw InvalidArgument("poe: all exponents are zero");

  const std::size_t d = family.dim();
  std::vector<double> mean(d), sigma(d);
  for (std::size_t i = 0; i < d; ++i) {
    double precision = 0.0;
    double weighted = 0.0;
    for (std::size_t m = 0; m < family.size(); ++m) {
      const double s = family[m].sigma()[i];
      const double p = exponents[m] / (s * s);
      precision += p;
      weighted += p * family[m].mean()[i];
    }
    mean[i] = weighted / precision;
    sigma[i] = std::sqrt(1.0 / precision);
  }
  return DiagGaussian(std::move(mean), std::move(sigma));
}

GaussianMixture moe(const DiagFamily& family) {
  return GaussianMixture(family.members(),
                         {family.weights().begin(), family.weights().end()});
}

DiagGaussian wb_diag(const DiagFamily& family) {
  const std::size_t d = family.dim();
  std::vector<double> mean(d, 0.0), sigma(d, 0.0);
  for (std::size_t m = 0; m < family.size(); ++m) {
    const double w = family.weights()[m];
    for (std::size_t i = 0; i < d; ++i) {
      mean[i] += w * family[m].mean()[i];
      sigma[i] += w * family[m].sigma()[i];
    }
  }
  return DiagGaussian(std::move(mean), std::move(sigma));
}

namespace {

SymMatrix fixed_point_map(const FullFamily& family, const SymMatrix& cov) {
  const SymMatrix root = sqrtm_psd(cov);
  SymMatrix next(cov.dim());
  for (std::size_t m = 0; m < family.size(); ++m) {
    next += family.weights()[m] * sqrtm_psd(congruence(root, family[m].cov()));
  }
  return next;
}

}  // namespace

FullGaussian wb_full(const FullFamily& family, double tol, std::size_t max_iter,
                     FixedPointStats* stats) {
  if (!(tol > 0.0)) throw InvalidArgument("wb_full: tolerance must be positive");
  const std::size_t d = family.dim();
  std::vector<double> mean(d, 0.0);
  SymMatrix cov(d);
  for (std::size_t m = 0; m < family.size(); ++m) {
    const double w = family.weights()[m];
    for (std::size_t i = 0; i < d; ++i) mean[i] += w * family[m].mean()[i];
    cov += w * family[m].cov();
  }

  // Once within tolerance, keep iterating while the residual still shrinks
  // clearly, so the result sits near rounding level rather than at the edge.
  constexpr double kRoundoff = 64.0 * std::numeric_limits<double>::epsilon();
  std::optional<SymMatrix> best;
  double best_residual = 0.0;
  std::size_t best_iter = 0;
  double residual = 0.0;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    SymMatrix next = fixed_point_map(family, cov);
    residual = (cov - next).frobenius_norm();
    const double scale = 1.0 + cov.frobenius_norm();
    if (residual <= tol * scale) {
      const bool improving = !best || residual < 0.9 * best_residual;
      if (!best || residual < best_residual) {
        best = cov;
        best_residual = residual;
        best_iter = it;
      }
      if (!improving || residual <= kRoundoff * scale) break;
    } else if (best) {
      break;
    }
    cov = std::move(next);
  }
  if (best) {
    if (stats) *stats = {best_iter, best_residual};
    return FullGaussian(std::move(mean), std::move(*best));
  }
  throw NumericError("wb_full: fixed point did not converge after " +
                         std::to_string(max_iter) + " iterations (residual " +
                         std::to_string(residual) + ")",
                     residual, max_iter);
}

DiagFamily restrict_uniform(const DiagFamily& family, SubsetIndex subset) {
  std::vector<DiagGaussian> members;
  for (std::size_t m : subset.members()) {
    if (m >= family.size()) throw DimensionError("subset refers to a missing member");
    members.push_back(family[m]);
  }
  return DiagFamily::uniform(std::move(members));
}

namespace {

template <class Aggregate>
GaussianMixture powerset_mixture(const DiagFamily& family,
                                 const DiagGaussian& prior, Aggregate&& agg) {
  if (prior.dim() != family.dim()) throw DimensionError("prior dimension mismatch");
  const auto all = subsets(family.size());
  const double w = 1.0 / static_cast<double>(all.size());
  std::vector<DiagGaussian> components;
  components.reserve(all.size());
  for (SubsetIndex s : all) {
    if (s.empty()) {
      components.push_back(prior);
    } else {
      components.push_back(agg(restrict_uniform(family, s)));
    }
  }
  return GaussianMixture(std::move(components), std::vector<double>(all.size(), w));
}

}  // namespace

GaussianMixture mopoe(const DiagFamily& family, const DiagGaussian& prior) {
  return powerset_mixture(family, prior, [](const DiagFamily& sub) {
    const std::vector<double> ones(sub.size(), 1.0);
    return poe(sub, ones);
  });
}

GaussianMixture mwb(const DiagFamily& family, const DiagGaussian& prior) {
  return powerset_mixture(family, prior,
                          [](const DiagFamily& sub) { return wb_diag(sub); });
}

double barycenter_objective(const DiagFamily& family, const DiagGaussian& q,
                            Divergence divergence) {
  if (q.dim() != family.dim()) {
    throw DimensionError("barycenter_objective: dimension mismatch");
  }
  double total = 0.0;
  for (std::size_t m = 0; m < family.size(); ++m) {
    double d = 0.0;
    switch (divergence) {
      case Divergence::kForwardKl: d = kl_diag(family[m], q); break;
      case Divergence::kReverseKl: d = kl_diag(q, family[m]); break;
      case Divergence::kW2sq: d = w2sq_diag(family[m], q); break;
    }
    total += family.weights()[m] * d;
  }
  return total;
}

}  // namespace baryvae
