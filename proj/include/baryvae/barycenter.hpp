#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "baryvae/errors.hpp"
#include "baryvae/gaussian.hpp"

namespace baryvae {

// Members {q_m} with simplex weights {lambda_m}: nonempty, equal dimensions,
// lambda_m >= 0 and sum lambda_m = 1 within 1e-12.
template <class G>
class WeightedFamily {
 public:
  WeightedFamily(std::vector<G> members, std::vector<double> weights)
      : members_(std::move(members)), weights_(std::move(weights)) {
    if (members_.empty()) throw InvalidArgument("WeightedFamily: no members");
    if (weights_.size() != members_.size()) {
      throw DimensionError("WeightedFamily: weight count does not match members");
    }
    double total = 0.0;
    for (std::size_t m = 0; m < members_.size(); ++m) {
      if (members_[m].dim() != members_.front().dim()) {
        throw DimensionError("WeightedFamily: members differ in dimension");
      }
      if (!(weights_[m] >= 0.0)) throw InvalidArgument("WeightedFamily: negative weight");
      total += weights_[m];
    }
    if (std::abs(total - 1.0) > kWeightSumTolerance) {
      throw InvalidArgument("WeightedFamily: weights do not sum to 1");
    }
  }

  static WeightedFamily uniform(std::vector<G> members) {
    const std::size_t m = members.size();
    if (m == 0) throw InvalidArgument("WeightedFamily: no members");
    return WeightedFamily(std::move(members),
                          std::vector<double>(m, 1.0 / static_cast<double>(m)));
  }

  std::size_t size() const { return members_.size(); }
  std::size_t dim() const { return members_.front().dim(); }
  const std::vector<G>& members() const { return members_; }
  const G& operator[](std::size_t m) const { return members_[m]; }
  std::span<const double> weights() const { return weights_; }

 private:
  std::vector<G> members_;
  std::vector<double> weights_;
};

using DiagFamily = WeightedFamily<DiagGaussian>;
using FullFamily = WeightedFamily<FullGaussian>;

// Bitmask over modalities; bit m set means modality m is present.
struct SubsetIndex {
  std::uint32_t mask = 0;

  static SubsetIndex full(std::size_t num_modalities) {
    return {static_cast<std::uint32_t>((1ULL << num_modalities) - 1)};
  }
  static SubsetIndex single(std::size_t m) {
    return {static_cast<std::uint32_t>(1U << m)};
  }

  bool empty() const { return mask == 0; }
  bool contains(std::size_t m) const { return (mask >> m) & 1U; }
  std::size_t size() const;
  std::vector<std::size_t> members() const;

  friend bool operator==(SubsetIndex, SubsetIndex) = default;
};

inline constexpr std::size_t kMaxModalities = 16;

// All 2^m subsets in ascending bitmask order, from the empty set to the full
// set.
std::vector<SubsetIndex> subsets(std::size_t m);

// Normalized product prod_m q_m^{alpha_m}: precisions add with weights alpha.
// alpha = 1 is the usual product of experts; alpha = lambda is the
// reverse-KL barycenter.
DiagGaussian poe(const DiagFamily& family, std::span<const double> exponents);

// sum_m lambda_m q_m, the forward-KL barycenter.
GaussianMixture moe(const DiagFamily& family);

// Diagonal Bures-Wasserstein barycenter: weighted means of mu and sigma.
DiagGaussian wb_diag(const DiagFamily& family);

struct FixedPointStats {
  std::size_t iterations = 0;
  double residual = 0.0;
};

inline constexpr double kFixedPointTolerance = 1e-9;
inline constexpr std::size_t kFixedPointMaxIter = 200;

// Full-covariance Bures-Wasserstein barycenter by the fixed-point iteration
// S <- sum_m lambda_m (S^1/2 S_m S^1/2)^1/2, started from the arithmetic mean.
// The returned covariance satisfies
//   |S - sum_m lambda_m (S^1/2 S_m S^1/2)^1/2|_F <= tol (1 + |S|_F).
// Throws NumericError with the final residual and iteration count otherwise.
FullGaussian wb_full(const FullFamily& family, double tol = kFixedPointTolerance,
                     std::size_t max_iter = kFixedPointMaxIter,
                     FixedPointStats* stats = nullptr);

// Mixture over the powerset with equal weights 2^-M. Non-empty subsets use
// the unit-exponent product of their members; the empty subset is the prior.
GaussianMixture mopoe(const DiagFamily& family, const DiagGaussian& prior);

// Mixture over the powerset with equal weights 2^-M. Non-empty subsets use
// wb_diag with uniform within-subset weights; the empty subset is the prior.
GaussianMixture mwb(const DiagFamily& family, const DiagGaussian& prior);

enum class Divergence { kForwardKl, kReverseKl, kW2sq };

// sum_m lambda_m d(q_m, q). Forward KL is D(q_m || q), reverse is D(q || q_m).
double barycenter_objective(const DiagFamily& family, const DiagGaussian& q,
                            Divergence divergence);

// Subfamily restricted to the modalities in `subset`, with uniform weights.
DiagFamily restrict_uniform(const DiagFamily& family, SubsetIndex subset);

}  // namespace baryvae
