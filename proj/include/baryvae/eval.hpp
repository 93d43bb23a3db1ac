#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "baryvae/barycenter.hpp"
#include "baryvae/data.hpp"
#include "baryvae/matrix.hpp"
#include "baryvae/mmvae.hpp"

namespace baryvae {

inline constexpr double kProbeL2 = 1e-3;
inline constexpr std::size_t kProbeIterations = 500;
inline constexpr std::size_t kProbeSamples = 500;
inline constexpr std::size_t kDefaultImportanceSamples = 512;

// Multinomial logistic regression on standardized features.
struct LinearProbe {
  Matrix weight;              // classes x dim
  std::vector<double> bias;   // classes
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  std::size_t trained_on = 0;

  std::size_t num_classes() const { return weight.rows; }
  std::size_t dim() const { return weight.cols; }
  // Argmax class; ties go to the lower id.
  int predict(std::span<const double> x) const;
};

// Full-batch gradient descent with a fixed step from the data's curvature
// bound. Labels must lie in [0, num_classes) with at least two classes present.
LinearProbe fit_linear_probe(const Matrix& features, const std::vector<int>& labels,
                             int num_classes, double l2 = kProbeL2,
                             std::size_t iterations = kProbeIterations);

double latent_accuracy(const LinearProbe& probe, const Matrix& features,
                       const std::vector<int>& labels);

// Per-modality classifiers on raw pixels, fit on at most `max_samples` examples.
std::vector<LinearProbe> fit_reference_classifiers(const MultimodalDataset& data,
                                                   std::size_t max_samples = kProbeSamples);

// Fraction of target-modality generations, conditioned on `source`, that the
// target's reference classifier assigns to the source example's label. Uses
// the first `num_samples` examples of a seeded permutation of `data`.
double coherence(const MultimodalVae& vae, std::span<const LinearProbe> reference,
                 const MultimodalDataset& data, SubsetIndex source, std::size_t target,
                 std::size_t num_samples, std::uint64_t seed);

// Mean over rows of the importance-sampled estimate
//   log (1/K) sum_k p(X | z_k) p(z_k) / q(z_k | X_subset),  z_k ~ q,
// where p(X | z) covers every modality.
double test_log_likelihood(const MultimodalVae& vae, std::span<const Matrix> batch,
                           SubsetIndex subset, std::size_t k, std::uint64_t seed);

struct EvalOptions {
  std::size_t probe_samples = kProbeSamples;
  std::size_t coherence_samples = 200;
  std::size_t likelihood_examples = 50;
  std::size_t importance_samples = kDefaultImportanceSamples;
  std::uint64_t seed = 0;
};

struct SubsetAccuracy {
  SubsetIndex subset;
  double accuracy = 0.0;
};

struct CoherenceEntry {
  SubsetIndex source;
  std::size_t target = 0;
  double coherence = 0.0;
};

struct LikelihoodEntry {
  SubsetIndex subset;
  double log_likelihood = 0.0;
};

struct EvalReport {
  std::size_t probe_train_count = 0;
  std::size_t importance_samples = 0;
  std::vector<SubsetAccuracy> accuracy;      // every non-empty subset
  std::vector<CoherenceEntry> coherence;     // targets outside the source
  std::vector<LikelihoodEntry> likelihood;   // every non-empty subset
};

// Probes are fit on latent means of `train` and scored on `test`.
EvalReport evaluate(const MultimodalVae& vae, const MultimodalDataset& train,
                    const MultimodalDataset& test, const EvalOptions& options);

// Mean accuracy over subsets of each size; index 0 is size 1.
std::vector<double> accuracy_by_subset_size(const EvalReport& report,
                                            std::size_t num_modalities);

}  // namespace baryvae
