#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "baryvae/barycenter.hpp"
#include "baryvae/data.hpp"
#include "baryvae/diffgraph.hpp"
#include "baryvae/gaussian.hpp"
#include "baryvae/matrix.hpp"
#include "baryvae/rng.hpp"

namespace baryvae {

enum class Likelihood { kBernoulli, kGaussian };
enum class Aggregation { kPoe, kMoe, kMopoe, kWb, kMwb };
enum class Activation { kTanh, kRelu };

inline constexpr double kGaussianLikelihoodSigma = 0.75;

std::string to_string(Likelihood v);
std::string to_string(Aggregation v);
std::string to_string(Activation v);
Likelihood parse_likelihood(const std::string& s);
Aggregation parse_aggregation(const std::string& s);
Activation parse_activation(const std::string& s);
bool is_mixture(Aggregation method);

struct ModelConfig {
  std::vector<std::size_t> input_dims;  // one entry per modality
  std::size_t latent_dim = 16;
  std::vector<std::size_t> hidden = {128, 128};
  Likelihood likelihood = Likelihood::kBernoulli;
  Aggregation aggregation = Aggregation::kMwb;
  Activation activation = Activation::kTanh;
  double beta = 2.5;
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;

  std::size_t num_modalities() const { return input_dims.size(); }
  void validate() const;
};

// Aggregated posterior: a single Gaussian (poe, wb) or a mixture (moe, mopoe, mwb).
class JointPosterior {
 public:
  explicit JointPosterior(DiagGaussian g) : value_(std::move(g)) {}
  explicit JointPosterior(GaussianMixture m) : value_(std::move(m)) {}

  bool is_mixture() const { return std::holds_alternative<GaussianMixture>(value_); }
  const DiagGaussian& gaussian() const { return std::get<DiagGaussian>(value_); }
  const GaussianMixture& mixture() const { return std::get<GaussianMixture>(value_); }

  std::size_t dim() const;
  // Mixture mean is the weight-averaged component mean.
  std::vector<double> mean() const;
  double log_density(std::span<const double> x) const;
  // Ancestral draw.
  std::vector<double> draw(CounterRng& rng) const;

 private:
  std::variant<DiagGaussian, GaussianMixture> value_;
};

// Single-Gaussian methods need a non-empty subset. Mixture methods take the
// powerset within `subset`; poe uses unit exponents and wb/moe uniform weights
// over the present modalities.
JointPosterior aggregate(std::span<const DiagGaussian> per_modality, Aggregation method,
                         SubsetIndex subset);

// Encoders/decoders with parameters in a ParamStore:
//   enc<m>.l<j>, enc<m>.mu, enc<m>.sigma, dec<m>.l<j>, dec<m>.out
class MultimodalVae {
 public:
  explicit MultimodalVae(ModelConfig config);
  MultimodalVae(ModelConfig config, ad::ParamStore params);

  const ModelConfig& config() const { return config_; }
  const ad::ParamStore& params() const { return params_; }
  ad::ParamStore& params() { return params_; }
  DiagGaussian prior() const { return DiagGaussian::standard(config_.latent_dim); }

 private:
  ModelConfig config_;
  ad::ParamStore params_;
};

// Expected parameter names and shapes for a config, in creation order.
std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> parameter_layout(
    const ModelConfig& config);

// --- graph building blocks -------------------------------------------------

struct GaussianNode {
  ad::Value mu;
  ad::Value sigma;
};

struct ComponentNode {
  GaussianNode g;
  double weight = 0.0;
  bool is_prior = false;
};

GaussianNode encode_graph(ad::Tape& tape, const MultimodalVae& vae, std::size_t m,
                          ad::Value x);
ad::Value decode_graph(ad::Tape& tape, const MultimodalVae& vae, std::size_t m,
                       ad::Value z);
// Per-row log p(x | decoder output), shape rows x 1.
ad::Value log_likelihood_rows(ad::Value x, ad::Value decoded, Likelihood likelihood);
// In-graph version of aggregate(); `posteriors` is indexed by modality and
// only entries in `subset` are read.
std::vector<ComponentNode> aggregate_graph(ad::Tape& tape,
                                           std::span<const GaussianNode> posteriors,
                                           Aggregation method, SubsetIndex subset);

// --- ELBO ---------------------------------------------------------------------

// Number of joint-posterior components: 1 for poe/wb, |S| for moe, 2^|S| for
// mopoe/mwb.
std::size_t num_components(Aggregation method, SubsetIndex subset);

// Standard-normal draws, one batch x latent matrix per component.
struct ElboNoise {
  std::vector<Matrix> eps;
};
ElboNoise draw_elbo_noise(Aggregation method, SubsetIndex subset, std::size_t batch,
                          std::size_t latent_dim, CounterRng& rng);

struct ElboGraph {
  ad::Value loss;
  std::vector<ad::Value> recon;  // per modality; absent modalities left empty
  ad::Value kl;
};

// loss = sum_m recon_m + beta * kl, all averaged over the batch, where
// recon_m = -E[log p(x_m | z)] and kl is KL(q || prior) for single Gaussians or
// sum_k lambda_k KL(q_k || prior) for mixtures (stratified: one sample per
// component).
ElboGraph elbo_graph(ad::Tape& tape, const MultimodalVae& vae,
                     std::span<const Matrix> batch, const ElboNoise& noise,
                     SubsetIndex subset);

struct ElboTerms {
  double loss = 0.0;
  std::vector<double> recon;
  double kl = 0.0;
};

// Throws NumericError naming the offending term when any value is not finite.
ElboTerms elbo(const MultimodalVae& vae, std::span<const Matrix> batch,
               const ElboNoise& noise, SubsetIndex subset);
ElboTerms elbo(const MultimodalVae& vae, std::span<const Matrix> batch,
               const ElboNoise& noise);

// --- training --------------------------------------------------------------

struct MetricsRow {
  std::size_t epoch = 0;
  double loss = 0.0;
  std::vector<double> recon;
  double kl = 0.0;
};

struct TrainResult {
  MultimodalVae vae;
  std::vector<MetricsRow> history;
  CounterRng rng;
};

TrainResult train(const ModelConfig& config, const MultimodalDataset& dataset);

// --- inference -------------------------------------------------------------

// Per-modality posteriors, indexed [modality][example].
std::vector<std::vector<DiagGaussian>> encode(const MultimodalVae& vae,
                                              std::span<const Matrix> inputs);

// Per-modality (mu, sigma) batches for the modalities in `subset`; others empty.
struct EncodedBatch {
  std::vector<Matrix> mu;
  std::vector<Matrix> sigma;
};
EncodedBatch encode_batch(const MultimodalVae& vae, std::span<const Matrix> inputs,
                          SubsetIndex subset);

// Mean of the aggregated posterior per example (rows x latent_dim).
Matrix latent_means(const MultimodalVae& vae, std::span<const Matrix> inputs,
                    SubsetIndex subset);

struct GenerationNoise {
  Matrix eps;                   // batch x latent_dim standard normals
  std::vector<double> uniform;  // batch uniforms in [0, 1) for component choice
};

// Aggregates over `available`, samples z and decodes the target modality's
// mean (Bernoulli probabilities or Gaussian means). Mixture components are
// chosen among the data-conditioned components; the prior component of the
// powerset mixtures is skipped.
Matrix conditional_generate(const MultimodalVae& vae, std::span<const Matrix> inputs,
                            SubsetIndex available, std::size_t target,
                            const GenerationNoise& noise);

// sum_m log p(x_m | z_k) over modalities in `modalities`, for each row z_k of
// `z`; `example` holds one row per modality.
std::vector<double> decoder_log_likelihood(const MultimodalVae& vae,
                                           std::span<const Matrix> example,
                                           const Matrix& z, SubsetIndex modalities);

}  // namespace baryvae
