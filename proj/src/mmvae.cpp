#include "baryvae/mmvae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "baryvae/errors.hpp"
#include "baryvae/kernels.hpp"

namespace baryvae {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr std::uint64_t kInitStream = 0x696e6974;
constexpr std::uint64_t kTrainStream = 0x747261696e;

std::string encoder_prefix(std::size_t m) { return "enc" + std::to_string(m); }
std::string decoder_prefix(std::size_t m) { return "dec" + std::to_string(m); }

}  // namespace

std::string to_string(Likelihood v) {
  return v == Likelihood::kBernoulli ? "bernoulli" : "gaussian";
}

std::string to_string(Aggregation v) {
  switch (v) {
    case Aggregation::kPoe: return "poe";
    case Aggregation::kMoe: return "moe";
    case Aggregation::kMopoe: return "mopoe";
    case Aggregation::kWb: return "wb";
    case Aggregation::kMwb: return "mwb";
  }
  return "?";
}

std::string to_string(Activation v) { return v == Activation::kTanh ? "tanh" : "relu"; }

Likelihood parse_likelihood(const std::string& s) {
  if (s == "bernoulli") return Likelihood::kBernoulli;
  if (s == "gaussian") return Likelihood::kGaussian;
  throw ConfigError("unknown likelihood '" + s + "' (expected bernoulli|gaussian)");
}

Aggregation parse_aggregation(const std::string& s) {
  for (Aggregation a : {Aggregation::kPoe, Aggregation::kMoe, Aggregation::kMopoe,
                        Aggregation::kWb, Aggregation::kMwb}) {
    if (to_string(a) == s) return a;
  }
  throw ConfigError("unknown aggregation '" + s + "' (expected poe|moe|mopoe|wb|mwb)");
}

Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation '" + s + "' (expected tanh|relu)");
}

bool is_mixture(Aggregation method) {
  return method == Aggregation::kMoe || method == Aggregation::kMopoe ||
         method == Aggregation::kMwb;
}

void ModelConfig::validate() const {
  if (input_dims.empty()) throw ConfigError("model: at least one modality is required");
  if (input_dims.size() > kMaxModalities) throw ConfigError("model: too many modalities");
  for (std::size_t d : input_dims) {
    if (d == 0) throw ConfigError("model: modality input dims must be >= 1");
  }
  if (latent_dim < 1) throw ConfigError("model: latent_dim must be >= 1");
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError("model: hidden sizes must be >= 1");
  }
  if (!(beta >= 0.0)) throw ConfigError("model: beta must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("model: learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("model: batch_size must be >= 1");
}

// ---------------------------------------------------------------------------
// JointPosterior and aggregate

std::size_t JointPosterior::dim() const {
  return is_mixture() ? mixture().dim() : gaussian().dim();
}

std::vector<double> JointPosterior::mean() const {
  if (is_mixture()) return mixture().mean();
  return {gaussian().mean().begin(), gaussian().mean().end()};
}

double JointPosterior::log_density(std::span<const double> x) const {
  return is_mixture() ? baryvae::log_density(mixture(), x)
                      : baryvae::log_density(gaussian(), x);
}

std::vector<double> JointPosterior::draw(CounterRng& rng) const {
  const DiagGaussian* g = nullptr;
  if (is_mixture()) {
    const double u = rng.uniform();
    const auto& mix = mixture();
    double acc = 0.0;
    std::size_t k = 0;
    for (; k + 1 < mix.size(); ++k) {
      acc += mix.weights()[k];
      if (u < acc) break;
    }
    g = &mix.components()[k];
  } else {
    g = &gaussian();
  }
  std::vector<double> eps(g->dim());
  rng.fill_normal(eps);
  return sample(*g, eps);
}

JointPosterior aggregate(std::span<const DiagGaussian> per_modality, Aggregation method,
                         SubsetIndex subset) {
  if (per_modality.empty()) throw InvalidArgument("aggregate: no posteriors");
  for (std::size_t m : subset.members()) {
    if (m >= per_modality.size()) throw DimensionError("aggregate: subset exceeds modalities");
  }
  if (subset.empty()) {
    throw InvalidArgument("aggregate: empty subset for " + to_string(method));
  }
  const DiagFamily family = restrict_uniform(
      DiagFamily::uniform({per_modality.begin(), per_modality.end()}), subset);
  const DiagGaussian prior = DiagGaussian::standard(family.dim());
  switch (method) {
    case Aggregation::kPoe: {
      const std::vector<double> ones(family.size(), 1.0);
      return JointPosterior(poe(family, ones));
    }
    case Aggregation::kWb: return JointPosterior(wb_diag(family));
    case Aggregation::kMoe: return JointPosterior(moe(family));
    case Aggregation::kMopoe: return JointPosterior(mopoe(family, prior));
    case Aggregation::kMwb: return JointPosterior(mwb(family, prior));
  }
  throw InvalidArgument("aggregate: unknown method");
}

// ---------------------------------------------------------------------------
// Model

std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> parameter_layout(
    const ModelConfig& config) {
  std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>> out;
  auto dense = [&out](const std::string& prefix, std::size_t in, std::size_t o) {
    out.push_back({prefix + ".w", {in, o}});
    out.push_back({prefix + ".b", {1, o}});
  };
  for (std::size_t m = 0; m < config.num_modalities(); ++m) {
    std::size_t in = config.input_dims[m];
    for (std::size_t j = 0; j < config.hidden.size(); ++j) {
      dense(encoder_prefix(m) + ".l" + std::to_string(j), in, config.hidden[j]);
      in = config.hidden[j];
    }
    dense(encoder_prefix(m) + ".mu", in, config.latent_dim);
    dense(encoder_prefix(m) + ".sigma", in, config.latent_dim);
  }
  for (std::size_t m = 0; m < config.num_modalities(); ++m) {
    std::size_t in = config.latent_dim;
    for (std::size_t j = 0; j < config.hidden.size(); ++j) {
      dense(decoder_prefix(m) + ".l" + std::to_string(j), in, config.hidden[j]);
      in = config.hidden[j];
    }
    dense(decoder_prefix(m) + ".out", in, config.input_dims[m]);
  }
  return out;
}

MultimodalVae::MultimodalVae(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  CounterRng rng(config_.seed, kInitStream);
  for (const auto& [name, shape] : parameter_layout(config_)) {
    if (name.ends_with(".w")) {
      const std::string prefix = name.substr(0, name.size() - 2);
      ad::init_dense(params_, prefix, shape.first, shape.second, rng);
    }
  }
}

MultimodalVae::MultimodalVae(ModelConfig config, ad::ParamStore params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  const auto layout = parameter_layout(config_);
  if (layout.size() != params_.size()) {
    throw FormatError("parameter count " + std::to_string(params_.size()) +
                      " does not match the model (" + std::to_string(layout.size()) + ")");
  }
  for (const auto& [name, shape] : layout) {
    if (!params_.contains(name)) throw FormatError("missing parameter " + name);
    const Matrix& v = params_.value(name);
    if (v.rows != shape.first || v.cols != shape.second) {
      throw FormatError("parameter " + name + " has the wrong shape");
    }
  }
}

namespace {

ad::Value activate(ad::Value x, Activation a) {
  return a == Activation::kTanh ? ad::tanh(x) : ad::relu(x);
}

}  // namespace

GaussianNode encode_graph(ad::Tape& tape, const MultimodalVae& vae, std::size_t m,
                          ad::Value x) {
  const ModelConfig& cfg = vae.config();
  if (m >= cfg.num_modalities()) throw DimensionError("encode: modality out of range");
  if (x.cols() != cfg.input_dims[m]) {
    throw DimensionError("encode: modality " + std::to_string(m) + " expects dim " +
                         std::to_string(cfg.input_dims[m]) + ", got " +
                         std::to_string(x.cols()));
  }
  const std::string prefix = encoder_prefix(m);
  ad::Value h = x;
  for (std::size_t j = 0; j < cfg.hidden.size(); ++j) {
    h = activate(ad::dense(tape, vae.params(), prefix + ".l" + std::to_string(j), h),
                 cfg.activation);
  }
  GaussianNode out;
  out.mu = ad::dense(tape, vae.params(), prefix + ".mu", h);
  out.sigma = ad::add_scalar(
      ad::softplus(ad::dense(tape, vae.params(), prefix + ".sigma", h)), kSigmaFloor);
  return out;
}

ad::Value decode_graph(ad::Tape& tape, const MultimodalVae& vae, std::size_t m,
                       ad::Value z) {
  const ModelConfig& cfg = vae.config();
  if (m >= cfg.num_modalities()) throw DimensionError("decode: modality out of range");
  const std::string prefix = decoder_prefix(m);
  ad::Value h = z;
  for (std::size_t j = 0; j < cfg.hidden.size(); ++j) {
    h = activate(ad::dense(tape, vae.params(), prefix + ".l" + std::to_string(j), h),
                 cfg.activation);
  }
  return ad::dense(tape, vae.params(), prefix + ".out", h);
}

ad::Value log_likelihood_rows(ad::Value x, ad::Value decoded, Likelihood likelihood) {
  if (likelihood == Likelihood::kBernoulli) {
    // x * logit - log(1 + e^logit)
    return ad::row_sum(ad::sub(ad::mul(x, decoded), ad::softplus(decoded)));
  }
  const double s = kGaussianLikelihoodSigma;
  const double per_dim = -std::log(s) - 0.5 * kLog2Pi;
  return ad::add_scalar(
      ad::row_sum(ad::scale(ad::square(ad::sub(x, decoded)), -0.5 / (s * s))),
      per_dim * static_cast<double>(x.cols()));
}

namespace {

GaussianNode poe_graph(const std::vector<GaussianNode>& members) {
  ad::Value precision, weighted;
  for (std::size_t k = 0; k < members.size(); ++k) {
    ad::Value p = ad::reciprocal(ad::square(members[k].sigma));
    ad::Value pm = ad::mul(p, members[k].mu);
    precision = k == 0 ? p : ad::add(precision, p);
    weighted = k == 0 ? pm : ad::add(weighted, pm);
  }
  ad::Value var = ad::reciprocal(precision);
  return {ad::mul(var, weighted), ad::sqrt(var)};
}

GaussianNode wb_graph(const std::vector<GaussianNode>& members) {
  const double w = 1.0 / static_cast<double>(members.size());
  ad::Value mu, sigma;
  for (std::size_t k = 0; k < members.size(); ++k) {
    ad::Value wm = ad::scale(members[k].mu, w);
    ad::Value ws = ad::scale(members[k].sigma, w);
    mu = k == 0 ? wm : ad::add(mu, wm);
    sigma = k == 0 ? ws : ad::add(sigma, ws);
  }
  return {mu, sigma};
}

std::vector<GaussianNode> pick(std::span<const GaussianNode> posteriors, SubsetIndex s) {
  std::vector<GaussianNode> out;
  for (std::size_t m : s.members()) {
    if (m >= posteriors.size()) throw DimensionError("aggregate: subset exceeds modalities");
    out.push_back(posteriors[m]);
  }
  return out;
}

// Sub-masks of `subset` in ascending bitmask order, starting with the empty set.
std::vector<SubsetIndex> submasks(SubsetIndex subset) {
  std::vector<SubsetIndex> out;
  for (std::uint32_t mask = 0; mask <= subset.mask; ++mask) {
    if ((mask & ~subset.mask) == 0) out.push_back({mask});
  }
  return out;
}

}  // namespace

std::vector<ComponentNode> aggregate_graph(ad::Tape& tape,
                                           std::span<const GaussianNode> posteriors,
                                           Aggregation method, SubsetIndex subset) {
  if (subset.empty()) {
    throw InvalidArgument("aggregate: empty subset for " + to_string(method));
  }
  const auto present = pick(posteriors, subset);
  std::vector<ComponentNode> out;
  switch (method) {
    case Aggregation::kPoe: out.push_back({poe_graph(present), 1.0, false}); break;
    case Aggregation::kWb: out.push_back({wb_graph(present), 1.0, false}); break;
    case Aggregation::kMoe:
      for (const auto& g : present) {
        out.push_back({g, 1.0 / static_cast<double>(present.size()), false});
      }
      break;
    case Aggregation::kMopoe:
    case Aggregation::kMwb: {
      const auto masks = submasks(subset);
      const double w = 1.0 / static_cast<double>(masks.size());
      const std::size_t rows = present.front().mu.rows();
      const std::size_t cols = present.front().mu.cols();
      for (SubsetIndex s : masks) {
        if (s.empty()) {
          GaussianNode prior{tape.constant(Matrix(rows, cols, 0.0)),
                             tape.constant(Matrix(rows, cols, 1.0))};
          out.push_back({prior, w, true});
        } else {
          const auto members = pick(posteriors, s);
          out.push_back({method == Aggregation::kMopoe ? poe_graph(members)
                                                       : wb_graph(members),
                         w, false});
        }
      }
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// ELBO

std::size_t num_components(Aggregation method, SubsetIndex subset) {
  switch (method) {
    case Aggregation::kPoe:
    case Aggregation::kWb: return 1;
    case Aggregation::kMoe: return subset.size();
    case Aggregation::kMopoe:
    case Aggregation::kMwb: return std::size_t{1} << subset.size();
  }
  return 0;
}

ElboNoise draw_elbo_noise(Aggregation method, SubsetIndex subset, std::size_t batch,
                          std::size_t latent_dim, CounterRng& rng) {
  ElboNoise noise;
  for (std::size_t k = 0; k < num_components(method, subset); ++k) {
    Matrix eps(batch, latent_dim);
    rng.fill_normal(eps.data);
    noise.eps.push_back(std::move(eps));
  }
  return noise;
}

namespace {

std::size_t batch_rows(std::span<const Matrix> batch, SubsetIndex subset,
                       const ModelConfig& cfg) {
  if (batch.size() != cfg.num_modalities()) {
    throw DimensionError("batch has " + std::to_string(batch.size()) +
                         " modalities, model expects " +
                         std::to_string(cfg.num_modalities()));
  }
  std::size_t rows = 0;
  bool first = true;
  for (std::size_t m : subset.members()) {
    if (m >= batch.size()) throw DimensionError("subset exceeds modalities");
    if (batch[m].cols != cfg.input_dims[m]) {
      throw DimensionError("modality " + std::to_string(m) + " expects dim " +
                           std::to_string(cfg.input_dims[m]) + ", got " +
                           std::to_string(batch[m].cols));
    }
    if (!first && batch[m].rows != rows) throw DimensionError("modalities differ in batch size");
    rows = batch[m].rows;
    first = false;
  }
  if (rows == 0) throw DimensionError("empty batch");
  return rows;
}

// 0.5 * sum(mu^2 + sigma^2 - 1 - 2 log sigma), a 1x1 value.
ad::Value kl_to_standard(const GaussianNode& g) {
  const double n = static_cast<double>(g.mu.data().size());
  ad::Value quad = ad::sum(ad::add(ad::square(g.mu), ad::square(g.sigma)));
  ad::Value logs = ad::sum(ad::log(g.sigma));
  return ad::scale(ad::add_scalar(ad::sub(quad, ad::scale(logs, 2.0)), -n), 0.5);
}

Matrix tile_rows(const Matrix& x, std::size_t times) {
  Matrix out(x.rows * times, x.cols);
  for (std::size_t t = 0; t < times; ++t) {
    std::copy(x.data.begin(), x.data.end(), out.data.begin() + t * x.size());
  }
  return out;
}

}  // namespace

ElboGraph elbo_graph(ad::Tape& tape, const MultimodalVae& vae,
                     std::span<const Matrix> batch, const ElboNoise& noise,
                     SubsetIndex subset) {
  const ModelConfig& cfg = vae.config();
  const std::size_t rows = batch_rows(batch, subset, cfg);
  const double inv_rows = 1.0 / static_cast<double>(rows);

  std::vector<GaussianNode> posteriors(cfg.num_modalities());
  for (std::size_t m : subset.members()) {
    posteriors[m] = encode_graph(tape, vae, m, tape.constant(batch[m]));
  }
  const auto components = aggregate_graph(tape, posteriors, cfg.aggregation, subset);
  if (noise.eps.size() != components.size()) {
    throw DimensionError("ELBO noise has " + std::to_string(noise.eps.size()) +
                         " draws, aggregation needs " + std::to_string(components.size()));
  }

  // Stack one reparameterized sample per component so every decoder runs once.
  std::vector<ad::Value> samples;
  Matrix weights(rows * components.size(), 1);
  ad::Value kl;
  bool have_kl = false;
  for (std::size_t k = 0; k < components.size(); ++k) {
    const auto& c = components[k];
    if (noise.eps[k].rows != rows || noise.eps[k].cols != cfg.latent_dim) {
      throw DimensionError("ELBO noise shape mismatch");
    }
    samples.push_back(ad::add(c.g.mu, ad::mul(c.g.sigma, tape.constant(noise.eps[k]))));
    for (std::size_t b = 0; b < rows; ++b) weights.data[k * rows + b] = c.weight * inv_rows;
    if (!c.is_prior) {
      ad::Value term = ad::scale(kl_to_standard(c.g), c.weight * inv_rows);
      kl = have_kl ? ad::add(kl, term) : term;
      have_kl = true;
    }
  }
  if (!have_kl) kl = tape.constant(Matrix(1, 1, 0.0));
  ad::Value z = samples.size() == 1 ? samples.front() : ad::concat_rows(samples);
  ad::Value row_weights = tape.constant(std::move(weights));

  ElboGraph out;
  out.recon.resize(cfg.num_modalities());
  ad::Value loss = ad::scale(kl, cfg.beta);
  for (std::size_t m : subset.members()) {
    ad::Value x = tape.constant(components.size() == 1 ? batch[m]
                                                       : tile_rows(batch[m], components.size()));
    ad::Value ll = log_likelihood_rows(x, decode_graph(tape, vae, m, z), cfg.likelihood);
    out.recon[m] = ad::scale(ad::sum(ad::mul(ll, row_weights)), -1.0);
    loss = ad::add(loss, out.recon[m]);
  }
  out.loss = loss;
  out.kl = kl;
  return out;
}

ElboTerms elbo(const MultimodalVae& vae, std::span<const Matrix> batch,
               const ElboNoise& noise, SubsetIndex subset) {
  ad::Tape tape;
  const ElboGraph g = elbo_graph(tape, vae, batch, noise, subset);
  ElboTerms t;
  t.recon.assign(vae.config().num_modalities(), 0.0);
  for (std::size_t m : subset.members()) {
    t.recon[m] = g.recon[m].item();
    if (!std::isfinite(t.recon[m])) {
      throw NumericError("ELBO reconstruction term for modality " + std::to_string(m) +
                         " is not finite");
    }
  }
  t.kl = g.kl.item();
  if (!std::isfinite(t.kl)) throw NumericError("ELBO KL term is not finite");
  t.loss = g.loss.item();
  if (!std::isfinite(t.loss)) throw NumericError("ELBO loss is not finite");
  return t;
}

ElboTerms elbo(const MultimodalVae& vae, std::span<const Matrix> batch,
               const ElboNoise& noise) {
  return elbo(vae, batch, noise, SubsetIndex::full(vae.config().num_modalities()));
}

// ---------------------------------------------------------------------------
// Training

TrainResult train(const ModelConfig& config, const MultimodalDataset& dataset) {
  dataset.validate();
  if (dataset.num_modalities() != config.num_modalities()) {
    throw DimensionError("dataset has " + std::to_string(dataset.num_modalities()) +
                         " modalities, config expects " +
                         std::to_string(config.num_modalities()));
  }
  for (std::size_t m = 0; m < config.num_modalities(); ++m) {
    if (dataset.info[m].dim != config.input_dims[m]) {
      throw DimensionError("dataset modality " + std::to_string(m) + " has dim " +
                           std::to_string(dataset.info[m].dim) + ", config expects " +
                           std::to_string(config.input_dims[m]));
    }
  }
  if (dataset.size() == 0) throw InvalidArgument("train: empty dataset");

  TrainResult result{MultimodalVae(config), {}, CounterRng(config.seed, kTrainStream)};
  MultimodalVae& vae = result.vae;
  CounterRng& rng = result.rng;
  const SubsetIndex all = SubsetIndex::full(config.num_modalities());
  const ad::AdamOptions adam{config.learning_rate, 0.9, 0.999, 1e-8};
  const std::size_t n = dataset.size();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = rng.permutation(n);
    MetricsRow row;
    row.epoch = epoch;
    row.recon.assign(config.num_modalities(), 0.0);
    std::size_t step = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size, ++step) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(end));
      std::vector<Matrix> batch;
      for (const Matrix& mod : dataset.modalities) batch.push_back(mod.gather_rows(idx));
      const ElboNoise noise = draw_elbo_noise(config.aggregation, all, idx.size(),
                                              config.latent_dim, rng);

      std::vector<double> recon(config.num_modalities(), 0.0);
      double kl = 0.0;
      ad::LossAndGradients fb;
      try {
        fb = ad::forward_backward(
            [&](ad::Tape& tape, const ad::ParamStore&) {
              const ElboGraph g = elbo_graph(tape, vae, batch, noise, all);
              for (std::size_t m = 0; m < recon.size(); ++m) recon[m] = g.recon[m].item();
              kl = g.kl.item();
              return g.loss;
            },
            vae.params());
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + ", step " +
                               std::to_string(step) + ": " + e.what(),
                           e.residual(), e.iterations());
      }
      ad::adam_step(vae.params(), fb.gradients, adam);

      const double w = static_cast<double>(idx.size());
      row.loss += fb.loss * w;
      for (std::size_t m = 0; m < recon.size(); ++m) row.recon[m] += recon[m] * w;
      row.kl += kl * w;
    }
    const double inv = 1.0 / static_cast<double>(n);
    row.loss *= inv;
    row.kl *= inv;
    for (double& r : row.recon) r *= inv;
    result.history.push_back(std::move(row));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Inference

EncodedBatch encode_batch(const MultimodalVae& vae, std::span<const Matrix> inputs,
                          SubsetIndex subset) {
  batch_rows(inputs, subset, vae.config());
  ad::Tape tape;
  EncodedBatch out;
  out.mu.resize(vae.config().num_modalities());
  out.sigma.resize(vae.config().num_modalities());
  for (std::size_t m : subset.members()) {
    const GaussianNode g = encode_graph(tape, vae, m, tape.constant(inputs[m]));
    out.mu[m] = g.mu.data();
    out.sigma[m] = g.sigma.data();
  }
  return out;
}

std::vector<std::vector<DiagGaussian>> encode(const MultimodalVae& vae,
                                              std::span<const Matrix> inputs) {
  const SubsetIndex all = SubsetIndex::full(vae.config().num_modalities());
  const EncodedBatch enc = encode_batch(vae, inputs, all);
  std::vector<std::vector<DiagGaussian>> out(enc.mu.size());
  for (std::size_t m = 0; m < enc.mu.size(); ++m) {
    for (std::size_t b = 0; b < enc.mu[m].rows; ++b) {
      const auto mu = enc.mu[m].row(b);
      const auto sigma = enc.sigma[m].row(b);
      out[m].emplace_back(std::vector<double>(mu.begin(), mu.end()),
                          std::vector<double>(sigma.begin(), sigma.end()));
    }
  }
  return out;
}

namespace {

// Batch aggregate of a single subset: returns (mu, sigma) for each row.
std::pair<Matrix, Matrix> single_gaussian_batch(const EncodedBatch& enc, SubsetIndex s,
                                                bool product) {
  std::vector<Matrix> mus, sigmas;
  for (std::size_t m : s.members()) {
    mus.push_back(enc.mu[m]);
    sigmas.push_back(enc.sigma[m]);
  }
  std::pair<Matrix, Matrix> out;
  if (product) {
    const std::vector<double> ones(mus.size(), 1.0);
    kernels::poe_batch(mus, sigmas, ones, out.first, out.second);
  } else {
    const std::vector<double> w(mus.size(), 1.0 / static_cast<double>(mus.size()));
    kernels::wb_diag_batch(mus, sigmas, w, out.first, out.second);
  }
  return out;
}

}  // namespace

Matrix latent_means(const MultimodalVae& vae, std::span<const Matrix> inputs,
                    SubsetIndex subset) {
  if (subset.empty()) throw InvalidArgument("latent_means: empty subset");
  const EncodedBatch enc = encode_batch(vae, inputs, subset);
  const Aggregation method = vae.config().aggregation;
  switch (method) {
    case Aggregation::kPoe: return single_gaussian_batch(enc, subset, true).first;
    // The uniform mixture mean equals the barycenter mean.
    case Aggregation::kWb:
    case Aggregation::kMoe: return single_gaussian_batch(enc, subset, false).first;
    case Aggregation::kMopoe:
    case Aggregation::kMwb: {
      const auto masks = submasks(subset);
      const double w = 1.0 / static_cast<double>(masks.size());
      Matrix out;
      for (SubsetIndex s : masks) {
        if (s.empty()) continue;  // prior mean is zero
        Matrix mu = single_gaussian_batch(enc, s, method == Aggregation::kMopoe).first;
        if (out.size() == 0) out = Matrix(mu.rows, mu.cols);
        for (std::size_t i = 0; i < mu.size(); ++i) out.data[i] += w * mu.data[i];
      }
      return out;
    }
  }
  throw InvalidArgument("latent_means: unknown method");
}

Matrix conditional_generate(const MultimodalVae& vae, std::span<const Matrix> inputs,
                            SubsetIndex available, std::size_t target,
                            const GenerationNoise& noise) {
  const ModelConfig& cfg = vae.config();
  if (target >= cfg.num_modalities()) {
    throw InvalidArgument("conditional_generate: target modality " + std::to_string(target) +
                          " not in model");
  }
  if (available.empty()) throw InvalidArgument("conditional_generate: no available modality");
  const std::size_t rows = batch_rows(inputs, available, cfg);
  if (noise.eps.rows != rows || noise.eps.cols != cfg.latent_dim ||
      noise.uniform.size() != rows) {
    throw DimensionError("conditional_generate: noise shape mismatch");
  }

  ad::Tape tape;
  std::vector<GaussianNode> posteriors(cfg.num_modalities());
  for (std::size_t m : available.members()) {
    posteriors[m] = encode_graph(tape, vae, m, tape.constant(inputs[m]));
  }
  const auto components = aggregate_graph(tape, posteriors, cfg.aggregation, available);
  std::vector<std::size_t> informative;
  double total = 0.0;
  for (std::size_t k = 0; k < components.size(); ++k) {
    if (!components[k].is_prior) {
      informative.push_back(k);
      total += components[k].weight;
    }
  }

  Matrix z(rows, cfg.latent_dim);
  for (std::size_t b = 0; b < rows; ++b) {
    std::size_t pick_k = informative.back();
    double acc = 0.0;
    for (std::size_t k : informative) {
      acc += components[k].weight / total;
      if (noise.uniform[b] < acc) {
        pick_k = k;
        break;
      }
    }
    const Matrix& mu = components[pick_k].g.mu.data();
    const Matrix& sigma = components[pick_k].g.sigma.data();
    for (std::size_t i = 0; i < cfg.latent_dim; ++i) {
      z(b, i) = mu(b, i) + sigma(b, i) * noise.eps(b, i);
    }
  }
  ad::Value out = decode_graph(tape, vae, target, tape.constant(std::move(z)));
  if (cfg.likelihood == Likelihood::kBernoulli) out = ad::sigmoid(out);
  return out.data();
}

std::vector<double> decoder_log_likelihood(const MultimodalVae& vae,
                                           std::span<const Matrix> example,
                                           const Matrix& z, SubsetIndex modalities) {
  const ModelConfig& cfg = vae.config();
  if (z.cols != cfg.latent_dim) throw DimensionError("decoder_log_likelihood: latent dim");
  if (example.size() != cfg.num_modalities()) {
    throw DimensionError("decoder_log_likelihood: modality count");
  }
  ad::Tape tape;
  ad::Value zv = tape.constant(z);
  std::vector<double> total(z.rows, 0.0);
  for (std::size_t m : modalities.members()) {
    if (example[m].rows != 1 || example[m].cols != cfg.input_dims[m]) {
      throw DimensionError("decoder_log_likelihood: example row shape");
    }
    ad::Value x = tape.constant(tile_rows(example[m], z.rows));
    ad::Value ll = log_likelihood_rows(x, decode_graph(tape, vae, m, zv), cfg.likelihood);
    for (std::size_t k = 0; k < z.rows; ++k) total[k] += ll.data().data[k];
  }
  return total;
}

}  // namespace baryvae
