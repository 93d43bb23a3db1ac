#include "baryvae/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "baryvae/errors.hpp"
#include "baryvae/kernels.hpp"
#include "baryvae/rng.hpp"

namespace baryvae {

namespace {

constexpr std::uint64_t kCoherenceStream = 0x636f68;
constexpr std::uint64_t kLikelihoodStream = 0x6c6c;
constexpr std::uint64_t kProbeStream = 0x70726f6265;

void check_labels(const std::vector<int>& labels, std::size_t rows, int num_classes) {
  if (rows == 0) throw InvalidArgument("empty feature set");
  if (labels.size() != rows) {
    throw DimensionError("labels (" + std::to_string(labels.size()) +
                         ") do not match feature rows (" + std::to_string(rows) + ")");
  }
  for (int y : labels) {
    if (y < 0 || y >= num_classes) {
      throw InvalidArgument("label " + std::to_string(y) + " outside [0, " +
                            std::to_string(num_classes) + ")");
    }
  }
}

// Largest eigenvalue of X^T X / n by power iteration.
double top_eigenvalue(const Matrix& x) {
  const std::size_t d = x.cols;
  std::vector<double> v(d, 1.0 / std::sqrt(static_cast<double>(d)));
  std::vector<double> xv(x.rows), next(d);
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    kernels::matmul(x.data, v, xv, x.rows, d, 1);
    kernels::matmul_tn(x.data, xv, next, d, x.rows, 1);
    double norm = 0.0;
    for (double a : next) norm += a * a;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    const double next_lambda = norm / static_cast<double>(x.rows);
    for (std::size_t i = 0; i < d; ++i) v[i] = next[i] / norm;
    if (std::abs(next_lambda - lambda) <= 1e-10 * next_lambda) return next_lambda;
    lambda = next_lambda;
  }
  return lambda;
}

Matrix standardize(const LinearProbe& probe, const Matrix& features) {
  Matrix out(features.rows, features.cols);
  for (std::size_t r = 0; r < features.rows; ++r) {
    for (std::size_t c = 0; c < features.cols; ++c) {
      out(r, c) = (features(r, c) - probe.feature_mean[c]) / probe.feature_scale[c];
    }
  }
  return out;
}

Matrix rows_of(const Matrix& m, std::size_t r) {
  const auto row = m.row(r);
  return Matrix(1, m.cols, std::vector<double>(row.begin(), row.end()));
}

double logsumexp(std::span<const double> v) {
  const double hi = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double a : v) s += std::exp(a - hi);
  return hi + std::log(s);
}

}  // namespace

int LinearProbe::predict(std::span<const double> x) const {
  if (x.size() != dim()) {
    throw DimensionError("probe expects dim " + std::to_string(dim()) + ", got " +
                         std::to_string(x.size()));
  }
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < num_classes(); ++c) {
    double s = bias[c];
    for (std::size_t i = 0; i < dim(); ++i) {
      s += weight(c, i) * (x[i] - feature_mean[i]) / feature_scale[i];
    }
    if (s > best_score) {
      best_score = s;
      best = static_cast<int>(c);
    }
  }
  return best;
}

LinearProbe fit_linear_probe(const Matrix& features, const std::vector<int>& labels,
                             int num_classes, double l2, std::size_t iterations) {
  if (num_classes < 2) throw InvalidArgument("probe needs at least two classes");
  check_labels(labels, features.rows, num_classes);
  if (features.cols == 0) throw DimensionError("probe features have zero width");
  if (!(l2 >= 0.0)) throw InvalidArgument("probe l2 must be >= 0");
  {
    std::vector<int> seen(labels);
    std::sort(seen.begin(), seen.end());
    if (std::unique(seen.begin(), seen.end()) - seen.begin() < 2) {
      throw InvalidArgument("probe input has a single class");
    }
  }
  const std::size_t n = features.rows;
  const std::size_t d = features.cols;
  const std::size_t c = static_cast<std::size_t>(num_classes);

  LinearProbe probe;
  probe.trained_on = n;
  probe.feature_mean.assign(d, 0.0);
  probe.feature_scale.assign(d, 1.0);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += features(r, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) var += (features(r, j) - mean) * (features(r, j) - mean);
    var /= static_cast<double>(n);
    probe.feature_mean[j] = mean;
    probe.feature_scale[j] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }

  // Bias folded in as a trailing column of ones.
  Matrix x(n, d + 1);
  const Matrix z = standardize(probe, features);
  for (std::size_t r = 0; r < n; ++r) {
    std::copy(z.row(r).begin(), z.row(r).end(), x.row(r).begin());
    x(r, d) = 1.0;
  }
  const double step = 1.0 / (0.5 * top_eigenvalue(x) + l2);

  Matrix w(c, d + 1);
  Matrix logits(n, c), grad(c, d + 1);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t it = 0; it < iterations; ++it) {
    kernels::matmul_nt(x.data, w.data, logits.data, n, d + 1, c);
    for (std::size_t r = 0; r < n; ++r) {
      auto row = logits.row(r);
      const double hi = *std::max_element(row.begin(), row.end());
      double total = 0.0;
      for (double& v : row) {
        v = std::exp(v - hi);
        total += v;
      }
      for (double& v : row) v = v / total * inv_n;
      row[static_cast<std::size_t>(labels[r])] -= inv_n;
    }
    kernels::matmul_tn(logits.data, x.data, grad.data, c, n, d + 1);
    for (std::size_t k = 0; k < c; ++k) {
      for (std::size_t j = 0; j <= d; ++j) {
        const double reg = j < d ? l2 * w(k, j) : 0.0;
        w(k, j) -= step * (grad(k, j) + reg);
      }
    }
  }

  probe.weight = Matrix(c, d);
  probe.bias.assign(c, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t j = 0; j < d; ++j) probe.weight(k, j) = w(k, j);
    probe.bias[k] = w(k, d);
  }
  for (double v : w.data) {
    if (!std::isfinite(v)) throw NumericError("probe weights are not finite");
  }
  return probe;
}

double latent_accuracy(const LinearProbe& probe, const Matrix& features,
                       const std::vector<int>& labels) {
  check_labels(labels, features.rows, static_cast<int>(probe.num_classes()));
  if (features.cols != probe.dim()) {
    throw DimensionError("probe expects dim " + std::to_string(probe.dim()) + ", got " +
                         std::to_string(features.cols));
  }
  std::size_t hits = 0;
  for (std::size_t r = 0; r < features.rows; ++r) {
    if (probe.predict(features.row(r)) == labels[r]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(features.rows);
}

namespace {

std::vector<std::size_t> probe_indices(std::size_t n, std::size_t max_samples,
                                       std::uint64_t seed) {
  CounterRng rng(seed, kProbeStream);
  std::vector<std::size_t> idx = rng.permutation(n);
  idx.resize(std::min(n, max_samples));
  return idx;
}

}  // namespace

std::vector<LinearProbe> fit_reference_classifiers(const MultimodalDataset& data,
                                                   std::size_t max_samples) {
  data.validate();
  const auto idx = probe_indices(data.size(), max_samples, 0);
  std::vector<int> labels;
  for (std::size_t i : idx) labels.push_back(data.labels[i]);
  std::vector<LinearProbe> out;
  for (const Matrix& mod : data.modalities) {
    out.push_back(fit_linear_probe(mod.gather_rows(idx), labels, data.num_classes));
  }
  return out;
}

double coherence(const MultimodalVae& vae, std::span<const LinearProbe> reference,
                 const MultimodalDataset& data, SubsetIndex source, std::size_t target,
                 std::size_t num_samples, std::uint64_t seed) {
  if (source.empty()) throw InvalidArgument("coherence: empty source subset");
  if (target >= reference.size()) {
    throw InvalidArgument("coherence: no reference classifier for modality " +
                          std::to_string(target));
  }
  if (num_samples == 0 || data.size() == 0) {
    throw InvalidArgument("coherence: no samples to evaluate");
  }
  CounterRng rng(seed, kCoherenceStream);
  std::vector<std::size_t> idx = rng.permutation(data.size());
  idx.resize(std::min(num_samples, data.size()));

  std::vector<Matrix> inputs;
  for (const Matrix& mod : data.modalities) inputs.push_back(mod.gather_rows(idx));
  GenerationNoise noise{Matrix(idx.size(), vae.config().latent_dim), {}};
  rng.fill_normal(noise.eps.data);
  for (std::size_t i = 0; i < idx.size(); ++i) noise.uniform.push_back(rng.uniform());

  const Matrix generated = conditional_generate(vae, inputs, source, target, noise);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (reference[target].predict(generated.row(i)) == data.labels[idx[i]]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(idx.size());
}

double test_log_likelihood(const MultimodalVae& vae, std::span<const Matrix> batch,
                           SubsetIndex subset, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw InvalidArgument("test_log_likelihood: K must be >= 1");
  const ModelConfig& cfg = vae.config();
  if (batch.size() != cfg.num_modalities()) {
    throw DimensionError("test_log_likelihood: modality count");
  }
  const SubsetIndex all = SubsetIndex::full(cfg.num_modalities());
  const EncodedBatch enc = encode_batch(vae, batch, all);
  const std::size_t rows = batch.front().rows;
  const DiagGaussian prior = vae.prior();
  const CounterRng root(seed, kLikelihoodStream);

  std::vector<double> per_example(rows, 0.0);
  std::vector<std::string> failures(rows);
  const auto n = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    try {
      std::vector<DiagGaussian> posteriors;
      std::vector<Matrix> example;
      for (std::size_t m = 0; m < cfg.num_modalities(); ++m) {
        const auto mu = enc.mu[m].row(i);
        const auto sigma = enc.sigma[m].row(i);
        posteriors.emplace_back(std::vector<double>(mu.begin(), mu.end()),
                                std::vector<double>(sigma.begin(), sigma.end()));
        example.push_back(rows_of(batch[m], i));
      }
      const JointPosterior q = aggregate(posteriors, cfg.aggregation, subset);
      CounterRng rng = root.split(i);
      Matrix z(k, cfg.latent_dim);
      std::vector<double> log_w(k);
      for (std::size_t s = 0; s < k; ++s) {
        const std::vector<double> draw = q.draw(rng);
        std::copy(draw.begin(), draw.end(), z.row(s).begin());
        log_w[s] = log_density(prior, draw) - q.log_density(draw);
      }
      const std::vector<double> ll = decoder_log_likelihood(vae, example, z, all);
      for (std::size_t s = 0; s < k; ++s) log_w[s] += ll[s];
      per_example[i] = logsumexp(log_w) - std::log(static_cast<double>(k));
    } catch (const std::exception& e) {
      failures[i] = e.what();
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (!failures[i].empty()) {
      throw NumericError("test_log_likelihood: example " + std::to_string(i) + ": " +
                         failures[i]);
    }
    total += per_example[i];
  }
  const double mean = total / static_cast<double>(rows);
  if (!std::isfinite(mean)) throw NumericError("test_log_likelihood: estimate is not finite");
  return mean;
}

EvalReport evaluate(const MultimodalVae& vae, const MultimodalDataset& train,
                    const MultimodalDataset& test, const EvalOptions& options) {
  train.validate();
  test.validate();
  const std::size_t num_mod = vae.config().num_modalities();
  if (train.num_modalities() != num_mod || test.num_modalities() != num_mod) {
    throw DimensionError("evaluate: dataset modality count does not match the model");
  }
  if (test.size() == 0) throw InvalidArgument("evaluate: empty test set");

  EvalReport report;
  report.importance_samples = options.importance_samples;
  const auto probe_idx = probe_indices(train.size(), options.probe_samples, options.seed);
  report.probe_train_count = probe_idx.size();
  const MultimodalDataset probe_set = train.select(probe_idx);
  const int num_classes = std::max(train.num_classes, test.num_classes);

  std::vector<std::size_t> ll_idx(std::min(options.likelihood_examples, test.size()));
  std::iota(ll_idx.begin(), ll_idx.end(), std::size_t{0});
  const MultimodalDataset ll_set = test.select(ll_idx);

  const auto refs = fit_reference_classifiers(train, options.probe_samples);
  for (SubsetIndex s : subsets(num_mod)) {
    if (s.empty()) continue;
    const LinearProbe probe = fit_linear_probe(
        latent_means(vae, probe_set.modalities, s), probe_set.labels, num_classes);
    report.accuracy.push_back(
        {s, latent_accuracy(probe, latent_means(vae, test.modalities, s), test.labels)});
    for (std::size_t t = 0; t < num_mod; ++t) {
      if (s.contains(t)) continue;
      report.coherence.push_back(
          {s, t, coherence(vae, refs, test, s, t, options.coherence_samples, options.seed)});
    }
    if (!ll_idx.empty() && options.importance_samples > 0) {
      report.likelihood.push_back(
          {s, test_log_likelihood(vae, ll_set.modalities, s, options.importance_samples,
                                  options.seed)});
    }
  }
  return report;
}

std::vector<double> accuracy_by_subset_size(const EvalReport& report,
                                            std::size_t num_modalities) {
  std::vector<double> sum(num_modalities, 0.0);
  std::vector<std::size_t> count(num_modalities, 0);
  for (const auto& a : report.accuracy) {
    const std::size_t k = a.subset.size();
    if (k == 0 || k > num_modalities) continue;
    sum[k - 1] += a.accuracy;
    ++count[k - 1];
  }
  for (std::size_t i = 0; i < num_modalities; ++i) {
    if (count[i] > 0) sum[i] /= static_cast<double>(count[i]);
  }
  return sum;
}

}  // namespace baryvae
