#include "baryvae/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "baryvae/barycenter.hpp"
#include "baryvae/errors.hpp"
#include "baryvae/gaussian.hpp"

namespace baryvae::cli {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// Schema problems in user-supplied documents.
class SchemaError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
  if (!out) throw ConfigError("failed writing " + path.string());
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() +
                                                     static_cast<std::ptrdiff_t>(byte), '\n'));
}

template <class Error>
json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(what + ": line " + std::to_string(line_of(text, e.byte)) + ": " + e.what());
  }
}

// Reads the fields of one JSON object and rejects keys that were never read.
class Fields {
 public:
  Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw SchemaError(where("") + "expected an object");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  const json& required(const std::string& key) {
    seen_.insert(key);
    if (!obj_.contains(key)) throw SchemaError("missing field " + name(key));
    return obj_.at(key);
  }

  const json* optional(const std::string& key) {
    seen_.insert(key);
    return obj_.contains(key) ? &obj_.at(key) : nullptr;
  }

  double number(const json& v, const std::string& key) const {
    if (!v.is_number()) throw SchemaError(name(key) + ": expected a number");
    return v.get<double>();
  }

  std::uint64_t unsigned_int(const json& v, const std::string& key) const {
    if (!v.is_number_unsigned()) {
      throw SchemaError(name(key) + ": expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  std::string string(const json& v, const std::string& key) const {
    if (!v.is_string()) throw SchemaError(name(key) + ": expected a string");
    return v.get<std::string>();
  }

  std::vector<std::size_t> size_list(const json& v, const std::string& key) const {
    if (!v.is_array()) throw SchemaError(name(key) + ": expected an array");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(unsigned_int(v[i], key + "[" + std::to_string(i) + "]"));
    }
    return out;
  }

  void finish() const {
    for (const auto& [key, _] : obj_.items()) {
      if (!seen_.count(key)) throw SchemaError("unknown field " + name(key));
    }
  }

  std::string name(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  std::string where(const std::string& key) const {
    const std::string n = name(key);
    return n.empty() ? "" : n + ": ";
  }

  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_model(const json& v, ModelConfig& m) {
  Fields f(v, "model");
  m.latent_dim = f.unsigned_int(f.required("latent_dim"), "latent_dim");
  m.hidden = f.size_list(f.required("hidden"), "hidden");
  m.likelihood = parse_likelihood(f.string(f.required("likelihood"), "likelihood"));
  m.aggregation = parse_aggregation(f.string(f.required("aggregation"), "aggregation"));
  if (const json* a = f.optional("activation")) {
    m.activation = parse_activation(f.string(*a, "activation"));
  }
  m.beta = f.number(f.required("beta"), "beta");
  m.learning_rate = f.number(f.required("learning_rate"), "learning_rate");
  m.batch_size = f.unsigned_int(f.required("batch_size"), "batch_size");
  m.epochs = f.unsigned_int(f.required("epochs"), "epochs");
  m.seed = f.unsigned_int(f.required("seed"), "seed");
  if (const json* d = f.optional("input_dims")) m.input_dims = f.size_list(*d, "input_dims");
  f.finish();
}

void read_toy(const json& v, ToyConfig& t) {
  Fields f(v, "data.toy");
  if (const json* x = f.optional("num_modalities")) {
    t.num_modalities = f.unsigned_int(*x, "num_modalities");
  }
  if (const json* x = f.optional("num_classes")) {
    t.num_classes = static_cast<int>(f.unsigned_int(*x, "num_classes"));
  }
  if (const json* x = f.optional("examples_per_class")) {
    t.examples_per_class = f.unsigned_int(*x, "examples_per_class");
  }
  if (const json* x = f.optional("resolution")) t.resolution = f.unsigned_int(*x, "resolution");
  if (const json* x = f.optional("backgrounds")) t.backgrounds = f.size_list(*x, "backgrounds");
  if (const json* x = f.optional("noise")) t.noise = f.number(*x, "noise");
  if (const json* x = f.optional("seed")) t.seed = f.unsigned_int(*x, "seed");
  f.finish();
}

void read_data(const json& v, DataConfig& d) {
  Fields f(v, "data");
  d.source = f.string(f.required("source"), "source");
  if (d.source == "toy") {
    if (const json* t = f.optional("toy")) read_toy(*t, d.toy);
  } else if (d.source == "idx") {
    d.images = f.string(f.required("images"), "images");
    d.labels = f.string(f.required("labels"), "labels");
  } else {
    throw SchemaError("data.source: expected toy or idx, got '" + d.source + "'");
  }
  if (const json* x = f.optional("train_fraction")) {
    d.train_fraction = f.number(*x, "train_fraction");
  }
  if (const json* x = f.optional("split_seed")) d.split_seed = f.unsigned_int(*x, "split_seed");
  f.finish();
}

void read_eval(const json& v, EvalOptions& e) {
  Fields f(v, "eval");
  if (const json* x = f.optional("probe_samples")) {
    e.probe_samples = f.unsigned_int(*x, "probe_samples");
  }
  if (const json* x = f.optional("coherence_samples")) {
    e.coherence_samples = f.unsigned_int(*x, "coherence_samples");
  }
  if (const json* x = f.optional("likelihood_examples")) {
    e.likelihood_examples = f.unsigned_int(*x, "likelihood_examples");
  }
  if (const json* x = f.optional("importance_samples")) {
    e.importance_samples = f.unsigned_int(*x, "importance_samples");
  }
  if (const json* x = f.optional("seed")) e.seed = f.unsigned_int(*x, "seed");
  f.finish();
}

ojson model_to_json(const ModelConfig& m) {
  ojson j;
  j["input_dims"] = m.input_dims;
  j["latent_dim"] = m.latent_dim;
  j["hidden"] = m.hidden;
  j["likelihood"] = to_string(m.likelihood);
  j["aggregation"] = to_string(m.aggregation);
  j["activation"] = to_string(m.activation);
  j["beta"] = m.beta;
  j["learning_rate"] = m.learning_rate;
  j["batch_size"] = m.batch_size;
  j["epochs"] = m.epochs;
  j["seed"] = m.seed;
  return j;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  const json doc = parse_json<ConfigError>(text, "config");
  RunConfig config;
  Fields f(doc, "");
  read_model(f.required("model"), config.model);
  read_data(f.required("data"), config.data);
  if (const json* e = f.optional("eval")) read_eval(*e, config.eval);
  f.finish();
  config.data.toy.validate();
  if (!(config.data.train_fraction > 0.0 && config.data.train_fraction < 1.0)) {
    throw ConfigError("data.train_fraction must lie in (0, 1)");
  }
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_file(path));
}

std::pair<MultimodalDataset, MultimodalDataset> load_data(RunConfig& config) {
  MultimodalDataset data = config.data.source == "idx"
                               ? load_idx(config.data.images, config.data.labels)
                               : gen_toy(config.data.toy);
  std::vector<std::size_t> dims;
  for (const auto& info : data.info) dims.push_back(info.dim);
  if (!config.model.input_dims.empty() && config.model.input_dims != dims) {
    throw ConfigError("model.input_dims does not match the dataset");
  }
  config.model.input_dims = dims;
  config.model.validate();
  return split(data, config.data.train_fraction, config.data.split_seed);
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const std::filesystem::path& path, const MultimodalVae& vae,
                     const CounterRng& rng) {
  ojson doc;
  doc["format"] = kCheckpointMagic;
  doc["format_version"] = kCheckpointVersion;
  doc["config"] = model_to_json(vae.config());
  ojson params = ojson::object();
  for (const auto& e : vae.params().entries()) {
    params[e.name] = {{"shape", {e.value.rows, e.value.cols}}, {"data", e.value.data}};
  }
  doc["params"] = std::move(params);
  doc["optimizer_step"] = vae.params().step();
  doc["rng_state"] = {{"seed", rng.seed()}, {"stream", rng.stream()}, {"counter", rng.counter()}};
  write_file(path, doc.dump());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream probe(path);
  if (!probe) throw FormatError("cannot open checkpoint " + path.string());
  const std::string text = read_file(path);
  const json doc = parse_json<FormatError>(text, "checkpoint");
  if (!doc.is_object() || !doc.contains("format") || doc["format"] != kCheckpointMagic) {
    throw FormatError("not a checkpoint: expected format \"" + std::string(kCheckpointMagic) +
                      "\"");
  }
  if (!doc.contains("format_version")) throw FormatError("checkpoint has no format_version");
  if (!doc["format_version"].is_number_integer() ||
      doc["format_version"].get<int>() != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint format_version " + doc["format_version"].dump() +
                      " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  try {
    ModelConfig config;
    read_model(doc.at("config"), config);
    config.validate();
    ad::ParamStore store;
    const json& params = doc.at("params");
    for (const auto& [name, shape] : parameter_layout(config)) {
      if (!params.contains(name)) throw FormatError("checkpoint lacks parameter " + name);
      const json& p = params.at(name);
      const auto dims = p.at("shape").get<std::vector<std::size_t>>();
      if (dims.size() != 2) throw FormatError("parameter " + name + ": bad shape");
      store.add(name, Matrix(dims[0], dims[1], p.at("data").get<std::vector<double>>()));
    }
    if (params.size() != store.size()) throw FormatError("checkpoint has extra parameters");
    store.set_step(doc.at("optimizer_step").get<std::uint64_t>());
    const json& r = doc.at("rng_state");
    CounterRng rng(r.at("seed").get<std::uint64_t>(), r.at("stream").get<std::uint64_t>());
    rng.set_counter(r.at("counter").get<std::uint64_t>());
    return {MultimodalVae(std::move(config), std::move(store)), rng};
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("malformed checkpoint config: ") + e.what());
  } catch (const DimensionError& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Tables

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string subset_label(SubsetIndex s) {
  std::string out;
  for (std::size_t m : s.members()) {
    if (!out.empty()) out += '+';
    out += std::to_string(m);
  }
  return out;
}

std::string metrics_csv(const std::vector<MetricsRow>& history, std::size_t num_modalities) {
  std::string out = "epoch,loss";
  for (std::size_t m = 0; m < num_modalities; ++m) out += ",recon_" + std::to_string(m);
  out += ",kl\n";
  for (const auto& row : history) {
    out += std::to_string(row.epoch) + "," + format_double(row.loss);
    for (double r : row.recon) out += "," + format_double(r);
    out += "," + format_double(row.kl) + "\n";
  }
  return out;
}

namespace {

// ---------------------------------------------------------------------------
// aggregate

std::vector<double> number_list(const json& v, const std::string& path) {
  if (!v.is_array()) throw SchemaError(path + ": expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) {
      throw SchemaError(path + "[" + std::to_string(i) + "]: expected a number");
    }
    out.push_back(v[i].get<double>());
  }
  return out;
}

std::vector<double> parse_csv_numbers(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (res.ec != std::errc() || res.ptr != item.data() + item.size()) {
      throw ConfigError(flag + ": '" + item + "' is not a number");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(flag + ": empty list");
  return out;
}

ojson gaussian_json(const DiagGaussian& g) {
  ojson j;
  j["mean"] = std::vector<double>(g.mean().begin(), g.mean().end());
  j["sigma"] = std::vector<double>(g.sigma().begin(), g.sigma().end());
  return j;
}

struct AggregateInput {
  std::vector<DiagGaussian> diag;
  std::vector<FullGaussian> full;
  std::vector<double> weights;
};

AggregateInput read_aggregate_input(const std::string& text) {
  const json doc = parse_json<SchemaError>(text, "input");
  Fields f(doc, "");
  const json& list = f.required("posteriors");
  if (!list.is_array() || list.empty()) {
    throw SchemaError("posteriors: expected a non-empty array");
  }
  AggregateInput in;
  if (const json* w = f.optional("weights")) in.weights = number_list(*w, "weights");
  f.finish();
  bool any_full = false, any_diag = false;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string path = "posteriors[" + std::to_string(i) + "]";
    Fields p(list[i], path);
    const auto mean = number_list(p.required("mean"), path + ".mean");
    if (p.has("cov")) {
      any_full = true;
      const json& cov = p.required("cov");
      if (!cov.is_array()) throw SchemaError(path + ".cov: expected an array of rows");
      std::vector<double> entries;
      for (std::size_t r = 0; r < cov.size(); ++r) {
        const auto row = number_list(cov[r], path + ".cov[" + std::to_string(r) + "]");
        if (row.size() != mean.size()) {
          throw SchemaError(path + ".cov[" + std::to_string(r) + "]: expected " +
                            std::to_string(mean.size()) + " entries");
        }
        entries.insert(entries.end(), row.begin(), row.end());
      }
      if (cov.size() != mean.size()) {
        throw SchemaError(path + ".cov: expected " + std::to_string(mean.size()) + " rows");
      }
      try {
        in.full.emplace_back(mean, SymMatrix(mean.size(), entries));
      } catch (const NotPsdError& e) {
        throw SchemaError(path + ".cov: " + e.what());
      }
    } else {
      any_diag = true;
      const auto sigma = number_list(p.required("sigma"), path + ".sigma");
      if (sigma.size() != mean.size()) {
        throw SchemaError(path + ".sigma: expected " + std::to_string(mean.size()) +
                          " entries");
      }
      try {
        in.diag.emplace_back(mean, sigma);
      } catch (const InvalidArgument& e) {
        throw SchemaError(path + ".sigma: " + e.what());
      }
    }
    p.finish();
  }
  if (any_full && any_diag) throw SchemaError("posteriors: mix of sigma and cov entries");
  return in;
}

template <class G>
WeightedFamily<G> make_family(std::vector<G> members, const std::vector<double>& weights) {
  if (weights.empty()) return WeightedFamily<G>::uniform(std::move(members));
  if (weights.size() != members.size()) {
    throw ConfigError("weights: expected " + std::to_string(members.size()) + " values, got " +
                      std::to_string(weights.size()));
  }
  return WeightedFamily<G>(std::move(members), weights);
}

int cmd_aggregate(const std::string& input, const std::string& method_name,
                  const std::string& weights_flag, const std::string& exponents_flag,
                  const std::string& output, std::ostream& out) {
  AggregateInput in = read_aggregate_input(read_file(input));
  if (!weights_flag.empty()) in.weights = parse_csv_numbers(weights_flag, "--weights");
  const Aggregation method = parse_aggregation(method_name);
  ojson result;
  result["method"] = method_name;

  if (!in.full.empty()) {
    if (method != Aggregation::kWb) {
      throw ConfigError("method " + method_name + " needs diagonal posteriors (mean, sigma)");
    }
    const FullFamily family = make_family(std::move(in.full), in.weights);
    FixedPointStats stats;
    const FullGaussian g = wb_full(family, kFixedPointTolerance, kFixedPointMaxIter, &stats);
    result["mean"] = std::vector<double>(g.mean().begin(), g.mean().end());
    std::vector<std::vector<double>> cov(g.dim(), std::vector<double>(g.dim()));
    for (std::size_t i = 0; i < g.dim(); ++i) {
      for (std::size_t j = 0; j < g.dim(); ++j) cov[i][j] = g.cov()(i, j);
    }
    result["cov"] = cov;
    result["iterations"] = stats.iterations;
  } else {
    const bool powerset = method == Aggregation::kMopoe || method == Aggregation::kMwb;
    if (powerset && !in.weights.empty()) {
      throw ConfigError("weights: " + method_name + " uses equal subset weights");
    }
    const DiagFamily family = make_family(std::move(in.diag), in.weights);
    const DiagGaussian prior = DiagGaussian::standard(family.dim());
    auto write_mixture = [&result](const GaussianMixture& mix) {
      ojson comps = ojson::array();
      for (std::size_t k = 0; k < mix.size(); ++k) {
        ojson c;
        c["weight"] = mix.weights()[k];
        c["mean"] = gaussian_json(mix.components()[k])["mean"];
        c["sigma"] = gaussian_json(mix.components()[k])["sigma"];
        comps.push_back(std::move(c));
      }
      result["components"] = std::move(comps);
    };
    switch (method) {
      case Aggregation::kPoe: {
        std::vector<double> exponents(family.size(), 1.0);
        if (!exponents_flag.empty()) {
          exponents = parse_csv_numbers(exponents_flag, "--exponents");
          if (exponents.size() != family.size()) {
            throw ConfigError("--exponents: expected " + std::to_string(family.size()) +
                              " values");
          }
        }
        const DiagGaussian g = poe(family, exponents);
        result.update(gaussian_json(g));
        break;
      }
      case Aggregation::kWb: result.update(gaussian_json(wb_diag(family))); break;
      case Aggregation::kMoe: write_mixture(moe(family)); break;
      case Aggregation::kMopoe: write_mixture(mopoe(family, prior)); break;
      case Aggregation::kMwb: write_mixture(mwb(family, prior)); break;
    }
  }

  const std::string text = result.dump(2) + "\n";
  if (output.empty()) {
    out << text;
  } else {
    write_file(output, text);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train / eval

std::filesystem::path resolve_out(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutputEnv); env != nullptr && *env != '\0') return env;
  return "runs";
}

int cmd_train(const std::string& config_path, const std::string& out_flag,
              const std::optional<std::uint64_t>& seed, std::ostream& out) {
  RunConfig config = load_run_config(config_path);
  if (seed) config.model.seed = *seed;
  auto [train_set, test_set] = load_data(config);
  const std::filesystem::path dir = resolve_out(out_flag);
  std::filesystem::create_directories(dir);

  const TrainResult result = train(config.model, train_set);
  write_file(dir / "metrics.csv", metrics_csv(result.history, config.model.num_modalities()));
  save_checkpoint(dir / "checkpoint.json", result.vae, result.rng);
  out << "trained " << result.history.size() << " epochs on " << train_set.size()
      << " examples; final loss " << format_double(result.history.empty()
                                                      ? 0.0
                                                      : result.history.back().loss)
      << "\nwrote " << (dir / "checkpoint.json").string() << " and "
      << (dir / "metrics.csv").string() << "\n";
  return kExitOk;
}

ojson report_json(const EvalReport& r) {
  ojson doc;
  doc["probe_train_count"] = r.probe_train_count;
  doc["importance_samples"] = r.importance_samples;
  ojson acc = ojson::array();
  for (const auto& a : r.accuracy) {
    acc.push_back({{"subset", subset_label(a.subset)}, {"size", a.subset.size()},
                   {"accuracy", a.accuracy}});
  }
  doc["accuracy"] = std::move(acc);
  ojson coh = ojson::array();
  for (const auto& c : r.coherence) {
    coh.push_back({{"source", subset_label(c.source)}, {"target", c.target},
                   {"coherence", c.coherence}});
  }
  doc["coherence"] = std::move(coh);
  ojson ll = ojson::array();
  for (const auto& l : r.likelihood) {
    ll.push_back({{"subset", subset_label(l.subset)}, {"log_likelihood", l.log_likelihood}});
  }
  doc["likelihood"] = std::move(ll);
  return doc;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& config_path,
             const std::string& out_flag, const std::optional<std::uint64_t>& seed,
             std::ostream& out) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  RunConfig config = load_run_config(config_path);
  if (seed) config.eval.seed = *seed;
  config.model.input_dims = ckpt.vae.config().input_dims;
  auto [train_set, test_set] = load_data(config);
  const std::filesystem::path dir = resolve_out(out_flag);
  std::filesystem::create_directories(dir);

  const EvalReport report = evaluate(ckpt.vae, train_set, test_set, config.eval);
  write_file(dir / "report.json", report_json(report).dump(2));

  std::string acc = "subset,size,accuracy\n";
  for (const auto& a : report.accuracy) {
    acc += subset_label(a.subset) + "," + std::to_string(a.subset.size()) + "," +
           format_double(a.accuracy) + "\n";
  }
  write_file(dir / "accuracy.csv", acc);
  std::string coh = "source,target,coherence\n";
  for (const auto& c : report.coherence) {
    coh += subset_label(c.source) + "," + std::to_string(c.target) + "," +
           format_double(c.coherence) + "\n";
  }
  write_file(dir / "coherence.csv", coh);
  std::string ll = "subset,k,log_likelihood\n";
  for (const auto& l : report.likelihood) {
    ll += subset_label(l.subset) + "," + std::to_string(report.importance_samples) + "," +
          format_double(l.log_likelihood) + "\n";
  }
  write_file(dir / "likelihood.csv", ll);
  out << "wrote " << (dir / "report.json").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bench

template <class F>
double time_per_call_us(F&& f) {
  using clock = std::chrono::steady_clock;
  std::size_t calls = 0;
  const auto start = clock::now();
  double elapsed = 0.0;
  do {
    f();
    ++calls;
    elapsed = std::chrono::duration<double>(clock::now() - start).count();
  } while (elapsed < 0.02 && calls < 100000);
  return 1e6 * elapsed / static_cast<double>(calls);
}

std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& flag) {
  std::vector<std::size_t> out;
  for (double v : parse_csv_numbers(text, flag)) {
    if (!(v >= 1.0) || v != std::floor(v)) {
      throw ConfigError(flag + ": sizes must be positive integers");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

int cmd_bench(const std::string& dims_flag, const std::string& mods_flag,
              const std::string& diag_flag, std::ostream& out) {
  const auto dims = parse_size_list(dims_flag, "--dims");
  const auto mods = parse_size_list(mods_flag, "--modalities");
  const auto diag_dims = parse_size_list(diag_flag, "--diag-dims");
  CounterRng rng(0, 0x62656e6368);
  auto random_diag = [&rng](std::size_t d) {
    std::vector<double> mu(d), sigma(d);
    for (std::size_t i = 0; i < d; ++i) {
      mu[i] = rng.normal();
      sigma[i] = 0.2 + rng.uniform();
    }
    return DiagGaussian(mu, sigma);
  };
  out << "op,dim,modalities,us_per_call\n";
  for (std::size_t d : dims) {
    for (std::size_t m : mods) {
      std::vector<FullGaussian> members;
      for (std::size_t k = 0; k < m; ++k) {
        std::vector<double> a(d * d);
        for (double& v : a) v = rng.normal();
        std::vector<double> cov(d * d);
        for (std::size_t i = 0; i < d; ++i) {
          for (std::size_t j = 0; j < d; ++j) {
            double s = 0.0;
            for (std::size_t l = 0; l < d; ++l) s += a[i * d + l] * a[j * d + l];
            cov[i * d + j] = s / static_cast<double>(d) + (i == j ? 0.5 : 0.0);
          }
        }
        members.emplace_back(std::vector<double>(d, static_cast<double>(k)),
                             SymMatrix(d, cov));
      }
      const FullFamily family = FullFamily::uniform(members);
      const double us = time_per_call_us([&] { (void)wb_full(family); });
      out << "wb_full," << d << "," << m << "," << format_double(us) << "\n";
    }
  }
  const std::size_t m = mods.empty() ? 8 : *std::max_element(mods.begin(), mods.end());
  for (std::size_t d : diag_dims) {
    std::vector<DiagGaussian> members;
    for (std::size_t k = 0; k < m; ++k) members.push_back(random_diag(d));
    const DiagFamily family = DiagFamily::uniform(members);
    const std::vector<double> ones(m, 1.0);
    out << "poe," << d << "," << m << ","
        << format_double(time_per_call_us([&] { (void)poe(family, ones); })) << "\n";
    out << "moe," << d << "," << m << ","
        << format_double(time_per_call_us([&] { (void)moe(family); })) << "\n";
    out << "wb_diag," << d << "," << m << ","
        << format_double(time_per_call_us([&] { (void)wb_diag(family); })) << "\n";
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gaussian posterior aggregation and multimodal VAE toolkit", "baryvae"};
  app.require_subcommand(1);

  std::string input, method = "wb", weights, exponents, output;
  auto* agg = app.add_subcommand("aggregate", "Aggregate Gaussian posteriors from a JSON file");
  agg->add_option("input", input, "Input JSON with a posteriors array")->required();
  agg->add_option("--method", method, "poe|moe|mopoe|wb|mwb");
  agg->add_option("--weights", weights, "Comma-separated family weights");
  agg->add_option("--exponents", exponents, "Comma-separated poe exponents");
  agg->add_option("--output", output, "Output file (default stdout)");

  std::string config, out_dir, checkpoint;
  std::optional<std::uint64_t> seed;
  auto* tr = app.add_subcommand("train", "Train a multimodal VAE");
  tr->add_option("--config", config, "Run config JSON")->required();
  tr->add_option("--out", out_dir, std::string("Output directory (default $") + kOutputEnv + ")");
  tr->add_option("--seed", seed, "Override model.seed");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--checkpoint", checkpoint, "Checkpoint JSON")->required();
  ev->add_option("--config", config, "Run config JSON")->required();
  ev->add_option("--out", out_dir, std::string("Output directory (default $") + kOutputEnv + ")");
  ev->add_option("--seed", seed, "Override eval.seed");

  std::string dims = "2,4,8,16,32", mods = "2,4,8", diag_dims = "64,512,4096";
  auto* be = app.add_subcommand("bench", "Time the aggregators");
  be->add_option("--dims", dims, "wb_full dimensions");
  be->add_option("--modalities", mods, "Family sizes");
  be->add_option("--diag-dims", diag_dims, "Dimensions for poe, moe and wb_diag");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    if (*agg) return cmd_aggregate(input, method, weights, exponents, output, out);
    if (*tr) return cmd_train(config, out_dir, seed, out);
    if (*ev) return cmd_eval(checkpoint, config, out_dir, seed, out);
    if (*be) return cmd_bench(dims, mods, diag_dims, out);
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ConfigError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const InvalidArgument& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const DimensionError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace baryvae::cli
