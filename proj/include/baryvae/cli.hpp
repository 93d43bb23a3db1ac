#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "baryvae/data.hpp"
#include "baryvae/eval.hpp"
#include "baryvae/mmvae.hpp"
#include "baryvae/rng.hpp"

namespace baryvae::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInput = 2,
  kExitNumeric = 3,
  kExitFormat = 4,
};

inline constexpr const char* kCheckpointMagic = "baryvae-checkpoint";
inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kOutputEnv = "BARYVAE_OUT";

struct DataConfig {
  std::string source = "toy";  // toy | idx
  ToyConfig toy;
  std::filesystem::path images;
  std::filesystem::path labels;
  double train_fraction = 0.8;
  std::uint64_t split_seed = 0;
};

// Model settings minus input dims, which come from the dataset.
struct RunConfig {
  ModelConfig model;
  DataConfig data;
  EvalOptions eval;
};

// Throws ConfigError naming the offending field. Unknown keys are rejected.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

// (train, test) for a run, with model input dims filled in.
std::pair<MultimodalDataset, MultimodalDataset> load_data(RunConfig& config);

struct Checkpoint {
  MultimodalVae vae;
  CounterRng rng;
};

void save_checkpoint(const std::filesystem::path& path, const MultimodalVae& vae,
                     const CounterRng& rng);
// Throws FormatError on bad magic, version or layout.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Shortest round-trip decimal.
std::string format_double(double v);
std::string metrics_csv(const std::vector<MetricsRow>& history, std::size_t num_modalities);
// "0+2" style label for a subset.
std::string subset_label(SubsetIndex s);

// Entry point shared by the executable and tests. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace baryvae::cli
