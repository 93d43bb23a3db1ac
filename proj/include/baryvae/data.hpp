#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "baryvae/errors.hpp"
#include "baryvae/matrix.hpp"

namespace baryvae {

struct ModalityInfo {
  std::string name;
  std::size_t dim = 0;
};

// Aligned multimodal examples: row i of every modality belongs to labels[i].
// Pixel values lie in [0, 1].
struct MultimodalDataset {
  std::vector<Matrix> modalities;
  std::vector<int> labels;
  std::vector<ModalityInfo> info;
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t num_modalities() const { return modalities.size(); }
  MultimodalDataset select(const std::vector<std::size_t>& indices) const;
  // Throws DimensionError when modalities disagree on example count.
  void validate() const;
};

enum class Background { kNone = 0, kStripes, kChecker, kGradient, kDots, kRings,
                        kDiagonal, kBorder };
inline constexpr std::size_t kNumBackgrounds = 8;
inline constexpr double kBackgroundIntensity = 0.4;

struct ToyConfig {
  std::size_t num_modalities = 5;
  int num_classes = 10;
  std::size_t examples_per_class = 100;
  std::size_t resolution = 8;
  // Pattern id per modality; empty means modality m uses pattern m.
  std::vector<std::size_t> backgrounds;
  // Per-pixel probability of flipping the glyph bit.
  double noise = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
};

// 8x8 bitmap for a digit, row-major, values 0/1.
const std::vector<double>& glyph(int digit);
std::vector<double> background_pattern(std::size_t id, std::size_t resolution);

// Toy analogue of a "digit over per-modality background" dataset:
// clamp(glyph XOR bernoulli(noise) + 0.4 * background_m) per modality.
MultimodalDataset gen_toy(const ToyConfig& config);

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

class IdxParseError : public FormatError {
 public:
  enum class Kind { kIo, kBadMagic, kTruncated, kCountMismatch };
  IdxParseError(Kind kind, const std::string& what) : FormatError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Reads an IDX image file (magic 0x803) and label file (magic 0x801) as a
// single-modality dataset with pixels scaled to [0, 1].
MultimodalDataset load_idx(const std::filesystem::path& images,
                           const std::filesystem::path& labels);

// Stratified seeded split: per class, round(fraction * count) examples go to
// the training side.
std::pair<MultimodalDataset, MultimodalDataset> split(const MultimodalDataset& data,
                                                      double train_fraction,
                                                      std::uint64_t seed);

}  // namespace baryvae
