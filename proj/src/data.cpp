#include "baryvae/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "baryvae/rng.hpp"

namespace baryvae {
namespace {

constexpr std::array<const char*, 10> kFont = {
    "..####.."
    ".##..##."
    ".##..##."
    ".##..##."
    ".##..##."
    ".##..##."
    "..####.."
    "........",

    "...##..."
    "..###..."
    "...##..."
    "...##..."
    "...##..."
    "...##..."
    ".######."
    "........",

    "..####.."
    ".##..##."
    ".....##."
    "....##.."
    "...##..."
    "..##...."
    ".######."
    "........",

    "..####.."
    ".##..##."
    ".....##."
    "...###.."
    ".....##."
    ".##..##."
    "..####.."
    "........",

    "....##.."
    "...###.."
    "..#.##.."
    ".#..##.."
    ".######."
    "....##.."
    "....##.."
    "........",

    ".######."
    ".##....."
    ".#####.."
    ".....##."
    ".....##."
    ".##..##."
    "..####.."
    "........",

    "..####.."
    ".##....."
    ".##....."
    ".#####.."
    ".##..##."
    ".##..##."
    "..####.."
    "........",

    ".######."
    ".....##."
    "....##.."
    "...##..."
    "..##...."
    "..##...."
    "..##...."
    "........",

    "..####.."
    ".##..##."
    ".##..##."
    "..####.."
    ".##..##."
    ".##..##."
    "..####.."
    "........",

    "..####.."
    ".##..##."
    ".##..##."
    "..#####."
    ".....##."
    "....##.."
    "..###..."
    "........",
};

constexpr std::size_t kGlyphSize = 8;

std::vector<double> scaled_glyph(int digit, std::size_t res) {
  const auto& g = glyph(digit);
  std::vector<double> out(res * res);
  for (std::size_t r = 0; r < res; ++r) {
    for (std::size_t c = 0; c < res; ++c) {
      out[r * res + c] = g[(r * kGlyphSize / res) * kGlyphSize + c * kGlyphSize / res];
    }
  }
  return out;
}

}  // namespace

const std::vector<double>& glyph(int digit) {
  static const std::array<std::vector<double>, 10> glyphs = [] {
    std::array<std::vector<double>, 10> out;
    for (std::size_t d = 0; d < kFont.size(); ++d) {
      for (std::size_t i = 0; i < kGlyphSize * kGlyphSize; ++i) {
        out[d].push_back(kFont[d][i] == '#' ? 1.0 : 0.0);
      }
    }
    return out;
  }();
  if (digit < 0 || digit > 9) throw InvalidArgument("glyph: digit out of range");
  return glyphs[static_cast<std::size_t>(digit)];
}

std::vector<double> background_pattern(std::size_t id, std::size_t res) {
  std::vector<double> out(res * res, 0.0);
  const double center = 0.5 * static_cast<double>(res - 1);
  for (std::size_t r = 0; r < res; ++r) {
    for (std::size_t c = 0; c < res; ++c) {
      double v = 0.0;
      switch (static_cast<Background>(id)) {
        case Background::kNone: v = 0.0; break;
        case Background::kStripes: v = r % 2 == 0 ? 1.0 : 0.0; break;
        case Background::kChecker: v = (r + c) % 2 == 0 ? 1.0 : 0.0; break;
        case Background::kGradient:
          v = static_cast<double>(c) / static_cast<double>(std::max<std::size_t>(res - 1, 1));
          break;
        case Background::kDots: v = (r % 3 == 1 && c % 3 == 1) ? 1.0 : 0.0; break;
        case Background::kRings: {
          const double dist = std::hypot(static_cast<double>(r) - center,
                                         static_cast<double>(c) - center);
          v = static_cast<int>(dist) % 2 == 0 ? 1.0 : 0.0;
          break;
        }
        case Background::kDiagonal: v = (r + c) % 4 == 0 ? 1.0 : 0.0; break;
        case Background::kBorder:
          v = (r == 0 || c == 0 || r + 1 == res || c + 1 == res) ? 1.0 : 0.0;
          break;
        default: throw InvalidArgument("unknown background pattern id");
      }
      out[r * res + c] = v;
    }
  }
  return out;
}

void ToyConfig::validate() const {
  if (num_modalities < 1 || num_modalities > kNumBackgrounds) {
    throw ConfigError("toy: num_modalities must be in [1, 8]");
  }
  if (num_classes < 2 || num_classes > 10) throw ConfigError("toy: num_classes must be in [2, 10]");
  if (examples_per_class < 1) throw ConfigError("toy: examples_per_class must be >= 1");
  if (resolution < 1) throw ConfigError("toy: resolution must be >= 1");
  if (!(noise >= 0.0 && noise < 0.5)) throw ConfigError("toy: noise must be in [0, 0.5)");
  if (!backgrounds.empty()) {
    if (backgrounds.size() != num_modalities) {
      throw ConfigError("toy: backgrounds must list one pattern per modality");
    }
    for (std::size_t b : backgrounds) {
      if (b >= kNumBackgrounds) throw ConfigError("toy: background id out of range");
    }
  }
}

MultimodalDataset gen_toy(const ToyConfig& config) {
  config.validate();
  const std::size_t res = config.resolution;
  const std::size_t dim = res * res;
  const std::size_t classes = static_cast<std::size_t>(config.num_classes);
  const std::size_t n = classes * config.examples_per_class;

  std::vector<std::vector<double>> glyphs;
  for (std::size_t c = 0; c < classes; ++c) glyphs.push_back(scaled_glyph(static_cast<int>(c), res));

  MultimodalDataset out;
  out.num_classes = config.num_classes;
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.labels[i] = static_cast<int>(i % classes);

  const CounterRng root(config.seed, 0x746f79);
  for (std::size_t m = 0; m < config.num_modalities; ++m) {
    const std::size_t pattern = config.backgrounds.empty() ? m : config.backgrounds[m];
    const auto bg = background_pattern(pattern, res);
    CounterRng rng = root.split(m);
    Matrix images(n, dim);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& g = glyphs[static_cast<std::size_t>(out.labels[i])];
      for (std::size_t p = 0; p < dim; ++p) {
        double bit = g[p];
        if (config.noise > 0.0 && rng.uniform() < config.noise) bit = 1.0 - bit;
        images(i, p) = std::clamp(bit + kBackgroundIntensity * bg[p], 0.0, 1.0);
      }
    }
    out.modalities.push_back(std::move(images));
    out.info.push_back({"toy" + std::to_string(m), dim});
  }
  return out;
}

MultimodalDataset MultimodalDataset::select(const std::vector<std::size_t>& indices) const {
  MultimodalDataset out;
  out.info = info;
  out.num_classes = num_classes;
  for (const Matrix& m : modalities) out.modalities.push_back(m.gather_rows(indices));
  for (std::size_t i : indices) out.labels.push_back(labels.at(i));
  return out;
}

void MultimodalDataset::validate() const {
  if (modalities.size() != info.size()) throw DimensionError("dataset: modality info mismatch");
  for (std::size_t m = 0; m < modalities.size(); ++m) {
    if (modalities[m].rows != labels.size()) {
      throw DimensionError("dataset: modality " + std::to_string(m) +
                           " has a different example count");
    }
    if (modalities[m].cols != info[m].dim) throw DimensionError("dataset: modality dim mismatch");
  }
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IdxParseError(IdxParseError::Kind::kIo, "cannot open " + path.string());
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (bytes.size() < offset + 4) {
    throw IdxParseError(IdxParseError::Kind::kTruncated,
                        path.string() + ": truncated header");
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::string hex(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex;
  os.width(8);
  os.fill('0');
  os << v;
  return os.str();
}

void expect_magic(std::uint32_t got, std::uint32_t expected,
                  const std::filesystem::path& path) {
  if (got != expected) {
    throw IdxParseError(IdxParseError::Kind::kBadMagic,
                        path.string() + ": bad magic " + hex(got) + ", expected " +
                            hex(expected));
  }
}

}  // namespace

MultimodalDataset load_idx(const std::filesystem::path& images,
                           const std::filesystem::path& labels) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);

  expect_magic(read_be32(img, 0, images), kIdxImageMagic, images);
  expect_magic(read_be32(lab, 0, labels), kIdxLabelMagic, labels);

  const std::size_t count = read_be32(img, 4, images);
  const std::size_t rows = read_be32(img, 8, images);
  const std::size_t cols = read_be32(img, 12, images);
  const std::size_t label_count = read_be32(lab, 4, labels);
  if (count != label_count) {
    throw IdxParseError(IdxParseError::Kind::kCountMismatch,
                        "image count " + std::to_string(count) +
                            " does not match label count " + std::to_string(label_count));
  }
  const std::size_t dim = rows * cols;
  if (dim == 0 || (img.size() - 16) / dim < count) {
    throw IdxParseError(IdxParseError::Kind::kTruncated,
                        images.string() + ": truncated pixel data");
  }
  if (lab.size() - 8 < count) {
    throw IdxParseError(IdxParseError::Kind::kTruncated,
                        labels.string() + ": truncated label data");
  }

  MultimodalDataset out;
  Matrix pixels(count, dim);
  for (std::size_t i = 0; i < count * dim; ++i) pixels.data[i] = img[16 + i] / 255.0;
  out.modalities.push_back(std::move(pixels));
  out.info.push_back({"idx", dim});
  int max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    out.labels.push_back(lab[8 + i]);
    max_label = std::max(max_label, out.labels.back());
  }
  out.num_classes = max_label + 1;
  return out;
}

std::pair<MultimodalDataset, MultimodalDataset> split(const MultimodalDataset& data,
                                                      double train_fraction,
                                                      std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("split: train fraction must be in (0, 1)");
  }
  CounterRng rng(seed, 0x73706c);
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.num_classes));
  for (std::size_t i = 0; i < data.size(); ++i) {
    by_class.at(static_cast<std::size_t>(data.labels[i])).push_back(i);
  }
  std::vector<std::size_t> train, test;
  for (auto& members : by_class) {
    const auto perm = rng.permutation(members.size());
    const auto take = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(members.size())));
    for (std::size_t k = 0; k < members.size(); ++k) {
      (k < take ? train : test).push_back(members[perm[k]]);
    }
  }
  const auto shuffle = [&rng](std::vector<std::size_t>& v) {
    const auto perm = rng.permutation(v.size());
    std::vector<std::size_t> out(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) out[k] = v[perm[k]];
    v = std::move(out);
  };
  shuffle(train);
  shuffle(test);
  return {data.select(train), data.select(test)};
}

}  // namespace baryvae
