#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "baryvae/data.hpp"
#include "baryvae/errors.hpp"

using namespace baryvae;

namespace {

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "baryvae_data_test";
  std::filesystem::create_directories(dir);
  return dir;
}

void write_bytes(const std::filesystem::path& p, const std::vector<unsigned char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

std::vector<unsigned char> be32(std::uint32_t v) {
  return {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
}

std::vector<unsigned char> image_file(std::uint32_t magic, std::uint32_t count,
                                      std::size_t pixels) {
  std::vector<unsigned char> out;
  for (std::uint32_t v : {magic, count, 28u, 28u}) {
    const auto b = be32(v);
    out.insert(out.end(), b.begin(), b.end());
  }
  for (std::size_t i = 0; i < pixels; ++i) out.push_back(static_cast<unsigned char>(i % 256));
  return out;
}

std::vector<unsigned char> label_file(std::uint32_t magic, std::vector<unsigned char> labels) {
  std::vector<unsigned char> out = be32(magic);
  const auto n = be32(static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), n.begin(), n.end());
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

IdxParseError::Kind parse_kind(const std::vector<unsigned char>& img,
                               const std::vector<unsigned char>& lab, std::string* what) {
  const auto dir = temp_dir();
  write_bytes(dir / "img", img);
  write_bytes(dir / "lab", lab);
  try {
    (void)load_idx(dir / "img", dir / "lab");
  } catch (const IdxParseError& e) {
    if (what) *what = e.what();
    return e.kind();
  }
  FAIL("expected a parse error");
  return IdxParseError::Kind::kIo;
}

}  // namespace

TEST_CASE("gen_toy with zero noise and no background yields pure glyphs") {
  ToyConfig cfg;
  cfg.num_modalities = 1;
  cfg.noise = 0.0;
  cfg.backgrounds = {0};
  cfg.examples_per_class = 7;
  const auto data = gen_toy(cfg);
  REQUIRE(data.size() == 70);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = data.modalities[0].row(i);
    const auto& g = glyph(data.labels[i]);
    CHECK(std::equal(row.begin(), row.end(), g.begin()));
  }
}

TEST_CASE("gen_toy shape, balance, range and determinism") {
  ToyConfig cfg;
  const auto a = gen_toy(cfg);
  const auto b = gen_toy(cfg);
  CHECK(a.size() == 1000);
  CHECK(a.num_modalities() == 5);
  CHECK(a.num_classes == 10);
  CHECK(a.modalities == b.modalities);
  CHECK(a.labels == b.labels);
  std::map<int, int> counts;
  for (int y : a.labels) ++counts[y];
  for (const auto& [y, n] : counts) CHECK(n == 100);
  for (const auto& m : a.modalities) {
    CHECK(m.cols == 64);
    for (double v : m.data) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  // Modalities differ by background but share labels row by row.
  CHECK(a.modalities[0] != a.modalities[1]);
  cfg.seed = 9;
  CHECK(gen_toy(cfg).modalities != a.modalities);
}

TEST_CASE("ToyConfig validation") {
  ToyConfig cfg;
  cfg.num_modalities = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.num_modalities = 9;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.noise = 0.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.backgrounds = {1, 2};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("load_idx parses hand-written fixtures") {
  const auto dir = temp_dir();
  write_bytes(dir / "img", image_file(0x803, 2, 2 * 784));
  write_bytes(dir / "lab", label_file(0x801, {3, 7}));
  const auto data = load_idx(dir / "img", dir / "lab");
  CHECK(data.size() == 2);
  CHECK(data.info[0].dim == 784);
  CHECK(data.labels == std::vector<int>{3, 7});
  CHECK(data.num_classes == 8);
  CHECK(data.modalities[0](0, 0) == 0.0);
  CHECK(data.modalities[0](0, 255) == 1.0);
  CHECK(data.modalities[0](1, 0) == doctest::Approx(784 % 256 / 255.0));
}

TEST_CASE("load_idx error kinds") {
  std::string what;
  CHECK(parse_kind(image_file(0x802, 2, 2 * 784), label_file(0x801, {1, 2}), &what) ==
        IdxParseError::Kind::kBadMagic);
  CHECK(what.find("0x00000803") != std::string::npos);
  CHECK(parse_kind(image_file(0x803, 2, 2 * 784), label_file(0x803, {1, 2}), &what) ==
        IdxParseError::Kind::kBadMagic);
  CHECK(what.find("0x00000801") != std::string::npos);
  CHECK(parse_kind(image_file(0x803, 2, 2 * 784), label_file(0x801, {1, 2, 3}), nullptr) ==
        IdxParseError::Kind::kCountMismatch);
  CHECK(parse_kind(image_file(0x803, 2, 784 + 10), label_file(0x801, {1, 2}), nullptr) ==
        IdxParseError::Kind::kTruncated);
  auto short_labels = label_file(0x801, {1, 2});
  short_labels.pop_back();
  CHECK(parse_kind(image_file(0x803, 2, 2 * 784), short_labels, nullptr) ==
        IdxParseError::Kind::kTruncated);
  CHECK(parse_kind({0x00, 0x00}, label_file(0x801, {1}), nullptr) ==
        IdxParseError::Kind::kTruncated);
  CHECK_THROWS_AS(load_idx(temp_dir() / "missing", temp_dir() / "lab"), IdxParseError);
}

TEST_CASE("split is stratified, sized and seeded") {
  const auto data = gen_toy(ToyConfig{});
  const auto [train, test] = split(data, 0.8, 3);
  CHECK(train.size() == 800);
  CHECK(test.size() == 200);
  std::map<int, int> per_class;
  for (int y : train.labels) ++per_class[y];
  for (const auto& [y, n] : per_class) CHECK(std::abs(n - 80) <= 1);

  const auto [train2, test2] = split(data, 0.8, 3);
  CHECK(train2.modalities == train.modalities);
  CHECK(test2.labels == test.labels);
  const auto [train3, test3] = split(data, 0.8, 4);
  CHECK(train3.modalities != train.modalities);

  CHECK_THROWS_AS(split(data, 0.0, 0), InvalidArgument);
  CHECK_THROWS_AS(split(data, 1.0, 0), InvalidArgument);
}

TEST_CASE("property: split preserves class proportions within one example") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ToyConfig cfg;
    cfg.num_modalities = 1;
    cfg.examples_per_class = 13 + seed;
    const auto data = gen_toy(cfg);
    const double fraction = 0.1 + 0.04 * static_cast<double>(seed);
    const auto [train, test] = split(data, fraction, seed);
    CHECK(train.size() + test.size() == data.size());
    std::map<int, int> per_class;
    for (int y : train.labels) ++per_class[y];
    for (const auto& [y, n] : per_class) {
      CHECK(std::abs(n - fraction * static_cast<double>(cfg.examples_per_class)) <= 1.0);
    }
  }
}

TEST_CASE("select keeps modalities aligned") {
  const auto data = gen_toy(ToyConfig{});
  const auto sub = data.select({5, 2});
  CHECK(sub.labels == std::vector<int>{data.labels[5], data.labels[2]});
  for (std::size_t m = 0; m < data.num_modalities(); ++m) {
    CHECK(sub.modalities[m].row(0)[7] == data.modalities[m].row(5)[7]);
  }
}
