#include "baryvae/rng.hpp"

#include <cmath>
#include <numbers>

namespace baryvae {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t derive_key(std::uint64_t parent, std::uint64_t stream) {
  return mix64(parent ^ mix64(stream * kGolden + 0x632BE59BD9B4E019ULL));
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : CounterRng(seed, stream, derive_key(mix64(seed + kGolden), stream)) {}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream,
                       std::uint64_t key)
    : seed_(seed), stream_(stream), key_(key) {}

std::uint64_t CounterRng::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double CounterRng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::normal() {
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

void CounterRng::fill_normal(std::span<double> out) {
  for (double& v : out) v = normal();
}

std::uint64_t CounterRng::below(std::uint64_t n) {
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t limit = ~0ULL - (~0ULL % n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

std::vector<std::size_t> CounterRng::permutation(std::size_t n) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    std::swap(p[i - 1], p[below(i)]);
  }
  return p;
}

CounterRng CounterRng::split(std::uint64_t stream) const {
  return CounterRng(seed_, stream, derive_key(key_, stream));
}

}  // namespace baryvae
