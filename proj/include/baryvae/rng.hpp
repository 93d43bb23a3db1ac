#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace baryvae {

// Counter-based generator: every draw is a pure function of (key, counter),
// so streams can be split deterministically and replayed from a saved counter.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed = 0, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  // Uniform on [0, 1).
  double uniform();
  // Standard normal via Box-Muller; consumes two counters.
  double normal();
  void fill_normal(std::span<double> out);
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  // Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

  // Independent child stream; does not advance this generator.
  CounterRng split(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }
  void set_counter(std::uint64_t counter) { counter_ = counter; }

 private:
  CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t key);

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace baryvae
