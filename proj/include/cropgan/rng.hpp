#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace cropgan {

// Deterministic random source. mt19937_64 output is fixed by the standard,
// and all distributions are implemented here so that streams are
// bit-identical across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n) via rejection sampling.
  std::uint64_t next_below(std::uint64_t n);

  // Standard normal via Box-Muller, one cached spare.
  double normal();
  double normal(double mean, double std) { return mean + std * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Engine state as text, for run manifests and checkpoints.
  std::string state() const;
  void restore(const std::string& state);

  // Stream derivation so that (seed, index) pairs give independent,
  // order-insensitive substreams.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t index);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::vector<int> shuffled_indices(int n, Rng& rng);

}  // namespace cropgan
