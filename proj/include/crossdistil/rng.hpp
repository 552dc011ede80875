#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

namespace crossdistil {

// Seeded generator with portable derived distributions. std::*_distribution
// output differs between standard libraries; these do not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, n). n must be positive.
  std::size_t index(std::size_t n);

  // Standard normal via Box-Muller (no cached spare, so state is just the engine).
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  std::string state() const;
  void set_state(const std::string& s);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace crossdistil
