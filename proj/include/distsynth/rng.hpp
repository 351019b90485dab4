#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>

namespace distsynth {

struct RngSeed {
  std::uint64_t value = 0;
  friend bool operator==(const RngSeed&, const RngSeed&) = default;
};

// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t splitmix64(std::uint64_t x);

// Seed for a named sub-stream: splitmix64(seed ^ fnv1a(name)). Every consumer
// of randomness (one per generated variable, the sampler, the C2ST split)
// draws from its own stream so adding a consumer never shifts another's draws.
std::uint64_t derive_stream(RngSeed seed, std::string_view stream_name);

std::uint64_t fnv1a64(std::string_view bytes);

// std::mt19937_64 (output sequence fixed by the standard) with portable
// conversions: 53-bit uniforms and explicit transforms rather than the
// implementation-defined std:: distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(RngSeed seed, std::string_view stream) : engine_(derive_stream(seed, stream)) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Uniform on [lo, hi]; lo == hi yields lo.
  double uniform(double lo, double hi);
  // Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);
  // Standard normal via the Marsaglia polar method.
  double normal();
  // Index drawn from non-negative weights (need not be normalized).
  std::size_t categorical(std::span<const double> weights);

  std::string save_state() const;
  void load_state(const std::string& state);

  friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace distsynth
