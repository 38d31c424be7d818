#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace genbench {

/// Identifier written into manifests so datasets can be regenerated elsewhere.
inline constexpr std::string_view kRngName = "xoshiro256**/splitmix64";

std::uint64_t splitmix64(std::uint64_t& state);

/// xoshiro256** with splitmix64 seeding. Distributions are implemented here
/// rather than with <random> so streams are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent stream for (seed, stream_id); used for per-sample generation
  /// so that serial and parallel generation agree bit for bit.
  static Rng substream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();

 private:
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace genbench
