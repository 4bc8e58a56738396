#pragma once

#include <cstdint>
#include <string_view>

namespace itergp {

// Counter-based generator: the i-th output is mix64(key + (i+1) * phi), with
// the key hashed from (name, n, seed, stream). Streams with distinct keys are
// independent, and a draw at position i never depends on thread count or on
// how many values other streams consumed.
class CounterRng {
 public:
  static constexpr std::uint64_t kStreamDesign = 1;
  static constexpr std::uint64_t kStreamNoise = 2;
  static constexpr std::uint64_t kStreamLanczosInit = 3;

  CounterRng(std::string_view name, std::uint64_t n, std::uint64_t seed,
             std::uint64_t stream);

  std::uint64_t next_u64();
  // Uniform on (0, 1]; never returns 0 so log() stays finite.
  double next_uniform();
  // Standard normal via Box-Muller; the paired value is cached.
  double next_normal();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace itergp
