#pragma once

// Philox4x32-10 counter-based generator (Salmon et al. constants).
//
// Stream layout: key = (seed low 32, seed high 32); counter =
// (block low 32, block high 32, stream low 32, stream high 32). Each block
// yields four 32-bit words, consumed in order. Independent streams (folds,
// threads) use distinct stream ids with the same seed.

#include <array>
#include <cstdint>

namespace keyrate {

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t seed, std::uint64_t stream);

  std::uint32_t next_u32();
  /// Uniform on (0, 1) from 53 random bits; never returns 0 or 1.
  double uniform();
  /// Standard normal via Box-Muller; both outputs of each pair are used.
  double normal();

 private:
  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace keyrate
