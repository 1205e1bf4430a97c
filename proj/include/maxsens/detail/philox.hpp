// Copyright (c) 2026 The maxsens authors.
// Distributed under the MIT License; see LICENSE for details.

#ifndef MAXSENS_DETAIL_PHILOX_HPP
#define MAXSENS_DETAIL_PHILOX_HPP

#include <array>
#include <cstdint>

namespace maxsens {
namespace detail {

// Philox-4x32-10 counter-based generator (Salmon, Moraes, Dror & Shaw,
// "Parallel random numbers: as easy as 1, 2, 3", SC'11).  A block cipher on a
// 128-bit counter with a 64-bit key: any (key, counter) pair can be evaluated
// independently, which gives cheap, statistically independent streams for
// replicate-parallel Monte Carlo without shared state.

struct philox4x32_key {
  std::uint32_t k0, k1;
};

inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  philox4x32_key key) {
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;  // golden ratio
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;  // sqrt(3) - 1
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key.k0, lo1, hi0 ^ ctr[3] ^ key.k1, lo0};
    key.k0 += kWeyl0;
    key.k1 += kWeyl1;
  }
  return ctr;
}

}  // namespace detail
}  // namespace maxsens

#endif  // MAXSENS_DETAIL_PHILOX_HPP
