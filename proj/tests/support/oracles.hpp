#pragma once
// Independent reference computations used only by tests. Deliberately not
// implemented on top of the library's fast paths: the tent-map oracle keeps
// the whole dividend in 256-bit limbs and replays the truncation rule from
// the mathematical definition.

#include <array>
#include <cstdint>
#include <cmath>
#include <stdexcept>

namespace testsupport {

// Little-endian 4x64 limbs.
struct U256 {
  std::array<uint64_t, 4> limb{};
};

inline U256 shl64(uint64_t x) {
  U256 r;
  r.limb[1] = x;
  return r;
}

// Long division of a 256-bit value by a 64-bit divisor, high limb first.
struct DivResult {
  U256 quotient;
  uint64_t remainder = 0;
};

inline DivResult div_u256_u64(const U256& n, uint64_t d) {
  if (d == 0) throw std::invalid_argument("division by zero");
  DivResult out;
  unsigned __int128 rem = 0;
  for (int i = 3; i >= 0; --i) {
    unsigned __int128 cur = (rem << 64) | n.limb[i];
    out.quotient.limb[i] = static_cast<uint64_t>(cur / d);
    rem = cur % d;
  }
  out.remainder = static_cast<uint64_t>(rem);
  return out;
}

// Reference skew tent map step over fixed-point fractions in (0,1):
//   x < a:  floor(x * 2^64 / a)
//   x >= a: floor((2^64 - x) * 2^64 / (2^64 - a))
// truncated to the low 64 bits, with the 0 / all-ones escape XOR.
inline uint64_t tent_oracle_step(uint64_t x, uint64_t a) {
  constexpr uint64_t kOnes = ~uint64_t{0};
  constexpr uint64_t kEscape = 0x9E3779B97F4A7C15ull;
  if (a == 0 || a == kOnes || x == 0 || x == kOnes)
    throw std::invalid_argument("tent oracle operand outside (0,1)");
  U256 dividend;
  uint64_t divisor;
  if (x < a) {
    dividend = shl64(x);
    divisor = a;
  } else {
    dividend = shl64(kOnes - x + 1);  // 2^64 - x, exact since x >= 1
    divisor = kOnes - a + 1;
  }
  U256 q = div_u256_u64(dividend, divisor).quotient;
  uint64_t r = q.limb[0];  // truncation to 64 bits discards limbs 1..3
  if (r == 0 || r == kOnes) r ^= kEscape;
  return r;
}

// Monobit z-score: |#ones - #zeros| / sqrt(n) for n bits.
inline double monobit_z(size_t ones, size_t nbits) {
  double s = 2.0 * static_cast<double>(ones) - static_cast<double>(nbits);
  return std::fabs(s) / std::sqrt(static_cast<double>(nbits));
}

// Runs-test z-score under the fair-coin null: V = number of runs,
// E[V] = (n+1)/2, Var[V] = (n-1)/4.
template <class BitAt>
double runs_z(BitAt bit, size_t nbits) {
  size_t runs = 1;
  for (size_t i = 0; i + 1 < nbits; ++i)
    if (bit(i) != bit(i + 1)) ++runs;
  double n = static_cast<double>(nbits);
  double mean = (n + 1.0) / 2.0;
  double sd = std::sqrt(n - 1.0) / 2.0;
  return std::fabs(static_cast<double>(runs) - mean) / sd;
}

}  // namespace testsupport
