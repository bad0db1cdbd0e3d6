#pragma once
// Chaos-based deterministic PRNG: skew tent map over 64-bit fixed-point
// fractions (value = word / 2^64). Pure integer arithmetic, so equal
// (seed, a) give bitwise-equal streams on every platform.

#include <array>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace chatsrp {

// Packed bit sequence. Bit i lives in bytes[i/8] at position i%8 (LSB first).
struct Bitstring {
  std::vector<uint8_t> bytes;
  size_t nbits = 0;

  bool bit(size_t i) const { return (bytes[i >> 3] >> (i & 7)) & 1; }
  size_t ones() const;
};

struct Nonce {
  std::array<uint8_t, 16> bits{};
  std::string hex() const;
  auto operator<=>(const Nonce&) const = default;
};

// Six decimal digits, drawn without modulo bias.
struct OtpCode {
  uint32_t value = 0;  // < 1'000'000
  std::string digits() const;
  bool operator==(const OtpCode&) const = default;
};

struct DuplicateNonce : std::runtime_error {
  DuplicateNonce() : std::runtime_error("duplicate nonce: PRNG defect") {}
};

class TentPrng {
 public:
  // Perturbation applied when the truncated map hits 0 or 2^64-1; either
  // value would otherwise be absorbing under truncated integer division.
  static constexpr uint64_t kEscape = 0x9E3779B97F4A7C15ull;
  static constexpr int kWarmup = 128;

  // Throws std::invalid_argument unless both seed and a lie strictly
  // inside (0, 1), i.e. neither word is 0 nor 2^64-1.
  TentPrng(uint64_t seed, uint64_t a);

  // One application of the map: x/a if x < a else (1-x)/(1-a), evaluated
  // with a 128-bit intermediate and truncated back to 64 bits.
  static uint64_t step(uint64_t x, uint64_t a);

  // Advances one iteration and extracts state bits 16..47.
  uint32_t next_word();

  // n bits, 32 per iteration, LSB of each extracted word first.
  // n == 0 leaves the state untouched.
  Bitstring next_bits(size_t n);

  // 128 bits via next_bits. Every nonce this instance ever returned is
  // remembered; a repeat aborts the run (DuplicateNonce).
  Nonce next_nonce();

  // 32-bit draw rejected above the largest multiple of 10^6, then mod 10^6.
  OtpCode next_otp();

  uint64_t state() const { return state_; }
  uint64_t param_a() const { return a_; }
  size_t discarded() const { return discarded_; }
  uint64_t draws() const { return draws_; }

 private:
  uint64_t state_;
  uint64_t a_;
  size_t discarded_ = 0;
  uint64_t draws_ = 0;                      // iterations past warm-up
  std::set<std::array<uint8_t, 16>> seen_;  // run-local nonce uniqueness
};

// floor(num/den * 2^64) for den != 0, num < den. Convenience for literals.
uint64_t fix64(uint64_t num, uint64_t den);

}  // namespace chatsrp
