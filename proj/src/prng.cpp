#include "chatsrp/prng.hpp"

#include <bit>
#include <cstdio>

namespace chatsrp {

size_t Bitstring::ones() const {
  size_t total = 0;
  for (size_t i = 0; i + 1 < bytes.size(); ++i) total += std::popcount(bytes[i]);
  if (!bytes.empty()) {
    unsigned rest = nbits & 7;
    uint8_t last = bytes.back();
    if (rest) last &= static_cast<uint8_t>((1u << rest) - 1);
    total += std::popcount(last);
  }
  return total;
}

std::string Nonce::hex() const {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(32);
  for (uint8_t b : bits) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 15]);
  }
  return out;
}

std::string OtpCode::digits() const {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%06u", value);
  return buf;
}

static void check_unit_interval(uint64_t w, const char* what) {
  if (w == 0 || w == ~uint64_t{0})
    throw std::invalid_argument(std::string(what) + " must lie strictly in (0,1)");
}

uint64_t TentPrng::step(uint64_t x, uint64_t a) {
  check_unit_interval(a, "tent parameter");
  check_unit_interval(x, "tent state");
  // 1-x in fixed point is 2^64-x, which is exactly the wrapped negation.
  unsigned __int128 q;
  if (x < a)
    q = (static_cast<unsigned __int128>(x) << 64) / a;
  else
    q = (static_cast<unsigned __int128>(0 - x) << 64) / (0 - a);
  uint64_t r = static_cast<uint64_t>(q);  // truncate; x == a overflows to 0
  if (r == 0 || r == ~uint64_t{0}) r ^= kEscape;
  return r;
}

TentPrng::TentPrng(uint64_t seed, uint64_t a) : state_(seed), a_(a) {
  check_unit_interval(a, "tent parameter");
  check_unit_interval(seed, "seed");
  for (int i = 0; i < kWarmup; ++i) state_ = step(state_, a_);
  discarded_ = kWarmup;
}

uint32_t TentPrng::next_word() {
  state_ = step(state_, a_);
  ++draws_;
  return static_cast<uint32_t>(state_ >> 16);
}

Bitstring TentPrng::next_bits(size_t n) {
  Bitstring out;
  out.nbits = n;
  out.bytes.assign((n + 7) / 8, 0);
  size_t filled = 0;
  while (filled < n) {
    uint32_t w = next_word();
    for (int b = 0; b < 32 && filled < n; ++b, ++filled)
      if ((w >> b) & 1) out.bytes[filled >> 3] |= static_cast<uint8_t>(1u << (filled & 7));
  }
  return out;
}

Nonce TentPrng::next_nonce() {
  Bitstring bs = next_bits(128);
  Nonce n;
  for (int i = 0; i < 16; ++i) n.bits[i] = bs.bytes[i];
  if (!seen_.insert(n.bits).second) throw DuplicateNonce();
  return n;
}

OtpCode TentPrng::next_otp() {
  // Largest multiple of 10^6 representable in 32 bits; draws at or above
  // it are rejected so the residue is unbiased.
  constexpr uint32_t kLimit = 4294000000u;
  for (;;) {
    uint32_t w = next_word();
    if (w < kLimit) return OtpCode{w % 1000000u};
  }
}

uint64_t fix64(uint64_t num, uint64_t den) {
  if (den == 0 || num >= den) throw std::invalid_argument("fix64 needs num < den, den > 0");
  return static_cast<uint64_t>((static_cast<unsigned __int128>(num) << 64) / den);
}

}  // namespace chatsrp
