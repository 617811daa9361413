#include "solido/rng.hpp"

#include <cmath>

namespace solido {

namespace {
constexpr std::uint64_t kMult = 6364136223846793005ULL;
constexpr std::uint64_t kInc = 1442695040888963407ULL;  // must be odd
}  // namespace

Rng::Rng(std::uint64_t seed) {
  state_ = 0;
  next_u32();
  state_ += seed;
  next_u32();
}

std::uint32_t Rng::next_u32() {
  std::uint64_t old = state_;
  state_ = old * kMult + kInc;
  std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
  std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
  return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
}

std::uint64_t Rng::next_u64() {
  std::uint64_t hi = next_u32();
  std::uint64_t lo = next_u32();
  return (hi << 32) | lo;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  // Rejection-free modulo is biased; use Lemire-style rejection on 64 bits.
  if (n == 0) return 0;
  std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

double Rng::gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1, u2;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  u2 = uniform();
  double mag = std::sqrt(-2.0 * std::log(u1));
  double two_pi_u2 = 2.0 * M_PI * u2;
  spare_ = mag * std::sin(two_pi_u2);
  has_spare_ = true;
  return mag * std::cos(two_pi_u2);
}

std::vector<std::uint8_t> Rng::bits(std::size_t n) {
  std::vector<std::uint8_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<std::uint8_t>(next_u32() & 1u);
  return out;
}

}  // namespace solido
