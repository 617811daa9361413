#pragma once

#include <cstdint>
#include <vector>

namespace solido {

// PCG32 (XSH-RR variant, fixed stream constant). Identical seed gives an
// identical stream on every platform; Gaussians are drawn via Box-Muller so
// noise streams replay bit-exactly as well.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0x853c49e6748fea9bULL);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform in [0, 1): 53-bit mantissa from two draws.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n);

  double gaussian();  // standard normal, Box-Muller

  std::vector<std::uint8_t> bits(std::size_t n);  // iid fair bits

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace solido
