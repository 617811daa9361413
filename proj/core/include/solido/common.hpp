#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace solido {

using Shape = std::vector<std::size_t>;

// Thrown on contract violations (shape mismatch, bad geometry, domain errors).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a computation produces NaN/Inf or a gradient check fails;
// the CLI maps this to its own exit code.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

}  // namespace solido
