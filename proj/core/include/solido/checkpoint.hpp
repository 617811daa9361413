#pragma once

#include <map>
#include <string>
#include <vector>

#include "solido/common.hpp"
#include "solido/tensor.hpp"

namespace solido {

// "SLDO" container: versioned manifest of named f32 tensors plus an embedded
// JSON config snapshot, CRC32-checked. Little-endian on every platform.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  struct Entry {
    Shape shape;
    std::vector<float> data;
  };

  std::map<std::string, Entry> tensors;
  std::string config_json;

  void put(const std::string& name, const Tensor& t);
  Tensor get(const std::string& name) const;  // f32 widened back to f64
  bool has(const std::string& name) const { return tensors.count(name) > 0; }

  void store(const std::vector<Parameter*>& params);
  // Copies values into matching parameters; throws listing any absentees.
  void restore(const std::vector<Parameter*>& params) const;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

std::uint32_t crc32(const std::uint8_t* data, std::size_t n, std::uint32_t seed = 0);

}  // namespace solido
