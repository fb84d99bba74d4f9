#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "deblur/core/tensor.hpp"

namespace deblur {

// Binary tensor-table container used for checkpoints and external feature
// extractor weights. Layout, all little-endian:
//   magic "SLCG", u32 version, u64 tensor count, then per tensor
//   (sorted by name): u16 name length, name bytes, u8 rank,
//   rank x u64 dims, raw float32 data.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TensorEntry {
  Shape shape{1, 1, 1, 1};
  std::uint8_t rank = 4;  // ranks < 4 are stored with trailing dims dropped
  std::vector<float> values;
};

struct TensorTable {
  std::map<std::string, TensorEntry> entries;  // sorted: serialization is canonical

  void put(const std::string& name, const Shape& shape, std::vector<float> values,
           std::uint8_t rank = 4);
  void put_vector(const std::string& name, std::vector<float> values);
  void put_scalar(const std::string& name, float value);

  const TensorEntry& at(const std::string& name) const;
  bool contains(const std::string& name) const { return entries.count(name) > 0; }
};

void write_tensor_table(const std::string& path, const TensorTable& table);
TensorTable read_tensor_table(const std::string& path);

// Exact encodings for non-float state riding in the float tensor table.
// Doubles and u64s are stored as their raw bit halves, each u32 half
// bit-cast into one float; no arithmetic ever touches these values.
std::vector<float> pack_doubles(const std::vector<double>& values);
std::vector<double> unpack_doubles(const std::vector<float>& packed);
std::vector<float> pack_u64s(const std::vector<std::uint64_t>& values);
std::vector<std::uint64_t> unpack_u64s(const std::vector<float>& packed);

std::vector<std::uint8_t> serialize_tensor_table(const TensorTable& table);
TensorTable deserialize_tensor_table(const std::vector<std::uint8_t>& bytes,
                                     const std::string& origin);

}  // namespace deblur
