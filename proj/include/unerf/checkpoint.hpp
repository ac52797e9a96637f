#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "unerf/tensor.hpp"

namespace unerf {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
  enum class Dtype : std::uint8_t { F32 = 1, F64 = 2 };
  std::string name;
  Shape shape;
  Dtype dtype = Dtype::F32;
  std::vector<unsigned char> bytes;  // little-endian, row-major
};

// Layout: magic "UNERFCKP", u32 version, u64 config length, config text,
// u64 counter, u32 array count, arrays, then a crc32 of everything before.
struct Checkpoint {
  std::string config;  // JSON text
  std::uint64_t counter = 0;
  std::vector<NamedArray> arrays;

  void put(const std::string& name, const Tensor<float>& t);
  void put(const std::string& name, const Tensor<double>& t);
  void put(const std::string& name, const std::vector<double>& v);

  const NamedArray& find(const std::string& name) const;
  bool contains(const std::string& name) const;
  // Copies into `out`, which must already have the stored shape and dtype.
  void get(const std::string& name, Tensor<float>& out) const;
  void get(const std::string& name, Tensor<double>& out) const;
  std::vector<double> get_vector(const std::string& name) const;
};

// Writes to a temporary file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// IoError when unreadable, ParseError on a bad magic, version or checksum.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace unerf
