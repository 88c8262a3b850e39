#pragma once

// Binary archive: magic "INRGANCK", u32 version, u64 metadata length and
// JSON metadata, u64 array count, then per array u32 name length, name,
// u32 rank, u64 dims and float32 little-endian values.

#include "inrgan/tensor.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace inrgan {

struct NamedArray {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::vector<float> data;
};

struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<NamedArray> arrays;

  const NamedArray* find(const std::string& name) const;
};

/// Writes to a temporary file and renames it into place.
void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

template <typename T>
void export_arrays(const ParamList<T>& params, Checkpoint& ckpt);
/// Copies stored values into params; missing names or shape mismatches
/// throw std::invalid_argument.
template <typename T>
void import_arrays(const Checkpoint& ckpt, const ParamList<T>& params);

}  // namespace inrgan
