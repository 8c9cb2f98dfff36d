#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mmvdn/tensor.hpp"

namespace mmvdn {

// Binary tensor container, all integers little-endian:
//   "MMVD" | u32 version | u32 count |
//   count x ( u32 name_len | name bytes | u32 rank | rank x u32 extent |
//             extent-product x f32 )
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
  bool operator==(const NamedTensor&) const = default;
};

std::string encode_container(const std::vector<NamedTensor>& tensors);
// Throws std::runtime_error naming the defect (bad magic, unknown version,
// truncation, trailing bytes, zero extent).
std::vector<NamedTensor> decode_container(std::string_view bytes);

void write_container(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_container(const std::string& path);

std::vector<NamedTensor> to_named(const ParameterSet& params);
ParameterSet to_parameters(const std::vector<NamedTensor>& tensors);

const Tensor& find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name);
const Tensor* try_find_tensor(const std::vector<NamedTensor>& tensors, const std::string& name);

}  // namespace mmvdn
