#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mmvdn/tensor.hpp"

namespace mmvdn {

// All ops validate shapes and throw std::invalid_argument with both shapes
// named on mismatch. Every max-style op breaks ties toward the lowest
// row-major index or the first operand.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, float factor);
Var sum(Var a);

Var relu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);

// [M x K] * [K x N] -> [M x N], or [M x K] * [K] -> [M].
Var matmul(Var a, Var b);

// Concatenation and slicing along the leading axis. Trailing extents must
// agree for concat.
Var concat(std::span<const Var> parts);
Var slice(Var a, int begin, int end);
Var reshape(Var a, Shape shape);

// input [C_in x H x W], weight [C_out x C_in x k x k], bias [C_out].
// Zero padding; output extent floor((H + 2 pad - k) / stride) + 1.
Var conv2d(Var input, Var weight, Var bias, int stride, int pad);

struct PoolResult {
  Var output;
  // Flat input index (within the channel plane) of each output cell's winner.
  std::vector<int> argmax;
};

// No padding; output extent floor((H - k) / stride) + 1.
PoolResult maxpool2d(Var input, int kernel, int stride);

struct MaxResult {
  Var output;
  // 0 where `a` won (including ties), 1 where `b` won.
  std::vector<std::uint8_t> mask;
};

MaxResult elementwise_max(Var a, Var b);

struct SpatialMaxResult {
  Var output;             // [C]
  std::vector<int> argmax;  // flat y * W + x per channel
};

// Global max over the spatial plane of each channel of [C x H x W].
SpatialMaxResult spatial_max(Var map);

// Scalar loss -log softmax(logits)[target], computed with max subtraction.
Var softmax_cross_entropy(Var logits, int target);

// Plain helpers (no tape).
std::vector<float> softmax(std::span<const float> logits);

}  // namespace mmvdn
