#pragma once

#include <span>
#include <vector>

#include "mmvdn/network.hpp"
#include "mmvdn/ops.hpp"

namespace mmvdn {

// Per-concept maximum over all positions of one score map [N x h x w].
struct LocationMax {
  Var values;            // [N]
  std::vector<int> x;    // winning column per concept
  std::vector<int> y;    // winning row per concept
};

LocationMax mil_over_locations(Var map);

struct MilResult {
  Var v;  // [N] semantic vector
  std::vector<int> winning_scale;  // index into the configured scale order
  std::vector<int> x;
  std::vector<int> y;
  // Receptive-field box of each winner in frame pixels; filled by localize().
  std::vector<Box> boxes;
};

// Elementwise max across scales, earliest scale winning ties. Composes the
// winning scale's location argmax into the result.
MilResult mil_over_scales(std::span<const LocationMax> per_scale);

// Fills result.boxes from the geometry of each scale (same order as the
// scales given to mil_over_scales).
void localize(MilResult& result, std::span<const GeometryReport> scales, int frame_size);

// Location MIL on every map, then scale MIL.
MilResult mil_pool(std::span<const ScaleMap> maps);

}  // namespace mmvdn
