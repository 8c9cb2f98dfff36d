#include "mmvdn/mil.hpp"

#include <stdexcept>
#include <string>

namespace mmvdn {

LocationMax mil_over_locations(Var map) {
  const int w = map.shape().size() == 3 ? map.shape()[2] : 0;
  SpatialMaxResult r = spatial_max(map);
  LocationMax out{r.output, {}, {}};
  out.x.reserve(r.argmax.size());
  out.y.reserve(r.argmax.size());
  for (int idx : r.argmax) {
    out.x.push_back(idx % w);
    out.y.push_back(idx / w);
  }
  return out;
}

MilResult mil_over_scales(std::span<const LocationMax> per_scale) {
  if (per_scale.empty()) throw std::invalid_argument("mil_over_scales: need at least one scale");
  const Shape& first = per_scale[0].values.shape();
  for (std::size_t s = 1; s < per_scale.size(); ++s) {
    if (per_scale[s].values.shape() != first) {
      throw std::invalid_argument("mil_over_scales: scale " + std::to_string(s) + " has shape " +
                                  shape_str(per_scale[s].values.shape()) + ", expected " + shape_str(first));
    }
  }
  const std::size_t n = per_scale[0].values.value().size();
  MilResult r;
  r.v = per_scale[0].values;
  r.winning_scale.assign(n, 0);
  for (std::size_t s = 1; s < per_scale.size(); ++s) {
    MaxResult m = elementwise_max(r.v, per_scale[s].values);
    for (std::size_t c = 0; c < n; ++c) {
      if (m.mask[c]) r.winning_scale[c] = static_cast<int>(s);
    }
    r.v = m.output;
  }
  r.x.resize(n);
  r.y.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    const LocationMax& win = per_scale[static_cast<std::size_t>(r.winning_scale[c])];
    r.x[c] = win.x[c];
    r.y[c] = win.y[c];
  }
  return r;
}

void localize(MilResult& result, std::span<const GeometryReport> scales, int frame_size) {
  result.boxes.clear();
  for (std::size_t c = 0; c < result.winning_scale.size(); ++c) {
    const auto s = static_cast<std::size_t>(result.winning_scale[c]);
    if (s >= scales.size()) throw std::invalid_argument("localize: no geometry for scale index " + std::to_string(s));
    result.boxes.push_back(receptive_box(scales[s], result.x[c], result.y[c], frame_size));
  }
}

MilResult mil_pool(std::span<const ScaleMap> maps) {
  std::vector<LocationMax> per_scale;
  per_scale.reserve(maps.size());
  for (const auto& m : maps) per_scale.push_back(mil_over_locations(m.scores));
  return mil_over_scales(per_scale);
}

}  // namespace mmvdn
