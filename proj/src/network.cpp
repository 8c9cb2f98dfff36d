#include "mmvdn/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace mmvdn {

int NetworkSpec::concept_count() const {
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
    if (it->kind == LayerKind::fully_connected) return it->units;
  }
  return 0;
}

std::size_t NetworkSpec::first_fc() const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].kind == LayerKind::fully_connected) return i;
  }
  return layers.size();
}

std::vector<std::string> NetworkSpec::fc_names() const {
  std::vector<std::string> out;
  for (const auto& l : layers) {
    if (l.kind == LayerKind::fully_connected) out.push_back(l.name);
  }
  return out;
}

std::vector<std::string> NetworkSpec::conv_names() const {
  std::vector<std::string> out;
  for (const auto& l : layers) {
    if (l.kind == LayerKind::conv) out.push_back(l.name);
  }
  return out;
}

namespace {

void assign_names(NetworkSpec& spec) {
  int fc_total = 0;
  for (const auto& l : spec.layers) fc_total += l.kind == LayerKind::fully_connected;
  int conv = 0;
  int fc = 8 - fc_total;  // the last fully-connected layer is always fc8
  std::string last = "input";
  for (auto& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::conv:
        l.name = "conv" + std::to_string(++conv);
        break;
      case LayerKind::maxpool:
        l.name = "pool" + std::to_string(conv);
        break;
      case LayerKind::fully_connected:
        l.name = "fc" + std::to_string(++fc);
        break;
      case LayerKind::relu:
        l.name = "relu_" + last;
        break;
    }
    if (l.kind != LayerKind::relu) last = l.name;
  }
}

int out_extent(int extent, int kernel, int stride, int pad) { return (extent + 2 * pad - kernel) / stride + 1; }

// Spatial extent entering the first fully-connected layer at canonical size.
int canonical_fc_extent(const NetworkSpec& spec) {
  int extent = spec.canonical_input;
  for (std::size_t i = 0; i < spec.first_fc(); ++i) {
    const auto& l = spec.layers[i];
    if (l.kind == LayerKind::conv || l.kind == LayerKind::maxpool) {
      const int pad = l.kind == LayerKind::conv ? l.pad : 0;
      if (extent + 2 * pad < l.kernel) {
        throw std::invalid_argument("network spec: layer " + l.name + " kernel " + std::to_string(l.kernel) +
                                    " exceeds its input extent " + std::to_string(extent) + " at canonical size " +
                                    std::to_string(spec.canonical_input));
      }
      extent = out_extent(extent, l.kernel, l.stride, pad);
    }
  }
  return extent;
}

}  // namespace

void NetworkSpec::validate() const {
  if (canonical_input < 1) throw std::invalid_argument("network spec: missing or invalid 'input' line");
  if (input_channels < 1) throw std::invalid_argument("network spec: input channels must be >= 1");
  bool seen_fc = false;
  for (const auto& l : layers) {
    switch (l.kind) {
      case LayerKind::conv:
        if (seen_fc) throw std::invalid_argument("network spec: " + l.name + " follows a fully-connected layer");
        if (l.out_channels < 1 || l.kernel < 1 || l.stride < 1 || l.pad < 0) {
          throw std::invalid_argument("network spec: " + l.name + " has out-of-range fields");
        }
        break;
      case LayerKind::maxpool:
        if (seen_fc) throw std::invalid_argument("network spec: " + l.name + " follows a fully-connected layer");
        if (l.kernel < 1 || l.stride < 1) throw std::invalid_argument("network spec: " + l.name + " has out-of-range fields");
        break;
      case LayerKind::fully_connected:
        if (l.units < 1) throw std::invalid_argument("network spec: " + l.name + " needs units >= 1");
        seen_fc = true;
        break;
      case LayerKind::relu:
        break;
    }
  }
  if (!seen_fc) throw std::invalid_argument("network spec: no fully-connected layer");
  if (layers.back().kind != LayerKind::fully_connected) {
    throw std::invalid_argument("network spec: the last layer must be fully-connected (the concept scores)");
  }
  if (canonical_fc_extent(*this) < 1) {
    throw std::invalid_argument("network spec: spatial extent entering " + layers[first_fc()].name +
                                " is below 1 at canonical size");
  }
}

NetworkSpec parse_network_spec(std::istream& in) {
  NetworkSpec spec;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string kind;
    if (!(fields >> kind)) continue;
    auto want = [&](int count) {
      std::vector<int> v(static_cast<std::size_t>(count));
      for (int& x : v) {
        if (!(fields >> x)) {
          throw std::invalid_argument("network spec line " + std::to_string(lineno) + ": '" + kind + "' expects " +
                                      std::to_string(count) + " integer fields");
        }
      }
      std::string extra;
      if (fields >> extra) {
        throw std::invalid_argument("network spec line " + std::to_string(lineno) + ": unexpected field '" + extra + "'");
      }
      return v;
    };
    LayerSpec l;
    if (kind == "input") {
      auto v = want(2);
      spec.canonical_input = v[0];
      spec.input_channels = v[1];
      continue;
    } else if (kind == "conv") {
      auto v = want(4);
      l.kind = LayerKind::conv;
      l.out_channels = v[0];
      l.kernel = v[1];
      l.stride = v[2];
      l.pad = v[3];
    } else if (kind == "maxpool") {
      auto v = want(2);
      l.kind = LayerKind::maxpool;
      l.kernel = v[0];
      l.stride = v[1];
    } else if (kind == "relu") {
      want(0);
      l.kind = LayerKind::relu;
    } else if (kind == "fc") {
      auto v = want(1);
      l.kind = LayerKind::fully_connected;
      l.units = v[0];
    } else {
      throw std::invalid_argument("network spec line " + std::to_string(lineno) + ": unknown layer kind '" + kind + "'");
    }
    spec.layers.push_back(l);
  }
  assign_names(spec);
  spec.validate();
  return spec;
}

NetworkSpec load_network_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open network spec '" + path + "'");
  try {
    return parse_network_spec(in);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

std::string format_network_spec(const NetworkSpec& spec) {
  std::ostringstream out;
  out << "input " << spec.canonical_input << ' ' << spec.input_channels << '\n';
  for (const auto& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::conv:
        out << "conv " << l.out_channels << ' ' << l.kernel << ' ' << l.stride << ' ' << l.pad << '\n';
        break;
      case LayerKind::maxpool:
        out << "maxpool " << l.kernel << ' ' << l.stride << '\n';
        break;
      case LayerKind::relu:
        out << "relu\n";
        break;
      case LayerKind::fully_connected:
        out << "fc " << l.units << '\n';
        break;
    }
  }
  return out.str();
}

NetworkSpec mininet_spec(int concept_count) {
  std::istringstream in("input 35 3\n"
                        "conv 8 7 2 0\nrelu\nmaxpool 3 2\n"
                        "conv 16 3 1 1\nrelu\nmaxpool 3 2\n"
                        "fc 32\nrelu\nfc 32\nrelu\nfc " +
                        std::to_string(concept_count) + "\n");
  return parse_network_spec(in);
}

NetworkSpec alexnet_spec(int concept_count) {
  std::istringstream in("input 227 3\n"
                        "conv 96 11 4 0\nrelu\nmaxpool 3 2\n"
                        "conv 256 5 1 2\nrelu\nmaxpool 3 2\n"
                        "conv 384 3 1 1\nrelu\n"
                        "conv 384 3 1 1\nrelu\n"
                        "conv 256 3 1 1\nrelu\nmaxpool 3 2\n"
                        "fc 4096\nrelu\nfc 4096\nrelu\nfc " +
                        std::to_string(concept_count) + "\n");
  return parse_network_spec(in);
}

GeometryReport geometry(const NetworkSpec& spec, int input_size) {
  const int fc_kernel = canonical_fc_extent(spec);
  int extent = input_size;
  long long jump = 1;
  long long rf = 1;
  double center = 0.0;
  bool first_fc = true;
  for (const auto& l : spec.layers) {
    int k = 0, s = 1, p = 0;
    if (l.kind == LayerKind::conv) {
      k = l.kernel, s = l.stride, p = l.pad;
    } else if (l.kind == LayerKind::maxpool) {
      k = l.kernel, s = l.stride;
    } else if (l.kind == LayerKind::fully_connected) {
      k = first_fc ? fc_kernel : 1;
      first_fc = false;
    } else {
      continue;
    }
    const int next = extent + 2 * p >= k ? out_extent(extent, k, s, p) : 0;
    if (next < 1) {
      throw std::invalid_argument("geometry: input " + std::to_string(input_size) + " too small, extent at layer " +
                                  l.name + " falls below 1");
    }
    center += ((k - 1) / 2.0 - p) * static_cast<double>(jump);
    rf += static_cast<long long>(k - 1) * jump;
    jump *= s;
    extent = next;
  }
  GeometryReport g;
  g.input_size = input_size;
  g.score_map_size = extent;
  g.receptive_field = static_cast<int>(rf);
  g.jump = static_cast<int>(jump);
  g.first_center = center;
  g.height_ratio = std::min(1.0, static_cast<double>(rf) / input_size);
  return g;
}

double Box::area() const { return std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0); }

Box receptive_box(const GeometryReport& g, int x, int y, int frame_size) {
  // Pixel i of the resized input samples the frame at i * (F - 1) / (S - 1);
  // pixel centers sit at integer coordinates, so edges shift by half a pixel.
  const double factor =
      g.input_size > 1 ? static_cast<double>(frame_size - 1) / (g.input_size - 1) : static_cast<double>(frame_size);
  const double half = g.receptive_field / 2.0;
  auto span = [&](int cell, double& lo, double& hi) {
    const double c = g.first_center + static_cast<double>(cell) * g.jump;
    lo = std::clamp((c - half) * factor + 0.5, 0.0, static_cast<double>(frame_size));
    hi = std::clamp((c + half) * factor + 0.5, 0.0, static_cast<double>(frame_size));
  };
  Box b;
  span(x, b.x0, b.x1);
  span(y, b.y0, b.y1);
  return b;
}

double iou(const Box& a, const Box& b) {
  const Box inter{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1), std::min(a.y1, b.y1)};
  const double i = (inter.x1 > inter.x0 && inter.y1 > inter.y0) ? inter.area() : 0.0;
  const double u = a.area() + b.area() - i;
  return u > 0 ? i / u : 0.0;
}

namespace {

// 24 random mantissa bits mapped to [-bound, bound); stable across standard
// library implementations, unlike std::uniform_real_distribution.
void fill_uniform(Tensor& t, std::mt19937_64& rng, float bound) {
  for (float& v : t.data()) {
    const float u = static_cast<float>(rng() >> 40) * (1.0f / 16777216.0f);
    v = (2.f * u - 1.f) * bound;
  }
}

}  // namespace

ParameterSet build_classifier(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  ParameterSet params;
  int channels = spec.input_channels;
  int extent = spec.canonical_input;
  int features = 0;
  for (const auto& l : spec.layers) {
    if (l.kind == LayerKind::conv) {
      Tensor w({l.out_channels, channels, l.kernel, l.kernel});
      fill_uniform(w, rng, std::sqrt(6.f / static_cast<float>(channels * l.kernel * l.kernel)));
      params.add(l.name + ".weight", std::move(w));
      params.add(l.name + ".bias", Tensor({l.out_channels}));
      channels = l.out_channels;
      extent = out_extent(extent, l.kernel, l.stride, l.pad);
    } else if (l.kind == LayerKind::maxpool) {
      extent = out_extent(extent, l.kernel, l.stride, 0);
    } else if (l.kind == LayerKind::fully_connected) {
      const int in = features == 0 ? channels * extent * extent : features;
      Tensor w({l.units, in});
      fill_uniform(w, rng, std::sqrt(6.f / static_cast<float>(in)));
      params.add(l.name + ".weight", std::move(w));
      params.add(l.name + ".bias", Tensor({l.units}));
      features = l.units;
    }
  }
  return params;
}

ParameterSet convert_to_fcn(const ParameterSet& classifier, const NetworkSpec& spec) {
  spec.validate();
  ParameterSet fcn;
  int channels = spec.input_channels;
  int extent = spec.canonical_input;
  int features = 0;
  for (const auto& l : spec.layers) {
    if (l.kind == LayerKind::conv) {
      const Parameter& w = classifier.get(l.name + ".weight");
      const Shape want{l.out_channels, channels, l.kernel, l.kernel};
      if (w.value.shape() != want) {
        throw std::invalid_argument("convert: " + w.name + " has shape " + shape_str(w.value.shape()) + ", expected " +
                                    shape_str(want));
      }
      fcn.add(w.name, w.value).frozen = w.frozen;
      const Parameter& b = classifier.get(l.name + ".bias");
      fcn.add(b.name, b.value).frozen = b.frozen;
      channels = l.out_channels;
      extent = out_extent(extent, l.kernel, l.stride, l.pad);
    } else if (l.kind == LayerKind::maxpool) {
      extent = out_extent(extent, l.kernel, l.stride, 0);
    } else if (l.kind == LayerKind::fully_connected) {
      const Parameter& w = classifier.get(l.name + ".weight");
      const Shape filters = features == 0 ? Shape{l.units, channels, extent, extent} : Shape{l.units, features, 1, 1};
      const int in = filters[1] * filters[2] * filters[3];
      if (w.value.shape() != Shape{l.units, in}) {
        throw std::invalid_argument("convert: " + w.name + " has shape " + shape_str(w.value.shape()) + ", expected " +
                                    shape_str({l.units, in}));
      }
      // The classifier flattens [C x h x w] row-major, so a plain reshape
      // lines filter taps up with the flattened inputs.
      fcn.add("conv" + l.name + ".weight", w.value.reshaped(filters)).frozen = w.frozen;
      const Parameter& b = classifier.get(l.name + ".bias");
      fcn.add("conv" + l.name + ".bias", b.value).frozen = b.frozen;
      features = l.units;
    }
  }
  return fcn;
}

Var classify(Tape& tape, const NetworkSpec& spec, ParameterSet& params, Var image) {
  Var x = image;
  bool flat = false;
  for (const auto& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::conv:
        x = conv2d(x, tape.parameter(params.get(l.name + ".weight")), tape.parameter(params.get(l.name + ".bias")),
                   l.stride, l.pad);
        break;
      case LayerKind::maxpool:
        x = maxpool2d(x, l.kernel, l.stride).output;
        break;
      case LayerKind::relu:
        x = relu(x);
        break;
      case LayerKind::fully_connected:
        if (!flat) {
          x = reshape(x, {static_cast<int>(x.value().size())});
          flat = true;
        }
        x = add(matmul(tape.parameter(params.get(l.name + ".weight")), x), tape.parameter(params.get(l.name + ".bias")));
        break;
    }
  }
  return x;
}

namespace {

Var run_layers(Tape& tape, const NetworkSpec& spec, ParameterSet& fcn, Var image, std::size_t count) {
  Var x = image;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& l = spec.layers[i];
    switch (l.kind) {
      case LayerKind::conv:
        x = conv2d(x, tape.parameter(fcn.get(l.name + ".weight")), tape.parameter(fcn.get(l.name + ".bias")), l.stride,
                   l.pad);
        break;
      case LayerKind::maxpool:
        x = maxpool2d(x, l.kernel, l.stride).output;
        break;
      case LayerKind::relu:
        x = relu(x);
        break;
      case LayerKind::fully_connected:
        x = conv2d(x, tape.parameter(fcn.get("conv" + l.name + ".weight")),
                   tape.parameter(fcn.get("conv" + l.name + ".bias")), 1, 0);
        break;
    }
  }
  return x;
}

}  // namespace

Var trunk_forward(Tape& tape, const NetworkSpec& spec, ParameterSet& fcn, Var image) {
  return run_layers(tape, spec, fcn, image, spec.layers.size() - 1);
}

Var head_forward(Tape& tape, Parameter& weight, Parameter& bias, Var features) {
  return conv2d(features, tape.parameter(weight), tape.parameter(bias), 1, 0);
}

Var fcn_forward(Tape& tape, const NetworkSpec& spec, ParameterSet& fcn, Var image) {
  return run_layers(tape, spec, fcn, image, spec.layers.size());
}

Tensor resize_bilinear(const Tensor& frame, int size) {
  if (frame.rank() != 3) throw std::invalid_argument("resize_bilinear: expected [C x H x W], got " + shape_str(frame.shape()));
  if (size < 1) throw std::invalid_argument("resize_bilinear: target size must be >= 1");
  const int c = frame.dim(0), h = frame.dim(1), w = frame.dim(2);
  Tensor out({c, size, size});
  auto coord = [size](int i, int extent) {
    if (size == 1) return (extent - 1) / 2.0;
    return static_cast<double>(i) * (extent - 1) / (size - 1);
  };
  for (int y = 0; y < size; ++y) {
    const double sy = coord(y, h);
    const int y0 = std::min(static_cast<int>(sy), h - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double fy = sy - y0;
    for (int x = 0; x < size; ++x) {
      const double sx = coord(x, w);
      const int x0 = std::min(static_cast<int>(sx), w - 1);
      const int x1 = std::min(x0 + 1, w - 1);
      const double fx = sx - x0;
      for (int ch = 0; ch < c; ++ch) {
        const double top = frame.at(ch, y0, x0) * (1 - fx) + frame.at(ch, y0, x1) * fx;
        const double bot = frame.at(ch, y1, x0) * (1 - fx) + frame.at(ch, y1, x1) * fx;
        out.at(ch, y, x) = static_cast<float>(top * (1 - fy) + bot * fy);
      }
    }
  }
  return out;
}

std::string head_weight_name(int scale) { return "convfc8.s" + std::to_string(scale) + ".weight"; }
std::string head_bias_name(int scale) { return "convfc8.s" + std::to_string(scale) + ".bias"; }

void add_scale_heads(ParameterSet& fcn, const NetworkSpec& spec, const std::vector<int>& scales, bool transfer) {
  const std::string last = "conv" + spec.layers.back().name;
  const Tensor w = fcn.get(last + ".weight").value;
  const Tensor b = fcn.get(last + ".bias").value;
  for (int s : scales) {
    if (fcn.contains(head_weight_name(s))) continue;
    fcn.add(head_weight_name(s), transfer ? w : Tensor(w.shape()));
    fcn.add(head_bias_name(s), transfer ? b : Tensor(b.shape()));
  }
  fcn.remove(last + ".weight");
  fcn.remove(last + ".bias");
}

Tensor scale_input(const NetworkSpec& spec, const Tensor& frame, int scale, const MultiscaleOptions& options) {
  if (scale < spec.canonical_input) {
    throw std::invalid_argument("forward_multiscale: scale " + std::to_string(scale) + " is below the canonical input " +
                                std::to_string(spec.canonical_input));
  }
  if (!(options.five_crop && scale == spec.canonical_input)) return resize_bilinear(frame, scale);
  // 256/227 enlargement, then four corners and the center.
  const int big = static_cast<int>(std::lround(spec.canonical_input * 256.0 / 227.0));
  const Tensor resized = resize_bilinear(frame, big);
  const int c = frame.dim(0);
  const int s = spec.canonical_input;
  const int off = big - s;
  const int origins[5][2] = {{0, 0}, {0, off}, {off, 0}, {off, off}, {off / 2, off / 2}};
  Tensor crops({5, c, s, s});
  std::size_t o = 0;
  for (const auto& org : origins) {
    for (int ch = 0; ch < c; ++ch) {
      for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) crops[o++] = resized.at(ch, org[0] + y, org[1] + x);
      }
    }
  }
  return crops;
}

std::vector<ScaleMap> forward_multiscale(Tape& tape, const NetworkSpec& spec, ParameterSet& model, const Tensor& frame,
                                         const std::vector<int>& scales, const MultiscaleOptions& options) {
  std::vector<ScaleMap> out;
  out.reserve(scales.size());
  for (int s : scales) {
    Tensor input = scale_input(spec, frame, s, options);
    Parameter& w = model.get(head_weight_name(s));
    Parameter& b = model.get(head_bias_name(s));
    if (input.rank() == 4) {
      const int c = input.dim(1);
      Var crops = tape.constant(std::move(input));
      Var best;
      for (int i = 0; i < 5; ++i) {
        Var crop = reshape(slice(crops, i, i + 1), {c, s, s});
        Var scores = head_forward(tape, w, b, trunk_forward(tape, spec, model, crop));
        best = best.valid() ? elementwise_max(best, scores).output : scores;
      }
      out.push_back({s, best});
    } else {
      Var scores = head_forward(tape, w, b, trunk_forward(tape, spec, model, tape.constant(std::move(input))));
      out.push_back({s, scores});
    }
  }
  return out;
}

}  // namespace mmvdn
