#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mmvdn/ops.hpp"
#include "mmvdn/tensor.hpp"

namespace mmvdn {

enum class LayerKind { conv, maxpool, relu, fully_connected };

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::string name;  // conv1, pool1, relu1, fc6, ...
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int pad = 0;
  int units = 0;
};

// Declarative CNN. Fully-connected layers must all trail the convolutional
// part; the last one emits `concept_count()` scores.
struct NetworkSpec {
  std::vector<LayerSpec> layers;
  int canonical_input = 0;
  int input_channels = 3;

  int concept_count() const;
  // Index of the first fully-connected layer, or layers.size() when none.
  std::size_t first_fc() const;
  // Names of the fully-connected layers in order, e.g. fc6 fc7 fc8.
  std::vector<std::string> fc_names() const;
  std::vector<std::string> conv_names() const;

  // Checks field ranges, trailing-FC structure and canonical extents.
  void validate() const;
};

// Text manifest, one layer per line:
//   input <size> <channels>
//   conv <out_channels> <kernel> <stride> <pad>
//   maxpool <kernel> <stride>
//   relu
//   fc <units>
// '#' starts a comment. Names are assigned by position.
NetworkSpec parse_network_spec(std::istream& in);
NetworkSpec load_network_spec(const std::string& path);
std::string format_network_spec(const NetworkSpec& spec);

// Desk-scale AlexNet analogue (canonical input 35, rf 43, total stride 8).
NetworkSpec mininet_spec(int concept_count);
// AlexNet without LRN or grouping, for the geometry table.
NetworkSpec alexnet_spec(int concept_count = 1000);

struct GeometryReport {
  int input_size = 0;
  int score_map_size = 0;
  int receptive_field = 0;
  int jump = 0;
  // Input-pixel coordinate of the receptive-field center of score cell 0.
  double first_center = 0.0;
  double height_ratio = 0.0;  // min(1, rf / input_size)
};

// Throws std::invalid_argument naming the layer whose extent drops below 1.
GeometryReport geometry(const NetworkSpec& spec, int input_size);

// Receptive-field box of a score-map cell, in the pixel coordinates of an
// original frame of `frame_size` that was resized to `g.input_size` with
// corner-aligned sampling. Half-open, clipped to the frame.
struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double area() const;
};
Box receptive_box(const GeometryReport& g, int x, int y, int frame_size);
double iou(const Box& a, const Box& b);

// Classification form: conv/pool trunk, flatten, fc matrices [units x in].
// He-scaled uniform weights, zero biases; deterministic in `seed`.
ParameterSet build_classifier(const NetworkSpec& spec, std::uint64_t seed);

// Fully-convolutional form: FC matrices reshaped to filter banks
// [units x C x h x w] (first FC) or [units x in x 1 x 1]. Names become
// convfc6.weight etc.; conv layers are copied unchanged.
ParameterSet convert_to_fcn(const ParameterSet& classifier, const NetworkSpec& spec);

// Classifier logits [N] for an image at canonical size.
Var classify(Tape& tape, const NetworkSpec& spec, ParameterSet& params, Var image);

// Fully-convolutional evaluation. `trunk_forward` stops before the last
// layer (conv-fc8), `head_forward` applies a conv-fc8 weight/bias pair.
Var trunk_forward(Tape& tape, const NetworkSpec& spec, ParameterSet& fcn, Var image);
Var head_forward(Tape& tape, Parameter& weight, Parameter& bias, Var features);
Var fcn_forward(Tape& tape, const NetworkSpec& spec, ParameterSet& fcn, Var image);

// Corner-aligned bilinear resize of [C x H x W] to [C x size x size].
Tensor resize_bilinear(const Tensor& frame, int size);

// Multi-scale model parameters: a shared trunk (everything up to conv-fc7)
// plus one conv-fc8 per scale, named convfc8.s<size>.weight/bias.
std::string head_weight_name(int scale);
std::string head_bias_name(int scale);

// Adds per-scale heads to an FCN parameter set. `transfer` copies the
// converted fc8 filters; otherwise the heads start at zero.
void add_scale_heads(ParameterSet& fcn, const NetworkSpec& spec, const std::vector<int>& scales, bool transfer);

struct ScaleMap {
  int input_size = 0;
  Var scores;  // [N x h x h]
};

struct MultiscaleOptions {
  // Whole-frame scale only: resize to about 1.13x canonical, score the four
  // corner and the center crops, keep the elementwise max.
  bool five_crop = false;
};

// Resizes `frame` to each scale (not differentiated) and evaluates the
// shared trunk and that scale's head. Scales below the canonical input are
// rejected.
std::vector<ScaleMap> forward_multiscale(Tape& tape, const NetworkSpec& spec, ParameterSet& model,
                                         const Tensor& frame, const std::vector<int>& scales,
                                         const MultiscaleOptions& options = {});

// Input tensor for one scale: the resized frame, or the five crops stacked
// along a leading axis when five-crop applies.
Tensor scale_input(const NetworkSpec& spec, const Tensor& frame, int scale, const MultiscaleOptions& options);

}  // namespace mmvdn
