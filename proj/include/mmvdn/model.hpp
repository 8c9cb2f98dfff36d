#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmvdn/lstm.hpp"
#include "mmvdn/mil.hpp"
#include "mmvdn/network.hpp"
#include "mmvdn/vocabulary.hpp"

namespace mmvdn {

// Multi-scale multi-instance captioner: shared FCN trunk, one conv-fc8 head
// per scale, MIL over locations and scales, encoder-decoder LSTM.
struct Model {
  NetworkSpec spec;
  std::vector<int> scales;  // MIL tie order; the whole-frame scale first by convention
  MultiscaleOptions options;
  ParameterSet params;
  Vocabulary vocab;

  Model() = default;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;
  Model clone() const;
};

// Transfers a trained classifier into a multi-scale model: conv layers
// verbatim, FC layers reshaped, per-scale heads from fc8 (`transfer_fc8`) or
// zero, fresh captioner parameters from `seed`.
Model make_model(const NetworkSpec& spec, const ParameterSet& classifier, const std::vector<int>& scales,
                 bool transfer_fc8, const Vocabulary& vocab, int hidden, int embed, std::uint64_t seed,
                 MultiscaleOptions options = {});

// Trunk activations (input to conv-fc8) for one frame: per scale, one
// tensor per crop (five with five-crop at the whole-frame scale).
using FrameFeatures = std::vector<std::vector<Tensor>>;
FrameFeatures extract_features(Model& model, const Tensor& frame);

// Per-scale score maps of one frame. The feature overload reuses cached
// trunk activations and only records the heads on the tape.
std::vector<ScaleMap> score_maps(Tape& tape, Model& model, const Tensor& frame);
std::vector<ScaleMap> score_maps(Tape& tape, Model& model, const FrameFeatures& features);

// Semantic vectors v_1..v_V for a [V x 3 x F x F] clip.
std::vector<Var> visual_sequence(Tape& tape, Model& model, const Tensor& frames,
                                 std::vector<MilResult>* mil = nullptr);
std::vector<Var> visual_sequence(Tape& tape, Model& model, const std::vector<FrameFeatures>& features);

CaptionSequence caption(Model& model, const Tensor& frames, int max_len = 12);
CaptionSequence caption(Model& model, const std::vector<FrameFeatures>& features, int max_len = 12);

Tensor frame_of(const Tensor& frames, int t);

// Container with all parameters plus meta.spec / meta.scales / meta.options
// tensors; the vocabulary goes to `<path>.vocab`.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

// Network spec round-trip through a float tensor, one row of 5 integers per
// layer plus a header row (canonical size, channels).
Tensor encode_spec(const NetworkSpec& spec);
NetworkSpec decode_spec(const Tensor& t);

}  // namespace mmvdn
