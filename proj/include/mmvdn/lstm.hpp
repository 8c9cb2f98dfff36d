#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mmvdn/ops.hpp"
#include "mmvdn/tensor.hpp"
#include "mmvdn/vocabulary.hpp"

namespace mmvdn {

struct CaptionerDims {
  int concepts = 0;  // N, width of the visual vectors
  int hidden = 64;
  int embed = 32;
  int vocab = 0;
};

// Adds lstm1.*, lstm2.*, embed.weight, out.* to `params`: uniform(-0.08,
// 0.08) weights and zero biases, deterministic in `seed`.
void add_captioner_params(ParameterSet& params, const CaptionerDims& dims, std::uint64_t seed);
CaptionerDims captioner_dims(const ParameterSet& params);

struct LstmState {
  Var h;
  Var c;
};

// Gate rows are packed i, f, o, g over [x; h_prev]:
//   i, f, o = sigmoid(.), g = tanh(.), c = f*c_prev + i*g, h = o*tanh(c).
LstmState lstm_cell_step(Var weight, Var bias, Var input, const LstmState& prev);

// The captioner's parameters bound to one tape.
struct CaptionerVars {
  Var lstm1_w, lstm1_b, lstm2_w, lstm2_b, embed, out_w, out_b;
  CaptionerDims dims;
};

CaptionerVars bind_captioner(Tape& tape, ParameterSet& params);

struct EncoderState {
  LstmState layer1;
  LstmState layer2;
};

// Layer 1 reads v_t, layer 2 reads [h1; 0_embed]. Starts from zero state.
EncoderState encode(const CaptionerVars& p, std::span<const Var> visual);

struct TeacherForcedResult {
  std::vector<Var> logits;  // one per target token (including EOS)
  std::vector<Var> step_nll;
  Var total_nll;
  Var loss;  // total_nll / number of target tokens
};

// Layer 1 reads a zero visual vector, layer 2 reads [h1; embed(prev gold)].
TeacherForcedResult decode_teacher_forced(const CaptionerVars& p, const EncoderState& state,
                                          const CaptionSequence& gold);

// Argmax decoding from <bos>; <pad> and <bos> are never emitted. Stops at
// <eos> or after `max_len` words, in which case <eos> is appended.
CaptionSequence decode_greedy(const CaptionerVars& p, const EncoderState& state, int max_len);

}  // namespace mmvdn
