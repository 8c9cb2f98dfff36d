#include "mmvdn/lstm.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <stdexcept>

namespace mmvdn {

namespace {

void fill_uniform(Tensor& t, std::mt19937_64& rng, float bound) {
  for (float& v : t.data()) {
    const float u = static_cast<float>(rng() >> 40) * (1.0f / 16777216.0f);
    v = (2.f * u - 1.f) * bound;
  }
}

Tensor uniform(Shape shape, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  fill_uniform(t, rng, 0.08f);
  return t;
}

}  // namespace

void add_captioner_params(ParameterSet& params, const CaptionerDims& d, std::uint64_t seed) {
  if (d.concepts < 1 || d.hidden < 1 || d.embed < 1 || d.vocab < kReservedTokens) {
    throw std::invalid_argument("captioner: invalid dimensions");
  }
  std::mt19937_64 rng(seed);
  const int g = 4 * d.hidden;
  params.add("lstm1.weight", uniform({g, d.concepts + d.hidden}, rng));
  params.add("lstm1.bias", Tensor({g}));
  params.add("lstm2.weight", uniform({g, d.hidden + d.embed + d.hidden}, rng));
  params.add("lstm2.bias", Tensor({g}));
  params.add("embed.weight", uniform({d.vocab, d.embed}, rng));
  params.add("out.weight", uniform({d.vocab, d.hidden}, rng));
  params.add("out.bias", Tensor({d.vocab}));
}

CaptionerDims captioner_dims(const ParameterSet& params) {
  CaptionerDims d;
  const Shape& l1 = params.get("lstm1.weight").value.shape();
  const Shape& emb = params.get("embed.weight").value.shape();
  d.hidden = l1[0] / 4;
  d.concepts = l1[1] - d.hidden;
  d.vocab = emb[0];
  d.embed = emb[1];
  return d;
}

LstmState lstm_cell_step(Var weight, Var bias, Var input, const LstmState& prev) {
  const Shape& ws = weight.shape();
  const int hidden = prev.h.shape()[0];
  if (ws.size() != 2 || ws[0] != 4 * hidden || ws[1] != input.shape()[0] + hidden || prev.c.shape() != prev.h.shape() ||
      bias.shape() != Shape{4 * hidden}) {
    throw std::invalid_argument("lstm_cell_step: weight " + shape_str(ws) + " / bias " + shape_str(bias.shape()) +
                                " incompatible with input " + shape_str(input.shape()) + " and hidden " +
                                shape_str(prev.h.shape()));
  }
  const Var xh[] = {input, prev.h};
  Var gates = add(matmul(weight, concat(xh)), bias);
  Var i = sigmoid(slice(gates, 0, hidden));
  Var f = sigmoid(slice(gates, hidden, 2 * hidden));
  Var o = sigmoid(slice(gates, 2 * hidden, 3 * hidden));
  Var g = tanh(slice(gates, 3 * hidden, 4 * hidden));
  Var c = add(mul(f, prev.c), mul(i, g));
  Var h = mul(o, tanh(c));
  return {h, c};
}

CaptionerVars bind_captioner(Tape& tape, ParameterSet& params) {
  CaptionerVars v;
  v.lstm1_w = tape.parameter(params.get("lstm1.weight"));
  v.lstm1_b = tape.parameter(params.get("lstm1.bias"));
  v.lstm2_w = tape.parameter(params.get("lstm2.weight"));
  v.lstm2_b = tape.parameter(params.get("lstm2.bias"));
  v.embed = tape.parameter(params.get("embed.weight"));
  v.out_w = tape.parameter(params.get("out.weight"));
  v.out_b = tape.parameter(params.get("out.bias"));
  v.dims = captioner_dims(params);
  return v;
}

namespace {

LstmState zero_state(Tape& tape, int hidden) {
  return {tape.constant(Tensor({hidden})), tape.constant(Tensor({hidden}))};
}

Var embedding(const CaptionerVars& p, int token) {
  return reshape(slice(p.embed, token, token + 1), {p.dims.embed});
}

// One decode step: returns the logits and advances `state`.
Var decode_step(const CaptionerVars& p, EncoderState& state, Var zero_visual, int prev_token) {
  state.layer1 = lstm_cell_step(p.lstm1_w, p.lstm1_b, zero_visual, state.layer1);
  const Var in2[] = {state.layer1.h, embedding(p, prev_token)};
  state.layer2 = lstm_cell_step(p.lstm2_w, p.lstm2_b, concat(in2), state.layer2);
  return add(matmul(p.out_w, state.layer2.h), p.out_b);
}

}  // namespace

EncoderState encode(const CaptionerVars& p, std::span<const Var> visual) {
  if (visual.empty()) throw std::invalid_argument("encode: need at least one visual vector");
  Tape& tape = p.lstm1_w.tape();
  EncoderState s{zero_state(tape, p.dims.hidden), zero_state(tape, p.dims.hidden)};
  Var zero_embed = tape.constant(Tensor({p.dims.embed}));
  for (const Var& v : visual) {
    if (v.shape() != Shape{p.dims.concepts}) {
      throw std::invalid_argument("encode: visual vector " + shape_str(v.shape()) + ", expected [" +
                                  std::to_string(p.dims.concepts) + "]");
    }
      s.layer1 = lstm_cell_step(p.lstm1_w, p.lstm1_b, v, s.layer1);
    const Var in2[] = {s.layer1.h, zero_embed};
    s.layer2 = lstm_cell_step(p.lstm2_w, p.lstm2_b, concat(in2), s.layer2);
  }
  return s;
}

TeacherForcedResult decode_teacher_forced(const CaptionerVars& p, const EncoderState& state,
                                          const CaptionSequence& gold) {
  gold.validate();
  for (int t : gold.tokens) {
    if (t < 0 || t >= p.dims.vocab) throw std::invalid_argument("decode: token index out of vocabulary range");
  }
  Tape& tape = p.lstm1_w.tape();
  EncoderState s = state;
  Var zero_visual = tape.constant(Tensor({p.dims.concepts}));
  TeacherForcedResult r;
  for (std::size_t i = 1; i < gold.tokens.size(); ++i) {
    Var logits = decode_step(p, s, zero_visual, gold.tokens[i - 1]);
    r.logits.push_back(logits);
    r.step_nll.push_back(softmax_cross_entropy(logits, gold.tokens[i]));
  }
  r.total_nll = sum(concat(r.step_nll));
  r.loss = scale(r.total_nll, 1.f / static_cast<float>(r.step_nll.size()));
  return r;
}

CaptionSequence decode_greedy(const CaptionerVars& p, const EncoderState& state, int max_len) {
  if (max_len < 1) throw std::invalid_argument("decode_greedy: max_len must be >= 1");
  Tape& tape = p.lstm1_w.tape();
  EncoderState s = state;
  Var zero_visual = tape.constant(Tensor({p.dims.concepts}));
  CaptionSequence out;
  out.tokens.push_back(kBos);
  int prev = kBos;
  for (int step = 0; step < max_len; ++step) {
    const Tensor& logits = decode_step(p, s, zero_visual, prev).value();
    int best = -1;
    for (int w = 0; w < p.dims.vocab; ++w) {
      if (w == kPad || w == kBos) continue;
      if (best < 0 || logits[static_cast<std::size_t>(w)] > logits[static_cast<std::size_t>(best)]) best = w;
    }
    out.tokens.push_back(best);
    if (best == kEos) return out;
    prev = best;
  }
  out.tokens.push_back(kEos);
  return out;
}

}  // namespace mmvdn
