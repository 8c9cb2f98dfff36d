#include "mmvdn/model.hpp"

#include <sstream>
#include <stdexcept>

#include "mmvdn/checkpoint.hpp"

namespace mmvdn {

Model Model::clone() const {
  Model m;
  m.spec = spec;
  m.scales = scales;
  m.options = options;
  m.params = params.clone();
  m.vocab = vocab;
  return m;
}

Model make_model(const NetworkSpec& spec, const ParameterSet& classifier, const std::vector<int>& scales,
                 bool transfer_fc8, const Vocabulary& vocab, int hidden, int embed, std::uint64_t seed,
                 MultiscaleOptions options) {
  if (scales.empty()) throw std::invalid_argument("model: scale set must not be empty");
  for (std::size_t i = 0; i < scales.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (scales[i] == scales[j]) throw std::invalid_argument("model: duplicate scale " + std::to_string(scales[i]));
    }
    geometry(spec, scales[i]);  // rejects scales too small for the network
    if (scales[i] < spec.canonical_input) {
      throw std::invalid_argument("model: scale " + std::to_string(scales[i]) + " is below the canonical input");
    }
  }
  Model m;
  m.spec = spec;
  m.scales = scales;
  m.options = options;
  m.vocab = vocab;
  m.params = convert_to_fcn(classifier, spec);
  add_scale_heads(m.params, spec, scales, transfer_fc8);
  add_captioner_params(m.params, {spec.concept_count(), hidden, embed, vocab.size()}, seed);
  return m;
}

Tensor frame_of(const Tensor& frames, int t) {
  if (frames.rank() != 4) throw std::invalid_argument("expected frames [V x C x H x W], got " + shape_str(frames.shape()));
  const std::size_t n = frames.size() / static_cast<std::size_t>(frames.dim(0));
  const float* src = frames.ptr() + n * static_cast<std::size_t>(t);
  return Tensor({frames.dim(1), frames.dim(2), frames.dim(3)}, std::vector<float>(src, src + n));
}

FrameFeatures extract_features(Model& model, const Tensor& frame) {
  FrameFeatures out;
  for (int s : model.scales) {
    Tensor input = scale_input(model.spec, frame, s, model.options);
    std::vector<Tensor> crops;
    Tape tape;
    if (input.rank() == 4) {
      for (int i = 0; i < input.dim(0); ++i) {
        crops.push_back(trunk_forward(tape, model.spec, model.params, tape.constant(frame_of(input, i))).value());
      }
    } else {
      crops.push_back(trunk_forward(tape, model.spec, model.params, tape.constant(std::move(input))).value());
    }
    out.push_back(std::move(crops));
  }
  return out;
}

std::vector<ScaleMap> score_maps(Tape& tape, Model& model, const Tensor& frame) {
  return forward_multiscale(tape, model.spec, model.params, frame, model.scales, model.options);
}

std::vector<ScaleMap> score_maps(Tape& tape, Model& model, const FrameFeatures& features) {
  if (features.size() != model.scales.size()) throw std::invalid_argument("score_maps: feature/scale count mismatch");
  std::vector<ScaleMap> out;
  for (std::size_t i = 0; i < model.scales.size(); ++i) {
    const int s = model.scales[i];
    Parameter& w = model.params.get(head_weight_name(s));
    Parameter& b = model.params.get(head_bias_name(s));
    Var best;
    for (const Tensor& f : features[i]) {
      Var scores = head_forward(tape, w, b, tape.constant(f));
      best = best.valid() ? elementwise_max(best, scores).output : scores;
    }
    out.push_back({s, best});
  }
  return out;
}

std::vector<Var> visual_sequence(Tape& tape, Model& model, const Tensor& frames, std::vector<MilResult>* mil) {
  std::vector<Var> out;
  for (int t = 0; t < frames.dim(0); ++t) {
    auto maps = score_maps(tape, model, frame_of(frames, t));
    MilResult r = mil_pool(maps);
    out.push_back(r.v);
    if (mil != nullptr) mil->push_back(std::move(r));
  }
  return out;
}

std::vector<Var> visual_sequence(Tape& tape, Model& model, const std::vector<FrameFeatures>& features) {
  std::vector<Var> out;
  for (const auto& f : features) out.push_back(mil_pool(score_maps(tape, model, f)).v);
  return out;
}

CaptionSequence caption(Model& model, const Tensor& frames, int max_len) {
  Tape tape;
  auto v = visual_sequence(tape, model, frames);
  CaptionerVars p = bind_captioner(tape, model.params);
  return decode_greedy(p, encode(p, v), max_len);
}

CaptionSequence caption(Model& model, const std::vector<FrameFeatures>& features, int max_len) {
  Tape tape;
  auto v = visual_sequence(tape, model, features);
  CaptionerVars p = bind_captioner(tape, model.params);
  return decode_greedy(p, encode(p, v), max_len);
}

Tensor encode_spec(const NetworkSpec& spec) {
  std::vector<float> rows{static_cast<float>(spec.canonical_input), static_cast<float>(spec.input_channels), 0, 0, 0};
  for (const auto& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::conv:
        rows.insert(rows.end(), {0.f, float(l.out_channels), float(l.kernel), float(l.stride), float(l.pad)});
        break;
      case LayerKind::maxpool:
        rows.insert(rows.end(), {1.f, float(l.kernel), float(l.stride), 0.f, 0.f});
        break;
      case LayerKind::relu:
        rows.insert(rows.end(), {2.f, 0.f, 0.f, 0.f, 0.f});
        break;
      case LayerKind::fully_connected:
        rows.insert(rows.end(), {3.f, float(l.units), 0.f, 0.f, 0.f});
        break;
    }
  }
  const int n = static_cast<int>(rows.size() / 5);
  return Tensor({n, 5}, std::move(rows));
}

NetworkSpec decode_spec(const Tensor& t) {
  if (t.rank() != 2 || t.dim(1) != 5 || t.dim(0) < 2) throw std::runtime_error("meta.spec: malformed tensor");
  std::ostringstream text;
  auto at = [&](int r, int c) { return static_cast<int>(t[static_cast<std::size_t>(r) * 5 + c]); };
  text << "input " << at(0, 0) << ' ' << at(0, 1) << '\n';
  for (int r = 1; r < t.dim(0); ++r) {
    switch (at(r, 0)) {
      case 0:
        text << "conv " << at(r, 1) << ' ' << at(r, 2) << ' ' << at(r, 3) << ' ' << at(r, 4) << '\n';
        break;
      case 1:
        text << "maxpool " << at(r, 1) << ' ' << at(r, 2) << '\n';
        break;
      case 2:
        text << "relu\n";
        break;
      case 3:
        text << "fc " << at(r, 1) << '\n';
        break;
      default:
        throw std::runtime_error("meta.spec: unknown layer code " + std::to_string(at(r, 0)));
    }
  }
  std::istringstream in(text.str());
  return parse_network_spec(in);
}

void save_model(const Model& model, const std::string& path) {
  auto tensors = to_named(model.params);
  std::vector<float> scales(model.scales.begin(), model.scales.end());
  tensors.push_back({"meta.spec", encode_spec(model.spec)});
  tensors.push_back({"meta.scales", Tensor({static_cast<int>(scales.size())}, scales)});
  tensors.push_back({"meta.options", Tensor({1}, model.options.five_crop ? 1.f : 0.f)});
  write_container(path, tensors);
  model.vocab.save(path + ".vocab");
}

Model load_model(const std::string& path) {
  auto tensors = read_container(path);
  Model m;
  const Tensor* spec = try_find_tensor(tensors, "meta.spec");
  const Tensor* scales = try_find_tensor(tensors, "meta.scales");
  if (spec == nullptr || scales == nullptr) {
    throw std::runtime_error(path + ": not a captioning model checkpoint (missing meta.spec / meta.scales)");
  }
  m.spec = decode_spec(*spec);
  for (float s : scales->data()) m.scales.push_back(static_cast<int>(s));
  if (const Tensor* opt = try_find_tensor(tensors, "meta.options")) m.options.five_crop = (*opt)[0] != 0.f;
  for (auto& nt : tensors) {
    if (nt.name.rfind("meta.", 0) == 0) continue;
    m.params.add(nt.name, std::move(nt.tensor));
  }
  m.vocab = Vocabulary::load(path + ".vocab");
  const CaptionerDims d = captioner_dims(m.params);
  if (d.vocab != m.vocab.size()) {
    throw std::runtime_error(path + ": vocabulary size " + std::to_string(m.vocab.size()) +
                             " does not match the output layer (" + std::to_string(d.vocab) + ")");
  }
  for (int s : m.scales) {
    if (!m.params.contains(head_weight_name(s))) throw std::runtime_error(path + ": missing head for scale " + std::to_string(s));
  }
  return m;
}

}  // namespace mmvdn
