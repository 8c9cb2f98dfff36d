#include "mmvdn/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "mmvdn/checkpoint.hpp"

namespace mmvdn {
namespace {

std::vector<std::string> split_list(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, sep)) {
    const auto b = cur.find_first_not_of(" \t");
    const auto e = cur.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw std::invalid_argument("config: " + key + " expects a boolean, got '" + v + "'");
}

std::string fixed6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

void check_finite(double loss, const char* what, int step) {
  if (!std::isfinite(loss)) {
    throw std::runtime_error(std::string(what) + ": non-finite loss at step " + std::to_string(step));
  }
}

}  // namespace

// ---- configuration ----------------------------------------------------------

TrainConfig TrainConfig::from(const KeyValueConfig& kv) {
  kv.require_known({"scales", "freeze", "fc8_init", "five_crop", "hidden", "embed", "concepts", "spec", "lr",
                    "momentum", "clip", "batch", "steps", "seed", "eval_every", "max_len", "keep_best",
                    "class_images", "heldout_images", "pretrain_steps", "pretrain_batch", "pretrain_lr",
                    "pretrain_eval_every", "lr_drop_at", "pretrain_lr_drop_at"});
  TrainConfig c;
  c.scales = kv.get_int_list("scales", c.scales);
  if (kv.has("freeze")) {
    const std::string f = kv.get("freeze", "");
    c.freeze = f == "none" ? std::vector<std::string>{} : split_list(f, ',');
  }
  const std::string init = kv.get("fc8_init", "transfer");
  if (init != "transfer" && init != "zero") {
    throw std::invalid_argument("config: fc8_init must be transfer or zero, got '" + init + "'");
  }
  c.fc8_transfer = init == "transfer";
  if (kv.has("five_crop")) c.five_crop = parse_bool("five_crop", kv.get("five_crop", ""));
  if (kv.has("keep_best")) c.keep_best = parse_bool("keep_best", kv.get("keep_best", ""));
  c.hidden = kv.get_int("hidden", c.hidden);
  c.embed = kv.get_int("embed", c.embed);
  c.concepts = kv.get_int("concepts", c.concepts);
  c.spec_path = kv.get("spec", c.spec_path);
  c.lr = kv.get_double("lr", c.lr);
  c.momentum = kv.get_double("momentum", c.momentum);
  c.clip = kv.get_double("clip", c.clip);
  c.batch = kv.get_int("batch", c.batch);
  c.steps = kv.get_int("steps", c.steps);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<int>(c.seed)));
  c.eval_every = kv.get_int("eval_every", c.eval_every);
  c.max_len = kv.get_int("max_len", c.max_len);
  c.class_images = kv.get_int("class_images", c.class_images);
  c.heldout_images = kv.get_int("heldout_images", c.heldout_images);
  c.pretrain_steps = kv.get_int("pretrain_steps", c.pretrain_steps);
  c.pretrain_batch = kv.get_int("pretrain_batch", c.pretrain_batch);
  c.pretrain_lr = kv.get_double("pretrain_lr", c.pretrain_lr);
  c.pretrain_eval_every = kv.get_int("pretrain_eval_every", c.pretrain_eval_every);
  c.lr_drop_at = kv.get_double("lr_drop_at", c.lr_drop_at);
  c.pretrain_lr_drop_at = kv.get_double("pretrain_lr_drop_at", c.pretrain_lr_drop_at);

  if (c.scales.empty()) throw std::invalid_argument("config: scales must not be empty");
  if (c.batch < 1 || c.pretrain_batch < 1) throw std::invalid_argument("config: batch sizes must be >= 1");
  if (c.steps < 0 || c.pretrain_steps < 0) throw std::invalid_argument("config: step counts must be >= 0");
  if (c.eval_every < 1 || c.pretrain_eval_every < 1) throw std::invalid_argument("config: eval intervals must be >= 1");
  for (double f : {c.lr_drop_at, c.pretrain_lr_drop_at}) {
    if (f <= 0 || f > 1) throw std::invalid_argument("config: lr drop fractions must be in (0, 1]");
  }
  if (c.lr < 0 || c.pretrain_lr < 0 || c.clip <= 0) throw std::invalid_argument("config: lr must be >= 0, clip > 0");
  return c;
}

TrainConfig TrainConfig::load(const std::string& path) { return from(KeyValueConfig::load(path)); }

NetworkSpec TrainConfig::network() const {
  NetworkSpec s = spec_path.empty() ? mininet_spec(concepts) : load_network_spec(spec_path);
  if (s.concept_count() != concepts) {
    throw std::invalid_argument("config: spec emits " + std::to_string(s.concept_count()) + " concepts, expected " +
                                std::to_string(concepts));
  }
  return s;
}

// ---- optimiser --------------------------------------------------------------

double gradient_norm(const ParameterSet& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (p->frozen) continue;
    for (float g : p->grad.data()) sq += static_cast<double>(g) * g;
  }
  return std::sqrt(sq);
}

double clip_gradients(ParameterSet& params, double max_norm) {
  const double norm = gradient_norm(params);
  if (norm > max_norm) {
    const auto f = static_cast<float>(max_norm / norm);
    for (auto& p : params) {
      if (p->frozen) continue;
      for (float& g : p->grad.data()) g *= f;
    }
  }
  return norm;
}

double Sgd::step(ParameterSet& params) {
  const double norm = clip_gradients(params, clip_);
  const auto lr = static_cast<float>(lr_);
  const auto mu = static_cast<float>(momentum_);
  for (auto& p : params) {
    if (p->frozen) continue;
    auto it = velocity_.find(p->name);
    if (it == velocity_.end()) it = velocity_.emplace(p->name, Tensor(p->value.shape())).first;
    float* v = it->second.ptr();
    float* w = p->value.ptr();
    const float* g = p->grad.ptr();
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      v[i] = mu * v[i] - lr * g[i];
      w[i] += v[i];
    }
  }
  return norm;
}

std::string layer_of(const std::string& name) {
  const std::string stem = name.substr(0, name.find('.'));
  if (stem.rfind("convfc", 0) == 0) return stem.substr(4);
  if (stem == "lstm1" || stem == "lstm2" || stem == "embed" || stem == "out") return "lstm";
  return stem;
}

int apply_freeze(ParameterSet& params, const std::vector<std::string>& layers) {
  int n = 0;
  for (auto& p : params) {
    const std::string layer = layer_of(p->name);
    p->frozen = std::find(layers.begin(), layers.end(), layer) != layers.end();
    n += p->frozen ? 1 : 0;
  }
  return n;
}

// ---- classifier pre-training ------------------------------------------------

namespace {

std::vector<Tensor> canonical_images(const NetworkSpec& spec, const ClassificationSet& set) {
  std::vector<Tensor> out;
  out.reserve(static_cast<std::size_t>(set.size()));
  for (int i = 0; i < set.size(); ++i) out.push_back(resize_bilinear(set.image(i), spec.canonical_input));
  return out;
}

double accuracy_on(const NetworkSpec& spec, ParameterSet& params, const std::vector<Tensor>& images,
                   const std::vector<int>& labels) {
  int correct = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    Tape tape;
    const Tensor& logits = classify(tape, spec, params, tape.constant(images[i])).value();
    const auto best = std::max_element(logits.data().begin(), logits.data().end()) - logits.data().begin();
    correct += best == labels[i] ? 1 : 0;
  }
  return images.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(images.size());
}

}  // namespace

double classifier_accuracy(const NetworkSpec& spec, ParameterSet& params, const ClassificationSet& set) {
  return accuracy_on(spec, params, canonical_images(spec, set), set.labels);
}

PretrainResult pretrain_classifier(const TrainConfig& config, const NetworkSpec& spec, const ClassificationSet& train,
                                   const ClassificationSet& heldout, std::ostream* progress) {
  if (train.size() == 0) throw std::invalid_argument("pretrain: empty classification set");
  for (int label : train.labels) {
    if (label < 0 || label >= spec.concept_count()) {
      throw std::invalid_argument("pretrain: label " + std::to_string(label) + " outside the network's " +
                                  std::to_string(spec.concept_count()) + " concepts");
    }
  }
  PretrainResult r;
  r.params = build_classifier(spec, config.seed);
  const auto train_images = canonical_images(spec, train);
  const auto heldout_images = canonical_images(spec, heldout);
  Sgd opt(config.pretrain_lr, config.momentum, config.clip);
  std::mt19937_64 rng(config.seed * 0x9e3779b97f4a7c15ULL + 17);
  double running = 0.0;
  int counted = 0;
  const int drop = static_cast<int>(config.pretrain_lr_drop_at * config.pretrain_steps);
  for (int step = 1; step <= config.pretrain_steps; ++step) {
    if (step == drop + 1) opt.set_lr(config.pretrain_lr * 0.1);
    r.params.zero_grad();
    Tape tape;
    std::vector<Var> losses;
    for (int b = 0; b < config.pretrain_batch; ++b) {
      const auto i = static_cast<std::size_t>(draw_int(rng, 0, train.size() - 1));
      losses.push_back(softmax_cross_entropy(classify(tape, spec, r.params, tape.constant(train_images[i])),
                                             train.labels[i]));
    }
    Var loss = scale(sum(concat(losses)), 1.f / static_cast<float>(losses.size()));
    check_finite(loss.value()[0], "pretrain", step);
    running += loss.value()[0];
    ++counted;
    tape.backward(loss);
    opt.step(r.params);
    if (step % config.pretrain_eval_every == 0 || step == config.pretrain_steps) {
      const double acc = accuracy_on(spec, r.params, heldout_images, heldout.labels);
      std::string line = "step=" + std::to_string(step) + " loss=" + fixed6(running / counted) +
                         " heldout_acc=" + fixed6(acc);
      if (progress != nullptr) *progress << line << '\n' << std::flush;
      r.log.push_back(std::move(line));
      running = 0.0;
      counted = 0;
    }
  }
  r.heldout_accuracy = accuracy_on(spec, r.params, heldout_images, heldout.labels);
  return r;
}

void save_classifier(const NetworkSpec& spec, const ParameterSet& params, const std::string& path) {
  auto tensors = to_named(params);
  tensors.push_back({"meta.spec", encode_spec(spec)});
  write_container(path, tensors);
}

ParameterSet load_classifier(const std::string& path, NetworkSpec* spec) {
  auto tensors = read_container(path);
  ParameterSet params;
  for (auto& nt : tensors) {
    if (nt.name == "meta.spec") {
      if (spec != nullptr) *spec = decode_spec(nt.tensor);
      continue;
    }
    params.add(nt.name, std::move(nt.tensor));
  }
  return params;
}

// ---- data -------------------------------------------------------------------

const VideoSet& CaptionData::split(Split s) const {
  switch (s) {
    case Split::train:
      return train;
    case Split::val:
      return val;
    case Split::test:
      return test;
  }
  return test;
}

namespace {
VideoSet& split_of(CaptionData& d, Split s) { return const_cast<VideoSet&>(d.split(s)); }
}  // namespace

CaptionData load_caption_data(const Corpus& corpus) {
  CaptionData d;
  d.vocab = corpus.vocab();
  for (const auto& r : corpus.records()) {
    VideoSet& s = split_of(d, r.split);
    s.records.push_back(r);
    s.frames.push_back(corpus.frames(r.id));
  }
  return d;
}

CaptionData make_caption_data(std::vector<VideoSample> videos) {
  CaptionData d;
  std::vector<std::vector<std::string>> tokenized;
  for (const auto& v : videos) {
    if (v.record.split != Split::train) continue;
    for (const auto& c : v.record.captions) tokenized.push_back(tokenize(c));
  }
  d.vocab = Vocabulary::build(tokenized);
  for (auto& v : videos) {
    VideoSet& s = split_of(d, v.record.split);
    s.records.push_back(std::move(v.record));
    s.frames.push_back(std::move(v.frames));
  }
  return d;
}

void FeatureBank::add(const Model& model, const VideoSet& set, Split split) {
  for (int scale : model.scales) {
    const auto key = std::make_pair(scale, static_cast<int>(split));
    if (data_.contains(key)) continue;
    Model probe = model.clone();
    probe.scales = {scale};
    auto& videos = data_[key];
    for (const Tensor& frames : set.frames) {
      std::vector<std::vector<Tensor>> per_frame;
      for (int t = 0; t < frames.dim(0); ++t) per_frame.push_back(std::move(extract_features(probe, frame_of(frames, t))[0]));
      videos.push_back(std::move(per_frame));
    }
  }
}

bool FeatureBank::has(int scale, Split split) const { return data_.contains({scale, static_cast<int>(split)}); }

std::vector<FrameFeatures> FeatureBank::video(const Model& model, Split split, int index) const {
  std::vector<FrameFeatures> out;
  for (std::size_t si = 0; si < model.scales.size(); ++si) {
    const auto it = data_.find({model.scales[si], static_cast<int>(split)});
    if (it == data_.end()) throw std::logic_error("feature bank: scale " + std::to_string(model.scales[si]) + " missing");
    const auto& frames = it->second.at(static_cast<std::size_t>(index));
    if (out.empty()) out.resize(frames.size());
    for (std::size_t t = 0; t < frames.size(); ++t) out[t].push_back(frames[t]);
  }
  return out;
}

// ---- captioner --------------------------------------------------------------

std::string MetricRow::to_line() const {
  return "step=" + std::to_string(step) + " train_loss=" + fixed6(train_loss) + " val_bleu=" + fixed6(val_bleu);
}

namespace {

bool trunk_frozen(const Model& m) {
  for (const auto& p : m.params) {
    const std::string layer = layer_of(p->name);
    if (layer == "lstm" || layer == "fc8") continue;
    if (!p->frozen) return false;
  }
  return true;
}

std::vector<Sentence> references_of(const VideoRecord& r) {
  std::vector<Sentence> refs;
  for (const auto& c : r.captions) refs.push_back(tokenize(c));
  return refs;
}

}  // namespace

EvalResult evaluate(Model& model, const VideoSet& set, int max_len, const FeatureBank* bank, Split split) {
  if (set.size() == 0) throw std::invalid_argument("evaluate: empty split");
  EvalResult r;
  std::vector<Sentence> candidates;
  std::vector<std::vector<Sentence>> references;
  for (int i = 0; i < set.size(); ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    const CaptionSequence seq = bank != nullptr ? caption(model, bank->video(model, split, i), max_len)
                                                : caption(model, set.frames[k], max_len);
    candidates.push_back(seq.words(model.vocab));
    r.captions.push_back(seq.text(model.vocab));
    references.push_back(references_of(set.records[k]));
  }
  r.bleu = corpus_bleu(candidates, references);
  return r;
}

double mean_token_loss(Model& model, const VideoSet& set) {
  double total = 0.0;
  int count = 0;
  for (int i = 0; i < set.size(); ++i) {
    for (const auto& cap : set.records[static_cast<std::size_t>(i)].captions) {
      Tape tape;
      auto v = visual_sequence(tape, model, set.frames[static_cast<std::size_t>(i)]);
      CaptionerVars p = bind_captioner(tape, model.params);
      total += decode_teacher_forced(p, encode(p, v), CaptionSequence::encode(model.vocab, cap)).loss.value()[0];
      ++count;
    }
  }
  return count == 0 ? 0.0 : total / count;
}

TrainResult train_captioner(const TrainConfig& config, const NetworkSpec& spec, const ParameterSet& classifier,
                            const CaptionData& data, FeatureBank* bank, std::ostream* progress) {
  if (data.train.size() == 0) throw std::invalid_argument("train: empty train split");
  TrainResult r;
  r.model = make_model(spec, classifier, config.scales, config.fc8_transfer, data.vocab, config.hidden, config.embed,
                       config.seed, MultiscaleOptions{config.five_crop});
  Model& m = r.model;
  apply_freeze(m.params, config.freeze);

  FeatureBank local;
  const bool cached = trunk_frozen(m);
  if (cached) {
    if (bank == nullptr) bank = &local;
    bank->add(m, data.train, Split::train);
    if (data.val.size() > 0) bank->add(m, data.val, Split::val);
  }
  std::vector<std::vector<FrameFeatures>> train_features;
  if (cached) {
    for (int i = 0; i < data.train.size(); ++i) train_features.push_back(bank->video(m, Split::train, i));
  }
  std::vector<std::vector<CaptionSequence>> gold(static_cast<std::size_t>(data.train.size()));
  for (int i = 0; i < data.train.size(); ++i) {
    for (const auto& c : data.train.records[static_cast<std::size_t>(i)].captions) {
      gold[static_cast<std::size_t>(i)].push_back(CaptionSequence::encode(data.vocab, c));
    }
  }

  auto validate = [&]() {
    const VideoSet& vs = data.val.size() > 0 ? data.val : data.train;
    const Split sp = data.val.size() > 0 ? Split::val : Split::train;
    return evaluate(m, vs, config.max_len, cached ? bank : nullptr, sp).bleu.bleu;
  };

  Sgd opt(config.lr, config.momentum, config.clip);
  std::mt19937_64 rng(config.seed * 0xd1b54a32d192ed03ULL + 5);
  double running = 0.0;
  int counted = 0;
  r.best_val_bleu = -1.0;
  ParameterSet best;
  const int drop = static_cast<int>(config.lr_drop_at * config.steps);
  for (int step = 1; step <= config.steps; ++step) {
    if (step == drop + 1) opt.set_lr(config.lr * 0.1);
    m.params.zero_grad();
    Tape tape;
    std::vector<Var> losses;
    for (int b = 0; b < config.batch; ++b) {
      const int vi = draw_int(rng, 0, data.train.size() - 1);
      const auto& refs = gold[static_cast<std::size_t>(vi)];
      const auto& ref = refs[static_cast<std::size_t>(draw_int(rng, 0, static_cast<int>(refs.size()) - 1))];
      auto v = cached ? visual_sequence(tape, m, train_features[static_cast<std::size_t>(vi)])
                      : visual_sequence(tape, m, data.train.frames[static_cast<std::size_t>(vi)]);
      CaptionerVars p = bind_captioner(tape, m.params);
      losses.push_back(decode_teacher_forced(p, encode(p, v), ref).loss);
    }
    Var loss = scale(sum(concat(losses)), 1.f / static_cast<float>(losses.size()));
    check_finite(loss.value()[0], "train", step);
    running += loss.value()[0];
    ++counted;
    tape.backward(loss);
    opt.step(m.params);

    if (step % config.eval_every == 0 || step == config.steps) {
      MetricRow row{step, running / counted, validate()};
      running = 0.0;
      counted = 0;
      if (progress != nullptr) *progress << row.to_line() << '\n' << std::flush;
      r.log.push_back(row);
      if (row.val_bleu > r.best_val_bleu) {
        r.best_val_bleu = row.val_bleu;
        r.best_step = step;
        if (config.keep_best) best = m.params.clone();
      }
    }
  }
  if (config.keep_best && r.best_step > 0 && r.best_step != config.steps) m.params = std::move(best);
  if (r.best_val_bleu < 0) r.best_val_bleu = 0.0;
  return r;
}

// ---- localisation -----------------------------------------------------------

LocalizationReport evaluate_localization(Model& model, const VideoSet& set) {
  LocalizationReport rep;
  std::vector<GeometryReport> geo;
  for (int s : model.scales) geo.push_back(geometry(model.spec, s));
  for (int i = 0; i < set.size(); ++i) {
    const VideoRecord& rec = set.records[static_cast<std::size_t>(i)];
    const ObjectAnnotation* small = nullptr;
    for (const auto& o : rec.objects) {
      if (o.size == SizeClass::small) small = &o;
    }
    if (small == nullptr) continue;
    const Tensor& frames = set.frames[static_cast<std::size_t>(i)];
    const int frame_size = frames.dim(2);
    for (int t = 0; t < frames.dim(0); ++t) {
      if (visibility(small->verb, t, frames.dim(0)) <= 0.f) continue;
      Tape tape;
      MilResult mil = mil_pool(score_maps(tape, model, frame_of(frames, t)));
      localize(mil, geo, frame_size);
      const int a = class_index(small->shape, small->color, SizeClass::small);
      const int b = class_index(small->shape, small->color, SizeClass::large);
      const Tensor& v = mil.v.value();
      const int c = v[static_cast<std::size_t>(b)] > v[static_cast<std::size_t>(a)] ? b : a;
      const PixelBox& gt = small->boxes[static_cast<std::size_t>(t)];
      const Box truth{double(gt.x), double(gt.y), double(gt.x + gt.side), double(gt.y + gt.side)};
      const bool overlap = iou(mil.boxes[static_cast<std::size_t>(c)], truth) > 0.0;
      const bool whole = geo[static_cast<std::size_t>(mil.winning_scale[static_cast<std::size_t>(c)])].score_map_size == 1;
      ++rep.frames;
      rep.overlap_any_scale += overlap ? 1 : 0;
      rep.whole_frame_wins += whole ? 1 : 0;
      rep.hits += overlap && !whole ? 1 : 0;
    }
  }
  return rep;
}

// ---- ablation ---------------------------------------------------------------

double AblationRow::mean() const {
  double s = 0.0;
  for (double b : bleu) s += b;
  return bleu.empty() ? 0.0 : s / static_cast<double>(bleu.size());
}
double AblationRow::min() const { return bleu.empty() ? 0.0 : *std::min_element(bleu.begin(), bleu.end()); }
double AblationRow::max() const { return bleu.empty() ? 0.0 : *std::max_element(bleu.begin(), bleu.end()); }

std::vector<std::vector<int>> parse_scale_sets(const std::string& text) {
  std::vector<std::vector<int>> out;
  for (const auto& part : split_list(text, ';')) out.push_back(parse_int_list(part, ','));
  if (out.empty()) throw std::invalid_argument("scale sets: none given in '" + text + "'");
  return out;
}

std::vector<AblationRow> run_ablation(const TrainConfig& base, const NetworkSpec& spec, const ParameterSet& classifier,
                                      const CaptionData& data, const std::vector<std::vector<int>>& scale_sets,
                                      int seeds, std::ostream* progress, const AblationHook& on_run) {
  if (scale_sets.size() < 2) throw std::invalid_argument("ablation: need at least two configurations");
  if (seeds < 1) throw std::invalid_argument("ablation: seeds must be >= 1");
  if (data.test.size() == 0) throw std::invalid_argument("ablation: empty test split");
  FeatureBank bank;
  std::vector<AblationRow> rows;
  for (const auto& scales : scale_sets) {
    AblationRow row;
    row.scales = scales;
    for (int k = 0; k < seeds; ++k) {
      TrainConfig cfg = base;
      cfg.scales = scales;
      cfg.seed = base.seed + static_cast<std::uint64_t>(k);
      TrainResult tr = train_captioner(cfg, spec, classifier, data, &bank, nullptr);
      const bool cached = trunk_frozen(tr.model);
      if (cached) bank.add(tr.model, data.test, Split::test);
      const double b = evaluate(tr.model, data.test, cfg.max_len, cached ? &bank : nullptr, Split::test).bleu.bleu;
      row.bleu.push_back(b);
      if (progress != nullptr) {
        std::string label;
        for (std::size_t i = 0; i < scales.size(); ++i) label += (i ? "," : "") + std::to_string(scales[i]);
        *progress << "scales=" << label << " seed=" << cfg.seed << " best_step=" << tr.best_step
                  << " val_bleu=" << fixed6(tr.best_val_bleu) << " test_bleu=" << fixed6(b) << '\n'
                  << std::flush;
      }
      if (on_run) on_run(cfg, tr, bank);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_ablation(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  out << "scales\tseeds\tmean_bleu\tmin_bleu\tmax_bleu\tper_seed\n";
  for (const auto& r : rows) {
    std::string label;
    for (std::size_t i = 0; i < r.scales.size(); ++i) label += (i ? "," : "") + std::to_string(r.scales[i]);
    std::string per;
    for (std::size_t i = 0; i < r.bleu.size(); ++i) per += (i ? "," : "") + fixed6(r.bleu[i]);
    out << label << '\t' << r.bleu.size() << '\t' << fixed6(r.mean()) << '\t' << fixed6(r.min()) << '\t'
        << fixed6(r.max()) << '\t' << per << '\n';
  }
  return out.str();
}

}  // namespace mmvdn
