#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "mmvdn/bleu.hpp"
#include "mmvdn/config.hpp"
#include "mmvdn/corpus.hpp"
#include "mmvdn/model.hpp"

namespace mmvdn {

struct TrainConfig {
  // model
  std::vector<int> scales{35, 91};
  // Layers whose parameters stay fixed: conv/fc layer names, "fc8" for every
  // per-scale head, "lstm" for the whole captioner.
  std::vector<std::string> freeze{"conv1", "conv2", "fc6", "fc7"};
  bool fc8_transfer = true;
  bool five_crop = false;
  int hidden = 64;
  int embed = 32;
  int concepts = kClassCount;
  std::string spec_path;  // empty: the built-in MiniNet

  // captioner optimisation
  double lr = 0.01;
  double momentum = 0.9;
  double clip = 5.0;
  int batch = 1;
  int steps = 2000;
  // Fraction of the steps after which the learning rate drops tenfold
  // (1 disables the drop).
  double lr_drop_at = 1.0;
  std::uint64_t seed = 1;
  int eval_every = 100;
  int max_len = 12;
  bool keep_best = true;  // model selection on validation BLEU

  // classifier pre-training
  int class_images = 50;    // per class
  int heldout_images = 10;  // per class
  int pretrain_steps = 2000;
  int pretrain_batch = 16;
  double pretrain_lr = 0.01;
  double pretrain_lr_drop_at = 0.75;
  int pretrain_eval_every = 200;

  static TrainConfig from(const KeyValueConfig& kv);
  static TrainConfig load(const std::string& path);
  NetworkSpec network() const;
};

// SGD with momentum over unfrozen parameters, after clipping the global
// gradient norm.
class Sgd {
 public:
  Sgd(double lr, double momentum, double clip) : lr_(lr), momentum_(momentum), clip_(clip) {}
  // Returns the global gradient norm before clipping.
  double step(ParameterSet& params);
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, momentum_, clip_;
  std::map<std::string, Tensor> velocity_;
};

double gradient_norm(const ParameterSet& params);
// Scales unfrozen gradients so their global norm is at most `max_norm`;
// returns the norm before scaling.
double clip_gradients(ParameterSet& params, double max_norm);

// Frozen flag from the layer-name list; returns the number frozen.
int apply_freeze(ParameterSet& params, const std::vector<std::string>& layers);
std::string layer_of(const std::string& param_name);

// ---- classifier pre-training ------------------------------------------------

// The held-out classification set is generated from seed + this offset.
inline constexpr std::uint64_t kHeldoutSeedOffset = 1000003;

struct PretrainResult {
  ParameterSet params;
  double heldout_accuracy = 0.0;
  std::vector<std::string> log;  // "step=... loss=... heldout_acc=..."
};

// Images are resized to the canonical input before use.
PretrainResult pretrain_classifier(const TrainConfig& config, const NetworkSpec& spec, const ClassificationSet& train,
                                   const ClassificationSet& heldout, std::ostream* progress = nullptr);
double classifier_accuracy(const NetworkSpec& spec, ParameterSet& params, const ClassificationSet& set);

void save_classifier(const NetworkSpec& spec, const ParameterSet& params, const std::string& path);
ParameterSet load_classifier(const std::string& path, NetworkSpec* spec = nullptr);

// ---- captioning data --------------------------------------------------------

struct VideoSet {
  std::vector<VideoRecord> records;
  std::vector<Tensor> frames;  // [V x 3 x F x F] per video
  int size() const { return static_cast<int>(records.size()); }
};

struct CaptionData {
  Vocabulary vocab;  // from the train split
  VideoSet train, val, test;
  const VideoSet& split(Split s) const;
};

CaptionData load_caption_data(const Corpus& corpus);
CaptionData make_caption_data(std::vector<VideoSample> videos);

// Cached trunk activations, shared by every model built
// from the same classifier.
class FeatureBank {
 public:
  void add(const Model& model, const VideoSet& set, Split split);
  bool has(int scale, Split split) const;
  // Features in `model.scales` order for every frame of one video.
  std::vector<FrameFeatures> video(const Model& model, Split split, int index) const;

 private:
  // key: (scale, split) -> video -> frame -> crops
  std::map<std::pair<int, int>, std::vector<std::vector<std::vector<Tensor>>>> data_;
};

// ---- captioner training -----------------------------------------------------

struct MetricRow {
  int step = 0;
  double train_loss = 0.0;
  double val_bleu = 0.0;
  std::string to_line() const;  // "step=100 train_loss=0.123456 val_bleu=0.456789"
};

struct TrainResult {
  Model model;  // best validation checkpoint, or the final one
  std::vector<MetricRow> log;
  double best_val_bleu = 0.0;
  int best_step = 0;
};

// `bank` may be null; it is used (and filled on demand) only when the
// whole trunk is frozen.
TrainResult train_captioner(const TrainConfig& config, const NetworkSpec& spec, const ParameterSet& classifier,
                            const CaptionData& data, FeatureBank* bank = nullptr, std::ostream* progress = nullptr);

struct EvalResult {
  BleuReport bleu;
  std::vector<std::string> captions;
};

EvalResult evaluate(Model& model, const VideoSet& set, int max_len = 12, const FeatureBank* bank = nullptr,
                    Split split = Split::test);

// Mean per-token teacher-forced loss over every (video, reference) pair.
double mean_token_loss(Model& model, const VideoSet& set);

// For frames whose small object is visible: the better-scoring of that
// object's two (shape, color) concepts must win at a non-whole-frame scale
// and its receptive-field box must overlap the ground-truth box.
struct LocalizationReport {
  int frames = 0;
  int hits = 0;
  int whole_frame_wins = 0;  // counted as misses
  int overlap_any_scale = 0;  // IoU > 0 including whole-frame wins
  double rate() const { return frames == 0 ? 0.0 : static_cast<double>(hits) / frames; }
};

LocalizationReport evaluate_localization(Model& model, const VideoSet& set);

// ---- ablation ---------------------------------------------------------------

struct AblationRow {
  std::vector<int> scales;
  std::vector<double> bleu;  // one per seed
  double mean() const;
  double min() const;
  double max() const;
};

// Called after each run with its trained model and the shared feature bank.
using AblationHook = std::function<void(const TrainConfig&, TrainResult&, FeatureBank&)>;

std::vector<AblationRow> run_ablation(const TrainConfig& base, const NetworkSpec& spec, const ParameterSet& classifier,
                                      const CaptionData& data, const std::vector<std::vector<int>>& scale_sets,
                                      int seeds, std::ostream* progress = nullptr,
                                      const AblationHook& on_run = {});
std::string format_ablation(const std::vector<AblationRow>& rows);

// "35;35,91;91" -> {{35}, {35, 91}, {91}}
std::vector<std::vector<int>> parse_scale_sets(const std::string& text);

}  // namespace mmvdn
