#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "mmvdn/checkpoint.hpp"
#include "mmvdn/corpus.hpp"
#include "mmvdn/gradcheck.hpp"
#include "mmvdn/kernels.hpp"
#include "mmvdn/model.hpp"
#include "mmvdn/training.hpp"

namespace fs = std::filesystem;
using namespace mmvdn;

namespace {

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

NetworkSpec spec_from(const std::string& spec, int concepts) {
  if (spec == "alexnet") return alexnet_spec(concepts > 0 ? concepts : 1000);
  if (spec == "mininet") return mininet_spec(concepts > 0 ? concepts : kClassCount);
  return load_network_spec(spec);
}

// A video argument is a container file when it exists on disk, otherwise an
// id in the corpus.
std::pair<std::string, Tensor> resolve_video(const std::string& video, const std::string& corpus_dir) {
  if (fs::is_regular_file(video)) return {fs::path(video).stem().string(), read_video_frames(video)};
  if (corpus_dir.empty()) throw std::invalid_argument("video '" + video + "' is not a file and no --corpus was given");
  Corpus c = Corpus::load(corpus_dir);
  c.record(video);
  return {video, c.frames(video)};
}

int parse_concept(const std::string& text, int concepts) {
  int c = -1;
  if (text.find(',') == std::string::npos) {
    std::size_t used = 0;
    c = std::stoi(text, &used);
    if (used != text.size()) throw std::invalid_argument("bad concept '" + text + "'");
  } else {
    std::vector<std::string> parts;
    std::stringstream in(text);
    for (std::string p; std::getline(in, p, ',');) parts.push_back(p);
    if (parts.size() != 3) throw std::invalid_argument("concept name must be color,shape,size: '" + text + "'");
    c = class_index(parse_shape(parts[1]), parse_color(parts[0]), parse_size(parts[2]));
  }
  if (c < 0 || c >= concepts) {
    throw std::invalid_argument("concept " + std::to_string(c) + " outside 0.." + std::to_string(concepts - 1));
  }
  return c;
}

int cmd_geometry(const std::string& spec_arg, const std::vector<int>& inputs) {
  const NetworkSpec spec = spec_from(spec_arg, 0);
  std::cout << "input\tscore_map\treceptive_field\tjump\theight_ratio\n";
  for (int s : inputs) {
    const GeometryReport g = geometry(spec, s);
    std::cout << s << '\t' << g.score_map_size << 'x' << g.score_map_size << '\t' << g.receptive_field << '\t'
              << g.jump << '\t' << fmt("%.1f%%", 100.0 * g.height_ratio) << '\n';
  }
  return 0;
}

int cmd_convert(const std::string& in, const std::string& spec_arg, const std::string& out) {
  NetworkSpec stored;
  ParameterSet classifier = load_classifier(in, &stored);
  const NetworkSpec spec = spec_arg.empty() ? stored : spec_from(spec_arg, 0);
  ParameterSet fcn = convert_to_fcn(classifier, spec);
  auto tensors = to_named(fcn);
  tensors.push_back({"meta.spec", encode_spec(spec)});
  write_container(out, tensors);
  std::cout << "wrote " << fcn.size() << " tensors to " << out << '\n';
  return 0;
}

int cmd_gen_corpus(const CorpusOptions& opt, const std::string& out) {
  generate_corpus(opt, out);
  std::cout << "wrote " << (opt.train + opt.val + opt.test) << " videos to " << out << '\n';
  return 0;
}

int cmd_pretrain(const std::string& config_path, const std::string& out, const std::string& log_path) {
  const TrainConfig cfg = TrainConfig::load(config_path);
  const NetworkSpec spec = cfg.network();
  const ClassificationSet train = generate_classification_set(cfg.seed, cfg.class_images);
  const ClassificationSet heldout = generate_classification_set(cfg.seed + kHeldoutSeedOffset, cfg.heldout_images);
  PretrainResult r = pretrain_classifier(cfg, spec, train, heldout, &std::cout);
  save_classifier(spec, r.params, out);
  if (!log_path.empty()) {
    auto log = open_out(log_path);
    for (const auto& l : r.log) log << l << '\n';
  }
  std::cout << "heldout_accuracy=" << fmt("%.6f", r.heldout_accuracy) << '\n';
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& corpus_dir, const std::string& init,
              const std::string& out, const std::string& log_path) {
  const TrainConfig cfg = TrainConfig::load(config_path);
  NetworkSpec spec = cfg.network();
  ParameterSet classifier = load_classifier(init, &spec);
  const CaptionData data = load_caption_data(Corpus::load(corpus_dir));
  TrainResult r = train_captioner(cfg, spec, classifier, data, nullptr, &std::cout);
  save_model(r.model, out);
  if (!log_path.empty()) {
    auto log = open_out(log_path);
    for (const auto& row : r.log) log << row.to_line() << '\n';
  }
  std::cout << "best_step=" << r.best_step << " best_val_bleu=" << fmt("%.6f", r.best_val_bleu) << '\n';
  return 0;
}

int cmd_caption(const std::string& model_path, const std::vector<std::string>& videos, const std::string& corpus_dir,
                int max_len) {
  Model m = load_model(model_path);
  for (const auto& v : videos) {
    auto [id, frames] = resolve_video(v, corpus_dir);
    std::cout << id << '\t' << caption(m, frames, max_len).text(m.vocab) << '\n';
  }
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& corpus_dir, const std::string& split,
             const std::string& out, int max_len) {
  Model m = load_model(model_path);
  const CaptionData data = load_caption_data(Corpus::load(corpus_dir));
  const Split s = parse_split(split);
  const EvalResult r = evaluate(m, data.split(s), max_len);
  std::cout << r.bleu.to_line() << '\n';
  if (!out.empty()) open_out(out) << r.bleu.to_record();
  return 0;
}

int cmd_gradcheck(const std::string& ops, int instances, int seed) {
  bool ok = true;
  for (const auto& r : run_gradcheck_suite(ops, static_cast<std::uint64_t>(seed), instances)) {
    std::cout << r.op << ' ' << (r.passed ? "PASS" : "FAIL") << " instances=" << r.instances
              << " max_rel_error=" << fmt("%.3e", r.max_rel_error) << '\n';
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

int cmd_heatmap(const std::string& model_path, const std::string& video, const std::string& corpus_dir, int frame,
                const std::string& concept_arg, int scale, const std::string& out) {
  Model m = load_model(model_path);
  auto [id, frames] = resolve_video(video, corpus_dir);
  if (frame < 0 || frame >= frames.dim(0)) {
    throw std::invalid_argument("frame " + std::to_string(frame) + " outside 0.." + std::to_string(frames.dim(0) - 1));
  }
  const int c = parse_concept(concept_arg, m.spec.concept_count());
  std::size_t si = 0;
  while (si < m.scales.size() && m.scales[si] != scale) ++si;
  if (si == m.scales.size()) throw std::invalid_argument("model has no scale " + std::to_string(scale));
  Tape tape;
  const auto maps = score_maps(tape, m, frame_of(frames, frame));
  const Tensor& map = maps[si].scores.value();
  const int h = map.dim(1), w = map.dim(2);
  const LocationMax loc = mil_over_locations(maps[si].scores);
  const GeometryReport g = geometry(m.spec, scale);
  const auto cc = static_cast<std::size_t>(c);
  const Box box = receptive_box(g, loc.x[cc], loc.y[cc], frames.dim(2));
  auto file = open_out(out);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) file << (x ? " " : "") << fmt("%.6f", map.at(c, y, x));
    file << '\n';
  }
  file << "# video=" << id << " frame=" << frame << " concept=" << c << " scale=" << scale << " cell=" << loc.x[cc]
       << ',' << loc.y[cc] << " value=" << fmt("%.6f", loc.values.value()[cc]) << " box=" << fmt("%.2f", box.x0)
       << ',' << fmt("%.2f", box.y0) << ',' << fmt("%.2f", box.x1) << ',' << fmt("%.2f", box.y1) << '\n';
  std::cout << "cell=" << loc.x[cc] << ',' << loc.y[cc] << " box=" << fmt("%.2f", box.x0) << ',' << fmt("%.2f", box.y0)
            << ',' << fmt("%.2f", box.x1) << ',' << fmt("%.2f", box.y1) << '\n';
  return 0;
}

int cmd_ablate(const std::string& corpus_dir, const std::string& scales, int seeds, const std::string& out,
               const std::string& config_path, const std::string& init) {
  const TrainConfig cfg = config_path.empty() ? TrainConfig{} : TrainConfig::load(config_path);
  NetworkSpec spec = cfg.network();
  ParameterSet classifier = load_classifier(init, &spec);
  const CaptionData data = load_caption_data(Corpus::load(corpus_dir));
  const auto rows = run_ablation(cfg, spec, classifier, data, parse_scale_sets(scales), seeds, &std::cout);
  const std::string table = format_ablation(rows);
  std::cout << table;
  if (!out.empty()) open_out(out) << table;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-scale multiple-instance video captioning"};
  app.require_subcommand(1);
  std::string kernels;
  app.add_option("--kernels", kernels, "Force a kernel table: scalar, avx2 or neon");

  std::string spec = "alexnet", inputs = "227,259,323,451,707";
  auto* geo = app.add_subcommand("geometry", "Print score-map geometry per input size");
  geo->add_option("--spec", spec, "Spec file, or the built-in alexnet / mininet");
  geo->add_option("--inputs", inputs, "Comma-separated input sizes");

  std::string in, out, conv_spec;
  auto* conv = app.add_subcommand("convert", "Reshape classifier FC layers into convolutions");
  conv->add_option("--in", in, "Classifier checkpoint")->required();
  conv->add_option("--spec", conv_spec, "Spec file (default: the one stored in the checkpoint)");
  conv->add_option("--out", out, "Output checkpoint")->required();

  CorpusOptions copt;
  auto* gen = app.add_subcommand("gen-corpus", "Generate the synthetic video-caption corpus");
  gen->add_option("--seed", copt.seed, "Seed");
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--train", copt.train, "Training videos");
  gen->add_option("--val", copt.val, "Validation videos");
  gen->add_option("--test", copt.test, "Test videos");
  gen->add_option("--frames", copt.frames, "Frames per video");
  gen->add_option("--frame-size", copt.frame_size, "Frame side in pixels");
  gen->add_option("--small-probability", copt.small_probability, "Chance of a small object");
  gen->add_option("--class-images", copt.class_images, "Classification images per class (0 = none)");

  std::string config, log, corpus, init;
  auto* pre = app.add_subcommand("pretrain", "Pre-train the classifier on synthetic single-object images");
  pre->add_option("--config", config, "key=value config file")->required();
  pre->add_option("--out", out, "Classifier checkpoint")->required();
  pre->add_option("--log", log, "Metric log");

  auto* train = app.add_subcommand("train", "Train the multi-scale captioner");
  train->add_option("--config", config, "key=value config file")->required();
  train->add_option("--corpus", corpus, "Corpus directory")->required();
  train->add_option("--init", init, "Classifier checkpoint")->required();
  train->add_option("--out", out, "Model checkpoint")->required();
  train->add_option("--log", log, "Metric log");

  std::string model;
  std::vector<std::string> videos;
  int max_len = 12;
  auto* cap = app.add_subcommand("caption", "Caption videos");
  cap->add_option("--model", model, "Model checkpoint")->required();
  cap->add_option("--video", videos, "Video id or frame container file")->required();
  cap->add_option("--corpus", corpus, "Corpus directory for video ids");
  cap->add_option("--max-len", max_len, "Maximum caption length");

  std::string split = "test";
  auto* ev = app.add_subcommand("eval", "Corpus BLEU on a split");
  ev->add_option("--model", model, "Model checkpoint")->required();
  ev->add_option("--corpus", corpus, "Corpus directory")->required();
  ev->add_option("--split", split, "train, val or test");
  ev->add_option("--out", out, "Record file");
  ev->add_option("--max-len", max_len, "Maximum caption length");

  std::string ops = "all";
  int instances = 5, gseed = 7;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  gc->add_option("--ops", ops, "all, a group (conv, mil, lstm, basic) or an op name");
  gc->add_option("--instances", instances, "Random instances per op");
  gc->add_option("--seed", gseed, "Seed");

  std::string video, concept_arg;
  int frame = 0, scale = 0;
  auto* hm = app.add_subcommand("heatmap", "Export one concept's score map");
  hm->add_option("--model", model, "Model checkpoint")->required();
  hm->add_option("--video", video, "Video id or frame container file")->required();
  hm->add_option("--corpus", corpus, "Corpus directory for video ids");
  hm->add_option("--frame", frame, "Frame index");
  hm->add_option("--concept", concept_arg, "Concept index or color,shape,size")->required();
  hm->add_option("--scale", scale, "Scale (input size)")->required();
  hm->add_option("--out", out, "Grid file")->required();

  std::string scale_sets = "35;35,91;91";
  int seeds = 3;
  auto* ab = app.add_subcommand("ablate", "Scale-combination ablation");
  ab->add_option("--corpus", corpus, "Corpus directory")->required();
  ab->add_option("--init", init, "Classifier checkpoint")->required();
  ab->add_option("--config", config, "key=value config file");
  ab->add_option("--scales", scale_sets, "Scale sets, ';' between sets, ',' within");
  ab->add_option("--seeds", seeds, "Seeds per configuration");
  ab->add_option("--out", out, "Table file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (!kernels.empty()) kernels::select(kernels);
    if (*geo) return cmd_geometry(spec, parse_int_list(inputs));
    if (*conv) return cmd_convert(in, conv_spec, out);
    if (*gen) return cmd_gen_corpus(copt, out);
    if (*pre) return cmd_pretrain(config, out, log);
    if (*train) return cmd_train(config, corpus, init, out, log);
    if (*cap) return cmd_caption(model, videos, corpus, max_len);
    if (*ev) return cmd_eval(model, corpus, split, out, max_len);
    if (*gc) return cmd_gradcheck(ops, instances, gseed);
    if (*hm) return cmd_heatmap(model, video, corpus, frame, concept_arg, scale, out);
    if (*ab) return cmd_ablate(corpus, scale_sets, seeds, out, config, init);
  } catch (const std::exception& e) {
    std::cerr << "mmvdn: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
