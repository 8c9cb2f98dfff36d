#include "mmvdn/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "mmvdn/checkpoint.hpp"

namespace mmvdn {

namespace {
constexpr std::string_view kSplitNames[] = {"train", "val", "test"};

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

int to_int(const std::string& s, const char* what) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) throw std::invalid_argument(std::string("manifest: bad ") + what + " '" + s + "'");
  return v;
}

// Top-left start and per-frame step keeping a box of `side` inside
// [0, frame) for all frames.
void draw_track(std::mt19937_64& rng, int frame, int side, int frames, int max_speed, int& start, int& step) {
  step = draw_int(rng, -max_speed, max_speed);
  const int travel = step * (frames - 1);
  const int lo = std::max(0, -travel);
  const int hi = std::min(frame - side, frame - side - travel);
  if (hi < lo) {
    step = 0;
    start = draw_int(rng, 0, frame - side);
    return;
  }
  start = draw_int(rng, lo, hi);
}

ObjectAnnotation make_object(std::mt19937_64& rng, SizeClass size, int frame, int frames, int forbidden_color) {
  ObjectAnnotation o;
  o.size = size;
  o.shape = static_cast<ObjectShape>(draw_int(rng, 0, kShapeCount - 1));
  int color = draw_int(rng, 0, kColorCount - 1 - (forbidden_color >= 0 ? 1 : 0));
  if (forbidden_color >= 0 && color >= forbidden_color) ++color;
  o.color = static_cast<ObjectColor>(color);
  o.verb = static_cast<Verb>(draw_int(rng, 0, kVerbCount - 1));
  const int side = size == SizeClass::small ? draw_int(rng, kSmallMin, kSmallMax) : draw_int(rng, kLargeMin, kLargeMax);
  const int speed = size == SizeClass::small ? 2 : 1;
  int x0 = 0, dx = 0, y0 = 0, dy = 0;
  draw_track(rng, frame, side, frames, speed, x0, dx);
  draw_track(rng, frame, side, frames, speed, y0, dy);
  for (int t = 0; t < frames; ++t) o.boxes.push_back({x0 + dx * t, y0 + dy * t, side});
  return o;
}

}  // namespace

std::string_view name(Split s) { return kSplitNames[static_cast<int>(s)]; }

Split parse_split(std::string_view s) {
  for (int i = 0; i < 3; ++i) {
    if (kSplitNames[i] == s) return static_cast<Split>(i);
  }
  throw std::invalid_argument("unknown split '" + std::string(s) + "'");
}

std::string caption_for(const ObjectAnnotation& o) {
  return "a " + std::string(name(o.color)) + " " + std::string(name(o.shape)) + " is " + std::string(name(o.verb));
}

bool VideoRecord::has_small_object() const {
  return std::any_of(objects.begin(), objects.end(), [](const auto& o) { return o.size == SizeClass::small; });
}

Tensor VideoSample::frame(int t) const {
  const int f = frames.dim(2);
  const std::size_t n = static_cast<std::size_t>(3) * f * f;
  const float* src = frames.ptr() + n * static_cast<std::size_t>(t);
  return Tensor({3, f, f}, std::vector<float>(src, src + n));
}

std::vector<VideoSample> generate_videos(const CorpusOptions& opt) {
  if (opt.train < 1 || opt.val < 1 || opt.test < 1) throw std::invalid_argument("generate_corpus: split counts must be >= 1");
  if (opt.frames < 1) throw std::invalid_argument("generate_corpus: frames per video must be >= 1");
  if (opt.frame_size < kLargeMax + 2) {
    throw std::invalid_argument("generate_corpus: frame size " + std::to_string(opt.frame_size) +
                                " too small for the large size class (needs >= " + std::to_string(kLargeMax + 2) + ")");
  }
  const int total = opt.train + opt.val + opt.test;
  std::vector<VideoSample> out;
  out.reserve(static_cast<std::size_t>(total));
  const int f = opt.frame_size;
  for (int i = 0; i < total; ++i) {
    std::mt19937_64 rng(mix(opt.seed * 0x100000001b3ULL + static_cast<std::uint64_t>(i)));
    VideoSample v;
    char id[32];
    std::snprintf(id, sizeof id, "vid%04d", i);
    v.record.id = id;
    v.record.split = i < opt.train ? Split::train : (i < opt.train + opt.val ? Split::val : Split::test);
    v.record.frame_count = opt.frames;

    ObjectAnnotation large = make_object(rng, SizeClass::large, f, opt.frames, -1);
    v.record.objects.push_back(large);
    if (draw_unit(rng) < opt.small_probability) {
      v.record.objects.push_back(make_object(rng, SizeClass::small, f, opt.frames, static_cast<int>(large.color)));
    }
    v.record.captions.push_back(caption_for(v.record.objects.back()));

    const Tensor background = render_background(rng, f);
    const std::size_t plane = static_cast<std::size_t>(3) * f * f;
    v.frames = Tensor({opt.frames, 3, f, f});
    for (int t = 0; t < opt.frames; ++t) {
      Tensor frame = background;
      for (float& px : frame.data()) px = std::clamp(px + 0.03f * (draw_unit(rng) - 0.5f), 0.f, 1.f);
      for (const auto& o : v.record.objects) {
        const PixelBox& b = o.boxes[static_cast<std::size_t>(t)];
        draw_shape(frame, o.shape, o.color, b.x, b.y, b.side, visibility(o.verb, t, opt.frames));
      }
      std::copy(frame.ptr(), frame.ptr() + plane, v.frames.ptr() + plane * static_cast<std::size_t>(t));
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::string format_record(const VideoRecord& r) {
  std::ostringstream out;
  out << r.id << '\t' << r.frame_count << '\t' << name(r.split) << '\t' << r.captions.size();
  for (const auto& c : r.captions) out << '\t' << c;
  for (const auto& o : r.objects) {
    out << '\t' << name(o.shape) << ',' << name(o.color) << ',' << name(o.size) << ',' << name(o.verb) << ',';
    for (std::size_t t = 0; t < o.boxes.size(); ++t) {
      if (t) out << '|';
      out << o.boxes[t].x << ':' << o.boxes[t].y << ':' << o.boxes[t].side;
    }
  }
  return out.str();
}

VideoRecord parse_record(const std::string& line) {
  const auto fields = split_on(line, '\t');
  if (fields.size() < 5) throw std::invalid_argument("manifest: too few fields in record");
  VideoRecord r;
  r.id = fields[0];
  r.frame_count = to_int(fields[1], "frame count");
  r.split = parse_split(fields[2]);
  const int refs = to_int(fields[3], "reference count");
  if (refs < 1 || fields.size() < static_cast<std::size_t>(4 + refs + 1)) {
    throw std::invalid_argument("manifest: record " + r.id + " has an inconsistent reference count");
  }
  for (int i = 0; i < refs; ++i) r.captions.push_back(fields[static_cast<std::size_t>(4 + i)]);
  for (std::size_t i = static_cast<std::size_t>(4 + refs); i < fields.size(); ++i) {
    const auto parts = split_on(fields[i], ',');
    if (parts.size() != 5) throw std::invalid_argument("manifest: record " + r.id + " has a malformed object field");
    ObjectAnnotation o;
    o.shape = parse_shape(parts[0]);
    o.color = parse_color(parts[1]);
    o.size = parse_size(parts[2]);
    o.verb = parse_verb(parts[3]);
    for (const auto& box : split_on(parts[4], '|')) {
      const auto xyz = split_on(box, ':');
      if (xyz.size() != 3) throw std::invalid_argument("manifest: record " + r.id + " has a malformed box '" + box + "'");
      o.boxes.push_back({to_int(xyz[0], "box x"), to_int(xyz[1], "box y"), to_int(xyz[2], "box side")});
    }
    if (static_cast<int>(o.boxes.size()) != r.frame_count) {
      throw std::invalid_argument("manifest: record " + r.id + " object has " + std::to_string(o.boxes.size()) +
                                  " boxes for " + std::to_string(r.frame_count) + " frames");
    }
    r.objects.push_back(std::move(o));
  }
  return r;
}

void generate_corpus(const CorpusOptions& options, const std::string& dir) {
  namespace fs = std::filesystem;
  const auto videos = generate_videos(options);
  fs::create_directories(fs::path(dir) / "videos");
  std::ofstream manifest(fs::path(dir) / "manifest.tsv", std::ios::binary);
  if (!manifest) throw std::runtime_error("cannot write manifest in '" + dir + "'");
  std::vector<std::vector<std::string>> train_tokens;
  for (const auto& v : videos) {
    manifest << format_record(v.record) << '\n';
    write_container((fs::path(dir) / "videos" / (v.record.id + ".mmvd")).string(), {{"frames", v.frames}});
    if (v.record.split == Split::train) {
      for (const auto& c : v.record.captions) train_tokens.push_back(tokenize(c));
    }
  }
  Vocabulary::build(train_tokens).save((fs::path(dir) / "vocab.txt").string());
  if (options.class_images > 0) {
    write_classification_set(generate_classification_set(options.seed, options.class_images, options.frame_size),
                             (fs::path(dir) / "classification.mmvd").string());
  }
}

Corpus Corpus::load(const std::string& dir) {
  namespace fs = std::filesystem;
  Corpus c;
  c.dir_ = dir;
  const auto path = fs::path(dir) / "manifest.tsv";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus manifest '" + path.string() + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      c.records_.push_back(parse_record(line));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path.string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  c.vocab_ = Vocabulary::load((fs::path(dir) / "vocab.txt").string());
  return c;
}

std::vector<const VideoRecord*> Corpus::split(Split s) const {
  std::vector<const VideoRecord*> out;
  for (const auto& r : records_) {
    if (r.split == s) out.push_back(&r);
  }
  return out;
}

const VideoRecord& Corpus::record(const std::string& id) const {
  for (const auto& r : records_) {
    if (r.id == id) return r;
  }
  throw std::out_of_range("corpus has no video '" + id + "'");
}

Tensor read_video_frames(const std::string& path) {
  const auto tensors = read_container(path);
  const Tensor& frames = find_tensor(tensors, "frames");
  if (frames.rank() != 4 || frames.dim(1) != 3 || frames.dim(2) != frames.dim(3)) {
    throw std::runtime_error(path + ": 'frames' must be [V x 3 x F x F], got " + shape_str(frames.shape()));
  }
  return frames;
}

Tensor Corpus::frames(const std::string& id) const {
  return read_video_frames((std::filesystem::path(dir_) / "videos" / (id + ".mmvd")).string());
}

Tensor ClassificationSet::image(int i) const {
  const int f = images.dim(2);
  const std::size_t n = static_cast<std::size_t>(3) * f * f;
  const float* src = images.ptr() + n * static_cast<std::size_t>(i);
  return Tensor({3, f, f}, std::vector<float>(src, src + n));
}

ClassificationSet generate_classification_set(std::uint64_t seed, int per_class, int frame_size) {
  if (per_class < 1) throw std::invalid_argument("classification set: images per class must be >= 1");
  if (frame_size < kLargeMax + 4) throw std::invalid_argument("classification set: frame size too small");
  std::mt19937_64 rng(mix(seed ^ 0xc1a55e7ULL));
  ClassificationSet set;
  const int total = per_class * kClassCount;
  const std::size_t plane = static_cast<std::size_t>(3) * frame_size * frame_size;
  set.images = Tensor({total, 3, frame_size, frame_size});
  int n = 0;
  for (int k = 0; k < per_class; ++k) {
    for (int cls = 0; cls < kClassCount; ++cls) {
      ObjectShape shape;
      ObjectColor color;
      SizeClass size;
      class_parts(cls, shape, color, size);
      Tensor img = render_background(rng, frame_size);
      const int side = size == SizeClass::small ? draw_int(rng, kSmallViewMin, kSmallViewMax)
                                                 : draw_int(rng, kLargeMin, kLargeMax);
      const int x0 = (frame_size - side) / 2 + draw_int(rng, -2, 2);
      const int y0 = (frame_size - side) / 2 + draw_int(rng, -2, 2);
      draw_shape(img, shape, color, x0, y0, side, 1.f);
      std::copy(img.ptr(), img.ptr() + plane, set.images.ptr() + plane * static_cast<std::size_t>(n));
      set.labels.push_back(cls);
      ++n;
    }
  }
  return set;
}

void write_classification_set(const ClassificationSet& set, const std::string& path) {
  std::vector<float> labels(set.labels.begin(), set.labels.end());
  write_container(path, {{"images", set.images}, {"labels", Tensor({set.size()}, std::move(labels))}});
}

ClassificationSet read_classification_set(const std::string& path) {
  const auto tensors = read_container(path);
  ClassificationSet set;
  set.images = find_tensor(tensors, "images");
  const Tensor& labels = find_tensor(tensors, "labels");
  if (set.images.rank() != 4 || labels.size() != static_cast<std::size_t>(set.images.dim(0))) {
    throw std::runtime_error(path + ": images/labels shapes disagree");
  }
  for (float l : labels.data()) set.labels.push_back(static_cast<int>(l));
  return set;
}

}  // namespace mmvdn
