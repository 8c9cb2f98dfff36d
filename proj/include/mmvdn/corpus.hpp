#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mmvdn/render.hpp"
#include "mmvdn/tensor.hpp"
#include "mmvdn/vocabulary.hpp"

namespace mmvdn {

enum class Split { train, val, test };
std::string_view name(Split s);
Split parse_split(std::string_view s);

struct PixelBox {
  int x = 0, y = 0, side = 0;  // top-left corner and side, frame pixels
  bool operator==(const PixelBox&) const = default;
};

struct ObjectAnnotation {
  ObjectShape shape = ObjectShape::square;
  ObjectColor color = ObjectColor::red;
  SizeClass size = SizeClass::large;
  Verb verb = Verb::moving;
  std::vector<PixelBox> boxes;  // one per frame
  bool operator==(const ObjectAnnotation&) const = default;
};

// "a <color> <shape> is <verb>"
std::string caption_for(const ObjectAnnotation& object);

struct VideoRecord {
  std::string id;
  Split split = Split::train;
  int frame_count = 0;
  std::vector<std::string> captions;
  std::vector<ObjectAnnotation> objects;  // the large object first
  bool has_small_object() const;
  bool operator==(const VideoRecord&) const = default;
};

struct VideoSample {
  VideoRecord record;
  Tensor frames;  // [V x 3 x F x F]
  Tensor frame(int t) const;
};

struct CorpusOptions {
  std::uint64_t seed = 1;
  int train = 120;
  int val = 10;
  int test = 67;
  int frame_size = 40;
  int frames = 8;
  double small_probability = 0.5;
  // Images per class for the classification set written next to the corpus;
  // 0 skips it.
  int class_images = 0;
};

// Every video has one large object; with `small_probability` it also has a
// small object of a different color moving across the frame. The caption
// describes the small object when present, otherwise the large one.
// Deterministic in (seed, options).
std::vector<VideoSample> generate_videos(const CorpusOptions& options);

// Writes manifest.tsv, vocab.txt (train split), videos/<id>.mmvd and, when
// requested, classification.mmvd.
void generate_corpus(const CorpusOptions& options, const std::string& dir);

// Manifest line:
//   id \t frame_count \t split \t ref_count \t caption... \t object...
// object = shape,color,size,verb,x:y:side|x:y:side|...  (one box per frame)
std::string format_record(const VideoRecord& record);
VideoRecord parse_record(const std::string& line);

class Corpus {
 public:
  static Corpus load(const std::string& dir);

  const std::string& dir() const { return dir_; }
  const Vocabulary& vocab() const { return vocab_; }
  const std::vector<VideoRecord>& records() const { return records_; }
  std::vector<const VideoRecord*> split(Split s) const;
  const VideoRecord& record(const std::string& id) const;
  Tensor frames(const std::string& id) const;

 private:
  std::string dir_;
  Vocabulary vocab_;
  std::vector<VideoRecord> records_;
};

Tensor read_video_frames(const std::string& path);

struct ClassificationSet {
  Tensor images;            // [M x 3 x F x F]
  std::vector<int> labels;  // class_index()
  Tensor image(int i) const;
  int size() const { return static_cast<int>(labels.size()); }
};

// Centered single-object images (jitter +-2 px), `per_class` for each
// (shape, color, size) class, interleaved by class. Small-class objects are
// drawn at their upsampled apparent size (kSmallViewMin..kSmallViewMax).
ClassificationSet generate_classification_set(std::uint64_t seed, int per_class, int frame_size = 40);
void write_classification_set(const ClassificationSet& set, const std::string& path);
ClassificationSet read_classification_set(const std::string& path);

}  // namespace mmvdn
