#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mmvdn {

inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kUnk = 3;
inline constexpr int kReservedTokens = 4;

// Token <-> index mapping. Indices 0..3 are <pad> <bos> <eos> <unk>.
class Vocabulary {
 public:
  Vocabulary();

  // Reserved tokens first, then the distinct training tokens in order of
  // first appearance.
  static Vocabulary build(std::span<const std::vector<std::string>> tokenized_captions);

  // Plain text, one token per line, line number = index.
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;
  static Vocabulary parse(std::string_view text);
  std::string serialize() const;

  int size() const { return static_cast<int>(tokens_.size()); }
  int index(std::string_view token) const;  // kUnk when absent
  const std::string& token(int index) const;
  bool contains(std::string_view token) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Whitespace split of a lowercase caption.
std::vector<std::string> tokenize(std::string_view caption);

// BOS w_1 .. w_W EOS. Exactly one EOS, last; no interior PAD.
struct CaptionSequence {
  std::vector<int> tokens;

  static CaptionSequence encode(const Vocabulary& vocab, std::string_view caption);
  std::string text(const Vocabulary& vocab) const;
  // Word tokens without BOS/EOS, as strings.
  std::vector<std::string> words(const Vocabulary& vocab) const;
  // Throws std::invalid_argument when the invariants above do not hold.
  void validate() const;

  bool operator==(const CaptionSequence&) const = default;
};

}  // namespace mmvdn
