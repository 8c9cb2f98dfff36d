#pragma once

#include <array>
#include <string>
#include <vector>

namespace mmvdn {

using Sentence = std::vector<std::string>;

struct BleuReport {
  double bleu = 0.0;
  std::array<double, 4> precisions{};  // modified n-gram precision, n = 1..4
  std::array<long long, 4> matches{};
  std::array<long long, 4> totals{};
  double brevity_penalty = 0.0;
  long long candidate_length = 0;
  long long reference_length = 0;

  // "bleu=... p1=... ... bp=... c=... r=..." on one line.
  std::string to_line() const;
  // One key=value pair per line.
  std::string to_record() const;
};

// Corpus BLEU-4, uniform weights, no smoothing. Clipped n-gram counts are
// summed over the corpus before dividing; the effective reference length
// of a candidate is its closest reference length, ties to the shorter.
BleuReport corpus_bleu(const std::vector<Sentence>& candidates, const std::vector<std::vector<Sentence>>& references);

}  // namespace mmvdn
