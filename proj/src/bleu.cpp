#include "mmvdn/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <stdexcept>

namespace mmvdn {
namespace {

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts ngrams(const Sentence& s, int n) {
  NgramCounts out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= s.size(); ++i) {
    out[std::vector<std::string>(s.begin() + static_cast<long>(i), s.begin() + static_cast<long>(i) + n)]++;
  }
  return out;
}

}  // namespace

BleuReport corpus_bleu(const std::vector<Sentence>& candidates, const std::vector<std::vector<Sentence>>& references) {
  if (candidates.empty()) throw std::invalid_argument("corpus_bleu: empty candidate list");
  if (candidates.size() != references.size()) {
    throw std::invalid_argument("corpus_bleu: " + std::to_string(candidates.size()) + " candidates but " +
                                std::to_string(references.size()) + " reference groups");
  }
  BleuReport r;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Sentence& cand = candidates[i];
    const auto& refs = references[i];
    if (refs.empty()) throw std::invalid_argument("corpus_bleu: candidate " + std::to_string(i) + " has no references");

    const long long c = static_cast<long long>(cand.size());
    long long best = static_cast<long long>(refs[0].size());
    for (const auto& ref : refs) {
      const long long len = static_cast<long long>(ref.size());
      const long long d = std::llabs(len - c);
      const long long bd = std::llabs(best - c);
      if (d < bd || (d == bd && len < best)) best = len;
    }
    r.candidate_length += c;
    r.reference_length += best;

    for (int n = 1; n <= 4; ++n) {
      const NgramCounts cand_counts = ngrams(cand, n);
      NgramCounts max_ref;
      for (const auto& ref : refs) {
        for (const auto& [g, k] : ngrams(ref, n)) max_ref[g] = std::max(max_ref[g], k);
      }
      for (const auto& [g, k] : cand_counts) {
        auto it = max_ref.find(g);
        r.matches[static_cast<std::size_t>(n - 1)] += std::min(k, it == max_ref.end() ? 0 : it->second);
        r.totals[static_cast<std::size_t>(n - 1)] += k;
      }
    }
  }
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < 4; ++n) {
    r.precisions[n] = r.totals[n] > 0 ? static_cast<double>(r.matches[n]) / static_cast<double>(r.totals[n]) : 0.0;
    if (r.precisions[n] <= 0.0) {
      zero = true;
    } else {
      log_sum += 0.25 * std::log(r.precisions[n]);
    }
  }
  const double c = static_cast<double>(r.candidate_length);
  const double ref = static_cast<double>(r.reference_length);
  r.brevity_penalty = c > ref ? 1.0 : (c > 0 ? std::exp(1.0 - ref / c) : 0.0);
  r.bleu = zero ? 0.0 : r.brevity_penalty * std::exp(log_sum);
  return r;
}

std::string BleuReport::to_line() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "bleu=%.6f p1=%.6f p2=%.6f p3=%.6f p4=%.6f bp=%.6f c=%lld r=%lld", bleu, precisions[0],
                precisions[1], precisions[2], precisions[3], brevity_penalty, candidate_length, reference_length);
  return buf;
}

std::string BleuReport::to_record() const {
  std::string out;
  char buf[64];
  auto put = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%s=%.9f\n", key, v);
    out += buf;
  };
  put("bleu", bleu);
  put("p1", precisions[0]);
  put("p2", precisions[1]);
  put("p3", precisions[2]);
  put("p4", precisions[3]);
  put("bp", brevity_penalty);
  out += "candidate_length=" + std::to_string(candidate_length) + "\n";
  out += "reference_length=" + std::to_string(reference_length) + "\n";
  return out;
}

}  // namespace mmvdn
