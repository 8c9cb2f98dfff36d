#include "mmvdn/vocabulary.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mmvdn {

namespace {
const char* const kReservedNames[kReservedTokens] = {"<pad>", "<bos>", "<eos>", "<unk>"};
}

Vocabulary::Vocabulary() {
  for (const char* name : kReservedNames) add(name);
}

void Vocabulary::add(std::string token) {
  if (index_.contains(token)) return;
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

Vocabulary Vocabulary::build(std::span<const std::vector<std::string>> tokenized_captions) {
  Vocabulary v;
  for (const auto& caption : tokenized_captions) {
    for (const auto& tok : caption) {
      if (tok.front() == '<' && tok.back() == '>') {
        throw std::invalid_argument("vocabulary: token '" + tok + "' collides with the reserved token syntax");
      }
      v.add(tok);
    }
  }
  return v;
}

Vocabulary Vocabulary::parse(std::string_view text) {
  Vocabulary v;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    if (lineno < kReservedTokens) {
      if (line != kReservedNames[lineno]) {
        throw std::invalid_argument("vocabulary line " + std::to_string(lineno + 1) + ": expected reserved token " +
                                    kReservedNames[lineno] + ", got '" + line + "'");
      }
    } else {
      if (line.empty()) throw std::invalid_argument("vocabulary line " + std::to_string(lineno + 1) + ": empty token");
      if (v.contains(line)) {
        throw std::invalid_argument("vocabulary line " + std::to_string(lineno + 1) + ": duplicate token '" + line + "'");
      }
      v.add(line);
    }
    ++lineno;
  }
  if (lineno < kReservedTokens) throw std::invalid_argument("vocabulary: missing reserved tokens");
  return v;
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open vocabulary '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse(buf.str());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (const auto& t : tokens_) out += t + '\n';
  return out;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocabulary '" + path + "'");
  out << serialize();
}

int Vocabulary::index(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.contains(std::string(token)); }

const std::string& Vocabulary::token(int index) const { return tokens_.at(static_cast<std::size_t>(index)); }

std::vector<std::string> tokenize(std::string_view caption) {
  std::vector<std::string> out;
  std::istringstream in{std::string(caption)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

CaptionSequence CaptionSequence::encode(const Vocabulary& vocab, std::string_view caption) {
  CaptionSequence seq;
  seq.tokens.push_back(kBos);
  for (const auto& tok : tokenize(caption)) seq.tokens.push_back(vocab.index(tok));
  seq.tokens.push_back(kEos);
  return seq;
}

std::vector<std::string> CaptionSequence::words(const Vocabulary& vocab) const {
  std::vector<std::string> out;
  for (int t : tokens) {
    if (t == kBos || t == kEos || t == kPad) continue;
    out.push_back(vocab.token(t));
  }
  return out;
}

std::string CaptionSequence::text(const Vocabulary& vocab) const {
  std::string out;
  for (const auto& w : words(vocab)) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

void CaptionSequence::validate() const {
  if (tokens.size() < 2) throw std::invalid_argument("caption: empty sequence");
  if (tokens.front() != kBos) throw std::invalid_argument("caption: must start with <bos>");
  if (tokens.back() != kEos) throw std::invalid_argument("caption: must end with <eos>");
  for (std::size_t i = 1; i + 1 < tokens.size(); ++i) {
    if (tokens[i] == kEos || tokens[i] == kPad || tokens[i] == kBos) {
      throw std::invalid_argument("caption: reserved token at interior position " + std::to_string(i));
    }
  }
}

}  // namespace mmvdn
