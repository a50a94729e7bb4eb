#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cyst/error.hpp"

namespace cyst {

using IdSeq = std::vector<int>;

// Token inventory with four reserved ids. Real tokens start at id 4 and are
// ordered by descending corpus frequency (ties by first occurrence), so a
// vocabulary built from the same corpus is always identical.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr std::size_t kReservedCount = 4;
  static constexpr const char* kReservedNames[4] = {"<pad>", "<unk>", "<bos>", "<eos>"};

  static Vocabulary build(const std::vector<std::vector<std::string>>& sentences,
                          int min_frequency) {
    if (min_frequency < 1) throw ConfigError("vocab: min_frequency must be >= 1");
    std::unordered_map<std::string, std::size_t> freq;
    std::unordered_map<std::string, std::size_t> first_seen;
    std::size_t pos = 0, total = 0;
    for (const auto& sent : sentences) {
      for (const std::string& tok : sent) {
        check_not_reserved(tok);
        ++total;
        auto [it, fresh] = freq.try_emplace(tok, 0);
        it->second += 1;
        if (fresh) first_seen.emplace(tok, pos);
        ++pos;
      }
    }
    if (total == 0) throw ConfigError("vocab: empty corpus");

    std::vector<std::string> kept;
    for (const auto& [tok, n] : freq) {
      if (n >= static_cast<std::size_t>(min_frequency)) kept.push_back(tok);
    }
    std::sort(kept.begin(), kept.end(), [&](const std::string& a, const std::string& b) {
      if (freq[a] != freq[b]) return freq[a] > freq[b];
      return first_seen[a] < first_seen[b];
    });
    return Vocabulary(std::move(kept), min_frequency);
  }

  // Fixed token list in the given order; used by the synthetic generator.
  static Vocabulary from_tokens(std::vector<std::string> tokens, int min_frequency = 1) {
    for (const std::string& tok : tokens) check_not_reserved(tok);
    return Vocabulary(std::move(tokens), min_frequency);
  }

  int id(const std::string& tok) const {
    auto it = token_to_id_.find(tok);
    return it == token_to_id_.end() ? kUnk : it->second;
  }

  const std::string& token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= size()) {
      throw IndexError("vocab: id " + std::to_string(id) + " out of range");
    }
    if (id < 4) {
      static const std::string reserved[4] = {kReservedNames[0], kReservedNames[1],
                                              kReservedNames[2], kReservedNames[3]};
      return reserved[id];
    }
    return tokens_[static_cast<std::size_t>(id) - 4];
  }

  // Total id count including the four reserved slots.
  std::size_t size() const { return tokens_.size() + 4; }
  int min_frequency() const { return min_frequency_; }

  IdSeq encode(const std::vector<std::string>& toks) const {
    IdSeq ids;
    ids.reserve(toks.size());
    for (const std::string& tok : toks) ids.push_back(id(tok));
    return ids;
  }

  std::vector<std::string> decode(const IdSeq& ids) const {
    std::vector<std::string> toks;
    toks.reserve(ids.size());
    for (int i : ids) toks.push_back(token(i));
    return toks;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("vocab: cannot write " + path);
    out << "#minfreq=" << min_frequency_ << "\n";
    for (const std::string& tok : tokens_) out << tok << "\n";
    if (!out) throw IoError("vocab: write failed for " + path);
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("vocab: cannot read " + path);
    std::string header;
    if (!std::getline(in, header) || header.rfind("#minfreq=", 0) != 0) {
      throw FormatError("vocab: missing #minfreq header in " + path);
    }
    int minfreq = 0;
    try {
      minfreq = std::stoi(header.substr(9));
    } catch (const std::exception&) {
      throw FormatError("vocab: bad #minfreq value in " + path);
    }
    if (minfreq < 1) throw FormatError("vocab: bad #minfreq value in " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      tokens.push_back(line);
    }
    Vocabulary v(std::move(tokens), minfreq);
    if (v.token_to_id_.size() != v.tokens_.size()) {
      throw FormatError("vocab: duplicate token in " + path);
    }
    return v;
  }

 private:
  Vocabulary(std::vector<std::string> tokens, int min_frequency)
      : tokens_(std::move(tokens)), min_frequency_(min_frequency) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      token_to_id_.emplace(tokens_[i], static_cast<int>(i) + 4);
    }
  }

  static void check_not_reserved(const std::string& tok) {
    for (const char* r : kReservedNames) {
      if (tok == r) throw FormatError("vocab: corpus contains reserved token " + tok);
    }
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> token_to_id_;
  int min_frequency_;
};

}  // namespace cyst
