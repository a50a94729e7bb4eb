#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cyst/error.hpp"
#include "cyst/rng.hpp"
#include "cyst/vocab.hpp"

namespace cyst {

// Lowercased whitespace tokenization; the corpora this targets are already
// pre-tokenized, so nothing smarter is wanted here.
inline std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> toks;
  std::string cur;
  for (char c : line) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) toks.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) toks.push_back(std::move(cur));
  return toks;
}

inline std::string detokenize(const std::vector<std::string>& toks) {
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) out.push_back(' ');
    out += toks[i];
  }
  return out;
}

struct StyledSentence {
  IdSeq ids;  // content tokens only, no BOS/EOS
  int style;  // 0 = source style, 1 = target style
};

using Split = std::vector<StyledSentence>;

struct StyledCorpus {
  Split train, dev, test;
};

struct SplitRatios {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

namespace detail {

// Deterministic shuffle-and-cut split of one style's sentences.
inline void split_style(std::vector<IdSeq> sents, int style, const SplitRatios& ratios, Rng& rng,
                        StyledCorpus* out) {
  rng.shuffle(sents);
  const std::size_t n = sents.size();
  const std::size_t n_dev = static_cast<std::size_t>(static_cast<double>(n) * ratios.dev);
  const std::size_t n_test = static_cast<std::size_t>(static_cast<double>(n) * ratios.test);
  for (std::size_t i = 0; i < n; ++i) {
    Split& dst = i < n_dev ? out->dev : (i < n_dev + n_test ? out->test : out->train);
    dst.push_back({std::move(sents[i]), style});
  }
}

}  // namespace detail

// Read one style file: tokenize, bound lengths, drop repeats.
inline std::vector<std::vector<std::string>> read_style_tokens(const std::string& path,
                                                               std::size_t min_len,
                                                               std::size_t max_len) {
  std::ifstream in(path);
  if (!in) throw IoError("corpus: cannot read " + path);
  std::vector<std::vector<std::string>> sents;
  std::set<std::vector<std::string>> seen;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> toks = tokenize(line);
    if (toks.size() < min_len || toks.size() > max_len) continue;
    if (!seen.insert(toks).second) continue;
    sents.push_back(std::move(toks));
  }
  if (sents.empty()) throw ConfigError("corpus: no usable sentences in " + path);
  return sents;
}

inline std::vector<IdSeq> load_style_file(const std::string& path, const Vocabulary& vocab,
                                          std::size_t min_len, std::size_t max_len) {
  std::vector<IdSeq> out;
  for (const std::vector<std::string>& toks : read_style_tokens(path, min_len, max_len)) {
    out.push_back(vocab.encode(toks));
  }
  return out;
}

inline StyledCorpus load_styled_corpus(const std::string& path0, const std::string& path1,
                                       const Vocabulary& vocab, std::size_t min_len = 2,
                                       std::size_t max_len = 15, const SplitRatios& ratios = {},
                                       std::uint64_t seed = 0) {
  std::vector<IdSeq> s0 = load_style_file(path0, vocab, min_len, max_len);
  std::vector<IdSeq> s1 = load_style_file(path1, vocab, min_len, max_len);
  StyledCorpus corpus;
  Rng rng(splitmix64(seed ^ 0x5354594c45ULL));
  Rng r0 = rng.fork(0), r1 = rng.fork(1);
  detail::split_style(std::move(s0), 0, ratios, r0, &corpus);
  detail::split_style(std::move(s1), 1, ratios, r1, &corpus);
  return corpus;
}

// One training batch: fixed style, rows padded with PAD after the EOS that
// terminates each sentence.
struct Batch {
  std::size_t rows = 0, cols = 0;
  std::vector<int> ids;              // row-major rows x cols
  std::vector<std::size_t> lengths;  // content + EOS, per row
  std::vector<int> styles;           // one label per row, all equal

  int style() const { return styles.front(); }

  int at(std::size_t r, std::size_t c) const { return ids[r * cols + c]; }

  // Row r as an id sequence without EOS or padding.
  IdSeq content_row(std::size_t r) const {
    IdSeq out;
    for (std::size_t c = 0; c + 1 < lengths[r]; ++c) out.push_back(at(r, c));
    return out;
  }

  // Row r including the terminating EOS, excluding padding.
  IdSeq row(std::size_t r) const {
    IdSeq out;
    for (std::size_t c = 0; c < lengths[r]; ++c) out.push_back(at(r, c));
    return out;
  }
};

namespace detail {

inline Batch pack_batch(const std::vector<const IdSeq*>& sents, int style) {
  Batch b;
  b.rows = sents.size();
  for (const IdSeq* s : sents) b.cols = std::max(b.cols, s->size() + 1);
  b.ids.assign(b.rows * b.cols, Vocabulary::kPad);
  for (std::size_t r = 0; r < b.rows; ++r) {
    const IdSeq& s = *sents[r];
    for (std::size_t c = 0; c < s.size(); ++c) b.ids[r * b.cols + c] = s[c];
    b.ids[r * b.cols + s.size()] = Vocabulary::kEos;
    b.lengths.push_back(s.size() + 1);
    b.styles.push_back(style);
  }
  return b;
}

}  // namespace detail

// Single-style batches over one style's sentences, reshuffled per call.
inline std::vector<Batch> make_style_batches(const Split& split, int style, std::size_t batch_size,
                                             Rng& rng) {
  if (batch_size < 1) throw ConfigError("batch: batch_size must be >= 1");
  std::vector<const IdSeq*> sents;
  for (const StyledSentence& s : split) {
    if (s.style == style) sents.push_back(&s.ids);
  }
  rng.shuffle(sents);
  std::vector<Batch> batches;
  for (std::size_t i = 0; i < sents.size(); i += batch_size) {
    const std::size_t n = std::min(batch_size, sents.size() - i);
    batches.push_back(detail::pack_batch(
        std::vector<const IdSeq*>(sents.begin() + i, sents.begin() + i + n), style));
  }
  return batches;
}

// Batches for both styles, interleaved 0,1,0,1,... so consecutive steps see
// both directions; whichever style has more batches trails at the end.
inline std::vector<Batch> make_batches(const Split& split, std::size_t batch_size, Rng& rng) {
  std::vector<Batch> b0 = make_style_batches(split, 0, batch_size, rng);
  std::vector<Batch> b1 = make_style_batches(split, 1, batch_size, rng);
  std::vector<Batch> out;
  out.reserve(b0.size() + b1.size());
  for (std::size_t i = 0; i < std::max(b0.size(), b1.size()); ++i) {
    if (i < b0.size()) out.push_back(std::move(b0[i]));
    if (i < b1.size()) out.push_back(std::move(b1[i]));
  }
  return out;
}

}  // namespace cyst
