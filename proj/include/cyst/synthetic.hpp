#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cyst/corpus.hpp"
#include "cyst/error.hpp"
#include "cyst/rng.hpp"
#include "cyst/vocab.hpp"

namespace cyst {

// Ground-truth lexicon for synthetic corpora: k "marked" tokens occur only in
// style 0 and map one-to-one onto k "neutral" counterparts that occur only in
// style 1; filler tokens are shared. A sentence is style 0 exactly when it
// contains a marked token, so classification and transfer have an exact
// answer.
class SubstitutionOracle {
 public:
  SubstitutionOracle() = default;

  SubstitutionOracle(std::vector<int> marked, std::vector<int> neutral) {
    if (marked.size() != neutral.size() || marked.empty()) {
      throw ConfigError("oracle: marked/neutral lists must match and be non-empty");
    }
    for (std::size_t i = 0; i < marked.size(); ++i) {
      if (!to_neutral_.emplace(marked[i], neutral[i]).second ||
          !to_marked_.emplace(neutral[i], marked[i]).second) {
        throw ConfigError("oracle: lexicon is not a bijection");
      }
    }
    for (int m : marked) {
      if (to_marked_.count(m)) throw ConfigError("oracle: marked and neutral sets overlap");
    }
  }

  bool is_marked(int id) const { return to_neutral_.count(id) != 0; }
  bool is_neutral(int id) const { return to_marked_.count(id) != 0; }

  int to_neutral(int id) const {
    auto it = to_neutral_.find(id);
    return it == to_neutral_.end() ? id : it->second;
  }

  int to_marked(int id) const {
    auto it = to_marked_.find(id);
    return it == to_marked_.end() ? id : it->second;
  }

  // 0 iff the sentence contains at least one marked token.
  int classify(const IdSeq& ids) const {
    for (int id : ids) {
      if (is_marked(id)) return 0;
    }
    return 1;
  }

  std::size_t lexicon_size() const { return to_neutral_.size(); }

  void save(const std::string& path, const Vocabulary& vocab) const {
    std::ofstream out(path);
    if (!out) throw IoError("oracle: cannot write " + path);
    // Stable order for reproducible files.
    std::vector<std::pair<int, int>> pairs(to_neutral_.begin(), to_neutral_.end());
    std::sort(pairs.begin(), pairs.end());
    for (const auto& [m, n] : pairs) out << vocab.token(m) << "\t" << vocab.token(n) << "\n";
    if (!out) throw IoError("oracle: write failed for " + path);
  }

  static SubstitutionOracle load(const std::string& path, const Vocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw IoError("oracle: cannot read " + path);
    std::vector<int> marked, neutral;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const std::size_t tab = line.find('\t');
      if (tab == std::string::npos) throw FormatError("oracle: missing tab in " + path);
      const std::string m = line.substr(0, tab), n = line.substr(tab + 1);
      if (vocab.id(m) == Vocabulary::kUnk || vocab.id(n) == Vocabulary::kUnk) {
        throw FormatError("oracle: token not in vocabulary: " + m + "/" + n);
      }
      marked.push_back(vocab.id(m));
      neutral.push_back(vocab.id(n));
    }
    return SubstitutionOracle(std::move(marked), std::move(neutral));
  }

 private:
  std::unordered_map<int, int> to_neutral_, to_marked_;
};

struct SynthConfig {
  std::size_t vocab_size = 60;       // total ids including the 4 reserved
  std::size_t n_marked = 8;          // lexicon pairs
  std::size_t n_per_style = 2000;    // unique sentences per style
  std::size_t len_lo = 4, len_hi = 9;
  std::uint64_t seed = 1;
};

struct SynthResult {
  Vocabulary vocab;
  StyledCorpus corpus;
  SubstitutionOracle oracle;
};

namespace detail {

// Sentences are random walks on a sparse successor graph whose nodes are the
// filler words plus one slot per lexicon pair; a slot surfaces as the marked
// word in style 0 and the neutral one in style 1, so substitution keeps a
// walk valid. No node succeeds itself. The graph gives the language local
// structure: invented text and repetition break edges almost everywhere,
// which is what lets a language model separate fluent transfers from junk.
inline std::vector<std::vector<std::size_t>> synth_graph(std::size_t n_nodes, Rng& rng) {
  const std::size_t fan_out =
      std::min<std::size_t>(std::max<std::size_t>(n_nodes / 3, 3), n_nodes - 1);
  std::vector<std::vector<std::size_t>> succ(n_nodes);
  std::vector<std::size_t> others(n_nodes - 1);
  for (std::size_t node = 0; node < n_nodes; ++node) {
    std::size_t j = 0;
    for (std::size_t k = 0; k < n_nodes; ++k) {
      if (k != node) others[j++] = k;
    }
    rng.shuffle(others);
    succ[node].assign(others.begin(), others.begin() + fan_out);
    std::sort(succ[node].begin(), succ[node].end());
  }
  return succ;
}

inline std::vector<std::size_t> synth_walk(std::size_t len,
                                           const std::vector<std::vector<std::size_t>>& succ,
                                           Rng& rng) {
  std::vector<std::size_t> nodes(len);
  nodes[0] = rng.below(succ.size());
  for (std::size_t i = 1; i < len; ++i) {
    const std::vector<std::size_t>& out = succ[nodes[i - 1]];
    nodes[i] = out[rng.below(out.size())];
  }
  return nodes;
}

}  // namespace detail

inline SynthResult synth_generate(const SynthConfig& cfg) {
  if (cfg.n_marked < 1) throw ConfigError("synth: n_marked must be >= 1");
  if (cfg.vocab_size <= 2 * cfg.n_marked + 4) {
    throw ConfigError("synth: vocab_size leaves no room for filler tokens");
  }
  if (cfg.len_lo < 2 || cfg.len_hi > 15 || cfg.len_lo > cfg.len_hi) {
    throw ConfigError("synth: length range must lie within [2, 15]");
  }
  if (cfg.n_per_style < 1) throw ConfigError("synth: n_per_style must be >= 1");

  std::vector<std::string> tokens;
  std::vector<int> marked, neutral, fillers;
  for (std::size_t i = 0; i < cfg.n_marked; ++i) {
    tokens.push_back("bad" + std::to_string(i));
    marked.push_back(static_cast<int>(tokens.size()) + 3);
  }
  for (std::size_t i = 0; i < cfg.n_marked; ++i) {
    tokens.push_back("good" + std::to_string(i));
    neutral.push_back(static_cast<int>(tokens.size()) + 3);
  }
  const std::size_t n_filler = cfg.vocab_size - 4 - 2 * cfg.n_marked;
  for (std::size_t i = 0; i < n_filler; ++i) {
    tokens.push_back("w" + std::to_string(i));
    fillers.push_back(static_cast<int>(tokens.size()) + 3);
  }

  Rng rng(splitmix64(cfg.seed ^ 0x53594e5448ULL));
  Rng graph_rng = rng.fork(3);
  Rng gen0 = rng.fork(0), gen1 = rng.fork(1), split_rng = rng.fork(2);

  const std::size_t n_nodes = n_filler + cfg.n_marked;
  const std::vector<std::vector<std::size_t>> succ = detail::synth_graph(n_nodes, graph_rng);

  // Rejection-sample unique walks per style. A walk is accepted for style 0
  // when it crosses a lexicon slot once or twice (surfacing marked words) and
  // for style 1 when it crosses at most twice (surfacing neutral ones, or
  // staying pure filler). No pairing between the two sides is kept.
  auto generate_style = [&](int style, Rng& g) {
    std::set<IdSeq> uniq;
    std::size_t attempts = 0;
    const std::size_t max_attempts = 200 * cfg.n_per_style + 1000;
    while (uniq.size() < cfg.n_per_style) {
      if (++attempts > max_attempts) {
        throw ConfigError("synth: cannot draw enough unique sentences; enlarge vocab or lengths");
      }
      const std::size_t len = cfg.len_lo + g.below(cfg.len_hi - cfg.len_lo + 1);
      const std::vector<std::size_t> nodes = detail::synth_walk(len, succ, g);
      std::size_t slot_hits = 0;
      for (std::size_t node : nodes) slot_hits += node >= n_filler ? 1 : 0;
      if (style == 0 ? (slot_hits < 1 || slot_hits > 2) : slot_hits > 2) continue;
      IdSeq ids(len);
      for (std::size_t i = 0; i < len; ++i) {
        ids[i] = nodes[i] < n_filler
                     ? fillers[nodes[i]]
                     : (style == 0 ? marked : neutral)[nodes[i] - n_filler];
      }
      uniq.insert(std::move(ids));
    }
    return std::vector<IdSeq>(uniq.begin(), uniq.end());
  };

  std::vector<IdSeq> s0 = generate_style(0, gen0);
  std::vector<IdSeq> s1 = generate_style(1, gen1);

  StyledCorpus corpus;
  SplitRatios ratios;
  Rng r0 = split_rng.fork(0), r1 = split_rng.fork(1);
  detail::split_style(std::move(s0), 0, ratios, r0, &corpus);
  detail::split_style(std::move(s1), 1, ratios, r1, &corpus);

  return SynthResult{Vocabulary::from_tokens(std::move(tokens)), std::move(corpus),
                     SubstitutionOracle(std::move(marked), std::move(neutral))};
}

struct TransferScore {
  bool style_correct = false;
  double content_kept = 0.0;
};

// Exact desk-check of one transfer: did the style flip per the oracle, and
// what fraction of the source's non-marked tokens survive in order
// (longest common subsequence over non-marked tokens).
inline TransferScore oracle_transfer_score(const IdSeq& source, const IdSeq& transferred,
                                           const SubstitutionOracle& oracle) {
  const int target = 1 - oracle.classify(source);
  TransferScore score;
  score.style_correct = oracle.classify(transferred) == target;

  IdSeq a, b;
  for (int id : source) {
    if (!oracle.is_marked(id)) a.push_back(id);
  }
  for (int id : transferred) {
    if (!oracle.is_marked(id)) b.push_back(id);
  }
  if (a.empty()) {
    score.content_kept = 1.0;
    return score;
  }
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
    std::fill(cur.begin(), cur.end(), 0);
  }
  score.content_kept = static_cast<double>(prev[b.size()]) / static_cast<double>(a.size());
  return score;
}

}  // namespace cyst
