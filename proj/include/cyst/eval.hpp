#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cyst/corpus.hpp"
#include "cyst/embeddings.hpp"
#include "cyst/language_model.hpp"
#include "cyst/model.hpp"
#include "cyst/trainer.hpp"

namespace cyst {

// Style verdict for a token sequence: either a frozen CNN classifier or, on
// synthetic corpora, the exact substitution oracle.
using StyleJudge = std::function<int(const IdSeq&)>;

struct FrozenClassifierConfig {
  std::size_t emb_dim = 32;
  std::size_t n_maps = 32;
  std::vector<std::size_t> filter_widths{1, 2, 3, 4};
  double lr = 0.001;
  std::size_t batch_size = 32;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;
};

// Supervised CNN classifier trained on labeled sentences the transfer model
// never saw; immutable once trained. Reuses the transfer architecture's
// classifier path, the sequence side stays at its random init and is unused.
class FrozenClassifier {
 public:
  FrozenClassifier(const Split& labeled, std::size_t vocab_size,
                   const FrozenClassifierConfig& cfg = {}) {
    if (labeled.empty()) throw ConfigError("frozen classifier needs labeled sentences");
    ModelConfig mc;
    mc.vocab_size = vocab_size;
    mc.emb_dim = cfg.emb_dim;
    mc.hidden = 4;  // sequence side unused
    mc.filter_widths = cfg.filter_widths;
    mc.n_maps = cfg.n_maps;
    Rng root(splitmix64(cfg.seed ^ 0x4643ULL));
    Rng init_rng = root.fork(0);
    Rng shuffle_rng = root.fork(1);
    model_.emplace(mc, init_rng);

    std::vector<Tensor> params = model_->classifier_params();
    params.push_back(model_->word_embeddings());
    Adam opt(params, {.lr = cfg.lr});

    std::vector<std::size_t> order(labeled.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      shuffle_rng.shuffle(order);
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg.batch_size);
        opt.zero_grad();
        for (std::size_t i = start; i < end; ++i) {
          const StyledSentence& s = labeled[order[i]];
          Tape tape;
          IdSeq with_eos = s.ids;
          with_eos.push_back(Vocabulary::kEos);
          tape.backward(cross_entropy(model_->classify(with_eos), s.style),
                        1.0 / static_cast<double>(end - start));
        }
        opt.step();
      }
    }
  }

  int predict(const IdSeq& content) const { return predict_with(*model_, content); }

  // The returned judge owns a handle to the trained parameters, so it stays
  // valid after this object goes away.
  StyleJudge judge() const {
    TransferModel snapshot = *model_;
    return [snapshot](const IdSeq& ids) { return predict_with(snapshot, ids); };
  }

 private:
  static int predict_with(const TransferModel& model, const IdSeq& content) {
    IdSeq with_eos = content;
    with_eos.push_back(Vocabulary::kEos);
    return argmax(model.classify(with_eos));
  }

  std::optional<TransferModel> model_;
};

inline double eval_accuracy(const std::vector<IdSeq>& transferred, int target_style,
                            const StyleJudge& judge) {
  if (transferred.empty()) throw ConfigError("accuracy of an empty sentence set");
  std::size_t hits = 0;
  for (const IdSeq& s : transferred) {
    if (judge(s) == target_style) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(transferred.size());
}

namespace detail {

// min, mean and max pooling over the word vectors, concatenated.
inline std::optional<std::vector<double>> pooled_sentence_vec(
    const std::vector<std::string>& tokens, const EmbeddingTable& emb) {
  const std::size_t d = emb.dim();
  std::vector<double> lo, hi, sum;
  std::size_t seen = 0;
  for (const std::string& tok : tokens) {
    if (!emb.has(tok)) continue;
    const std::vector<double>& v = emb.vec(tok);
    if (seen == 0) {
      lo = v;
      hi = v;
      sum = v;
    } else {
      for (std::size_t j = 0; j < d; ++j) {
        lo[j] = std::min(lo[j], v[j]);
        hi[j] = std::max(hi[j], v[j]);
        sum[j] += v[j];
      }
    }
    ++seen;
  }
  if (seen == 0) return std::nullopt;
  std::vector<double> pooled;
  pooled.reserve(3 * d);
  pooled.insert(pooled.end(), lo.begin(), lo.end());
  for (double x : sum) pooled.push_back(x / static_cast<double>(seen));
  pooled.insert(pooled.end(), hi.begin(), hi.end());
  return pooled;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace detail

// Cosine between pooled sentence vectors; empty when either side has no
// in-table token (the pair is skipped, not scored zero).
inline std::optional<double> sentence_cp(const std::vector<std::string>& source,
                                         const std::vector<std::string>& transferred,
                                         const EmbeddingTable& emb) {
  auto a = detail::pooled_sentence_vec(source, emb);
  auto b = detail::pooled_sentence_vec(transferred, emb);
  if (!a || !b) return std::nullopt;
  return detail::cosine(*a, *b);
}

struct EvalRecord {
  std::string source;
  std::string transferred;
  int verdict = 0;
  bool cp_scored = false;
  double cp = 0.0;
  double nll = 0.0;          // total over the sentence, EOS included
  std::size_t tokens = 0;    // scored token count
};

struct EvalReport {
  double acc = 0.0;   // percentage in [0, 100]
  double cp = 0.0;    // mean cosine over scored pairs
  double ppl = 0.0;
  std::size_t n = 0;
  std::size_t cp_skipped = 0;
  std::vector<EvalRecord> records;
};

inline EvalReport evaluate_transfer(const std::vector<IdSeq>& sources,
                                    const std::vector<IdSeq>& transferred, int target_style,
                                    const StyleJudge& judge, const EmbeddingTable& emb,
                                    const LanguageModel& lm, const Vocabulary& vocab) {
  if (sources.size() != transferred.size()) {
    throw ConfigError("source and transferred sentence counts differ");
  }
  if (sources.empty()) throw ConfigError("evaluation of an empty sentence set");

  EvalReport report;
  report.n = sources.size();
  double cp_sum = 0.0;
  std::size_t cp_scored = 0, hits = 0;
  double total_nll = 0.0;
  std::size_t total_tokens = 0;

  for (std::size_t i = 0; i < sources.size(); ++i) {
    EvalRecord rec;
    rec.source = detokenize(vocab.decode(sources[i]));
    rec.transferred = detokenize(vocab.decode(transferred[i]));
    rec.verdict = judge(transferred[i]);
    if (rec.verdict == target_style) ++hits;

    auto cp = sentence_cp(vocab.decode(sources[i]), vocab.decode(transferred[i]), emb);
    if (cp) {
      rec.cp_scored = true;
      rec.cp = *cp;
      cp_sum += *cp;
      ++cp_scored;
    }

    rec.nll = lm.nll(transferred[i]).item();
    rec.tokens = LanguageModel::scored_tokens(transferred[i]);
    total_nll += rec.nll;
    total_tokens += rec.tokens;
    report.records.push_back(std::move(rec));
  }

  report.acc = 100.0 * static_cast<double>(hits) / static_cast<double>(sources.size());
  report.cp = cp_scored > 0 ? cp_sum / static_cast<double>(cp_scored) : 0.0;
  report.cp_skipped = sources.size() - cp_scored;
  report.ppl = std::exp(total_nll / static_cast<double>(total_tokens));
  return report;
}

inline std::string summary_line(const EvalReport& report) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "acc=%.4f cp=%.4f ppl=%.4f", report.acc, report.cp,
                report.ppl);
  return buf;
}

inline void write_report(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report file: " + path);
  out << "source\ttransferred\tverdict\tcp\tnll\ttokens\n";
  char buf[64];
  for (const EvalRecord& rec : report.records) {
    out << rec.source << '\t' << rec.transferred << '\t' << rec.verdict << '\t';
    if (rec.cp_scored) {
      std::snprintf(buf, sizeof(buf), "%.6f", rec.cp);
      out << buf;
    } else {
      out << "skipped";
    }
    std::snprintf(buf, sizeof(buf), "\t%.6f\t%zu\n", rec.nll, rec.tokens);
    out << buf;
  }
  out << "# " << summary_line(report) << '\n';
  if (!out) throw IoError("failed writing report file: " + path);
}

inline std::vector<IdSeq> transfer_all(const std::vector<IdSeq>& sources,
                                       const TransferModel& model, int from_style,
                                       int to_style) {
  std::vector<IdSeq> out;
  out.reserve(sources.size());
  for (const IdSeq& s : sources) {
    out.push_back(model.decode_greedy(model.encode(s, from_style), to_style));
  }
  return out;
}

struct AblationRow {
  std::string variant;
  double acc = 0.0;
  double cp = 0.0;
  double ppl = 0.0;
};

// Trains and evaluates the four Table-style variants under one seed: the LM
// and embedding table are shared, each variant trains its own transfer model.
inline std::vector<AblationRow> run_ablations(const StyledCorpus& corpus,
                                              const Vocabulary& vocab,
                                              const TrainConfig& base, const LmConfig& lm_cfg,
                                              const StyleJudge& judge,
                                              std::ostream* progress = nullptr) {
  std::vector<IdSeq> lm_train, lm_dev;
  for (const StyledSentence& s : corpus.train) {
    if (s.style == 1) lm_train.push_back(s.ids);
  }
  for (const StyledSentence& s : corpus.dev) {
    if (s.style == 1) lm_dev.push_back(s.ids);
  }
  LmTrainResult lm = train_lm(lm_train, lm_dev, vocab.size(), lm_cfg);
  EmbeddingTable emb = EmbeddingTable::from_matrix(vocab, lm.model.word_embeddings());

  std::vector<IdSeq> sources;
  for (const StyledSentence& s : corpus.test) {
    if (s.style == 0) sources.push_back(s.ids);
  }
  if (sources.empty()) throw ConfigError("ablation needs style-0 test sentences");

  const std::vector<std::pair<std::string, std::pair<bool, bool>>> variants = {
      {"full", {false, false}},
      {"no_attention", {true, false}},
      {"no_back_transfer", {false, true}},
      {"no_attention_no_back_transfer", {true, true}},
  };

  std::vector<AblationRow> rows;
  for (const auto& [name, toggles] : variants) {
    TrainConfig cfg = base;
    cfg.no_attention = toggles.first;
    cfg.no_back_transfer = toggles.second;
    if (progress) *progress << "variant " << name << '\n';
    TrainResult trained = train(corpus, vocab.size(), cfg, progress);
    std::vector<IdSeq> transferred = transfer_all(sources, trained.model, 0, 1);
    EvalReport report = evaluate_transfer(sources, transferred, 1, judge, emb, lm.model, vocab);
    rows.push_back({name, report.acc, report.cp, report.ppl});
  }
  return rows;
}

}  // namespace cyst
