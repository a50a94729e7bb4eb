#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "cyst/adam.hpp"
#include "cyst/cells.hpp"
#include "cyst/corpus.hpp"
#include "cyst/ops.hpp"
#include "cyst/rng.hpp"
#include "cyst/vocab.hpp"

namespace cyst {

struct LmConfig {
  std::size_t emb_dim = 100;
  std::size_t hidden = 200;
  double lr = 0.0005;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 30;
  std::size_t patience = 5;
  std::uint64_t seed = 1;
};

// Word-level LSTM language model. Scores a sentence left to right from BOS
// and always predicts the closing EOS, so a sentence of n content tokens
// contributes n + 1 scored tokens.
class LanguageModel {
 public:
  LanguageModel(std::size_t vocab_size, std::size_t emb_dim, std::size_t hidden, Rng& rng)
      : vocab_size_(vocab_size),
        word_emb_(init_weight(vocab_size, emb_dim, rng)),
        lstm_(LstmParams::init(emb_dim, hidden, rng)),
        out_w_(init_weight(vocab_size, hidden, rng)),
        out_b_(init_bias(vocab_size)) {
    if (vocab_size < Vocabulary::kReservedCount + 1) {
      throw ConfigError("language model vocabulary too small");
    }
  }

  std::size_t vocab_size() const { return vocab_size_; }
  const Tensor& word_embeddings() const { return word_emb_; }

  std::vector<Tensor> params() const {
    return {word_emb_, lstm_.wf, lstm_.bf, lstm_.wi, lstm_.bi, lstm_.wo,
            lstm_.bo,  lstm_.wc, lstm_.bc, out_w_,   out_b_};
  }

  // Total negative log-likelihood of the sentence, EOS included.
  Tensor nll(const IdSeq& content) const {
    Tensor h = Tensor::zeros({lstm_.hidden()});
    Tensor c = Tensor::zeros({lstm_.hidden()});
    IdSeq targets = content;
    targets.push_back(Vocabulary::kEos);
    int prev = Vocabulary::kBos;
    Tensor total = Tensor::zeros({1});
    for (int target : targets) {
      Tensor x = embedding_row(word_emb_, prev);
      auto [h_new, c_new] = lstm_.step(x, h, c);
      h = h_new;
      c = c_new;
      Tensor logits = add(matvec(out_w_, h), out_b_);
      total = add(total, cross_entropy(logits, target));
      prev = target;
    }
    return total;
  }

  static std::size_t scored_tokens(const IdSeq& content) { return content.size() + 1; }

 private:
  std::size_t vocab_size_;
  Tensor word_emb_;
  LstmParams lstm_;
  Tensor out_w_;
  Tensor out_b_;
};

// exp of the corpus-level mean per-token NLL (natural log base).
inline double perplexity(const std::vector<IdSeq>& sentences, const LanguageModel& lm) {
  if (sentences.empty()) throw ConfigError("perplexity of an empty sentence set");
  double total_nll = 0.0;
  std::size_t total_tokens = 0;
  for (const IdSeq& s : sentences) {
    total_nll += lm.nll(s).item();
    total_tokens += LanguageModel::scored_tokens(s);
  }
  return std::exp(total_nll / static_cast<double>(total_tokens));
}

struct LmTrainResult {
  LanguageModel model;
  std::vector<double> dev_ppls;  // one entry per epoch
  std::size_t best_epoch = 0;    // 1-based epoch whose weights were kept
};

inline LmTrainResult train_lm(const std::vector<IdSeq>& train_sentences,
                              const std::vector<IdSeq>& dev_sentences, std::size_t vocab_size,
                              const LmConfig& cfg) {
  if (train_sentences.empty() || dev_sentences.empty()) {
    throw ConfigError("language model needs non-empty train and dev sets");
  }
  if (cfg.batch_size < 1 || cfg.max_epochs < 1) {
    throw ConfigError("language model batch size and epochs must be positive");
  }

  Rng root(splitmix64(cfg.seed ^ 0x4c4dULL));
  Rng init_rng = root.fork(0);
  Rng shuffle_rng = root.fork(1);
  LanguageModel model(vocab_size, cfg.emb_dim, cfg.hidden, init_rng);
  Adam opt(model.params(), {.lr = cfg.lr});

  LmTrainResult result{model, {}, 0};
  double best_ppl = std::numeric_limits<double>::infinity();
  auto snapshot = detail::snapshot_params(model.params());

  std::vector<std::size_t> order(train_sentences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      opt.zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        const IdSeq& s = train_sentences[order[i]];
        Tape tape;
        Tensor loss = scale(model.nll(s), 1.0 / static_cast<double>(LanguageModel::scored_tokens(s)));
        tape.backward(loss, 1.0 / static_cast<double>(end - start));
      }
      opt.step();
    }

    const double ppl = perplexity(dev_sentences, model);
    if (!std::isfinite(ppl)) throw NumericError("dev perplexity is not finite");
    result.dev_ppls.push_back(ppl);
    if (ppl < best_ppl) {
      best_ppl = ppl;
      result.best_epoch = epoch;
      snapshot = detail::snapshot_params(model.params());
    } else if (epoch - result.best_epoch >= cfg.patience) {
      break;
    }
  }

  detail::restore_params(model.params(), snapshot);
  result.model = model;
  return result;
}

}  // namespace cyst
