#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "cyst/adam.hpp"
#include "cyst/corpus.hpp"
#include "cyst/losses.hpp"
#include "cyst/model.hpp"
#include "cyst/rng.hpp"

namespace cyst {

struct TrainConfig {
  std::size_t hidden = 200;
  std::size_t emb_dim = 100;
  std::vector<std::size_t> filter_widths{1, 2, 3, 4};
  std::size_t n_maps = 128;
  double lr = 0.0005;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 30;
  std::size_t patience = 5;
  std::size_t warmup_epochs = 1;  // classifier-only epochs before joint training
  double tau_start = 1.0;
  double tau_anneal = 0.5;
  double tau_floor = 0.1;
  std::size_t max_gen_len = 16;
  std::uint64_t seed = 1;
  bool no_attention = false;
  bool no_back_transfer = false;
  LossWeights weights;

  double tau_at_epoch(std::size_t epoch) const {
    double tau = tau_start;
    for (std::size_t e = 1; e < epoch; ++e) tau *= tau_anneal;
    return std::max(tau, tau_floor);
  }

  ModelConfig model_config(std::size_t vocab_size) const {
    ModelConfig m;
    m.vocab_size = vocab_size;
    m.emb_dim = emb_dim;
    m.hidden = hidden;
    m.filter_widths = filter_widths;
    m.n_maps = n_maps;
    m.use_attention = !no_attention;
    m.max_gen_len = max_gen_len;
    return m;
  }
};

namespace detail {

inline void check_finite(const LossBreakdown& b) {
  const std::pair<const char*, double> terms[] = {
      {"rec", b.rec},           {"class_td", b.class_td}, {"class_od", b.class_od},
      {"back_rec", b.back_rec}, {"class_btd", b.class_btd}};
  for (const auto& [name, v] : terms) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("train: loss ") + name + " is not finite");
    }
  }
}

inline Tensor weighted_total(const SentenceLosses& sl, const LossWeights& w) {
  Tensor total = scale(sl.rec, w.rec);
  total = add(total, scale(sl.class_td, w.class_td));
  total = add(total, scale(sl.class_od, w.class_od));
  total = add(total, scale(sl.back_rec, w.back_rec));
  total = add(total, scale(sl.class_btd, w.class_btd));
  return total;
}

}  // namespace detail

// One joint optimizer step over both style directions: every sentence of both
// batches contributes all five terms to one accumulated gradient, then Adam
// updates encoder, decoder, and classifier together.
inline LossBreakdown train_step(const Batch& batch0, const Batch& batch1, TransferModel& model,
                                Adam& opt, const TrainConfig& cfg, double tau) {
  if (batch0.style() != 0 || batch1.style() != 1) {
    throw ConfigError("train: train_step needs one batch per style, in order");
  }
  const double n = static_cast<double>(batch0.rows + batch1.rows);
  LossBreakdown agg;
  opt.zero_grad();
  for (const Batch* batch : {&batch0, &batch1}) {
    for (std::size_t r = 0; r < batch->rows; ++r) {
      const IdSeq x = batch->row(r);
      Tape tape;
      SentenceLosses sl = sentence_losses(x, batch->style(), model, tau, !cfg.no_back_transfer);
      Tensor total = detail::weighted_total(sl, cfg.weights);
      tape.backward(total, 1.0 / n);
      agg.rec += sl.rec.item();
      agg.class_td += sl.class_td.item();
      agg.class_od += sl.class_od.item();
      agg.back_rec += sl.back_rec.item();
      agg.class_btd += sl.class_btd.item();
      agg.total += total.item();
    }
  }
  agg.rec /= n;
  agg.class_td /= n;
  agg.class_od /= n;
  agg.back_rec /= n;
  agg.class_btd /= n;
  agg.total /= n;
  detail::check_finite(agg);
  opt.step();
  return agg;
}

struct TrainResult {
  TransferModel model;
  std::vector<LossBreakdown> epochs;   // one entry per logged epoch, warm-up first
  std::vector<double> dev_totals;      // aligned with epochs
  std::size_t best_epoch = 0;          // joint epoch number (1-based); 0 = initial state
  double best_dev = std::numeric_limits<double>::infinity();
  bool aborted = false;
};

namespace detail {

// Exact dev loss: mean of per-sentence terms over the whole split, evaluated
// at the temperature floor so epochs stay comparable.
inline LossBreakdown dev_losses(const Split& dev, const TransferModel& model,
                                const TrainConfig& cfg) {
  LossBreakdown agg;
  for (const StyledSentence& s : dev) {
    IdSeq x = s.ids;
    x.push_back(Vocabulary::kEos);
    SentenceLosses sl = sentence_losses(x, s.style, model, cfg.tau_floor, !cfg.no_back_transfer);
    agg.rec += sl.rec.item();
    agg.class_td += sl.class_td.item();
    agg.class_od += sl.class_od.item();
    agg.back_rec += sl.back_rec.item();
    agg.class_btd += sl.class_btd.item();
  }
  const double n = static_cast<double>(dev.size());
  agg.rec /= n;
  agg.class_td /= n;
  agg.class_od /= n;
  agg.back_rec /= n;
  agg.class_btd /= n;
  agg.total = cfg.weights.rec * agg.rec + cfg.weights.class_td * agg.class_td +
              cfg.weights.class_od * agg.class_od + cfg.weights.back_rec * agg.back_rec +
              cfg.weights.class_btd * agg.class_btd;
  return agg;
}

inline void log_epoch(std::ostream* log, std::size_t epoch, const LossBreakdown& b,
                      double dev_total) {
  if (log == nullptr) return;
  char line[256];
  std::snprintf(line, sizeof(line), "%zu\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\n", epoch,
                b.rec, b.class_td, b.class_od, b.back_rec, b.class_btd, b.total, dev_total);
  *log << line << std::flush;
}

}  // namespace detail

inline TrainResult train(const StyledCorpus& corpus, std::size_t vocab_size,
                         const TrainConfig& cfg, std::ostream* log = nullptr) {
  std::size_t train0 = 0, train1 = 0;
  for (const StyledSentence& s : corpus.train) (s.style == 0 ? train0 : train1) += 1;
  if (train0 == 0 || train1 == 0) {
    throw ConfigError("train: training split needs sentences of both styles");
  }
  if (corpus.dev.empty()) throw ConfigError("train: dev split is empty");
  if (cfg.max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (cfg.tau_start <= 0 || cfg.tau_floor <= 0 || cfg.tau_anneal <= 0) {
    throw ConfigError("train: temperatures must be positive");
  }

  Rng root(splitmix64(cfg.seed ^ 0x545241494eULL));
  Rng init_rng = root.fork(0);
  Rng shuffle_rng = root.fork(1);

  TransferModel model(cfg.model_config(vocab_size), init_rng);
  Adam opt(model.params(), {.lr = cfg.lr});

  TrainResult result{model};
  auto snapshot = detail::snapshot_params(model.params());

  // Classifier warm-up: plain supervised classification so the
  // classifier-feedback terms see a non-random classifier from the first
  // joint epoch. Logged as epoch 0.
  try {
    for (std::size_t w = 0; w < cfg.warmup_epochs; ++w) {
      LossBreakdown agg;
      std::size_t steps = 0;
      for (const Batch& batch : make_batches(corpus.train, cfg.batch_size, shuffle_rng)) {
        opt.zero_grad();
        double mean = 0.0;
        for (std::size_t r = 0; r < batch.rows; ++r) {
          Tape tape;
          Tensor loss = cross_entropy(model.classify(batch.row(r)), batch.styles[r]);
          tape.backward(loss, cfg.weights.class_od / static_cast<double>(batch.rows));
          mean += loss.item();
        }
        agg.class_od += mean / static_cast<double>(batch.rows);
        detail::check_finite(agg);
        opt.step();
        ++steps;
      }
      agg.class_od /= static_cast<double>(steps);
      agg.total = cfg.weights.class_od * agg.class_od;
      LossBreakdown dev = detail::dev_losses(corpus.dev, model, cfg);
      detail::check_finite(dev);
      result.epochs.push_back(agg);
      result.dev_totals.push_back(dev.total);
      detail::log_epoch(log, 0, agg, dev.total);
    }

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
      const double tau = cfg.tau_at_epoch(epoch);
      Rng r0 = shuffle_rng.fork(2 * epoch);
      Rng r1 = shuffle_rng.fork(2 * epoch + 1);
      std::vector<Batch> b0 = make_style_batches(corpus.train, 0, cfg.batch_size, r0);
      std::vector<Batch> b1 = make_style_batches(corpus.train, 1, cfg.batch_size, r1);

      LossBreakdown agg;
      const std::size_t steps = std::max(b0.size(), b1.size());
      for (std::size_t s = 0; s < steps; ++s) {
        LossBreakdown step =
            train_step(b0[s % b0.size()], b1[s % b1.size()], model, opt, cfg, tau);
        agg.rec += step.rec;
        agg.class_td += step.class_td;
        agg.class_od += step.class_od;
        agg.back_rec += step.back_rec;
        agg.class_btd += step.class_btd;
        agg.total += step.total;
      }
      const double ns = static_cast<double>(steps);
      agg.rec /= ns;
      agg.class_td /= ns;
      agg.class_od /= ns;
      agg.back_rec /= ns;
      agg.class_btd /= ns;
      agg.total /= ns;

      LossBreakdown dev = detail::dev_losses(corpus.dev, model, cfg);
      detail::check_finite(dev);
      result.epochs.push_back(agg);
      result.dev_totals.push_back(dev.total);
      detail::log_epoch(log, epoch, agg, dev.total);

      if (dev.total < result.best_dev) {
        result.best_dev = dev.total;
        result.best_epoch = epoch;
        snapshot = detail::snapshot_params(model.params());
      } else if (epoch - result.best_epoch >= cfg.patience) {
        break;
      }
    }
  } catch (const NumericError&) {
    result.aborted = true;
  }

  detail::restore_params(model.params(), snapshot);
  result.model = model;
  return result;
}

}  // namespace cyst
