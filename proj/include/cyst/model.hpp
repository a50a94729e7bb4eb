#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "cyst/cells.hpp"
#include "cyst/ops.hpp"
#include "cyst/rng.hpp"
#include "cyst/tensor.hpp"
#include "cyst/vocab.hpp"

namespace cyst {

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t emb_dim = 100;
  std::size_t hidden = 200;
  std::vector<std::size_t> filter_widths{1, 2, 3, 4};
  std::size_t n_maps = 128;
  bool use_attention = true;
  std::size_t max_gen_len = 16;
};

struct EncoderOutput {
  Tensor states;  // T x hidden, one row per input position
  Tensor final;   // hidden
};

// Differentiable sentence: one probability row over V per generated step.
// stop is the index of the first row whose argmax is EOS, or rows.size()
// when generation hit the length cap instead.
struct SoftSequence {
  std::vector<Tensor> rows;
  std::size_t stop = 0;

  bool ended() const { return stop < rows.size(); }
};

// The three shared networks: one style-conditioned GRU encoder, one attention
// GRU decoder, one CNN classifier, all over a common word embedding table.
// Style enters solely as the initial hidden state of encoder and decoder.
class TransferModel {
 public:
  TransferModel(ModelConfig cfg, Rng& rng) : cfg_(std::move(cfg)) {
    if (cfg_.vocab_size < 5) throw ConfigError("model: vocab_size must cover reserved ids");
    if (cfg_.hidden < 1 || cfg_.emb_dim < 1) throw ConfigError("model: zero-sized layers");
    if (cfg_.filter_widths.empty()) throw ConfigError("model: no classifier filter widths");
    if (cfg_.n_maps < 1) throw ConfigError("model: n_maps must be >= 1");

    const std::size_t v = cfg_.vocab_size, e = cfg_.emb_dim, h = cfg_.hidden;
    word_emb_ = Tensor::uniform({v, e}, -kInitRange, kInitRange, rng);
    style_emb_ = Tensor::uniform({2, h}, -kInitRange, kInitRange, rng);
    enc_ = GruParams::init(e, h, rng);
    dec_ = GruParams::init(e + h, h, rng);
    // Attention tensors are always drawn so that the random stream, and hence
    // every other parameter, is identical with and without attention.
    att_w_ = init_weight(h, h, rng);
    att_u_ = init_weight(h, h, rng);  // applied on the right: scores over rows of H
    att_v_ = Tensor::uniform({h}, -kInitRange, kInitRange, rng);
    out_w_ = init_weight(v, h, rng);
    out_b_ = init_bias(v);
    for (std::size_t w : cfg_.filter_widths) {
      if (w < 1 || w > 4) throw ConfigError("model: filter width out of range");
      conv_w_.push_back(init_weight(w * e, cfg_.n_maps, rng));
      conv_b_.push_back(init_bias(cfg_.n_maps));
    }
    cls_w_ = init_weight(2, cfg_.filter_widths.size() * cfg_.n_maps, rng);
    cls_b_ = init_bias(2);
  }

  const ModelConfig& config() const { return cfg_; }
  const Tensor& word_embeddings() const { return word_emb_; }

  // Generation cap is a decode-time setting, not checkpoint state.
  void set_max_gen_len(std::size_t n) {
    if (n < 1) throw ConfigError("model: max_gen_len must be >= 1");
    cfg_.max_gen_len = n;
  }

  // --- encoder ---

  EncoderOutput encode(const IdSeq& ids, int style) const {
    if (ids.empty()) throw ShapeError("encode: empty sentence");
    Tensor h = embedding_row(style_emb_, style);
    std::vector<Tensor> states;
    states.reserve(ids.size());
    for (int id : ids) {
      h = enc_.step(embedding_row(word_emb_, id), h);
      states.push_back(h);
    }
    return {stack_rows(states), h};
  }

  EncoderOutput encode(const SoftSequence& soft, int style) const {
    if (soft.rows.empty()) throw ShapeError("encode: empty soft sequence");
    Tensor h = embedding_row(style_emb_, style);
    std::vector<Tensor> states;
    states.reserve(soft.rows.size());
    for (const Tensor& row : soft.rows) {
      h = enc_.step(vecmat(row, word_emb_), h);
      states.push_back(h);
    }
    return {stack_rows(states), h};
  }

  // --- attention ---

  struct Attention {
    Tensor context;
    Tensor weights;
  };

  // Additive attention: e_t = v . tanh(W s + U h_t), context = softmax(e) . H.
  Attention attend(const Tensor& state, const EncoderOutput& enc) const {
    Tensor scores = matvec(tanh(row_add(matmul(enc.states, att_u_), matvec(att_w_, state))),
                           att_v_);
    Tensor weights = softmax(scores);
    return {vecmat(weights, enc.states), weights};
  }

  // --- decoder ---

  std::vector<Tensor> decode_teacher_forced(const EncoderOutput& enc, int style,
                                            const IdSeq& reference) const {
    if (reference.empty()) throw ShapeError("decode: empty reference");
    Tensor state = decoder_init(enc, style);
    std::vector<Tensor> logits;
    logits.reserve(reference.size());
    int prev = Vocabulary::kBos;
    for (int target : reference) {
      state = decoder_step(embedding_row(word_emb_, prev), state, enc);
      logits.push_back(output_logits(state));
      prev = target;
    }
    return logits;
  }

  SoftSequence decode_soft(const EncoderOutput& enc, int style, double temperature) const {
    if (temperature <= 0.0) throw ConfigError("decode: temperature must be positive");
    Tensor state = decoder_init(enc, style);
    Tensor prev = embedding_row(word_emb_, Vocabulary::kBos);
    SoftSequence out;
    out.stop = cfg_.max_gen_len;
    for (std::size_t t = 0; t < cfg_.max_gen_len; ++t) {
      state = decoder_step(prev, state, enc);
      Tensor probs = softmax(scale(output_logits(state), 1.0 / temperature));
      out.rows.push_back(probs);
      if (argmax(probs) == static_cast<std::size_t>(Vocabulary::kEos)) {
        out.stop = t;
        break;
      }
      prev = vecmat(probs, word_emb_);
    }
    return out;
  }

  // Greedy inference; returns content tokens, EOS consumed, never emitted.
  IdSeq decode_greedy(const EncoderOutput& enc, int style) const {
    Tensor state = decoder_init(enc, style);
    int prev = Vocabulary::kBos;
    IdSeq out;
    for (std::size_t t = 0; t < cfg_.max_gen_len; ++t) {
      state = decoder_step(embedding_row(word_emb_, prev), state, enc);
      const int tok = static_cast<int>(argmax(output_logits(state)));
      if (tok == Vocabulary::kEos) break;
      out.push_back(tok);
      prev = tok;
    }
    return out;
  }

  // --- classifier ---

  Tensor classify(const IdSeq& ids) const {
    if (ids.empty()) throw ShapeError("classify: empty sentence");
    IdSeq padded = ids;
    while (padded.size() < min_classify_len()) padded.push_back(Vocabulary::kPad);
    return classify_embedded(embedding_lookup(word_emb_, padded));
  }

  Tensor classify(const SoftSequence& soft) const {
    if (soft.rows.empty()) throw ShapeError("classify: empty soft sequence");
    std::vector<Tensor> rows;
    rows.reserve(soft.rows.size());
    for (const Tensor& r : soft.rows) rows.push_back(vecmat(r, word_emb_));
    while (rows.size() < min_classify_len()) {
      rows.push_back(embedding_row(word_emb_, Vocabulary::kPad));
    }
    return classify_embedded(stack_rows(rows));
  }

  // Exact one-hot soft encoding of a hard sentence; the two input paths must
  // then agree everywhere.
  SoftSequence one_hot(const IdSeq& ids) const {
    SoftSequence soft;
    soft.stop = ids.size();
    for (std::size_t i = 0; i < ids.size(); ++i) {
      Tensor row = Tensor::zeros({cfg_.vocab_size});
      row.value()[static_cast<std::size_t>(ids[i])] = 1.0;
      soft.rows.push_back(row);
      if (ids[i] == Vocabulary::kEos && soft.stop == ids.size()) soft.stop = i;
    }
    return soft;
  }

  // --- parameters ---

  std::vector<std::pair<std::string, Tensor>> named_params() const {
    std::vector<std::pair<std::string, Tensor>> out{
        {"emb.word", word_emb_}, {"emb.style", style_emb_}, {"enc.wz", enc_.wz},
        {"enc.bz", enc_.bz},     {"enc.wr", enc_.wr},       {"enc.br", enc_.br},
        {"enc.wh", enc_.wh},     {"enc.bh", enc_.bh},       {"dec.wz", dec_.wz},
        {"dec.bz", dec_.bz},     {"dec.wr", dec_.wr},       {"dec.br", dec_.br},
        {"dec.wh", dec_.wh},     {"dec.bh", dec_.bh},
    };
    if (cfg_.use_attention) {
      out.emplace_back("att.w", att_w_);
      out.emplace_back("att.u", att_u_);
      out.emplace_back("att.v", att_v_);
    }
    out.emplace_back("out.w", out_w_);
    out.emplace_back("out.b", out_b_);
    for (std::size_t i = 0; i < cfg_.filter_widths.size(); ++i) {
      const std::string base = "cls.conv" + std::to_string(cfg_.filter_widths[i]);
      out.emplace_back(base + ".w", conv_w_[i]);
      out.emplace_back(base + ".b", conv_b_[i]);
    }
    out.emplace_back("cls.out.w", cls_w_);
    out.emplace_back("cls.out.b", cls_b_);
    return out;
  }

  std::vector<Tensor> params() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_params()) out.push_back(t);
    return out;
  }

  std::vector<Tensor> embedding_params() const { return {word_emb_, style_emb_}; }

  std::vector<Tensor> encoder_params() const {
    return {enc_.wz, enc_.bz, enc_.wr, enc_.br, enc_.wh, enc_.bh};
  }

  // Decoder side of the generator: GRU, attention, output projection.
  std::vector<Tensor> decoder_params() const {
    std::vector<Tensor> out{dec_.wz, dec_.bz, dec_.wr, dec_.br, dec_.wh, dec_.bh};
    if (cfg_.use_attention) {
      out.push_back(att_w_);
      out.push_back(att_u_);
      out.push_back(att_v_);
    }
    out.push_back(out_w_);
    out.push_back(out_b_);
    return out;
  }

  std::vector<Tensor> classifier_params() const {
    std::vector<Tensor> out;
    for (std::size_t i = 0; i < conv_w_.size(); ++i) {
      out.push_back(conv_w_[i]);
      out.push_back(conv_b_[i]);
    }
    out.push_back(cls_w_);
    out.push_back(cls_b_);
    return out;
  }

 private:
  std::size_t min_classify_len() const {
    std::size_t widest = 1;
    for (std::size_t w : cfg_.filter_widths) widest = std::max(widest, w);
    return widest;
  }

  // The attention decoder starts from the style embedding alone and reads the
  // source through per-step attention. Without attention the source summary
  // is folded into the start state instead and the context channel goes dead,
  // the classic pre-attention hookup. Shapes stay identical across variants.
  Tensor decoder_init(const EncoderOutput& enc, int style) const {
    Tensor state = embedding_row(style_emb_, style);
    return cfg_.use_attention ? state : add(state, enc.final);
  }

  Tensor decoder_step(const Tensor& prev_emb, const Tensor& state,
                      const EncoderOutput& enc) const {
    Tensor context = cfg_.use_attention ? attend(state, enc).context
                                        : Tensor::zeros({cfg_.hidden});
    return dec_.step(concat({prev_emb, context}), state);
  }

  Tensor output_logits(const Tensor& state) const { return add(matvec(out_w_, state), out_b_); }

  Tensor classify_embedded(const Tensor& emb_rows) const {
    std::vector<Tensor> pooled;
    pooled.reserve(cfg_.filter_widths.size());
    for (std::size_t i = 0; i < cfg_.filter_widths.size(); ++i) {
      Tensor windows = unfold_windows(emb_rows, cfg_.filter_widths[i]);
      pooled.push_back(max_over_time(tanh(row_add(matmul(windows, conv_w_[i]), conv_b_[i]))));
    }
    return add(matvec(cls_w_, concat(pooled)), cls_b_);
  }

  ModelConfig cfg_;
  Tensor word_emb_, style_emb_;
  GruParams enc_, dec_;
  Tensor att_w_, att_u_, att_v_;
  Tensor out_w_, out_b_;
  std::vector<Tensor> conv_w_, conv_b_;
  Tensor cls_w_, cls_b_;
};

}  // namespace cyst
