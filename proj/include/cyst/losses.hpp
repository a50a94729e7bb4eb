#pragma once

#include <cstddef>
#include <vector>

#include "cyst/corpus.hpp"
#include "cyst/model.hpp"
#include "cyst/ops.hpp"

// The five training losses. Reconstruction terms are per-token averaged
// cross-entropy; classification terms are one cross-entropy per sentence.
// Everything is a mean, so batch values are means of per-sentence values and
// the trainer can process sentences one at a time.

namespace cyst {

struct LossBreakdown {
  double rec = 0.0;
  double class_td = 0.0;
  double class_od = 0.0;
  double back_rec = 0.0;
  double class_btd = 0.0;
  double total = 0.0;
};

struct LossWeights {
  double rec = 1.0;
  double class_td = 1.0;
  double class_od = 1.0;
  double back_rec = 1.0;
  double class_btd = 1.0;
};

// Mean per-token negative log-likelihood of a teacher-forced decode.
inline Tensor sequence_nll(const std::vector<Tensor>& logits, const IdSeq& reference) {
  if (logits.size() != reference.size()) {
    throw ShapeError("loss: " + std::to_string(logits.size()) + " logit steps vs " +
                     std::to_string(reference.size()) + " reference tokens");
  }
  Tensor total = cross_entropy(logits[0], reference[0]);
  for (std::size_t t = 1; t < reference.size(); ++t) {
    total = add(total, cross_entropy(logits[t], reference[t]));
  }
  return scale(total, 1.0 / static_cast<double>(reference.size()));
}

// Both backward-transfer terms given the already-computed forward transfer:
// re-encode it with the style it was generated in, teacher-force toward the
// original sentence, and classify the soft back-transfer.
inline std::pair<Tensor, Tensor> back_transfer_losses(const IdSeq& x, int style,
                                                      const TransferModel& model,
                                                      const SoftSequence& fwd, double tau) {
  const int other = 1 - style;
  EncoderOutput enc_back = model.encode(fwd, other);
  Tensor back_rec = sequence_nll(model.decode_teacher_forced(enc_back, style, x), x);
  Tensor class_btd = cross_entropy(model.classify(model.decode_soft(enc_back, style, tau)), style);
  return {back_rec, class_btd};
}

// All per-sentence terms in one pass, sharing the encoder output and the
// forward transfer between them. x carries its terminating EOS.
struct SentenceLosses {
  Tensor rec, class_td, class_od, back_rec, class_btd;
};

inline SentenceLosses sentence_losses(const IdSeq& x, int style, const TransferModel& model,
                                      double tau, bool back_transfer) {
  const int other = 1 - style;
  SentenceLosses out;
  EncoderOutput enc = model.encode(x, style);
  out.rec = sequence_nll(model.decode_teacher_forced(enc, style, x), x);
  SoftSequence fwd = model.decode_soft(enc, other, tau);
  out.class_td = cross_entropy(model.classify(fwd), other);
  out.class_od = cross_entropy(model.classify(x), style);
  if (back_transfer) {
    auto [back_rec, class_btd] = back_transfer_losses(x, style, model, fwd, tau);
    out.back_rec = back_rec;
    out.class_btd = class_btd;
  } else {
    out.back_rec = Tensor::scalar(0.0);
    out.class_btd = Tensor::scalar(0.0);
  }
  return out;
}

namespace detail {

template <typename Fn>
double batch_mean(const Batch& batch, Fn per_row) {
  double sum = 0.0;
  for (std::size_t r = 0; r < batch.rows; ++r) sum += per_row(batch.row(r), batch.styles[r]);
  return sum / static_cast<double>(batch.rows);
}

}  // namespace detail

inline double loss_reconstruction(const Batch& batch, const TransferModel& model) {
  return detail::batch_mean(batch, [&](const IdSeq& x, int style) {
    EncoderOutput enc = model.encode(x, style);
    return sequence_nll(model.decode_teacher_forced(enc, style, x), x).item();
  });
}

inline double loss_class_td(const Batch& batch, const TransferModel& model, double tau) {
  return detail::batch_mean(batch, [&](const IdSeq& x, int style) {
    EncoderOutput enc = model.encode(x, style);
    SoftSequence fwd = model.decode_soft(enc, 1 - style, tau);
    return cross_entropy(model.classify(fwd), 1 - style).item();
  });
}

inline double loss_class_od(const Batch& batch, const TransferModel& model) {
  return detail::batch_mean(batch, [&](const IdSeq& x, int style) {
    return cross_entropy(model.classify(x), style).item();
  });
}

inline double loss_back_rec(const Batch& batch, const TransferModel& model, double tau) {
  return detail::batch_mean(batch, [&](const IdSeq& x, int style) {
    EncoderOutput enc = model.encode(x, style);
    SoftSequence fwd = model.decode_soft(enc, 1 - style, tau);
    return back_transfer_losses(x, style, model, fwd, tau).first.item();
  });
}

inline double loss_class_btd(const Batch& batch, const TransferModel& model, double tau) {
  return detail::batch_mean(batch, [&](const IdSeq& x, int style) {
    EncoderOutput enc = model.encode(x, style);
    SoftSequence fwd = model.decode_soft(enc, 1 - style, tau);
    return back_transfer_losses(x, style, model, fwd, tau).second.item();
  });
}

}  // namespace cyst
