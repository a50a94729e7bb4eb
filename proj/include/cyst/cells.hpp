#pragma once

#include <cstddef>
#include <utility>

#include "cyst/ops.hpp"
#include "cyst/rng.hpp"
#include "cyst/tensor.hpp"

namespace cyst {

constexpr double kInitRange = 0.08;

inline Tensor init_weight(std::size_t rows, std::size_t cols, Rng& rng) {
  return Tensor::uniform({rows, cols}, -kInitRange, kInitRange, rng);
}

inline Tensor init_bias(std::size_t n) {
  Tensor b = Tensor::zeros({n});
  b.enable_grad();
  return b;
}

// Single-layer GRU: z and r gates, candidate h̃, blend h' = (1-z)h + z·h̃.
// Weight matrices act on the concatenation [x; h].
struct GruParams {
  Tensor wz, bz, wr, br, wh, bh;

  static GruParams init(std::size_t in_dim, std::size_t hidden, Rng& rng) {
    GruParams p;
    p.wz = init_weight(hidden, in_dim + hidden, rng);
    p.bz = init_bias(hidden);
    p.wr = init_weight(hidden, in_dim + hidden, rng);
    p.br = init_bias(hidden);
    p.wh = init_weight(hidden, in_dim + hidden, rng);
    p.bh = init_bias(hidden);
    return p;
  }

  Tensor step(const Tensor& x, const Tensor& h) const {
    Tensor xh = concat({x, h});
    Tensor z = sigmoid(add(matvec(wz, xh), bz));
    Tensor r = sigmoid(add(matvec(wr, xh), br));
    Tensor xrh = concat({x, mul(r, h)});
    Tensor cand = tanh(add(matvec(wh, xrh), bh));
    Tensor keep = sub(Tensor::full(h.shape(), 1.0), z);
    return add(mul(keep, h), mul(z, cand));
  }

  std::size_t hidden() const { return bz.dim(0); }
};

// Standard LSTM with forget/input/output gates; used by the evaluation
// language model.
struct LstmParams {
  Tensor wf, bf, wi, bi, wo, bo, wc, bc;

  static LstmParams init(std::size_t in_dim, std::size_t hidden, Rng& rng) {
    LstmParams p;
    p.wf = init_weight(hidden, in_dim + hidden, rng);
    p.bf = init_bias(hidden);
    p.wi = init_weight(hidden, in_dim + hidden, rng);
    p.bi = init_bias(hidden);
    p.wo = init_weight(hidden, in_dim + hidden, rng);
    p.bo = init_bias(hidden);
    p.wc = init_weight(hidden, in_dim + hidden, rng);
    p.bc = init_bias(hidden);
    return p;
  }

  std::pair<Tensor, Tensor> step(const Tensor& x, const Tensor& h, const Tensor& c) const {
    Tensor xh = concat({x, h});
    Tensor f = sigmoid(add(matvec(wf, xh), bf));
    Tensor i = sigmoid(add(matvec(wi, xh), bi));
    Tensor o = sigmoid(add(matvec(wo, xh), bo));
    Tensor cand = tanh(add(matvec(wc, xh), bc));
    Tensor c_new = add(mul(f, c), mul(i, cand));
    Tensor h_new = mul(o, tanh(c_new));
    return {h_new, c_new};
  }

  std::size_t hidden() const { return bf.dim(0); }
};

}  // namespace cyst
