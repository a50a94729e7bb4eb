#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "cyst/tensor.hpp"

// Differentiable tensor ops. Every op computes its value eagerly and, when a
// tape is active and any input carries gradients, records a closure that
// accumulates d(loss)/d(input) from d(loss)/d(output). Inner loops run over
// contiguous rows so the compiler can vectorize them.

namespace cyst {

namespace detail {

[[noreturn]] inline void shape_fail(const std::string& op, const Shape& a, const Shape& b) {
  throw ShapeError(op + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

[[noreturn]] inline void shape_fail(const std::string& op, const Shape& a, const std::string& why) {
  throw ShapeError(op + ": shape " + shape_str(a) + " " + why);
}

inline void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

inline double dot(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) detail::shape_fail("add", a.shape(), b.shape());
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) out.value()[i] = a.value()[i] + b.value()[i];
  if (detail::tracked({&a, &b})) {
    out.enable_grad();
    Tape::active()->record([an = a.node(), bn = b.node(), on = out.node()] {
      const auto& g = on->grad;
      if (an->requires_grad) detail::axpy(1.0, g.data(), an->grad.data(), g.size());
      if (bn->requires_grad) detail::axpy(1.0, g.data(), bn->grad.data(), g.size());
    });
  }
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) detail::shape_fail("sub", a.shape(), b.shape());
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) out.value()[i] = a.value()[i] - b.value()[i];
  if (detail::tracked({&a, &b})) {
    out.enable_grad();
    Tape::active()->record([an = a.node(), bn = b.node(), on = out.node()] {
      const auto& g = on->grad;
      if (an->requires_grad) detail::axpy(1.0, g.data(), an->grad.data(), g.size());
      if (bn->requires_grad) detail::axpy(-1.0, g.data(), bn->grad.data(), g.size());
    });
  }
  return out;
}

// Elementwise (Hadamard) product.
inline Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) detail::shape_fail("mul", a.shape(), b.shape());
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) out.value()[i] = a.value()[i] * b.value()[i];
  if (detail::tracked({&a, &b})) {
    out.enable_grad();
    Tape::active()->record([an = a.node(), bn = b.node(), on = out.node()] {
      const auto& g = on->grad;
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (an->requires_grad) an->grad[i] += g[i] * bn->value[i];
        if (bn->requires_grad) bn->grad[i] += g[i] * an->value[i];
      }
    });
  }
  return out;
}

inline Tensor scale(const Tensor& a, double c) {
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) out.value()[i] = c * a.value()[i];
  if (detail::tracked({&a})) {
    out.enable_grad();
    Tape::active()->record([an = a.node(), on = out.node(), c] {
      detail::axpy(c, on->grad.data(), an->grad.data(), on->grad.size());
    });
  }
  return out;
}

inline Tensor sigmoid(const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a.value()[i];
    // Saturation-safe in both tails.
    out.value()[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  }
  if (detail::tracked({&a})) {
    out.enable_grad();
    Tape::active()->record([an = a.node(), on = out.node()] {
      for (std::size_t i = 0; i < on->grad.size(); ++i) {
        const double y = on->value[i];
        an->grad[i] += on->grad[i] * y * (1.0 - y);
      }
    });
  }
  return out;
}

inline Tensor tanh(const Tensor& a) {
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) out.value()[i] = std::tanh(a.value()[i]);
  if (detail::tracked({&a})) {
    out.enable_grad();
    Tape::active()->record([an = a.node(), on = out.node()] {
      for (std::size_t i = 0; i < on->grad.size(); ++i) {
        const double y = on->value[i];
        an->grad[i] += on->grad[i] * (1.0 - y * y);
      }
    });
  }
  return out;
}

// Softmax over the given axis. Rank-1 tensors use axis 0; rank-2 tensors
// support axis 1 (per row). Computed with max subtraction.
inline Tensor softmax(const Tensor& a, std::size_t axis = 0) {
  std::size_t rows = 1, cols = 0;
  if (a.rank() == 1 && axis == 0) {
    cols = a.dim(0);
  } else if (a.rank() == 2 && axis == 1) {
    rows = a.dim(0);
    cols = a.dim(1);
  } else {
    detail::shape_fail("softmax", a.shape(), "does not support axis " + std::to_string(axis));
  }
  Tensor out = Tensor::zeros(a.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = a.value().data() + r * cols;
    double* y = out.value().data() + r * cols;
    double m = x[0];
    for (std::size_t j = 1; j < cols; ++j) m = std::max(m, x[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      y[j] = std::exp(x[j] - m);
      z += y[j];
    }
    for (std::size_t j = 0; j < cols; ++j) y[j] /= z;
  }
  if (detail::tracked({&a})) {
    out.enable_grad();
    Tape::active()->record([an = a.node(), on = out.node(), rows, cols] {
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = on->value.data() + r * cols;
        const double* g = on->grad.data() + r * cols;
        double* dx = an->grad.data() + r * cols;
        const double gy = detail::dot(g, y, cols);
        for (std::size_t j = 0; j < cols; ++j) dx[j] += y[j] * (g[j] - gy);
      }
    });
  }
  return out;
}

// Mean of all elements, as a scalar.
inline Tensor mean(const Tensor& a) {
  const std::size_t n = a.size();
  if (n == 0) detail::shape_fail("mean", a.shape(), "is empty");
  double s = 0.0;
  for (double v : a.value()) s += v;
  Tensor out = Tensor::scalar(s / static_cast<double>(n));
  if (detail::tracked({&a})) {
    out.enable_grad();
    Tape::active()->record([an = a.node(), on = out.node(), n] {
      const double g = on->grad[0] / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) an->grad[i] += g;
    });
  }
  return out;
}

// Concatenation of rank-1 tensors.
inline Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.rank() != 1) detail::shape_fail("concat", p.shape(), "must be rank 1");
    total += p.dim(0);
  }
  Tensor out = Tensor::zeros({total});
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    std::copy(p.value().begin(), p.value().end(), out.value().begin() + off);
    off += p.dim(0);
  }
  bool any = false;
  for (const Tensor& p : parts) any = any || p.requires_grad();
  if (Tape::active() != nullptr && any) {
    out.enable_grad();
    std::vector<std::shared_ptr<TensorNode>> nodes;
    nodes.reserve(parts.size());
    for (const Tensor& p : parts) nodes.push_back(p.node());
    Tape::active()->record([nodes = std::move(nodes), on = out.node()] {
      std::size_t off = 0;
      for (const auto& pn : nodes) {
        if (pn->requires_grad) {
          detail::axpy(1.0, on->grad.data() + off, pn->grad.data(), pn->value.size());
        }
        off += pn->value.size();
      }
    });
  }
  return out;
}

// Contiguous slice of a rank-1 tensor.
inline Tensor slice(const Tensor& a, std::size_t start, std::size_t len) {
  if (a.rank() != 1) detail::shape_fail("slice", a.shape(), "must be rank 1");
  if (start + len > a.dim(0)) {
    throw IndexError("slice: [" + std::to_string(start) + ", " + std::to_string(start + len) +
                     ") out of range for " + shape_str(a.shape()));
  }
  Tensor out = Tensor::zeros({len});
  std::copy(a.value().begin() + start, a.value().begin() + start + len, out.value().begin());
  if (detail::tracked({&a})) {
    out.enable_grad();
    Tape::active()->record([an = a.node(), on = out.node(), start] {
      detail::axpy(1.0, on->grad.data(), an->grad.data() + start, on->grad.size());
    });
  }
  return out;
}

// Matrix product of two rank-2 tensors.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    detail::shape_fail("matmul", a.shape(), b.shape());
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  const double* av = a.value().data();
  const double* bv = b.value().data();
  double* ov = out.value().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      detail::axpy(av[i * k + p], bv + p * n, ov + i * n, n);
    }
  }
  if (detail::tracked({&a, &b})) {
    out.enable_grad();
    Tape::active()->record([an = a.node(), bn = b.node(), on = out.node(), m, k, n] {
      const double* g = on->grad.data();
      if (an->requires_grad) {
        // dA = g . B^T
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            an->grad[i * k + p] += detail::dot(g + i * n, bn->value.data() + p * n, n);
          }
        }
      }
      if (bn->requires_grad) {
        // dB = A^T . g
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t p = 0; p < k; ++p) {
            detail::axpy(an->value[i * k + p], g + i * n, bn->grad.data() + p * n, n);
          }
        }
      }
    });
  }
  return out;
}

// W (r x c) times x (c) -> (r).
inline Tensor matvec(const Tensor& w, const Tensor& x) {
  if (w.rank() != 2 || x.rank() != 1 || w.dim(1) != x.dim(0)) {
    detail::shape_fail("matvec", w.shape(), x.shape());
  }
  const std::size_t r = w.dim(0), c = w.dim(1);
  Tensor out = Tensor::zeros({r});
  for (std::size_t i = 0; i < r; ++i) {
    out.value()[i] = detail::dot(w.value().data() + i * c, x.value().data(), c);
  }
  if (detail::tracked({&w, &x})) {
    out.enable_grad();
    Tape::active()->record([wn = w.node(), xn = x.node(), on = out.node(), r, c] {
      const double* g = on->grad.data();
      for (std::size_t i = 0; i < r; ++i) {
        if (wn->requires_grad) detail::axpy(g[i], xn->value.data(), wn->grad.data() + i * c, c);
        if (xn->requires_grad) detail::axpy(g[i], wn->value.data() + i * c, xn->grad.data(), c);
      }
    });
  }
  return out;
}

// x (r) times M (r x c) -> (c). Row-vector convention.
inline Tensor vecmat(const Tensor& x, const Tensor& m) {
  if (m.rank() != 2 || x.rank() != 1 || m.dim(0) != x.dim(0)) {
    detail::shape_fail("vecmat", x.shape(), m.shape());
  }
  const std::size_t r = m.dim(0), c = m.dim(1);
  Tensor out = Tensor::zeros({c});
  for (std::size_t i = 0; i < r; ++i) {
    detail::axpy(x.value()[i], m.value().data() + i * c, out.value().data(), c);
  }
  if (detail::tracked({&x, &m})) {
    out.enable_grad();
    Tape::active()->record([xn = x.node(), mn = m.node(), on = out.node(), r, c] {
      const double* g = on->grad.data();
      for (std::size_t i = 0; i < r; ++i) {
        if (xn->requires_grad) xn->grad[i] += detail::dot(g, mn->value.data() + i * c, c);
        if (mn->requires_grad) detail::axpy(xn->value[i], g, mn->grad.data() + i * c, c);
      }
    });
  }
  return out;
}

// M (r x c) plus v (c) broadcast over rows.
inline Tensor row_add(const Tensor& m, const Tensor& v) {
  if (m.rank() != 2 || v.rank() != 1 || m.dim(1) != v.dim(0)) {
    detail::shape_fail("row_add", m.shape(), v.shape());
  }
  const std::size_t r = m.dim(0), c = m.dim(1);
  Tensor out = Tensor::zeros({r, c});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      out.value()[i * c + j] = m.value()[i * c + j] + v.value()[j];
    }
  }
  if (detail::tracked({&m, &v})) {
    out.enable_grad();
    Tape::active()->record([mn = m.node(), vn = v.node(), on = out.node(), r, c] {
      const double* g = on->grad.data();
      if (mn->requires_grad) detail::axpy(1.0, g, mn->grad.data(), r * c);
      if (vn->requires_grad) {
        for (std::size_t i = 0; i < r; ++i) detail::axpy(1.0, g + i * c, vn->grad.data(), c);
      }
    });
  }
  return out;
}

// Stack rank-1 tensors of equal length into a (n x d) matrix.
inline Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no inputs");
  const std::size_t d = rows[0].dim(0);
  for (const Tensor& t : rows) {
    if (t.rank() != 1 || t.dim(0) != d) detail::shape_fail("stack_rows", rows[0].shape(), t.shape());
  }
  const std::size_t n = rows.size();
  Tensor out = Tensor::zeros({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(rows[i].value().begin(), rows[i].value().end(), out.value().begin() + i * d);
  }
  bool any = false;
  for (const Tensor& t : rows) any = any || t.requires_grad();
  if (Tape::active() != nullptr && any) {
    out.enable_grad();
    std::vector<std::shared_ptr<TensorNode>> nodes;
    nodes.reserve(n);
    for (const Tensor& t : rows) nodes.push_back(t.node());
    Tape::active()->record([nodes = std::move(nodes), on = out.node(), d] {
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i]->requires_grad) {
          detail::axpy(1.0, on->grad.data() + i * d, nodes[i]->grad.data(), d);
        }
      }
    });
  }
  return out;
}

// Gather rows of an embedding table: table (V x d), ids (n) -> (n x d).
inline Tensor embedding_lookup(const Tensor& table, const std::vector<int>& ids) {
  if (table.rank() != 2) detail::shape_fail("embedding_lookup", table.shape(), "must be rank 2");
  if (ids.empty()) throw ShapeError("embedding_lookup: empty id list");
  const std::size_t v = table.dim(0), d = table.dim(1);
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= v) {
      throw IndexError("embedding_lookup: id " + std::to_string(id) + " out of range for " +
                       shape_str(table.shape()));
    }
  }
  Tensor out = Tensor::zeros({ids.size(), d});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const double* src = table.value().data() + static_cast<std::size_t>(ids[i]) * d;
    std::copy(src, src + d, out.value().begin() + i * d);
  }
  if (detail::tracked({&table})) {
    out.enable_grad();
    Tape::active()->record([tn = table.node(), on = out.node(), ids, d] {
      for (std::size_t i = 0; i < ids.size(); ++i) {
        detail::axpy(1.0, on->grad.data() + i * d,
                     tn->grad.data() + static_cast<std::size_t>(ids[i]) * d, d);
      }
    });
  }
  return out;
}

// Single embedding row as a rank-1 tensor.
inline Tensor embedding_row(const Tensor& table, int id) {
  if (table.rank() != 2) detail::shape_fail("embedding_row", table.shape(), "must be rank 2");
  const std::size_t v = table.dim(0), d = table.dim(1);
  if (id < 0 || static_cast<std::size_t>(id) >= v) {
    throw IndexError("embedding_row: id " + std::to_string(id) + " out of range for " +
                     shape_str(table.shape()));
  }
  Tensor out = Tensor::zeros({d});
  const double* src = table.value().data() + static_cast<std::size_t>(id) * d;
  std::copy(src, src + d, out.value().begin());
  if (detail::tracked({&table})) {
    out.enable_grad();
    Tape::active()->record([tn = table.node(), on = out.node(), id, d] {
      detail::axpy(1.0, on->grad.data(), tn->grad.data() + static_cast<std::size_t>(id) * d, d);
    });
  }
  return out;
}

// im2col over time: M (T x d), window w -> ((T-w+1) x (w*d)).
inline Tensor unfold_windows(const Tensor& m, std::size_t w) {
  if (m.rank() != 2) detail::shape_fail("unfold_windows", m.shape(), "must be rank 2");
  const std::size_t t = m.dim(0), d = m.dim(1);
  if (w == 0 || w > t) {
    detail::shape_fail("unfold_windows", m.shape(), "does not fit window " + std::to_string(w));
  }
  const std::size_t p = t - w + 1;
  Tensor out = Tensor::zeros({p, w * d});
  for (std::size_t i = 0; i < p; ++i) {
    const double* src = m.value().data() + i * d;
    std::copy(src, src + w * d, out.value().begin() + i * w * d);
  }
  if (detail::tracked({&m})) {
    out.enable_grad();
    Tape::active()->record([mn = m.node(), on = out.node(), p, w, d] {
      for (std::size_t i = 0; i < p; ++i) {
        detail::axpy(1.0, on->grad.data() + i * w * d, mn->grad.data() + i * d, w * d);
      }
    });
  }
  return out;
}

// Column-wise max over rows: M (P x m) -> (m). The classic max-over-time
// pooling; gradient routes to the argmax row of each column.
inline Tensor max_over_time(const Tensor& m) {
  if (m.rank() != 2) detail::shape_fail("max_over_time", m.shape(), "must be rank 2");
  const std::size_t p = m.dim(0), c = m.dim(1);
  Tensor out = Tensor::zeros({c});
  std::vector<std::size_t> arg(c, 0);
  for (std::size_t j = 0; j < c; ++j) {
    double best = m.value()[j];
    for (std::size_t i = 1; i < p; ++i) {
      const double v = m.value()[i * c + j];
      if (v > best) {
        best = v;
        arg[j] = i;
      }
    }
    out.value()[j] = best;
  }
  if (detail::tracked({&m})) {
    out.enable_grad();
    Tape::active()->record([mn = m.node(), on = out.node(), arg = std::move(arg), c] {
      for (std::size_t j = 0; j < c; ++j) {
        mn->grad[arg[j] * c + j] += on->grad[j];
      }
    });
  }
  return out;
}

// -log softmax(logits)[target] with max subtraction, as a scalar.
inline Tensor cross_entropy(const Tensor& logits, int target) {
  if (logits.rank() != 1) detail::shape_fail("cross_entropy", logits.shape(), "must be rank 1");
  const std::size_t v = logits.dim(0);
  if (target < 0 || static_cast<std::size_t>(target) >= v) {
    throw IndexError("cross_entropy: target " + std::to_string(target) + " out of range for " +
                     shape_str(logits.shape()));
  }
  const double* x = logits.value().data();
  double m = x[0];
  for (std::size_t j = 1; j < v; ++j) m = std::max(m, x[j]);
  std::vector<double> p(v);
  double z = 0.0;
  for (std::size_t j = 0; j < v; ++j) {
    p[j] = std::exp(x[j] - m);
    z += p[j];
  }
  for (std::size_t j = 0; j < v; ++j) p[j] /= z;
  const double loss = std::log(z) + m - x[static_cast<std::size_t>(target)];
  Tensor out = Tensor::scalar(loss);
  if (detail::tracked({&logits})) {
    out.enable_grad();
    Tape::active()->record([ln = logits.node(), on = out.node(), p = std::move(p), target] {
      const double g = on->grad[0];
      for (std::size_t j = 0; j < p.size(); ++j) {
        ln->grad[j] += g * (p[j] - (j == static_cast<std::size_t>(target) ? 1.0 : 0.0));
      }
    });
  }
  return out;
}

inline std::size_t argmax(const Tensor& a) {
  const auto& v = a.value();
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace cyst
