#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "cyst/tensor.hpp"

namespace cyst {

struct AdamConfig {
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers are keyed by position in the
// parameter list, which must stay fixed for the optimizer's lifetime.
class Adam {
 public:
  explicit Adam(std::vector<Tensor> params, AdamConfig cfg = {})
      : params_(std::move(params)), cfg_(cfg) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (!params_[i].requires_grad()) {
        throw ShapeError("Adam: parameter " + std::to_string(i) + " has no gradient buffer");
      }
      m_[i].assign(params_[i].size(), 0.0);
      v_[i].assign(params_[i].size(), 0.0);
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i].value();
      const auto& g = params_[i].grad();
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t j = 0; j < p.size(); ++j) {
        m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
        v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        p[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

  void zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
  }

  const std::vector<Tensor>& params() const { return params_; }
  const AdamConfig& config() const { return cfg_; }
  std::size_t steps() const { return t_; }

 private:
  std::vector<Tensor> params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

namespace detail {

// Value-only parameter snapshots, used by training loops to keep and restore
// the best epoch's weights.
inline std::vector<std::vector<double>> snapshot_params(const std::vector<Tensor>& params) {
  std::vector<std::vector<double>> snap;
  snap.reserve(params.size());
  for (const Tensor& p : params) snap.push_back(p.value());
  return snap;
}

inline void restore_params(const std::vector<Tensor>& params,
                           const std::vector<std::vector<double>>& snap) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i];
    p.value() = snap[i];
  }
}

}  // namespace detail

}  // namespace cyst
