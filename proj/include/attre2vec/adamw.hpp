#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "attre2vec/common.hpp"
#include "attre2vec/parameter_store.hpp"

namespace attre2vec {

struct AdamWConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  void validate() const {
    if (lr <= 0.0) throw ConfigError("optimizer.lr must be > 0");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
      throw ConfigError("optimizer betas must lie in [0,1)");
    if (eps <= 0.0) throw ConfigError("optimizer.eps must be > 0");
    if (weight_decay < 0.0)
      throw ConfigError("optimizer.weight_decay must be >= 0");
  }
};

// Adam with decoupled weight decay: the decay shrinks parameters directly and
// is not folded into the moment estimates.
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  const AdamWConfig& config() const { return cfg_; }
  std::uint64_t step_count() const { return step_; }

  void step(ParameterStore& store) {
    if (m_.empty()) {
      m_.resize(store.size());
      v_.resize(store.size());
      for (std::size_t i = 0; i < store.size(); ++i) {
        m_[i].assign(store.tensor(i).size(), 0.0);
        v_[i].assign(store.tensor(i).size(), 0.0);
      }
    }
    if (m_.size() != store.size())
      throw ShapeError("adamw: parameter store layout changed between steps");

    for (std::size_t i = 0; i < store.size(); ++i)
      if (!store.grad_valid(i))
        throw ValidationError("adamw: gradient not populated for parameter '" +
                              store.name(i) + "'");

    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));

    for (std::size_t i = 0; i < store.size(); ++i) {
      Tensor& t = store.tensor(i);
      if (m_[i].size() != t.size())
        throw ShapeError("adamw: shape changed for parameter '" +
                         store.name(i) + "'");
      for (std::size_t j = 0; j < t.v.size(); ++j) {
        const double g = t.g[j];
        m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * g;
        v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * g * g;
        const double m_hat = m_[i][j] / bc1;
        const double v_hat = v_[i][j] / bc2;
        t.v[j] -= cfg_.lr * cfg_.weight_decay * t.v[j];
        t.v[j] -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
        if (!std::isfinite(t.v[j]))
          throw NumericFault("adamw: non-finite update for parameter '" +
                             store.name(i) + "'");
      }
    }
  }

 private:
  AdamWConfig cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t step_ = 0;
};

}  // namespace attre2vec
