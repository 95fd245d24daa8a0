#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mug/error.hpp"
#include "mug/numerics/mat.hpp"

namespace mug {

enum class OptimizerKind { Sgd, Adam };

inline const char* optimizer_name(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "sgd") return OptimizerKind::Sgd;
  throw SpecError("unknown optimizer '" + s + "' (expected adam or sgd)");
}

// Plain SGD or Adam with bias correction over a fixed list of parameter
// matrices. Slots are bound by position on the first step.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : kind_(kind), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads) {
    if (params.size() != grads.size()) throw ContractError("optimizer: parameter/gradient count mismatch");
    if (m_.empty()) {
      for (const Mat* p : params) {
        m_.emplace_back(p->rows, p->cols);
        v_.emplace_back(p->rows, p->cols);
      }
    }
    if (m_.size() != params.size()) throw ContractError("optimizer: parameter list changed between steps");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, double(t_)), c2 = 1.0 - std::pow(beta2_, double(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      Mat& p = *params[k];
      const Mat& g = *grads[k];
      require_same_shape(p, g, "optimizer step");
      if (kind_ == OptimizerKind::Sgd) {
        for (std::size_t i = 0; i < p.size(); ++i) p.data[i] -= lr_ * g.data[i];
        continue;
      }
      Mat& m = m_[k];
      Mat& v = v_[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        m.data[i] = beta1_ * m.data[i] + (1.0 - beta1_) * g.data[i];
        v.data[i] = beta2_ * v.data[i] + (1.0 - beta2_) * g.data[i] * g.data[i];
        p.data[i] -= lr_ * (m.data[i] / c1) / (std::sqrt(v.data[i] / c2) + eps_);
      }
    }
  }

  std::size_t steps() const { return t_; }

 private:
  OptimizerKind kind_;
  double lr_, beta1_, beta2_, eps_;
  std::vector<Mat> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace mug
