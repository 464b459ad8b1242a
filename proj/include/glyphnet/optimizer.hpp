#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "glyphnet/errors.hpp"
#include "glyphnet/nn.hpp"

namespace glyphnet {

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(const std::vector<Param*>& params, double lr) = 0;
};

class SgdOptimizer final : public Optimizer {
 public:
  explicit SgdOptimizer(double momentum = 0.9, double weight_decay = 0.0)
      : momentum_(momentum), weight_decay_(weight_decay) {}

  void step(const std::vector<Param*>& params, double lr) override {
    if (velocity_.size() != params.size()) {
      velocity_.clear();
      for (const Param* p : params) velocity_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      Param& p = *params[i];
      Matrix g = p.grad;
      if (weight_decay_ > 0.0) g += weight_decay_ * p.value;
      velocity_[i] = momentum_ * velocity_[i] + g;
      p.value -= lr * velocity_[i];
    }
  }

 private:
  double momentum_, weight_decay_;
  std::vector<Matrix> velocity_;
};

class AdamOptimizer final : public Optimizer {
 public:
  explicit AdamOptimizer(double weight_decay = 0.0, double beta1 = 0.9,
                         double beta2 = 0.999, double eps = 1e-8)
      : weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Param*>& params, double lr) override {
    if (m_.size() != params.size()) {
      m_.clear();
      v_.clear();
      for (const Param* p : params) {
        m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      }
      t_ = 0;
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Param& p = *params[i];
      Matrix g = p.grad;
      if (weight_decay_ > 0.0) g += weight_decay_ * p.value;
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
      const Matrix mhat = m_[i] / bc1;
      const Matrix vhat = v_[i] / bc2;
      p.value -= lr * (mhat.array() / (vhat.array().sqrt() + eps_)).matrix();
    }
  }

 private:
  double weight_decay_, beta1_, beta2_, eps_;
  std::vector<Matrix> m_, v_;
  long t_ = 0;
};

inline std::unique_ptr<Optimizer> make_optimizer(const std::string& name, double momentum,
                                                 double weight_decay) {
  if (name == "adam") return std::make_unique<AdamOptimizer>(weight_decay);
  if (name == "sgd") return std::make_unique<SgdOptimizer>(momentum, weight_decay);
  throw ConfigError("unknown optimizer '" + name + "'");
}

}  // namespace glyphnet
