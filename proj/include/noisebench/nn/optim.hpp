#pragma once

#include <vector>

#include "noisebench/nn/layers.hpp"

namespace noisebench::nn {

struct OptimConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

// SGD with classical momentum and L2 weight decay folded into the gradient:
//   v <- momentum * v + (grad + weight_decay * param)
//   param <- param - lr * v
// The learning rate is fixed; no schedule.
template <typename S>
class SgdOptimizer {
 public:
  SgdOptimizer(const OptimConfig& cfg, const std::vector<Param<S>*>& params)
      : cfg_(cfg), params_(params) {
    if (cfg.learning_rate <= 0) throw ValueError("SGD: learning_rate must be > 0");
    if (cfg.momentum < 0 || cfg.momentum >= 1) throw ValueError("SGD: momentum must be in [0,1)");
    if (cfg.weight_decay < 0) throw ValueError("SGD: weight_decay must be >= 0");
    velocity_.reserve(params.size());
    for (const Param<S>* p : params) velocity_.emplace_back(ArrX<S>::Zero(p->value.size()));
  }

  void step() {
    const S lr = static_cast<S>(cfg_.learning_rate);
    const S mom = static_cast<S>(cfg_.momentum);
    const S wd = static_cast<S>(cfg_.weight_decay);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Param<S>* p = params_[i];
      if (p->grad.size() != p->value.size() || velocity_[i].size() != p->value.size())
        throw ShapeError("SGD: gradient/velocity shape mismatch for " + p->name);
      velocity_[i] = mom * velocity_[i] + (p->grad.flat() + wd * p->value.flat());
      p->value.flat() -= lr * velocity_[i];
    }
  }

  void zero_grad() {
    for (Param<S>* p : params_) p->grad.flat().setZero();
  }

  const OptimConfig& config() const { return cfg_; }

 private:
  OptimConfig cfg_;
  std::vector<Param<S>*> params_;
  std::vector<ArrX<S>> velocity_;
};

}  // namespace noisebench::nn
