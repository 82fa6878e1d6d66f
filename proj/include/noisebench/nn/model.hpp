#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "noisebench/image.hpp"
#include "noisebench/nn/layers.hpp"
#include "noisebench/rng.hpp"

namespace noisebench::nn {

enum class ModelKind { smallcnn, resnet18 };

inline const char* to_string(ModelKind k) {
  return k == ModelKind::smallcnn ? "smallcnn" : "resnet18";
}

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "smallcnn") return ModelKind::smallcnn;
  if (s == "resnet18") return ModelKind::resnet18;
  throw ValueError("unknown model '" + s + "' (expected smallcnn or resnet18)");
}

// A model snapshot is a copy of every state tensor (parameters plus BN
// buffers) in collection order.
template <typename S>
using Snapshot = std::vector<ArrX<S>>;

// Sequential image classifier over [N,3,32,32] inputs producing [N,10]
// logits. Two builds: a small 3-conv network for CPU-scale experiments and a
// ResNet-18 (3x3 stem to 64 channels, four stages of two basic blocks with
// widths 64/128/256/512, stride 2 entering stages 2-4, global average pool,
// linear to 10 classes).
template <typename S>
class Model {
 public:
  explicit Model(ModelKind kind) : kind_(kind) {
    if (kind == ModelKind::smallcnn)
      build_smallcnn();
    else
      build_resnet18();
    params_.clear();
    for (auto& [prefix, layer] : layers_) layer->collect_params(prefix + ".", params_);
  }

  ModelKind kind() const { return kind_; }

  Tensor<S> forward(const Tensor<S>& x, bool training) {
    if (x.rank() != 4 || x.dim(1) != kChannels || x.dim(2) != kImageSize ||
        x.dim(3) != kImageSize)
      throw ShapeError("Model: expected input [N,3,32,32], got " + x.shape_string());
    Tensor<S> cur = x;
    for (auto& [prefix, layer] : layers_) cur = layer->forward(cur, training);
    if (!cur.flat().isFinite().all())
      throw NumericError("Model: non-finite logits");
    return cur;
  }

  Tensor<S> backward(const Tensor<S>& dlogits) {
    Tensor<S> cur = dlogits;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
      cur = it->second->backward(cur);
    return cur;
  }

  std::vector<Param<S>*>& params() { return params_; }

  std::vector<std::pair<std::string, Tensor<S>*>> state() {
    std::vector<std::pair<std::string, Tensor<S>*>> out;
    for (auto& [prefix, layer] : layers_) layer->collect_state(prefix + ".", out);
    return out;
  }

  // He-normal weights (variance 2/fan_in), zero biases, BN scale 1 / shift 0,
  // fresh running statistics. Each parameter draws from its own substream
  // keyed by position, so layouts stay reproducible.
  void init_params(std::uint64_t seed) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Param<S>* p = params_[i];
      switch (p->init) {
        case InitKind::he_normal: {
          RngStream rng = substream(seed, "init", static_cast<std::uint64_t>(i));
          const double stddev = std::sqrt(2.0 / p->fan_in);
          for (Eigen::Index j = 0; j < p->value.size(); ++j)
            p->value[j] = static_cast<S>(rng.next_gaussian() * stddev);
          break;
        }
        case InitKind::zeros:
          p->value.flat().setZero();
          break;
        case InitKind::ones:
          p->value.flat().setOnes();
          break;
      }
      p->grad.flat().setZero();
    }
    for (auto& [prefix, layer] : layers_) layer->reset_buffers();
  }

  Snapshot<S> snapshot() {
    Snapshot<S> out;
    for (auto& [name, tensor] : state()) out.push_back(tensor->flat());
    return out;
  }

  void restore(const Snapshot<S>& snap) {
    auto st = state();
    if (snap.size() != st.size()) throw ShapeError("Model::restore: snapshot entry count mismatch");
    for (std::size_t i = 0; i < st.size(); ++i) {
      if (snap[i].size() != st[i].second->size())
        throw ShapeError("Model::restore: size mismatch for " + st[i].first);
      st[i].second->flat() = snap[i];
    }
  }

 private:
  void add(std::string name, std::unique_ptr<Layer<S>> layer) {
    layers_.emplace_back(std::move(name), std::move(layer));
  }

  void build_smallcnn() {
    add("conv1", std::make_unique<Conv2d<S>>(3, 32, 3, 1, 1, false));
    add("bn1", std::make_unique<BatchNorm2d<S>>(32));
    add("relu1", std::make_unique<ReLU<S>>());
    add("pool1", std::make_unique<MaxPool2d<S>>());
    add("conv2", std::make_unique<Conv2d<S>>(32, 64, 3, 1, 1, false));
    add("bn2", std::make_unique<BatchNorm2d<S>>(64));
    add("relu2", std::make_unique<ReLU<S>>());
    add("pool2", std::make_unique<MaxPool2d<S>>());
    add("conv3", std::make_unique<Conv2d<S>>(64, 128, 3, 1, 1, false));
    add("bn3", std::make_unique<BatchNorm2d<S>>(128));
    add("relu3", std::make_unique<ReLU<S>>());
    add("gap", std::make_unique<GlobalAvgPool<S>>());
    add("fc", std::make_unique<Linear<S>>(128, kClassCount));
  }

  void build_resnet18() {
    add("stem_conv", std::make_unique<Conv2d<S>>(3, 64, 3, 1, 1, false));
    add("stem_bn", std::make_unique<BatchNorm2d<S>>(64));
    add("stem_relu", std::make_unique<ReLU<S>>());
    const int widths[4] = {64, 128, 256, 512};
    int in_ch = 64;
    for (int stage = 0; stage < 4; ++stage) {
      for (int block = 0; block < 2; ++block) {
        const int stride = (stage > 0 && block == 0) ? 2 : 1;
        add("stage" + std::to_string(stage + 1) + ".block" + std::to_string(block + 1),
            std::make_unique<ResidualBasicBlock<S>>(in_ch, widths[stage], stride));
        in_ch = widths[stage];
      }
    }
    add("gap", std::make_unique<GlobalAvgPool<S>>());
    add("fc", std::make_unique<Linear<S>>(512, kClassCount));
  }

  ModelKind kind_;
  std::vector<std::pair<std::string, std::unique_ptr<Layer<S>>>> layers_;
  std::vector<Param<S>*> params_;
};

}  // namespace noisebench::nn
