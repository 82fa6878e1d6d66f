#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "noisebench/nn/tensor.hpp"

namespace noisebench::nn {

enum class InitKind { he_normal, zeros, ones };

template <typename S>
struct Param {
  std::string name;
  Tensor<S> value;
  Tensor<S> grad;
  InitKind init = InitKind::zeros;
  int fan_in = 0;  // for he_normal

  // Deterministic kinds take effect immediately so a raw layer is usable;
  // he_normal needs a seed and stays zero until Model::init_params draws it.
  explicit Param(std::string n, std::vector<int> shape, InitKind k = InitKind::zeros,
                 int fan = 0)
      : name(std::move(n)), value(shape), grad(std::move(shape)), init(k), fan_in(fan) {
    if (init == InitKind::ones) value.flat().setOnes();
  }
};

// Layer contract: forward caches whatever backward needs; backward consumes
// the most recent forward, writes parameter gradients, and returns the input
// gradient. Single-threaded, deterministic.
template <typename S>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<S> forward(const Tensor<S>& x, bool training) = 0;
  virtual Tensor<S> backward(const Tensor<S>& gy) = 0;
  virtual const char* kind() const = 0;

  virtual void collect_params(const std::string& prefix, std::vector<Param<S>*>& out) {}

  // Everything a checkpoint stores: parameters plus non-trained buffers.
  virtual void collect_state(const std::string& prefix,
                             std::vector<std::pair<std::string, Tensor<S>*>>& out) {
    std::vector<Param<S>*> ps;
    collect_params(prefix, ps);
    for (Param<S>* p : ps) out.emplace_back(p->name, &p->value);
  }

  // Reinitialize non-trained buffers (e.g. batch-norm running statistics).
  virtual void reset_buffers() {}
};

namespace detail {

inline void expect_rank4(const std::vector<int>& shape, const char* who) {
  if (shape.size() != 4) throw ShapeError(std::string(who) + ": expected a 4-d input");
}

}  // namespace detail

// 2-d convolution via im2col + one matrix product per batch. Weight layout
// [out_ch, in_ch, k, k]; column index order is (image, output row, output col).
template <typename S>
class Conv2d : public Layer<S> {
 public:
  Conv2d(int in_ch, int out_ch, int ksize, int stride, int pad, bool with_bias = true)
      : in_ch_((check_geometry(in_ch, out_ch, ksize, stride, pad), in_ch)),
        out_ch_(out_ch),
        k_(ksize),
        stride_(stride),
        pad_(pad),
        weight_("weight", {out_ch, in_ch, ksize, ksize}, InitKind::he_normal,
                in_ch * ksize * ksize),
        with_bias_(with_bias),
        bias_("bias", {out_ch}, InitKind::zeros) {}

  const char* kind() const override { return "conv2d"; }

  Tensor<S> forward(const Tensor<S>& x, bool) override {
    detail::expect_rank4(x.shape(), "Conv2d");
    if (x.dim(1) != in_ch_)
      throw ShapeError("Conv2d: input has " + std::to_string(x.dim(1)) + " channels, expected " +
                       std::to_string(in_ch_));
    in_shape_ = x.shape();
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int oh = (h + 2 * pad_ - k_) / stride_ + 1;
    const int ow = (w + 2 * pad_ - k_) / stride_ + 1;
    if (oh <= 0 || ow <= 0) throw ShapeError("Conv2d: kernel larger than padded input");

    // cols_ persists across calls (and into backward): shapes repeat every
    // batch, so this avoids re-faulting tens of MB per step.
    im2col(x, cols_, oh, ow);
    const Eigen::Index m = cols_.cols();
    Eigen::Map<const RowMatX<S>> wmap(weight_.value.data(), out_ch_, kdim());

    buf_.resize(out_ch_, m);
    buf_.noalias() = wmap * cols_;
    if (with_bias_) {
      Eigen::Map<const VecX<S>> b(bias_.value.data(), out_ch_);
      buf_.colwise() += b;
    }

    Tensor<S> y({n, out_ch_, oh, ow});
    const Eigen::Index span = Eigen::Index(oh) * ow;
    for (int i = 0; i < n; ++i)
      Eigen::Map<RowMatX<S>>(y.data() + Eigen::Index(i) * out_ch_ * span, out_ch_, span) =
          buf_.middleCols(Eigen::Index(i) * span, span);
    return y;
  }

  Tensor<S> backward(const Tensor<S>& gy) override {
    const int n = in_shape_[0], h = in_shape_[2], w = in_shape_[3];
    const int oh = gy.dim(2), ow = gy.dim(3);
    const Eigen::Index span = Eigen::Index(oh) * ow;
    const Eigen::Index m = Eigen::Index(n) * span;

    buf_.resize(out_ch_, m);
    for (int i = 0; i < n; ++i)
      buf_.middleCols(Eigen::Index(i) * span, span) = Eigen::Map<const RowMatX<S>>(
          gy.data() + Eigen::Index(i) * out_ch_ * span, out_ch_, span);

    Eigen::Map<RowMatX<S>> dw(weight_.grad.data(), out_ch_, kdim());
    dw.noalias() = buf_ * cols_.transpose();  // cols_ still holds this input's patches
    if (with_bias_) {
      Eigen::Map<VecX<S>> db(bias_.grad.data(), out_ch_);
      db = buf_.rowwise().sum();
    }

    Eigen::Map<const RowMatX<S>> wmap(weight_.value.data(), out_ch_, kdim());
    dcols_.resize(kdim(), m);
    dcols_.noalias() = wmap.transpose() * buf_;

    Tensor<S> dx({n, in_ch_, h, w});
    col2im(dcols_, dx, oh, ow);
    return dx;
  }

  void collect_params(const std::string& prefix, std::vector<Param<S>*>& out) override {
    weight_.name = prefix + "weight";
    out.push_back(&weight_);
    if (with_bias_) {
      bias_.name = prefix + "bias";
      out.push_back(&bias_);
    }
  }

  Param<S>& weight() { return weight_; }
  Param<S>& bias() { return bias_; }

 private:
  // Runs in the initializer list, before any member tensor is built, so bad
  // geometry surfaces as ValueError rather than a tensor shape error.
  static void check_geometry(int in_ch, int out_ch, int ksize, int stride, int pad) {
    if (in_ch <= 0 || out_ch <= 0 || ksize <= 0 || stride <= 0 || pad < 0)
      throw ValueError("Conv2d: bad geometry");
  }

  int kdim() const { return in_ch_ * k_ * k_; }

  void im2col(const Tensor<S>& x, RowMatX<S>& cols, int oh, int ow) const {
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const Eigen::Index span = Eigen::Index(oh) * ow;
    cols.setZero(kdim(), Eigen::Index(n) * span);
    for (int c = 0; c < in_ch_; ++c) {
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          S* row = cols.data() + (Eigen::Index(c) * k_ * k_ + ky * k_ + kx) * cols.cols();
          for (int i = 0; i < n; ++i) {
            const S* src = x.data() + (Eigen::Index(i) * in_ch_ + c) * h * w;
            S* dst = row + Eigen::Index(i) * span;
            for (int oy = 0; oy < oh; ++oy) {
              const int iy = oy * stride_ + ky - pad_;
              if (iy < 0 || iy >= h) continue;
              // valid ox range: 0 <= ox*stride + kx - pad < w
              int lo = (pad_ - kx + stride_ - 1) / stride_;
              if (lo < 0) lo = 0;
              int hi = (w - 1 + pad_ - kx) / stride_;
              if (hi > ow - 1) hi = ow - 1;
              if (lo > hi) continue;
              const S* s = src + Eigen::Index(iy) * w + (lo * stride_ + kx - pad_);
              S* d = dst + Eigen::Index(oy) * ow + lo;
              if (stride_ == 1) {
                std::copy(s, s + (hi - lo + 1), d);
              } else {
                for (int ox = lo; ox <= hi; ++ox, s += stride_) *d++ = *s;
              }
            }
          }
        }
      }
    }
  }

  void col2im(const RowMatX<S>& dcols, Tensor<S>& dx, int oh, int ow) const {
    const int n = dx.dim(0), h = dx.dim(2), w = dx.dim(3);
    const Eigen::Index span = Eigen::Index(oh) * ow;
    for (int c = 0; c < in_ch_; ++c) {
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          const S* row =
              dcols.data() + (Eigen::Index(c) * k_ * k_ + ky * k_ + kx) * dcols.cols();
          for (int i = 0; i < n; ++i) {
            S* dst = dx.data() + (Eigen::Index(i) * in_ch_ + c) * h * w;
            const S* src = row + Eigen::Index(i) * span;
            for (int oy = 0; oy < oh; ++oy) {
              const int iy = oy * stride_ + ky - pad_;
              if (iy < 0 || iy >= h) continue;
              int lo = (pad_ - kx + stride_ - 1) / stride_;
              if (lo < 0) lo = 0;
              int hi = (w - 1 + pad_ - kx) / stride_;
              if (hi > ow - 1) hi = ow - 1;
              if (lo > hi) continue;
              const S* s = src + Eigen::Index(oy) * ow + lo;
              S* d = dst + Eigen::Index(iy) * w + (lo * stride_ + kx - pad_);
              if (stride_ == 1) {
                for (int ox = lo; ox <= hi; ++ox) *d++ += *s++;
              } else {
                for (int ox = lo; ox <= hi; ++ox, d += stride_) *d += *s++;
              }
            }
          }
        }
      }
    }
  }

  int in_ch_, out_ch_, k_, stride_, pad_;
  Param<S> weight_;
  bool with_bias_;
  Param<S> bias_;
  std::vector<int> in_shape_;
  RowMatX<S> cols_;   // im2col patches, kept from forward for backward
  RowMatX<S> dcols_;  // scratch for the input-gradient product
  MatX<S> buf_;       // scratch for output / upstream-gradient reshapes
};

// Per-channel batch normalization over (image, row, col). Batch statistics in
// training mode, running statistics in evaluation mode; running variance
// stores the unbiased estimate. Accumulation in double so the normalized
// batch moments hold to tight tolerances in float too.
template <typename S>
class BatchNorm2d : public Layer<S> {
 public:
  explicit BatchNorm2d(int channels, double eps = 1e-5, double momentum = 0.1)
      : ch_(channels),
        eps_(eps),
        momentum_(momentum),
        gamma_("weight", {channels}, InitKind::ones),
        beta_("bias", {channels}, InitKind::zeros),
        running_mean_({channels}),
        running_var_({channels}) {
    reset_buffers();
  }

  const char* kind() const override { return "batchnorm2d"; }

  void reset_buffers() override {
    running_mean_.flat().setZero();
    running_var_.flat().setOnes();
  }

  Tensor<S> forward(const Tensor<S>& x, bool training) override {
    detail::expect_rank4(x.shape(), "BatchNorm2d");
    if (x.dim(1) != ch_) throw ShapeError("BatchNorm2d: channel mismatch");
    const int n = x.dim(0);
    const Eigen::Index hw = Eigen::Index(x.dim(2)) * x.dim(3);
    const double m = double(n) * double(hw);

    mean_.resize(ch_);
    invstd_.resize(ch_);
    if (training) {
      for (int c = 0; c < ch_; ++c) {
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < n; ++i) {
          auto seg = Eigen::Map<const ArrX<S>>(
              x.data() + (Eigen::Index(i) * ch_ + c) * hw, hw);
          sum += seg.template cast<double>().sum();
          sumsq += seg.template cast<double>().square().sum();
        }
        const double mean = sum / m;
        const double var = std::max(sumsq / m - mean * mean, 0.0);
        mean_[c] = mean;
        invstd_[c] = 1.0 / std::sqrt(var + eps_);
        const double unbiased = m > 1.0 ? var * m / (m - 1.0) : var;
        running_mean_[c] =
            static_cast<S>((1.0 - momentum_) * running_mean_[c] + momentum_ * mean);
        running_var_[c] =
            static_cast<S>((1.0 - momentum_) * running_var_[c] + momentum_ * unbiased);
      }
    } else {
      for (int c = 0; c < ch_; ++c) {
        mean_[c] = static_cast<double>(running_mean_[c]);
        invstd_[c] = 1.0 / std::sqrt(static_cast<double>(running_var_[c]) + eps_);
      }
    }

    if (xhat_.shape() != x.shape()) xhat_ = Tensor<S>(x.shape());
    Tensor<S> y(x.shape());
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < ch_; ++c) {
        const Eigen::Index base = (Eigen::Index(i) * ch_ + c) * hw;
        auto xs = Eigen::Map<const ArrX<S>>(x.data() + base, hw);
        auto xh = Eigen::Map<ArrX<S>>(xhat_.data() + base, hw);
        auto ys = Eigen::Map<ArrX<S>>(y.data() + base, hw);
        xh = (xs - static_cast<S>(mean_[c])) * static_cast<S>(invstd_[c]);
        ys = xh * gamma_.value[c] + beta_.value[c];
      }
    }
    training_mode_ = training;
    return y;
  }

  Tensor<S> backward(const Tensor<S>& gy) override {
    const int n = gy.dim(0);
    const Eigen::Index hw = Eigen::Index(gy.dim(2)) * gy.dim(3);
    const double m = double(n) * double(hw);
    Tensor<S> dx(gy.shape());

    for (int c = 0; c < ch_; ++c) {
      double s1 = 0.0, s2 = 0.0;
      for (int i = 0; i < n; ++i) {
        const Eigen::Index base = (Eigen::Index(i) * ch_ + c) * hw;
        auto g = Eigen::Map<const ArrX<S>>(gy.data() + base, hw);
        auto xh = Eigen::Map<const ArrX<S>>(xhat_.data() + base, hw);
        s1 += g.template cast<double>().sum();
        s2 += (g.template cast<double>() * xh.template cast<double>()).sum();
      }
      gamma_.grad[c] = static_cast<S>(s2);
      beta_.grad[c] = static_cast<S>(s1);
      const S scale = gamma_.value[c] * static_cast<S>(invstd_[c]);
      if (training_mode_) {
        const S c1 = static_cast<S>(s1 / m), c2 = static_cast<S>(s2 / m);
        for (int i = 0; i < n; ++i) {
          const Eigen::Index base = (Eigen::Index(i) * ch_ + c) * hw;
          auto g = Eigen::Map<const ArrX<S>>(gy.data() + base, hw);
          auto xh = Eigen::Map<const ArrX<S>>(xhat_.data() + base, hw);
          Eigen::Map<ArrX<S>>(dx.data() + base, hw) = scale * (g - c1 - xh * c2);
        }
      } else {
        for (int i = 0; i < n; ++i) {
          const Eigen::Index base = (Eigen::Index(i) * ch_ + c) * hw;
          auto g = Eigen::Map<const ArrX<S>>(gy.data() + base, hw);
          Eigen::Map<ArrX<S>>(dx.data() + base, hw) = scale * g;
        }
      }
    }
    return dx;
  }

  void collect_params(const std::string& prefix, std::vector<Param<S>*>& out) override {
    gamma_.name = prefix + "weight";
    beta_.name = prefix + "bias";
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }

  void collect_state(const std::string& prefix,
                     std::vector<std::pair<std::string, Tensor<S>*>>& out) override {
    Layer<S>::collect_state(prefix, out);
    out.emplace_back(prefix + "running_mean", &running_mean_);
    out.emplace_back(prefix + "running_var", &running_var_);
  }

 private:
  int ch_;
  double eps_, momentum_;
  Param<S> gamma_, beta_;
  Tensor<S> running_mean_, running_var_;
  Tensor<S> xhat_;
  std::vector<double> mean_, invstd_;
  bool training_mode_ = false;
};

template <typename S>
class ReLU : public Layer<S> {
 public:
  const char* kind() const override { return "relu"; }

  Tensor<S> forward(const Tensor<S>& x, bool) override {
    if (out_.shape() != x.shape()) out_ = Tensor<S>(x.shape());
    out_.flat() = x.flat().max(S(0));
    return out_;
  }

  Tensor<S> backward(const Tensor<S>& gy) override {
    Tensor<S> dx(gy.shape());
    dx.flat() = (out_.flat() > S(0)).select(gy.flat(), S(0));
    return dx;
  }

 private:
  Tensor<S> out_;
};

// 2x2 max pooling with stride 2; gradients route to the argmax position only
// (first occurrence on ties). Argmax positions are tracked only in training
// mode — backward after an evaluation-mode forward is rejected.
template <typename S>
class MaxPool2d : public Layer<S> {
 public:
  const char* kind() const override { return "maxpool2d"; }

  Tensor<S> forward(const Tensor<S>& x, bool training) override {
    detail::expect_rank4(x.shape(), "MaxPool2d");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h % 2 || w % 2) throw ShapeError("MaxPool2d: spatial dims must be even");
    const int oh = h / 2, ow = w / 2;
    in_shape_ = x.shape();
    Tensor<S> y({n, c, oh, ow});
    has_argmax_ = training;
    if (training) argmax_.assign(static_cast<std::size_t>(y.size()), 0);
    Eigen::Index oi = 0;
    for (Eigen::Index pl = 0; pl < Eigen::Index(n) * c; ++pl) {
      const S* plane = x.data() + pl * h * w;
      const Eigen::Index pbase = pl * h * w;
      for (int oy = 0; oy < oh; ++oy) {
        const S* r0 = plane + Eigen::Index(2 * oy) * w;
        const S* r1 = r0 + w;
        if (training) {
          for (int ox = 0; ox < ow; ++ox, ++oi) {
            const int ix = 2 * ox;
            // explicit ladder keeps first-max-wins on ties
            Eigen::Index best = Eigen::Index(2 * oy) * w + ix;
            S bv = r0[ix];
            if (r0[ix + 1] > bv) { bv = r0[ix + 1]; best += 1; }
            if (r1[ix] > bv) { bv = r1[ix]; best = Eigen::Index(2 * oy + 1) * w + ix; }
            if (r1[ix + 1] > bv) { bv = r1[ix + 1]; best = Eigen::Index(2 * oy + 1) * w + ix + 1; }
            y[oi] = bv;
            argmax_[static_cast<std::size_t>(oi)] = pbase + best;
          }
        } else {
          for (int ox = 0; ox < ow; ++ox, ++oi) {
            const int ix = 2 * ox;
            y[oi] = std::max(std::max(r0[ix], r0[ix + 1]), std::max(r1[ix], r1[ix + 1]));
          }
        }
      }
    }
    return y;
  }

  Tensor<S> backward(const Tensor<S>& gy) override {
    if (!has_argmax_)
      throw ValueError("MaxPool2d: backward requires a preceding training-mode forward");
    Tensor<S> dx(in_shape_);
    for (Eigen::Index i = 0; i < gy.size(); ++i)
      dx[argmax_[static_cast<std::size_t>(i)]] += gy[i];
    return dx;
  }

 private:
  std::vector<int> in_shape_;
  std::vector<Eigen::Index> argmax_;
  bool has_argmax_ = false;
};

template <typename S>
class GlobalAvgPool : public Layer<S> {
 public:
  const char* kind() const override { return "globalavgpool"; }

  Tensor<S> forward(const Tensor<S>& x, bool) override {
    detail::expect_rank4(x.shape(), "GlobalAvgPool");
    in_shape_ = x.shape();
    const int n = x.dim(0), c = x.dim(1);
    const Eigen::Index hw = Eigen::Index(x.dim(2)) * x.dim(3);
    Tensor<S> y({n, c});
    for (Eigen::Index i = 0; i < Eigen::Index(n) * c; ++i)
      y[i] = Eigen::Map<const ArrX<S>>(x.data() + i * hw, hw).mean();
    return y;
  }

  Tensor<S> backward(const Tensor<S>& gy) override {
    Tensor<S> dx(in_shape_);
    const Eigen::Index hw = Eigen::Index(in_shape_[2]) * in_shape_[3];
    const S inv = S(1) / static_cast<S>(hw);
    for (Eigen::Index i = 0; i < gy.size(); ++i)
      Eigen::Map<ArrX<S>>(dx.data() + i * hw, hw).setConstant(gy[i] * inv);
    return dx;
  }

 private:
  std::vector<int> in_shape_;
};

template <typename S>
class Linear : public Layer<S> {
 public:
  Linear(int in_features, int out_features)
      : in_(in_features),
        out_(out_features),
        weight_("weight", {out_features, in_features}, InitKind::he_normal, in_features),
        bias_("bias", {out_features}, InitKind::zeros) {}

  const char* kind() const override { return "linear"; }

  Tensor<S> forward(const Tensor<S>& x, bool) override {
    if (x.rank() != 2 || x.dim(1) != in_)
      throw ShapeError("Linear: expected input [N," + std::to_string(in_) + "], got " +
                       x.shape_string());
    input_ = x;
    const int n = x.dim(0);
    Tensor<S> y({n, out_});
    Eigen::Map<const RowMatX<S>> xm(x.data(), n, in_);
    Eigen::Map<const RowMatX<S>> wm(weight_.value.data(), out_, in_);
    Eigen::Map<RowMatX<S>> ym(y.data(), n, out_);
    ym.noalias() = xm * wm.transpose();
    Eigen::Map<const VecX<S>> b(bias_.value.data(), out_);
    ym.rowwise() += b.transpose();
    return y;
  }

  Tensor<S> backward(const Tensor<S>& gy) override {
    const int n = input_.dim(0);
    Eigen::Map<const RowMatX<S>> gm(gy.data(), n, out_);
    Eigen::Map<const RowMatX<S>> xm(input_.data(), n, in_);
    Eigen::Map<const RowMatX<S>> wm(weight_.value.data(), out_, in_);
    Eigen::Map<RowMatX<S>> dw(weight_.grad.data(), out_, in_);
    dw.noalias() = gm.transpose() * xm;
    Eigen::Map<VecX<S>> db(bias_.grad.data(), out_);
    db = gm.colwise().sum().transpose();
    Tensor<S> dx({n, in_});
    Eigen::Map<RowMatX<S>> dxm(dx.data(), n, in_);
    dxm.noalias() = gm * wm;
    return dx;
  }

  void collect_params(const std::string& prefix, std::vector<Param<S>*>& out) override {
    weight_.name = prefix + "weight";
    bias_.name = prefix + "bias";
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  int in_, out_;
  Param<S> weight_, bias_;
  Tensor<S> input_;
};

// conv-bn-relu-conv-bn plus shortcut, relu after the sum. The shortcut is the
// identity when geometry allows, otherwise a 1x1 strided projection with its
// own batch norm.
template <typename S>
class ResidualBasicBlock : public Layer<S> {
 public:
  ResidualBasicBlock(int in_ch, int out_ch, int stride)
      : conv1_(in_ch, out_ch, 3, stride, 1, /*with_bias=*/false),
        bn1_(out_ch),
        conv2_(out_ch, out_ch, 3, 1, 1, /*with_bias=*/false),
        bn2_(out_ch),
        projected_(stride != 1 || in_ch != out_ch) {
    if (projected_) {
      proj_conv_ = std::make_unique<Conv2d<S>>(in_ch, out_ch, 1, stride, 0, false);
      proj_bn_ = std::make_unique<BatchNorm2d<S>>(out_ch);
    }
  }

  const char* kind() const override { return "residual_block"; }

  Tensor<S> forward(const Tensor<S>& x, bool training) override {
    Tensor<S> main = bn2_.forward(
        conv2_.forward(relu1_.forward(bn1_.forward(conv1_.forward(x, training), training), training),
                       training),
        training);
    Tensor<S> shortcut =
        projected_ ? proj_bn_->forward(proj_conv_->forward(x, training), training) : x;
    if (!main.same_shape(shortcut)) throw ShapeError("ResidualBasicBlock: branch shape mismatch");
    out_ = Tensor<S>(main.shape());
    out_.flat() = (main.flat() + shortcut.flat()).max(S(0));
    return out_;
  }

  Tensor<S> backward(const Tensor<S>& gy) override {
    Tensor<S> g(gy.shape());
    g.flat() = (out_.flat() > S(0)).select(gy.flat(), S(0));
    Tensor<S> dmain =
        conv1_.backward(bn1_.backward(relu1_.backward(conv2_.backward(bn2_.backward(g)))));
    if (projected_) {
      Tensor<S> dshort = proj_conv_->backward(proj_bn_->backward(g));
      dmain.flat() += dshort.flat();
      return dmain;
    }
    dmain.flat() += g.flat();
    return dmain;
  }

  void collect_params(const std::string& prefix, std::vector<Param<S>*>& out) override {
    conv1_.collect_params(prefix + "conv1.", out);
    bn1_.collect_params(prefix + "bn1.", out);
    conv2_.collect_params(prefix + "conv2.", out);
    bn2_.collect_params(prefix + "bn2.", out);
    if (projected_) {
      proj_conv_->collect_params(prefix + "proj_conv.", out);
      proj_bn_->collect_params(prefix + "proj_bn.", out);
    }
  }

  void collect_state(const std::string& prefix,
                     std::vector<std::pair<std::string, Tensor<S>*>>& out) override {
    conv1_.collect_state(prefix + "conv1.", out);
    bn1_.collect_state(prefix + "bn1.", out);
    conv2_.collect_state(prefix + "conv2.", out);
    bn2_.collect_state(prefix + "bn2.", out);
    if (projected_) {
      proj_conv_->collect_state(prefix + "proj_conv.", out);
      proj_bn_->collect_state(prefix + "proj_bn.", out);
    }
  }

  void reset_buffers() override {
    bn1_.reset_buffers();
    bn2_.reset_buffers();
    if (projected_) proj_bn_->reset_buffers();
  }

 private:
  Conv2d<S> conv1_;
  BatchNorm2d<S> bn1_;
  ReLU<S> relu1_;
  Conv2d<S> conv2_;
  BatchNorm2d<S> bn2_;
  bool projected_;
  std::unique_ptr<Conv2d<S>> proj_conv_;
  std::unique_ptr<BatchNorm2d<S>> proj_bn_;
  Tensor<S> out_;
};

}  // namespace noisebench::nn
