#pragma once

// Convolutional building blocks for the discriminator and the frozen
// feature extractor. Activations are NHWC: a (batch*height*width) x channels
// matrix.
//
// Every layer supports three passes:
//   forward   x -> y, caching what the other passes need;
//   backward  dL/dy -> dL/dx (cached for weight gradients);
//   tangent   t_x -> t_y, the Jacobian-vector product at the cached point.
// accumulate_grads(s, c) then adds sum_i delta_i (x) (s_i a_i + c t_i) to
// every weight gradient, where a is the forward input, t the tangent input
// and delta the backward signal. With s_i = dL/dD(x_i) this is the loss
// gradient; with c = gamma / N and the tangent taken along the input
// gradient it is the exact R1 gradient of a piecewise-linear network.

#include "inrgan/rng.hpp"
#include "inrgan/tensor.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace inrgan {

template <typename T>
struct Activations {
  int batch = 0;
  int height = 1;
  int width = 1;
  int channels = 0;
  Mat<T> data;

  Activations() = default;
  Activations(int n, int h, int w, int c) : batch(n), height(h), width(w), channels(c), data(Mat<T>::Zero(static_cast<Eigen::Index>(n) * h * w, c)) {}

  Eigen::Index pixels() const { return static_cast<Eigen::Index>(height) * width; }
  bool same_shape(const Activations& o) const {
    return batch == o.batch && height == o.height && width == o.width && channels == o.channels;
  }
};

/// Stacks equally sized HWC images (each pixels x channels) into a batch.
template <typename T>
Activations<T> stack_images(const std::vector<Mat<T>>& images, int height, int width);

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Activations<T> forward(const Activations<T>& x) = 0;
  virtual Activations<T> backward(const Activations<T>& dy) = 0;
  virtual Activations<T> tangent(const Activations<T>& tx) = 0;
  virtual void accumulate_grads(const std::vector<T>& /*sample_weights*/, T /*tangent_weight*/) {}
  virtual void collect_params(ParamList<T>& /*out*/) {}
  virtual std::string describe() const = 0;
};

template <typename T>
using LayerPtr = std::unique_ptr<Layer<T>>;

struct LinearInit {
  double gain = 1.41421356237;  // sqrt(2) ahead of a leaky ReLU, 1 for a linear output
  bool equalized = true;        // store N(0, 1) weights and scale at runtime
};

/// k x k convolution, stride 1, zero padding (k - 1) / 2; k in {1, 3}.
template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::string name, int in_channels, int out_channels, int kernel, bool bias, LinearInit init, Rng* rng);

  Activations<T> forward(const Activations<T>& x) override;
  Activations<T> backward(const Activations<T>& dy) override;
  Activations<T> tangent(const Activations<T>& tx) override;
  void accumulate_grads(const std::vector<T>& s, T c) override;
  void collect_params(ParamList<T>& out) override;
  std::string describe() const override;

  Param<T>& weight() { return weight_; }
  T weight_scale() const { return scale_; }

 private:
  Mat<T> im2col(const Activations<T>& x) const;
  Activations<T> col2im(const Mat<T>& cols, const Activations<T>& like) const;

  int in_;
  int out_;
  int k_;
  bool has_bias_;
  T scale_;
  Param<T> weight_;  // (k*k*in) x out
  Param<T> bias_;    // 1 x out
  Activations<T> input_;
  Activations<T> tangent_in_;
  Activations<T> delta_;
};

template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(std::string name, int in_features, int out_features, bool bias, LinearInit init, Rng* rng);

  Activations<T> forward(const Activations<T>& x) override;
  Activations<T> backward(const Activations<T>& dy) override;
  Activations<T> tangent(const Activations<T>& tx) override;
  void accumulate_grads(const std::vector<T>& s, T c) override;
  void collect_params(ParamList<T>& out) override;
  std::string describe() const override;

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }
  T weight_scale() const { return scale_; }

 private:
  int in_;
  int out_;
  bool has_bias_;
  T scale_;
  Param<T> weight_;  // in x out
  Param<T> bias_;
  Activations<T> input_;
  Activations<T> tangent_in_;
  Activations<T> delta_;
};

template <typename T>
class LeakyRelu final : public Layer<T> {
 public:
  explicit LeakyRelu(T slope = T(kLeakySlope)) : slope_(slope) {}
  Activations<T> forward(const Activations<T>& x) override;
  Activations<T> backward(const Activations<T>& dy) override;
  Activations<T> tangent(const Activations<T>& tx) override;
  std::string describe() const override { return "lrelu"; }

 private:
  T slope_;
  Mat<T> slope_mask_;
};

/// 2x2 average pooling; height and width must be even.
template <typename T>
class AvgPool2 final : public Layer<T> {
 public:
  Activations<T> forward(const Activations<T>& x) override;
  Activations<T> backward(const Activations<T>& dy) override;
  Activations<T> tangent(const Activations<T>& tx) override { return forward(tx); }
  std::string describe() const override { return "avgpool2"; }

 private:
  Activations<T> input_shape_;
};

/// Mean over all pixels: (n, h, w, c) -> (n, 1, 1, c).
template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  Activations<T> forward(const Activations<T>& x) override;
  Activations<T> backward(const Activations<T>& dy) override;
  Activations<T> tangent(const Activations<T>& tx) override { return forward(tx); }
  std::string describe() const override { return "global_avgpool"; }

 private:
  int height_ = 0;
  int width_ = 0;
};

/// (n, h, w, c) -> (n, 1, 1, h*w*c).
template <typename T>
class Flatten final : public Layer<T> {
 public:
  Activations<T> forward(const Activations<T>& x) override;
  Activations<T> backward(const Activations<T>& dy) override;
  Activations<T> tangent(const Activations<T>& tx) override { return forward(tx); }
  std::string describe() const override { return "flatten"; }

 private:
  int height_ = 1;
  int width_ = 1;
  int channels_ = 0;
};

template <typename T>
class Sequential final : public Layer<T> {
 public:
  Sequential() = default;
  explicit Sequential(std::vector<LayerPtr<T>> layers) : layers_(std::move(layers)) {}
  void add(LayerPtr<T> layer) { layers_.push_back(std::move(layer)); }

  Activations<T> forward(const Activations<T>& x) override;
  Activations<T> backward(const Activations<T>& dy) override;
  Activations<T> tangent(const Activations<T>& tx) override;
  void accumulate_grads(const std::vector<T>& s, T c) override;
  void collect_params(ParamList<T>& out) override;
  std::string describe() const override;
  std::size_t size() const { return layers_.size(); }

 private:
  std::vector<LayerPtr<T>> layers_;
};

/// Downsampling residual block:
///   main = lrelu(conv3x3_b(pool(lrelu(conv3x3_a(x)))))
///   skip = conv1x1(pool(x))
///   out  = (main + skip) / sqrt(2)
template <typename T>
class ResBlock final : public Layer<T> {
 public:
  ResBlock(const std::string& name, int in_channels, int out_channels, bool equalized, Rng* rng);

  Activations<T> forward(const Activations<T>& x) override;
  Activations<T> backward(const Activations<T>& dy) override;
  Activations<T> tangent(const Activations<T>& tx) override;
  void accumulate_grads(const std::vector<T>& s, T c) override;
  void collect_params(ParamList<T>& out) override;
  std::string describe() const override;

 private:
  Sequential<T> main_;
  Sequential<T> skip_;
  int in_;
  int out_;
};

}  // namespace inrgan
