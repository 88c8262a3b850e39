#include "inrgan/layers.hpp"

#include "inrgan/errors.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace inrgan {

namespace {

template <typename T>
Mat<T> init_weight(Eigen::Index rows, Eigen::Index cols, int fan_in, const LinearInit& init, Rng* rng, T* scale) {
  const double std_dev = init.gain / std::sqrt(static_cast<double>(fan_in));
  *scale = init.equalized ? static_cast<T>(std_dev) : T(1);
  const double draw_std = init.equalized ? 1.0 : std_dev;
  Mat<T> w(rows, cols);
  if (rng == nullptr) {
    w.setZero();
    return w;
  }
  std::normal_distribution<double> normal(0.0, draw_std);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<T>(normal(*rng));
  return w;
}

// Per-sample mix s_i * a_i + c * t_i of two activations with the same shape.
template <typename T>
Mat<T> mix(const Activations<T>& a, const Activations<T>& t, const std::vector<T>& s, T c) {
  if (static_cast<int>(s.size()) != a.batch) throw std::invalid_argument("sample weight count does not match batch");
  const Eigen::Index px = a.pixels();
  Mat<T> out(a.data.rows(), a.data.cols());
  const bool use_t = c != T(0);
  if (use_t && !t.same_shape(a)) throw InvalidStateError("tangent pass missing before weighted gradient accumulation");
  for (int n = 0; n < a.batch; ++n) {
    auto rows = out.middleRows(n * px, px);
    rows = s[n] * a.data.middleRows(n * px, px);
    if (use_t) rows += c * t.data.middleRows(n * px, px);
  }
  return out;
}

template <typename T>
RowVec<T> weighted_colsum(const Activations<T>& d, const std::vector<T>& s) {
  const Eigen::Index px = d.pixels();
  RowVec<T> out = RowVec<T>::Zero(d.channels);
  for (int n = 0; n < d.batch; ++n) out += s[n] * d.data.middleRows(n * px, px).colwise().sum();
  return out;
}

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

template <typename T>
Activations<T> stack_images(const std::vector<Mat<T>>& images, int height, int width) {
  require(!images.empty(), "no images to stack");
  const Eigen::Index px = static_cast<Eigen::Index>(height) * width;
  const int c = static_cast<int>(images.front().cols());
  Activations<T> out(static_cast<int>(images.size()), height, width, c);
  for (std::size_t i = 0; i < images.size(); ++i) {
    require(images[i].rows() == px && images[i].cols() == c, "image shape mismatch in batch");
    out.data.middleRows(static_cast<Eigen::Index>(i) * px, px) = images[i];
  }
  return out;
}

// ---- Conv2d ---------------------------------------------------------------

template <typename T>
Conv2d<T>::Conv2d(std::string name, int in_channels, int out_channels, int kernel, bool bias, LinearInit init, Rng* rng)
    : in_(in_channels), out_(out_channels), k_(kernel), has_bias_(bias) {
  require(kernel == 1 || kernel == 3, "conv kernel must be 1 or 3");
  require(in_channels > 0 && out_channels > 0, "conv channels must be positive");
  const int fan_in = kernel * kernel * in_channels;
  weight_ = Param<T>(name + ".weight", init_weight<T>(fan_in, out_channels, fan_in, init, rng, &scale_));
  if (has_bias_) bias_ = Param<T>(name + ".bias", Mat<T>::Zero(1, out_channels));
}

template <typename T>
Mat<T> Conv2d<T>::im2col(const Activations<T>& x) const {
  if (k_ == 1) return x.data;
  const int h = x.height, w = x.width, c = x.channels, pad = k_ / 2;
  const Eigen::Index cols = static_cast<Eigen::Index>(k_) * k_ * c;
  Mat<T> out = Mat<T>::Zero(x.data.rows(), cols);
  for (int n = 0; n < x.batch; ++n) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        T* dst = out.data() + ((static_cast<Eigen::Index>(n) * h + y) * w + xx) * cols;
        for (int ky = 0; ky < k_; ++ky) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          for (int kx = 0; kx < k_; ++kx) {
            const int sx = xx + kx - pad;
            if (sx < 0 || sx >= w) continue;
            const T* src = x.data.data() + ((static_cast<Eigen::Index>(n) * h + sy) * w + sx) * c;
            std::copy(src, src + c, dst + (ky * k_ + kx) * c);
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Activations<T> Conv2d<T>::col2im(const Mat<T>& cols, const Activations<T>& like) const {
  Activations<T> out(like.batch, like.height, like.width, in_);
  if (k_ == 1) {
    out.data = cols;
    return out;
  }
  const int h = like.height, w = like.width, c = in_, pad = k_ / 2;
  const Eigen::Index ncols = cols.cols();
  for (int n = 0; n < like.batch; ++n) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        const T* src = cols.data() + ((static_cast<Eigen::Index>(n) * h + y) * w + xx) * ncols;
        for (int ky = 0; ky < k_; ++ky) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          for (int kx = 0; kx < k_; ++kx) {
            const int sx = xx + kx - pad;
            if (sx < 0 || sx >= w) continue;
            T* dst = out.data.data() + ((static_cast<Eigen::Index>(n) * h + sy) * w + sx) * c;
            const T* s = src + (ky * k_ + kx) * c;
            for (int ch = 0; ch < c; ++ch) dst[ch] += s[ch];
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Activations<T> Conv2d<T>::forward(const Activations<T>& x) {
  require(x.channels == in_, "conv input channel mismatch");
  input_ = x;
  Activations<T> y(x.batch, x.height, x.width, out_);
  y.data.noalias() = scale_ * (im2col(x) * weight_.value);
  if (has_bias_) y.data.rowwise() += RowVec<T>(bias_.value.row(0));
  return y;
}

template <typename T>
Activations<T> Conv2d<T>::backward(const Activations<T>& dy) {
  require(dy.channels == out_ && dy.batch == input_.batch, "conv backward shape mismatch");
  delta_ = dy;
  Mat<T> dcols = scale_ * (dy.data * weight_.value.transpose());
  return col2im(dcols, input_);
}

template <typename T>
Activations<T> Conv2d<T>::tangent(const Activations<T>& tx) {
  require(tx.channels == in_, "conv tangent channel mismatch");
  tangent_in_ = tx;
  Activations<T> ty(tx.batch, tx.height, tx.width, out_);
  ty.data.noalias() = scale_ * (im2col(tx) * weight_.value);
  return ty;
}

template <typename T>
void Conv2d<T>::accumulate_grads(const std::vector<T>& s, T c) {
  if (delta_.batch != input_.batch || delta_.channels != out_ || delta_.pixels() != input_.pixels())
    throw InvalidStateError("conv gradients requested before backward");
  Activations<T> mixed = input_;
  mixed.data = mix(input_, tangent_in_, s, c);
  weight_.grad.noalias() += scale_ * (im2col(mixed).transpose() * delta_.data);
  if (has_bias_) bias_.grad.row(0) += weighted_colsum(delta_, s);
}

template <typename T>
void Conv2d<T>::collect_params(ParamList<T>& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

template <typename T>
std::string Conv2d<T>::describe() const {
  return "conv" + std::to_string(k_) + "x" + std::to_string(k_) + "(" + std::to_string(in_) + "->" + std::to_string(out_) + ")";
}

// ---- Dense ----------------------------------------------------------------

template <typename T>
Dense<T>::Dense(std::string name, int in_features, int out_features, bool bias, LinearInit init, Rng* rng)
    : in_(in_features), out_(out_features), has_bias_(bias) {
  require(in_features > 0 && out_features > 0, "dense sizes must be positive");
  weight_ = Param<T>(name + ".weight", init_weight<T>(in_features, out_features, in_features, init, rng, &scale_));
  if (has_bias_) bias_ = Param<T>(name + ".bias", Mat<T>::Zero(1, out_features));
}

template <typename T>
Activations<T> Dense<T>::forward(const Activations<T>& x) {
  require(x.height == 1 && x.width == 1 && x.channels == in_, "dense input shape mismatch");
  input_ = x;
  Activations<T> y(x.batch, 1, 1, out_);
  y.data.noalias() = scale_ * (x.data * weight_.value);
  if (has_bias_) y.data.rowwise() += RowVec<T>(bias_.value.row(0));
  return y;
}

template <typename T>
Activations<T> Dense<T>::backward(const Activations<T>& dy) {
  require(dy.channels == out_ && dy.batch == input_.batch, "dense backward shape mismatch");
  delta_ = dy;
  Activations<T> dx(dy.batch, 1, 1, in_);
  dx.data.noalias() = scale_ * (dy.data * weight_.value.transpose());
  return dx;
}

template <typename T>
Activations<T> Dense<T>::tangent(const Activations<T>& tx) {
  require(tx.channels == in_, "dense tangent shape mismatch");
  tangent_in_ = tx;
  Activations<T> ty(tx.batch, 1, 1, out_);
  ty.data.noalias() = scale_ * (tx.data * weight_.value);
  return ty;
}

template <typename T>
void Dense<T>::accumulate_grads(const std::vector<T>& s, T c) {
  if (delta_.batch != input_.batch || delta_.channels != out_)
    throw InvalidStateError("dense gradients requested before backward");
  weight_.grad.noalias() += scale_ * (mix(input_, tangent_in_, s, c).transpose() * delta_.data);
  if (has_bias_) bias_.grad.row(0) += weighted_colsum(delta_, s);
}

template <typename T>
void Dense<T>::collect_params(ParamList<T>& out) {
  out.push_back(&weight_);
  if (has_bias_) out.push_back(&bias_);
}

template <typename T>
std::string Dense<T>::describe() const {
  return "dense(" + std::to_string(in_) + "->" + std::to_string(out_) + ")";
}

// ---- elementwise and reshaping ---------------------------------------------

template <typename T>
Activations<T> LeakyRelu<T>::forward(const Activations<T>& x) {
  slope_mask_ = (x.data.array() > T(0)).select(Mat<T>::Ones(x.data.rows(), x.data.cols()), slope_);
  Activations<T> y = x;
  y.data.array() *= slope_mask_.array();
  return y;
}

template <typename T>
Activations<T> LeakyRelu<T>::backward(const Activations<T>& dy) {
  require(dy.data.rows() == slope_mask_.rows() && dy.data.cols() == slope_mask_.cols(), "lrelu backward shape mismatch");
  Activations<T> dx = dy;
  dx.data.array() *= slope_mask_.array();
  return dx;
}

template <typename T>
Activations<T> LeakyRelu<T>::tangent(const Activations<T>& tx) {
  return backward(tx);
}

template <typename T>
Activations<T> AvgPool2<T>::forward(const Activations<T>& x) {
  require(x.height % 2 == 0 && x.width % 2 == 0, "avgpool2 needs even spatial size");
  input_shape_ = Activations<T>();
  input_shape_.batch = x.batch;
  input_shape_.height = x.height;
  input_shape_.width = x.width;
  input_shape_.channels = x.channels;
  const int ho = x.height / 2, wo = x.width / 2, w = x.width;
  Activations<T> y(x.batch, ho, wo, x.channels);
  for (int n = 0; n < x.batch; ++n) {
    const Eigen::Index in_base = static_cast<Eigen::Index>(n) * x.height * w;
    const Eigen::Index out_base = static_cast<Eigen::Index>(n) * ho * wo;
    for (int y0 = 0; y0 < ho; ++y0) {
      for (int x0 = 0; x0 < wo; ++x0) {
        const Eigen::Index r = in_base + static_cast<Eigen::Index>(2 * y0) * w + 2 * x0;
        y.data.row(out_base + y0 * wo + x0) =
            T(0.25) * (x.data.row(r) + x.data.row(r + 1) + x.data.row(r + w) + x.data.row(r + w + 1));
      }
    }
  }
  return y;
}

template <typename T>
Activations<T> AvgPool2<T>::backward(const Activations<T>& dy) {
  const auto& s = input_shape_;
  require(dy.batch == s.batch && dy.height * 2 == s.height && dy.width * 2 == s.width, "avgpool2 backward shape mismatch");
  Activations<T> dx(s.batch, s.height, s.width, s.channels);
  const int ho = dy.height, wo = dy.width, w = s.width;
  for (int n = 0; n < s.batch; ++n) {
    const Eigen::Index in_base = static_cast<Eigen::Index>(n) * s.height * w;
    const Eigen::Index out_base = static_cast<Eigen::Index>(n) * ho * wo;
    for (int y0 = 0; y0 < ho; ++y0) {
      for (int x0 = 0; x0 < wo; ++x0) {
        const Eigen::Index r = in_base + static_cast<Eigen::Index>(2 * y0) * w + 2 * x0;
        const RowVec<T> g = T(0.25) * dy.data.row(out_base + y0 * wo + x0);
        dx.data.row(r) = g;
        dx.data.row(r + 1) = g;
        dx.data.row(r + w) = g;
        dx.data.row(r + w + 1) = g;
      }
    }
  }
  return dx;
}

template <typename T>
Activations<T> GlobalAvgPool<T>::forward(const Activations<T>& x) {
  height_ = x.height;
  width_ = x.width;
  const Eigen::Index px = x.pixels();
  Activations<T> y(x.batch, 1, 1, x.channels);
  for (int n = 0; n < x.batch; ++n) y.data.row(n) = x.data.middleRows(n * px, px).colwise().mean();
  return y;
}

template <typename T>
Activations<T> GlobalAvgPool<T>::backward(const Activations<T>& dy) {
  Activations<T> dx(dy.batch, height_, width_, dy.channels);
  const Eigen::Index px = dx.pixels();
  const T inv = T(1) / static_cast<T>(px);
  for (int n = 0; n < dy.batch; ++n) dx.data.middleRows(n * px, px).rowwise() = inv * dy.data.row(n);
  return dx;
}

template <typename T>
Activations<T> Flatten<T>::forward(const Activations<T>& x) {
  height_ = x.height;
  width_ = x.width;
  channels_ = x.channels;
  const Eigen::Index feat = x.pixels() * x.channels;
  Activations<T> y;
  y.batch = x.batch;
  y.channels = static_cast<int>(feat);
  // Row-major NHWC storage is already (n, h, w, c) contiguous per sample.
  y.data = Eigen::Map<const Mat<T>>(x.data.data(), x.batch, feat);
  return y;
}

template <typename T>
Activations<T> Flatten<T>::backward(const Activations<T>& dy) {
  Activations<T> dx;
  dx.batch = dy.batch;
  dx.height = height_;
  dx.width = width_;
  dx.channels = channels_;
  dx.data = Eigen::Map<const Mat<T>>(dy.data.data(), static_cast<Eigen::Index>(dy.batch) * height_ * width_, channels_);
  return dx;
}

// ---- composites -----------------------------------------------------------

template <typename T>
Activations<T> Sequential<T>::forward(const Activations<T>& x) {
  Activations<T> h = x;
  for (auto& l : layers_) h = l->forward(h);
  return h;
}

template <typename T>
Activations<T> Sequential<T>::backward(const Activations<T>& dy) {
  Activations<T> g = dy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

template <typename T>
Activations<T> Sequential<T>::tangent(const Activations<T>& tx) {
  Activations<T> t = tx;
  for (auto& l : layers_) t = l->tangent(t);
  return t;
}

template <typename T>
void Sequential<T>::accumulate_grads(const std::vector<T>& s, T c) {
  for (auto& l : layers_) l->accumulate_grads(s, c);
}

template <typename T>
void Sequential<T>::collect_params(ParamList<T>& out) {
  for (auto& l : layers_) l->collect_params(out);
}

template <typename T>
std::string Sequential<T>::describe() const {
  std::string s;
  for (const auto& l : layers_) {
    if (!s.empty()) s += " -> ";
    s += l->describe();
  }
  return s;
}

template <typename T>
ResBlock<T>::ResBlock(const std::string& name, int in_channels, int out_channels, bool equalized, Rng* rng)
    : in_(in_channels), out_(out_channels) {
  const LinearInit act{std::sqrt(2.0), equalized};
  const LinearInit lin{1.0, equalized};
  main_.add(std::make_unique<Conv2d<T>>(name + ".conv0", in_channels, in_channels, 3, true, act, rng));
  main_.add(std::make_unique<LeakyRelu<T>>());
  main_.add(std::make_unique<AvgPool2<T>>());
  main_.add(std::make_unique<Conv2d<T>>(name + ".conv1", in_channels, out_channels, 3, true, act, rng));
  main_.add(std::make_unique<LeakyRelu<T>>());
  skip_.add(std::make_unique<AvgPool2<T>>());
  skip_.add(std::make_unique<Conv2d<T>>(name + ".skip", in_channels, out_channels, 1, false, lin, rng));
}

template <typename T>
Activations<T> ResBlock<T>::forward(const Activations<T>& x) {
  Activations<T> m = main_.forward(x);
  const Activations<T> s = skip_.forward(x);
  m.data = T(M_SQRT1_2) * (m.data + s.data);
  return m;
}

template <typename T>
Activations<T> ResBlock<T>::backward(const Activations<T>& dy) {
  Activations<T> scaled = dy;
  scaled.data *= T(M_SQRT1_2);
  Activations<T> dx = main_.backward(scaled);
  dx.data += skip_.backward(scaled).data;
  return dx;
}

template <typename T>
Activations<T> ResBlock<T>::tangent(const Activations<T>& tx) {
  Activations<T> m = main_.tangent(tx);
  m.data = T(M_SQRT1_2) * (m.data + skip_.tangent(tx).data);
  return m;
}

template <typename T>
void ResBlock<T>::accumulate_grads(const std::vector<T>& s, T c) {
  main_.accumulate_grads(s, c);
  skip_.accumulate_grads(s, c);
}

template <typename T>
void ResBlock<T>::collect_params(ParamList<T>& out) {
  main_.collect_params(out);
  skip_.collect_params(out);
}

template <typename T>
std::string ResBlock<T>::describe() const {
  return "resblock(" + std::to_string(in_) + "->" + std::to_string(out_) + ")";
}

#define INRGAN_LAYERS(T)                                                                      \
  template Activations<T> stack_images<T>(const std::vector<Mat<T>>&, int, int);             \
  template class Conv2d<T>;                                                                   \
  template class Dense<T>;                                                                    \
  template class LeakyRelu<T>;                                                                \
  template class AvgPool2<T>;                                                                 \
  template class GlobalAvgPool<T>;                                                            \
  template class Flatten<T>;                                                                  \
  template class Sequential<T>;                                                               \
  template class ResBlock<T>;

INRGAN_LAYERS(float)
INRGAN_LAYERS(double)

}  // namespace inrgan
