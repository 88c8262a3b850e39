#pragma once

// Multi-scale implicit decoder: K blocks at doubling resolutions. Each
// block concatenates Fourier coordinate features with the previous block's
// hidden features (upsampled to its own grid) and applies pointwise affine
// layers whose weights come from FMM or are generated directly.

#include "inrgan/coords.hpp"
#include "inrgan/fmm.hpp"
#include "inrgan/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace inrgan {

enum class UpsampleMode { nearest, bilinear };
enum class OutputActivation { sigmoid_to_unit, clamp };

struct LayerShape {
  int n_in = 0;
  int n_out = 0;
  int rank = 0;  // ignored when direct
  bool direct = false;
};

struct BlockSpec {
  int resolution = 0;
  int fourier_features = 0;  // n_f, rows of the block's U
  std::vector<LayerShape> layers;

  int out_width() const { return layers.empty() ? 0 : layers.back().n_out; }
};

struct InrArchitecture {
  std::vector<BlockSpec> blocks;
  UpsampleMode upsample = UpsampleMode::nearest;
  OutputActivation output = OutputActivation::sigmoid_to_unit;
  Modulation modulation = Modulation::sigmoid;
  FourierMode fourier_mode = FourierMode::sincos;
  double fourier_gamma = 1.0;
  double leaky_slope = kLeakySlope;
  int output_channels = 3;

  int resolution() const { return blocks.empty() ? 0 : blocks.back().resolution; }
  int fourier_dim(std::size_t block) const;
  int num_layers() const;

  /// Throws std::invalid_argument unless resolutions double block to block,
  /// every block has 2-4 layers (relaxed to >= 1 when strict is false) and
  /// layer widths chain (first n_in = previous width + Fourier dim).
  void validate(bool strict = true) const;
};

/// Compact description used to build an architecture: per-block hidden
/// widths; an output layer with output_channels units is appended to the
/// final block. The first and last layers are generated directly.
struct ArchConfig {
  std::vector<int> resolutions{8, 16, 32};
  std::vector<std::vector<int>> hidden_widths{{64, 64}, {64, 64}, {32, 32}};
  std::vector<int> fourier_features{16, 16, 16};
  int rank = 10;
  UpsampleMode upsample = UpsampleMode::nearest;
  OutputActivation output = OutputActivation::sigmoid_to_unit;
  Modulation modulation = Modulation::sigmoid;
  FourierMode fourier_mode = FourierMode::sincos;
  double fourier_gamma = 1.0;
  bool strict = true;
};

InrArchitecture make_architecture(const ArchConfig& config);

/// Blocks 8^2 -> 16^2 -> 32^2 with widths 64/64/32, rank 10.
InrArchitecture reference_architecture();

// ---------------------------------------------------------------------------
// Parameters generated per sample.

template <typename T>
struct LayerParams {
  Mat<T> weight;          // direct layers: n_out x n_in
  FmmFactors<T> factors;  // factorized layers use A, B; every layer uses bias
};

template <typename T>
struct BlockParams {
  Mat<T> frequencies;  // n_f x 2
  std::vector<LayerParams<T>> layers;
};

template <typename T>
struct InrParams {
  std::vector<BlockParams<T>> blocks;
};

/// One contiguous piece of the flattened parameter vector.
struct ParamSegment {
  enum class Kind { frequencies, weight, factor_a, factor_b, bias };
  Kind kind;
  int block;
  int layer;  // -1 for frequencies
  int rows;
  int cols;
  Eigen::Index offset;
  std::string name() const;
};

std::vector<ParamSegment> param_layout(const InrArchitecture& arch);
Eigen::Index param_count(const InrArchitecture& arch);

template <typename T>
InrParams<T> zero_params(const InrArchitecture& arch);
template <typename T>
InrParams<T> unflatten_params(const InrArchitecture& arch, const T* data, Eigen::Index size);
template <typename T>
void flatten_params(const InrArchitecture& arch, const InrParams<T>& params, T* out, Eigen::Index size);
template <typename T>
void check_params(const InrArchitecture& arch, const InrParams<T>& params);

/// (1 - t) p1 + t p2 over every factor, bias, direct weight and frequency matrix.
template <typename T>
InrParams<T> lerp_params(const InrParams<T>& p1, const InrParams<T>& p2, T t);

// ---------------------------------------------------------------------------
// Resampling between square feature grids.

/// Sparse linear map from an in_res^2 grid to an out_res^2 grid, sampled at
/// pixel centers. Nearest uses floor((i + 0.5) * in / out); bilinear clamps
/// at the borders.
struct Resampler {
  int in_res = 0;
  int out_res = 0;
  std::vector<int> offsets;  // out_res^2 + 1
  std::vector<int> index;
  std::vector<double> weight;

  static Resampler make(int in_res, int out_res, UpsampleMode mode);

  template <typename T>
  Mat<T> apply(const Mat<T>& features) const;
  template <typename T>
  Mat<T> adjoint(const Mat<T>& grad) const;
};

/// Doubles the resolution of a square feature map (rows = R*R, row-major).
template <typename T>
Mat<T> upsample_features(const Mat<T>& features, int resolution, UpsampleMode mode);

// ---------------------------------------------------------------------------

/// Working resolution of every block plus the coordinate extent.
struct RenderPlan {
  std::vector<int> resolutions;
  Extent extent;
};

RenderPlan plan_native(const InrArchitecture& arch, const Extent& extent = Extent::unit());
/// Final block evaluated on a factor-times denser grid; earlier blocks unchanged.
RenderPlan plan_superres(const InrArchitecture& arch, int factor);
/// Every block scaled by r_low / R, floored, never below 1.
RenderPlan plan_lowres(const InrArchitecture& arch, int r_low);

/// Multiply-accumulate tally filled by an instrumented evaluation.
struct MacCounter {
  std::uint64_t affine = 0;
  std::uint64_t fourier = 0;
  std::uint64_t modulation = 0;
  std::uint64_t mapping = 0;
  std::uint64_t head = 0;
  std::uint64_t total() const { return affine + fourier + modulation + mapping + head; }
};

/// Intermediate values of one evaluation, kept for the backward pass.
template <typename T>
struct InrTrace {
  RenderPlan plan;
  std::vector<Mat<double>> points;
  std::vector<Mat<T>> phases;
  std::vector<std::vector<Mat<T>>> inputs;
  std::vector<std::vector<Mat<T>>> preacts;
  std::vector<std::vector<Mat<T>>> weights;
  Mat<T> output;
};

template <typename T>
struct InrGrads {
  std::vector<Mat<T>> frequencies;
  std::vector<std::vector<Mat<T>>> weights;  // w.r.t. the effective weight
  std::vector<std::vector<RowVec<T>>> biases;
};

/// The decoder F_theta: an architecture plus the learnable shared matrices
/// W_s of its factorized layers. Evaluation is const and thread-safe.
template <typename T>
class InrDecoder {
 public:
  InrDecoder() = default;
  explicit InrDecoder(InrArchitecture arch);

  const InrArchitecture& arch() const { return arch_; }

  /// Zero-mean Gaussian W_s with std sqrt(2 / n_in).
  template <typename Gen>
  void init_shared(Gen& rng);

  Param<T>& shared(int block, int layer) { return shared_[flat_index(block, layer)]; }
  const Param<T>& shared(int block, int layer) const { return shared_[flat_index(block, layer)]; }
  ParamList<T> shared_params();

  FmmLayerSpec<T> layer_spec(int block, int layer) const;
  Mat<T> effective_weight(int block, int layer, const LayerParams<T>& p, MacCounter* macs = nullptr) const;

  /// Image as (R*R) x channels in row-major pixel order, values in [0, 1].
  Mat<T> render(const InrParams<T>& params, const RenderPlan& plan, InrTrace<T>* trace = nullptr,
                MacCounter* macs = nullptr) const;

  Mat<T> evaluate(const InrParams<T>& params, const Extent& extent = Extent::unit()) const;
  Mat<T> superresolve(const InrParams<T>& params, int factor) const;
  Mat<T> zoom(const InrParams<T>& params, const Extent& extent) const;
  Mat<T> evaluate_lowres(const InrParams<T>& params, int r_low, MacCounter* macs = nullptr) const;

  /// Pointwise evaluation at arbitrary coordinates; single-block decoders only.
  Mat<T> evaluate_points(const InrParams<T>& params, const Mat<double>& points) const;

  InrGrads<T> backward(const InrParams<T>& params, const InrTrace<T>& trace, const Mat<T>& d_output) const;

  /// Converts effective-weight gradients into per-sample parameter
  /// gradients; W_s gradients are added into the shared params' grad.
  InrParams<T> param_grads(const InrParams<T>& params, const InrGrads<T>& grads, bool accumulate_shared);

 private:
  int flat_index(int block, int layer) const { return layer_offset_[block] + layer; }
  Mat<T> run_layers(const InrParams<T>& params, int block, Mat<T> x, bool final_block,
                    InrTrace<T>* trace, MacCounter* macs) const;

  InrArchitecture arch_;
  std::vector<int> layer_offset_;
  std::vector<Param<T>> shared_;
};

}  // namespace inrgan

#include "inrgan/inr_impl.hpp"
