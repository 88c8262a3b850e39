#pragma once

// Hypernetwork generator G: z -> residual MLP -> w -> linear head -> theta.

#include "inrgan/inr.hpp"
#include "inrgan/rng.hpp"
#include "inrgan/tensor.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace inrgan {

struct GeneratorConfig {
  int z_dim = 512;
  int hidden_dim = 1024;
  int num_layers = 3;             // nonlinear layers before the linear head
  double leaky_slope = kLeakySlope;
  double head_init_std = 1e-3;    // head weights start near zero
  double fourier_init_std = 10.0; // head bias of the frequency matrices
  double w_avg_decay = 0.995;

  void validate() const;
};

template <typename T>
struct MappingTrace {
  std::vector<Mat<T>> inputs;  // input of every nonlinear layer
  std::vector<Mat<T>> preacts;
  Mat<T> w;
};

template <typename T>
struct DecodeTrace {
  Mat<T> w;      // after truncation
  Mat<T> theta;  // batch x param_count
  std::vector<InrParams<T>> params;
  std::vector<InrTrace<T>> inr;
};

struct ParameterReport {
  Eigen::Index mapping = 0;
  Eigen::Index head = 0;
  Eigen::Index shared = 0;
  Eigen::Index total() const { return mapping + head + shared; }
  double head_fraction() const { return total() ? static_cast<double>(head) / total() : 0.0; }
};

/// z ~ N(0, I), count x z_dim, deterministic in the seed.
template <typename T>
Mat<T> sample_latent(int count, int z_dim, std::uint64_t seed);

/// w' = mean + psi (w - mean), applied row-wise.
template <typename T>
Mat<T> truncate(const Mat<T>& w, T psi, const RowVec<T>& mean);

template <typename T>
class Generator {
 public:
  Generator(GeneratorConfig config, InrArchitecture arch, std::uint64_t seed);

  const GeneratorConfig& config() const { return config_; }
  const InrArchitecture& arch() const { return decoder_.arch(); }
  const InrDecoder<T>& decoder() const { return decoder_; }
  InrDecoder<T>& decoder() { return decoder_; }

  /// Penultimate representation w for a batch of latents (rows).
  Mat<T> map_latent(const Mat<T>& z, MappingTrace<T>* trace = nullptr, MacCounter* macs = nullptr) const;

  /// Flattened INR parameters for a batch of w (rows).
  Mat<T> generate_flat(const Mat<T>& w, MacCounter* macs = nullptr) const;
  InrParams<T> generate_params(const RowVec<T>& w) const;

  /// Batch of w -> images, optionally truncated towards the running mean.
  std::vector<Mat<T>> decode(const Mat<T>& w, const RenderPlan& plan, std::optional<T> psi = std::nullopt,
                             DecodeTrace<T>* trace = nullptr, MacCounter* macs = nullptr) const;

  /// map_latent -> (truncate) -> generate_params -> render.
  std::vector<Mat<T>> generate_images(const Mat<T>& z, std::optional<T> psi = std::nullopt) const;
  std::vector<Mat<T>> generate_images(const Mat<T>& z, const RenderPlan& plan, std::optional<T> psi) const;

  /// Backpropagates image gradients to w (returned, before truncation).
  /// When accumulate is set, head and shared-weight gradients are added.
  Mat<T> decode_backward(const DecodeTrace<T>& trace, const std::vector<Mat<T>>& d_images,
                         std::optional<T> psi, bool accumulate);
  /// Backpropagates dL/dw into the mapping network; returns dL/dz.
  Mat<T> mapping_backward(const MappingTrace<T>& trace, const Mat<T>& dw, bool accumulate);

  void update_w_average(const Mat<T>& w);
  RowVec<T> w_average() const { return w_avg_.value.row(0); }

  /// Mapping network and head (one optimizer group).
  ParamList<T> hyper_params();
  /// Shared INR matrices W_s (a separate optimizer group).
  ParamList<T> shared_params() { return decoder_.shared_params(); }
  /// Every stored array, including the running mean of w.
  ParamList<T> state_arrays();
  void zero_grad();

  ParameterReport parameter_report() const;

 private:
  void init_head_bias(Rng& rng);

  GeneratorConfig config_;
  InrDecoder<T> decoder_;
  std::vector<Param<T>> mapping_;  // weight, bias per layer (weights are in x out)
  Param<T> head_weight_;           // hidden x param_count
  Param<T> head_bias_;             // 1 x param_count
  Param<T> w_avg_;                 // 1 x hidden
};

}  // namespace inrgan
