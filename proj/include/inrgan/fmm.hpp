#pragma once

// Factorized Multiplicative Modulation: W = W_s (.) act(A x B).

#include "inrgan/tensor.hpp"

namespace inrgan {

enum class Modulation { sigmoid, identity };

template <typename T>
struct FmmLayerSpec {
  int n_in = 0;
  int n_out = 0;
  int rank = 0;
  Modulation activation = Modulation::sigmoid;
  bool direct = false;
  Mat<T> shared_weight;  // n_out x n_in, unused when direct

  /// Throws std::invalid_argument on inconsistent dimensions or rank.
  void validate() const;
};

template <typename T>
struct FmmFactors {
  Mat<T> A;       // n_out x rank
  Mat<T> B;       // rank x n_in
  RowVec<T> bias; // n_out
};

template <typename T>
struct ModulateGrads {
  Mat<T> dA;
  Mat<T> dB;
  Mat<T> dShared;
};

template <typename T>
struct AffineGrads {
  Mat<T> dWeight;
  RowVec<T> dBias;
  Mat<T> dInputs;
};

template <typename T>
T modulation_value(Modulation m, T h) {
  return m == Modulation::sigmoid ? sigmoid(h) : h;
}

/// W = shared_weight (.) act(A B).
template <typename T>
Mat<T> modulate(const FmmLayerSpec<T>& spec, const FmmFactors<T>& factors);

/// Vector-Jacobian product of modulate for an upstream gradient dW.
template <typename T>
ModulateGrads<T> modulate_backward(const FmmLayerSpec<T>& spec, const FmmFactors<T>& factors,
                                   const Mat<T>& dW);

/// Row-wise W x + bias over a table of inputs (rows x n_in), i.e. a 1x1
/// convolution over pixels.
template <typename T>
Mat<T> apply_affine(const Mat<T>& weight, const RowVec<T>& bias, const Mat<T>& inputs);

/// Gradients of apply_affine. Pass want_inputs = false to skip dInputs.
template <typename T>
AffineGrads<T> apply_affine_backward(const Mat<T>& weight, const Mat<T>& inputs,
                                     const Mat<T>& dOut, bool want_inputs = true);

/// Factors with A x B == target for a rank-min(n_in, n_out) spec: the
/// square factor is the identity and the other one carries the target.
/// Throws UnsupportedRankError if spec.rank < min(n_in, n_out).
template <typename T>
FmmFactors<T> simulate_direct_hypernet(const FmmLayerSpec<T>& spec, const Mat<T>& target);

}  // namespace inrgan
