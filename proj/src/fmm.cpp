#include "inrgan/fmm.hpp"

#include "inrgan/errors.hpp"

#include <stdexcept>

namespace inrgan {

namespace {

std::string dims(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

template <typename T>
void check_factors(const FmmLayerSpec<T>& spec, const FmmFactors<T>& f) {
  if (f.A.rows() != spec.n_out || f.A.cols() != spec.rank || f.B.rows() != spec.rank ||
      f.B.cols() != spec.n_in) {
    throw std::invalid_argument("fmm: factor shapes A " + dims(f.A.rows(), f.A.cols()) + ", B " +
                                dims(f.B.rows(), f.B.cols()) + " do not match layer " +
                                std::to_string(spec.n_out) + "x" + std::to_string(spec.n_in) +
                                " rank " + std::to_string(spec.rank));
  }
}

}  // namespace

template <typename T>
void FmmLayerSpec<T>::validate() const {
  if (n_in < 1 || n_out < 1) throw std::invalid_argument("fmm: layer dimensions must be positive");
  if (direct) return;
  if (rank < 1 || rank > std::min(n_in, n_out)) {
    throw std::invalid_argument("fmm: rank " + std::to_string(rank) + " outside [1, " +
                                std::to_string(std::min(n_in, n_out)) + "]");
  }
  if (shared_weight.rows() != n_out || shared_weight.cols() != n_in) {
    throw std::invalid_argument("fmm: shared weight is " +
                                dims(shared_weight.rows(), shared_weight.cols()) + ", expected " +
                                dims(n_out, n_in));
  }
}

template <typename T>
Mat<T> modulate(const FmmLayerSpec<T>& spec, const FmmFactors<T>& factors) {
  if (spec.direct) throw std::invalid_argument("modulate: layer is generated directly");
  spec.validate();
  check_factors(spec, factors);
  const Mat<T> h = factors.A * factors.B;
  if (spec.activation == Modulation::identity) return spec.shared_weight.cwiseProduct(h);
  return spec.shared_weight.cwiseProduct(h.unaryExpr([](T v) { return sigmoid(v); }));
}

template <typename T>
ModulateGrads<T> modulate_backward(const FmmLayerSpec<T>& spec, const FmmFactors<T>& factors,
                                   const Mat<T>& dW) {
  check_factors(spec, factors);
  if (dW.rows() != spec.n_out || dW.cols() != spec.n_in) {
    throw std::invalid_argument("modulate_backward: gradient shape mismatch");
  }
  const Mat<T> h = factors.A * factors.B;
  ModulateGrads<T> g;
  Mat<T> dH;
  if (spec.activation == Modulation::identity) {
    g.dShared = dW.cwiseProduct(h);
    dH = dW.cwiseProduct(spec.shared_weight);
  } else {
    const Mat<T> s = h.unaryExpr([](T v) { return sigmoid(v); });
    g.dShared = dW.cwiseProduct(s);
    dH = dW.cwiseProduct(spec.shared_weight)
             .cwiseProduct(s.cwiseProduct((Mat<T>::Ones(s.rows(), s.cols()) - s)));
  }
  g.dA = dH * factors.B.transpose();
  g.dB = factors.A.transpose() * dH;
  return g;
}

template <typename T>
Mat<T> apply_affine(const Mat<T>& weight, const RowVec<T>& bias, const Mat<T>& inputs) {
  if (inputs.cols() != weight.cols() || bias.size() != weight.rows()) {
    throw std::invalid_argument("apply_affine: inputs have " + std::to_string(inputs.cols()) +
                                " columns, weight is " + dims(weight.rows(), weight.cols()) +
                                ", bias " + std::to_string(bias.size()));
  }
  Mat<T> out(inputs.rows(), weight.rows());
  out.noalias() = inputs * weight.transpose();
  out.rowwise() += bias;
  return out;
}

template <typename T>
AffineGrads<T> apply_affine_backward(const Mat<T>& weight, const Mat<T>& inputs, const Mat<T>& dOut,
                                     bool want_inputs) {
  if (dOut.cols() != weight.rows() || inputs.cols() != weight.cols() ||
      dOut.rows() != inputs.rows()) {
    throw std::invalid_argument("apply_affine_backward: shape mismatch");
  }
  AffineGrads<T> g;
  g.dWeight.noalias() = dOut.transpose() * inputs;
  g.dBias = dOut.colwise().sum();
  if (want_inputs) g.dInputs.noalias() = dOut * weight;
  return g;
}

template <typename T>
FmmFactors<T> simulate_direct_hypernet(const FmmLayerSpec<T>& spec, const Mat<T>& target) {
  const int full = std::min(spec.n_in, spec.n_out);
  if (spec.rank < full) {
    throw UnsupportedRankError("simulate_direct_hypernet: rank " + std::to_string(spec.rank) +
                               " cannot represent an arbitrary " + dims(spec.n_out, spec.n_in) +
                               " matrix; need rank " + std::to_string(full));
  }
  if (spec.rank > full) {
    throw std::invalid_argument("simulate_direct_hypernet: rank exceeds min(n_in, n_out)");
  }
  if (target.rows() != spec.n_out || target.cols() != spec.n_in) {
    throw std::invalid_argument("simulate_direct_hypernet: target is " +
                                dims(target.rows(), target.cols()) + ", expected " +
                                dims(spec.n_out, spec.n_in));
  }
  FmmFactors<T> f;
  if (spec.n_out <= spec.n_in) {
    f.A = Mat<T>::Identity(spec.n_out, spec.rank);
    f.B = target;
  } else {
    f.A = target;
    f.B = Mat<T>::Identity(spec.rank, spec.n_in);
  }
  f.bias = RowVec<T>::Zero(spec.n_out);
  if (!((f.A * f.B).array() == target.array()).all()) {
    throw std::logic_error("simulate_direct_hypernet: reconstruction is not exact");
  }
  return f;
}

#define INRGAN_INSTANTIATE_FMM(T)                                                               \
  template struct FmmLayerSpec<T>;                                                              \
  template Mat<T> modulate(const FmmLayerSpec<T>&, const FmmFactors<T>&);                       \
  template ModulateGrads<T> modulate_backward(const FmmLayerSpec<T>&, const FmmFactors<T>&,     \
                                              const Mat<T>&);                                   \
  template Mat<T> apply_affine(const Mat<T>&, const RowVec<T>&, const Mat<T>&);                 \
  template AffineGrads<T> apply_affine_backward(const Mat<T>&, const Mat<T>&, const Mat<T>&,    \
                                                bool);                                          \
  template FmmFactors<T> simulate_direct_hypernet(const FmmLayerSpec<T>&, const Mat<T>&);

INRGAN_INSTANTIATE_FMM(float)
INRGAN_INSTANTIATE_FMM(double)

}  // namespace inrgan
