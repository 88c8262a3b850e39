#include "inrgan/hypernet.hpp"

#include "inrgan/errors.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace inrgan {

void GeneratorConfig::validate() const {
  if (z_dim < 1 || hidden_dim < 1 || num_layers < 1) {
    throw std::invalid_argument("generator: z_dim, hidden_dim and num_layers must be positive");
  }
  if (head_init_std < 0 || fourier_init_std < 0) throw std::invalid_argument("generator: negative init std");
  if (!(w_avg_decay >= 0 && w_avg_decay <= 1)) throw std::invalid_argument("generator: w_avg_decay outside [0, 1]");
}

template <typename T>
Mat<T> sample_latent(int count, int z_dim, std::uint64_t seed) {
  if (count < 1 || z_dim < 1) throw std::invalid_argument("sample_latent: count and z_dim must be positive");
  Rng rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Mat<T> z(count, z_dim);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = static_cast<T>(dist(rng));
  return z;
}

template <typename T>
Mat<T> truncate(const Mat<T>& w, T psi, const RowVec<T>& mean) {
  if (w.cols() != mean.size()) throw std::invalid_argument("truncate: w and mean dimensions differ");
  Mat<T> out = (w * psi);
  out.rowwise() += (T(1) - psi) * mean;
  return out;
}

namespace {

template <typename T, typename Gen>
void fill_normal(Mat<T>& m, double std, Gen& rng) {
  std::normal_distribution<double> dist(0.0, std);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std > 0 ? static_cast<T>(dist(rng)) : T(0);
}

}  // namespace

template <typename T>
Generator<T>::Generator(GeneratorConfig config, InrArchitecture arch, std::uint64_t seed)
    : config_(std::move(config)), decoder_(std::move(arch)) {
  config_.validate();
  Rng rng = make_rng(seed, Stream::init);
  decoder_.init_shared(rng);
  int in = config_.z_dim;
  for (int l = 0; l < config_.num_layers; ++l) {
    Mat<T> w(in, config_.hidden_dim);
    fill_normal(w, std::sqrt(2.0 / in), rng);
    mapping_.emplace_back("mapping.layer" + std::to_string(l) + ".weight", std::move(w));
    mapping_.emplace_back("mapping.layer" + std::to_string(l) + ".bias", Mat<T>(Mat<T>::Zero(1, config_.hidden_dim)));
    in = config_.hidden_dim;
  }
  const Eigen::Index p = param_count(decoder_.arch());
  Mat<T> hw(config_.hidden_dim, p);
  fill_normal(hw, config_.head_init_std, rng);
  head_weight_ = Param<T>("head.weight", std::move(hw));
  head_bias_ = Param<T>("head.bias", Mat<T>(Mat<T>::Zero(1, p)));
  init_head_bias(rng);
  w_avg_ = Param<T>("mapping.w_avg", Mat<T>(Mat<T>::Zero(1, config_.hidden_dim)));
}

template <typename T>
void Generator<T>::init_head_bias(Rng& rng) {
  // Frequencies and directly generated weights get a sample-independent
  // starting point through the bias; factors and biases start at zero so
  // every modulated weight starts at 0.5 * W_s.
  for (const auto& seg : param_layout(decoder_.arch())) {
    double std = 0.0;
    if (seg.kind == ParamSegment::Kind::frequencies) std = config_.fourier_init_std;
    if (seg.kind == ParamSegment::Kind::weight) std = std::sqrt(2.0 / seg.cols);
    if (std == 0.0) continue;
    std::normal_distribution<double> dist(0.0, std);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(seg.rows) * seg.cols; ++i) {
      head_bias_.value(0, seg.offset + i) = static_cast<T>(dist(rng));
    }
  }
}

template <typename T>
Mat<T> Generator<T>::map_latent(const Mat<T>& z, MappingTrace<T>* trace, MacCounter* macs) const {
  if (z.cols() != config_.z_dim) {
    throw std::invalid_argument("map_latent: expected z of dimension " + std::to_string(config_.z_dim));
  }
  if (!z.allFinite()) throw std::invalid_argument("map_latent: z must be finite");
  const T slope = static_cast<T>(config_.leaky_slope);
  const T residual_scale = static_cast<T>(1.0 / std::sqrt(2.0));
  if (trace != nullptr) *trace = MappingTrace<T>{};
  Mat<T> h = z;
  for (int l = 0; l < config_.num_layers; ++l) {
    const auto& w = mapping_[2 * l].value;
    const auto& b = mapping_[2 * l + 1].value;
    Mat<T> pre(h.rows(), w.cols());
    pre.noalias() = h * w;
    pre.rowwise() += b.row(0);
    if (macs != nullptr) macs->mapping += static_cast<std::uint64_t>(h.rows()) * w.rows() * w.cols();
    Mat<T> act = pre.unaryExpr([slope](T v) { return leaky_relu(v, slope); });
    Mat<T> next = l == 0 ? std::move(act) : Mat<T>((h + act) * residual_scale);
    if (trace != nullptr) {
      trace->inputs.push_back(std::move(h));
      trace->preacts.push_back(std::move(pre));
    }
    h = std::move(next);
  }
  if (trace != nullptr) trace->w = h;
  return h;
}

template <typename T>
Mat<T> Generator<T>::generate_flat(const Mat<T>& w, MacCounter* macs) const {
  if (w.cols() != config_.hidden_dim) throw InvalidStateError("generate_params: w dimension does not match the head");
  if (head_weight_.value.cols() != param_count(decoder_.arch())) {
    throw InvalidStateError("generate_params: head width does not match the INR architecture");
  }
  Mat<T> theta(w.rows(), head_weight_.value.cols());
  theta.noalias() = w * head_weight_.value;
  theta.rowwise() += head_bias_.value.row(0);
  if (macs != nullptr) {
    macs->head += static_cast<std::uint64_t>(w.rows()) * head_weight_.value.rows() * head_weight_.value.cols();
  }
  return theta;
}

template <typename T>
InrParams<T> Generator<T>::generate_params(const RowVec<T>& w) const {
  const Mat<T> theta = generate_flat(Mat<T>(w));
  return unflatten_params<T>(decoder_.arch(), theta.data(), theta.size());
}

template <typename T>
std::vector<Mat<T>> Generator<T>::decode(const Mat<T>& w, const RenderPlan& plan, std::optional<T> psi,
                                         DecodeTrace<T>* trace, MacCounter* macs) const {
  Mat<T> w_used = psi ? truncate(w, *psi, w_average()) : w;
  Mat<T> theta = generate_flat(w_used, macs);
  const auto& arch = decoder_.arch();
  std::vector<Mat<T>> images;
  images.reserve(theta.rows());
  if (trace != nullptr) {
    trace->params.clear();
    trace->inr.assign(theta.rows(), InrTrace<T>{});
  }
  for (Eigen::Index i = 0; i < theta.rows(); ++i) {
    const RowVec<T> row = theta.row(i);
    InrParams<T> params = unflatten_params<T>(arch, row.data(), row.size());
    images.push_back(decoder_.render(params, plan, trace ? &trace->inr[i] : nullptr, macs));
    if (trace != nullptr) trace->params.push_back(std::move(params));
  }
  if (trace != nullptr) {
    trace->w = std::move(w_used);
    trace->theta = std::move(theta);
  }
  return images;
}

template <typename T>
std::vector<Mat<T>> Generator<T>::generate_images(const Mat<T>& z, std::optional<T> psi) const {
  return generate_images(z, plan_native(decoder_.arch()), psi);
}

template <typename T>
std::vector<Mat<T>> Generator<T>::generate_images(const Mat<T>& z, const RenderPlan& plan,
                                                  std::optional<T> psi) const {
  return decode(map_latent(z), plan, psi);
}

template <typename T>
Mat<T> Generator<T>::decode_backward(const DecodeTrace<T>& trace, const std::vector<Mat<T>>& d_images,
                                     std::optional<T> psi, bool accumulate) {
  const Eigen::Index batch = trace.theta.rows();
  if (static_cast<Eigen::Index>(d_images.size()) != batch) {
    throw std::invalid_argument("decode_backward: expected one image gradient per sample");
  }
  const auto& arch = decoder_.arch();
  Mat<T> d_theta(batch, trace.theta.cols());
  for (Eigen::Index i = 0; i < batch; ++i) {
    const InrGrads<T> g = decoder_.backward(trace.params[i], trace.inr[i], d_images[i]);
    const InrParams<T> pg = decoder_.param_grads(trace.params[i], g, accumulate);
    flatten_params<T>(arch, pg, d_theta.row(i).data(), d_theta.cols());
  }
  if (accumulate) {
    head_weight_.grad.noalias() += trace.w.transpose() * d_theta;
    head_bias_.grad += d_theta.colwise().sum();
  }
  Mat<T> dw(batch, head_weight_.value.rows());
  dw.noalias() = d_theta * head_weight_.value.transpose();
  if (psi) dw *= *psi;
  return dw;
}

template <typename T>
Mat<T> Generator<T>::mapping_backward(const MappingTrace<T>& trace, const Mat<T>& dw, bool accumulate) {
  const T slope = static_cast<T>(config_.leaky_slope);
  const T residual_scale = static_cast<T>(1.0 / std::sqrt(2.0));
  Mat<T> dh = dw;
  for (int l = config_.num_layers; l-- > 0;) {
    const Mat<T>& pre = trace.preacts[l];
    Mat<T> d_act = l == 0 ? dh : Mat<T>(dh * residual_scale);
    Mat<T> d_pre = d_act.cwiseProduct(pre.unaryExpr([slope](T v) { return v > T(0) ? T(1) : slope; }));
    auto& w = mapping_[2 * l];
    auto& b = mapping_[2 * l + 1];
    if (accumulate) {
      w.grad.noalias() += trace.inputs[l].transpose() * d_pre;
      b.grad += d_pre.colwise().sum();
    }
    Mat<T> d_in(d_pre.rows(), w.value.rows());
    d_in.noalias() = d_pre * w.value.transpose();
    if (l > 0) d_in += dh * residual_scale;
    dh = std::move(d_in);
  }
  return dh;
}

template <typename T>
void Generator<T>::update_w_average(const Mat<T>& w) {
  if (w.cols() != w_avg_.value.cols() || w.rows() == 0) {
    throw std::invalid_argument("update_w_average: dimension mismatch");
  }
  const T decay = static_cast<T>(config_.w_avg_decay);
  const RowVec<T> mean = w.colwise().mean();
  w_avg_.value.row(0) = decay * w_avg_.value.row(0) + (T(1) - decay) * mean;
}

template <typename T>
ParamList<T> Generator<T>::hyper_params() {
  ParamList<T> out;
  for (auto& p : mapping_) out.push_back(&p);
  out.push_back(&head_weight_);
  out.push_back(&head_bias_);
  return out;
}

template <typename T>
ParamList<T> Generator<T>::state_arrays() {
  ParamList<T> out = hyper_params();
  for (auto* p : decoder_.shared_params()) out.push_back(p);
  out.push_back(&w_avg_);
  return out;
}

template <typename T>
void Generator<T>::zero_grad() {
  for (auto* p : hyper_params()) p->zero_grad();
  for (auto* p : shared_params()) p->zero_grad();
}

template <typename T>
ParameterReport Generator<T>::parameter_report() const {
  ParameterReport r;
  for (const auto& p : mapping_) r.mapping += p.size();
  r.head = head_weight_.size() + head_bias_.size();
  auto& self = const_cast<Generator<T>&>(*this);
  for (auto* p : self.decoder_.shared_params()) r.shared += p->size();
  return r;
}

template Mat<float> sample_latent<float>(int, int, std::uint64_t);
template Mat<double> sample_latent<double>(int, int, std::uint64_t);
template Mat<float> truncate<float>(const Mat<float>&, float, const RowVec<float>&);
template Mat<double> truncate<double>(const Mat<double>&, double, const RowVec<double>&);
template class Generator<float>;
template class Generator<double>;

}  // namespace inrgan
