#include "inrgan/gan.hpp"

#include "inrgan/errors.hpp"
#include "inrgan/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace inrgan {

void TrainConfig::validate() const {
  // Zero freezes a group.
  if (!(lr_g >= 0 && lr_shared >= 0 && lr_d >= 0)) throw std::invalid_argument("train: learning rates must be non-negative");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1)) {
    throw std::invalid_argument("train: Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0)) throw std::invalid_argument("train: adam_eps must be positive");
  if (!(r1_gamma >= 0)) throw std::invalid_argument("train: r1_gamma must be non-negative");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be positive");
  if (total_steps < 0) throw std::invalid_argument("train: total_steps must be non-negative");
  if (resolution < 1) throw std::invalid_argument("train: resolution must be positive");
  if (log_every < 1 || checkpoint_every < 0 || sample_every < 0 || sample_count < 1) {
    throw std::invalid_argument("train: invalid logging or checkpoint cadence");
  }
}

int DiscriminatorSpec::num_blocks() const {
  int n = 0;
  for (int r = resolution; r > final_resolution; r /= 2) ++n;
  return n;
}

void DiscriminatorSpec::validate() const {
  if (resolution < 1 || final_resolution < 1 || resolution < final_resolution) {
    throw std::invalid_argument("discriminator: invalid resolutions");
  }
  int r = resolution;
  while (r > final_resolution) {
    if (r % 2 != 0) throw std::invalid_argument("discriminator: resolution must halve down to final_resolution");
    r /= 2;
  }
  if (r != final_resolution) throw std::invalid_argument("discriminator: resolution must halve down to final_resolution");
  if (static_cast<int>(channels.size()) != num_blocks() + 1) {
    throw std::invalid_argument("discriminator: need " + std::to_string(num_blocks() + 1) + " channel entries");
  }
  for (int c : channels) {
    if (c < 1) throw std::invalid_argument("discriminator: channels must be positive");
  }
  if (fc_dim < 1) throw std::invalid_argument("discriminator: fc_dim must be positive");
}

// ---- losses ----------------------------------------------------------------

template <typename T>
T d_logistic_loss(const Vec<T>& real, const Vec<T>& fake) {
  if (real.size() == 0 || fake.size() == 0) throw std::invalid_argument("d_logistic_loss: empty logits");
  T a = 0, b = 0;
  for (Eigen::Index i = 0; i < real.size(); ++i) a += softplus(-real[i]);
  for (Eigen::Index i = 0; i < fake.size(); ++i) b += softplus(fake[i]);
  return a / static_cast<T>(real.size()) + b / static_cast<T>(fake.size());
}

template <typename T>
T g_nonsaturating_loss(const Vec<T>& fake) {
  if (fake.size() == 0) throw std::invalid_argument("g_nonsaturating_loss: empty logits");
  T a = 0;
  for (Eigen::Index i = 0; i < fake.size(); ++i) a += softplus(-fake[i]);
  return a / static_cast<T>(fake.size());
}

template <typename T>
Vec<T> d_logistic_grad_real(const Vec<T>& real) {
  const T n = static_cast<T>(real.size());
  return real.unaryExpr([n](T v) { return -sigmoid(-v) / n; });
}

template <typename T>
Vec<T> d_logistic_grad_fake(const Vec<T>& fake) {
  const T n = static_cast<T>(fake.size());
  return fake.unaryExpr([n](T v) { return sigmoid(v) / n; });
}

template <typename T>
Vec<T> g_nonsaturating_grad(const Vec<T>& fake) {
  return d_logistic_grad_real(fake);
}

// ---- discriminator -----------------------------------------------------------

namespace {

template <typename T>
Sequential<T> build_discriminator(const DiscriminatorSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng = make_rng(seed, Stream::init, 1);
  const LinearInit act{std::sqrt(2.0), spec.equalized_lr};
  const LinearInit lin{1.0, spec.equalized_lr};
  Sequential<T> net;
  net.add(std::make_unique<Conv2d<T>>("d.from_rgb", 3, spec.channels[0], 1, true, act, &rng));
  net.add(std::make_unique<LeakyRelu<T>>());
  for (int b = 0; b < spec.num_blocks(); ++b) {
    net.add(std::make_unique<ResBlock<T>>("d.block" + std::to_string(b), spec.channels[b], spec.channels[b + 1],
                                          spec.equalized_lr, &rng));
  }
  const int c = spec.channels.back();
  net.add(std::make_unique<Conv2d<T>>("d.epilogue.conv", c, c, 3, true, act, &rng));
  net.add(std::make_unique<LeakyRelu<T>>());
  net.add(std::make_unique<Flatten<T>>());
  const int flat = c * spec.final_resolution * spec.final_resolution;
  net.add(std::make_unique<Dense<T>>("d.epilogue.fc", flat, spec.fc_dim, true, act, &rng));
  net.add(std::make_unique<LeakyRelu<T>>());
  net.add(std::make_unique<Dense<T>>("d.out", spec.fc_dim, 1, true, lin, &rng));
  return net;
}

}  // namespace

template <typename T>
Discriminator<T>::Discriminator(const DiscriminatorSpec& spec, std::uint64_t seed)
    : net_(build_discriminator<T>(spec, seed)) {}

template <typename T>
Discriminator<T>::Discriminator(Sequential<T> net) : net_(std::move(net)) {}

template <typename T>
Vec<T> Discriminator<T>::forward(const Activations<T>& x) {
  const Activations<T> y = net_.forward(x);
  if (y.channels != 1 || y.data.rows() != x.batch) throw InvalidStateError("discriminator must emit one logit per image");
  return y.data.col(0);
}

template <typename T>
Activations<T> Discriminator<T>::backward(const Vec<T>& seed) {
  Activations<T> dy(static_cast<int>(seed.size()), 1, 1, 1);
  dy.data.col(0) = seed;
  return net_.backward(dy);
}

template <typename T>
Vec<T> Discriminator<T>::tangent(const Activations<T>& direction) {
  return net_.tangent(direction).data.col(0);
}

template <typename T>
void Discriminator<T>::accumulate_grads(const std::vector<T>& s, T c) {
  net_.accumulate_grads(s, c);
}

template <typename T>
ParamList<T> Discriminator<T>::params() {
  ParamList<T> out;
  net_.collect_params(out);
  return out;
}

template <typename T>
void Discriminator<T>::zero_grad() {
  for (auto* p : params()) p->zero_grad();
}

template <typename T>
R1Result<T> r1_penalty(Discriminator<T>& d, const Activations<T>& real, T gamma) {
  R1Result<T> r;
  r.logits = d.forward(real);
  r.input_grads = d.backward(Vec<T>::Ones(real.batch));
  const T sq = r.input_grads.data.squaredNorm();
  r.penalty = gamma / T(2) * sq / static_cast<T>(real.batch);
  return r;
}

template <typename T>
void r1_accumulate(Discriminator<T>& d, const R1Result<T>& r1, T gamma, const std::vector<T>& s) {
  const T c = gamma / static_cast<T>(r1.input_grads.batch);
  if (c != T(0)) d.tangent(r1.input_grads);
  d.accumulate_grads(s, c);
}

// ---- Adam --------------------------------------------------------------------

template <typename T>
Adam<T>::Adam(std::string group, ParamList<T> params, AdamConfig config)
    : group_(std::move(group)), params_(std::move(params)), config_(config) {
  for (auto* p : params_) {
    m_.emplace_back("adam." + group_ + "." + p->name + ".m", Mat<T>(Mat<T>::Zero(p->value.rows(), p->value.cols())));
    v_.emplace_back("adam." + group_ + "." + p->name + ".v", Mat<T>(Mat<T>::Zero(p->value.rows(), p->value.cols())));
  }
  counter_ = Param<T>("adam." + group_ + ".step", Mat<T>(Mat<T>::Zero(1, 1)));
}

template <typename T>
void Adam<T>::step() {
  ++t_;
  counter_.value(0, 0) = static_cast<T>(t_);
  const double b1 = config_.beta1, b2 = config_.beta2;
  const T c1 = static_cast<T>(1.0 - std::pow(b1, static_cast<double>(t_)));
  const T c2 = static_cast<T>(1.0 - std::pow(b2, static_cast<double>(t_)));
  const T lr = static_cast<T>(config_.lr);
  const T eps = static_cast<T>(config_.eps);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& g = params_[i]->grad;
    auto& m = m_[i].value;
    auto& v = v_[i].value;
    m = static_cast<T>(b1) * m + static_cast<T>(1.0 - b1) * g;
    v = static_cast<T>(b2) * v + static_cast<T>(1.0 - b2) * g.cwiseAbs2();
    if (lr == T(0)) continue;
    params_[i]->value.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
}

template <typename T>
ParamList<T> Adam<T>::state_arrays() {
  ParamList<T> out;
  for (auto& p : m_) out.push_back(&p);
  for (auto& p : v_) out.push_back(&p);
  out.push_back(&counter_);
  return out;
}

template <typename T>
void Adam<T>::sync_from_state() {
  t_ = std::lround(static_cast<double>(counter_.value(0, 0)));
}

#define INRGAN_GAN(T)                                                                       \
  template T d_logistic_loss<T>(const Vec<T>&, const Vec<T>&);                              \
  template T g_nonsaturating_loss<T>(const Vec<T>&);                                        \
  template Vec<T> d_logistic_grad_real<T>(const Vec<T>&);                                   \
  template Vec<T> d_logistic_grad_fake<T>(const Vec<T>&);                                   \
  template Vec<T> g_nonsaturating_grad<T>(const Vec<T>&);                                   \
  template class Discriminator<T>;                                                          \
  template R1Result<T> r1_penalty<T>(Discriminator<T>&, const Activations<T>&, T);          \
  template void r1_accumulate<T>(Discriminator<T>&, const R1Result<T>&, T, const std::vector<T>&); \
  template class Adam<T>;

INRGAN_GAN(float)
INRGAN_GAN(double)

}  // namespace inrgan
