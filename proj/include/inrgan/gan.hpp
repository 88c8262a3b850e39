#pragma once

// Adversarial objective: non-saturating logistic loss, R1 on real data,
// residual convolutional discriminator and Adam.

#include "inrgan/layers.hpp"
#include "inrgan/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace inrgan {

struct TrainConfig {
  double lr_g = 1e-5;
  double lr_shared = 5e-4;  // shared INR matrices W_s
  double lr_d = 3e-3;
  double adam_beta1 = 0.0;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-8;
  double r1_gamma = 10.0;
  int batch_size = 16;
  long total_steps = 3000;
  std::uint64_t seed = 0;
  int resolution = 32;
  long log_every = 1;
  long checkpoint_every = 500;
  long sample_every = 500;
  int sample_count = 16;

  void validate() const;
};

struct DiscriminatorSpec {
  int resolution = 32;
  int final_resolution = 4;
  std::vector<int> channels{32, 64, 128, 256};  // one entry per resolution from input down to final
  int fc_dim = 256;
  bool equalized_lr = true;

  int num_blocks() const;
  void validate() const;
};

// ---- losses ----------------------------------------------------------------

/// mean softplus(-real) + mean softplus(fake)
template <typename T>
T d_logistic_loss(const Vec<T>& real_logits, const Vec<T>& fake_logits);
/// mean softplus(-fake)
template <typename T>
T g_nonsaturating_loss(const Vec<T>& fake_logits);

template <typename T>
Vec<T> d_logistic_grad_real(const Vec<T>& real_logits);  // -sigmoid(-real) / n
template <typename T>
Vec<T> d_logistic_grad_fake(const Vec<T>& fake_logits);  // sigmoid(fake) / n
template <typename T>
Vec<T> g_nonsaturating_grad(const Vec<T>& fake_logits);  // -sigmoid(-fake) / n

// ---- discriminator -----------------------------------------------------------

template <typename T>
class Discriminator {
 public:
  Discriminator(const DiscriminatorSpec& spec, std::uint64_t seed);
  /// Any network ending in a single-unit dense layer.
  explicit Discriminator(Sequential<T> net);

  Vec<T> forward(const Activations<T>& x);
  /// dL/dx for per-sample output seeds; caches what accumulate() needs.
  Activations<T> backward(const Vec<T>& seed);
  /// Jacobian-vector product of the logits along `direction`.
  Vec<T> tangent(const Activations<T>& direction);
  /// Adds sum_i s_i dD(x_i)/dtheta + c * sum_i d<grad_x D(x_i), t_i>/dtheta
  /// (t fixed) to the parameter gradients; backward must have been seeded
  /// with ones.
  void accumulate_grads(const std::vector<T>& sample_weights, T tangent_weight);

  ParamList<T> params();
  void zero_grad();
  std::string describe() const { return net_.describe(); }

 private:
  Sequential<T> net_;
};

template <typename T>
struct R1Result {
  T penalty = T(0);
  Activations<T> input_grads;
  Vec<T> logits;
};

/// (gamma / 2) mean_i ||grad_x D(x_i)||^2. Leaves D primed for
/// accumulate_grads (forward and unit-seed backward on the batch).
template <typename T>
R1Result<T> r1_penalty(Discriminator<T>& d, const Activations<T>& real, T gamma);

/// Parameter gradient of r1_penalty (plus optionally the real-logit loss
/// with per-sample weights s) added to D's grads. Runs the tangent pass.
template <typename T>
void r1_accumulate(Discriminator<T>& d, const R1Result<T>& r1, T gamma, const std::vector<T>& sample_weights);

// ---- optimizer ---------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.0;
  double beta2 = 0.98;
  double eps = 1e-8;
};

/// Adam with bias correction over one parameter group.
template <typename T>
class Adam {
 public:
  Adam(std::string group, ParamList<T> params, AdamConfig config);

  void step();
  void set_lr(double lr) { config_.lr = lr; }
  const AdamConfig& config() const { return config_; }
  const std::string& group() const { return group_; }
  long steps() const { return t_; }

  /// First and second moments plus a 1x1 step counter.
  ParamList<T> state_arrays();
  /// Re-reads the step counter after state arrays were overwritten.
  void sync_from_state();

 private:
  std::string group_;
  ParamList<T> params_;
  AdamConfig config_;
  std::vector<Param<T>> m_;
  std::vector<Param<T>> v_;
  Param<T> counter_;
  long t_ = 0;
};

}  // namespace inrgan
