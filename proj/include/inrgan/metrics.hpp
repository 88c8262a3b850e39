#pragma once

#include "inrgan/hypernet.hpp"
#include "inrgan/image.hpp"
#include "inrgan/layers.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace inrgan {

// ---- Frechet distance ----------------------------------------------------------

struct FeatureStats {
  Vec<double> mean;
  Mat<double> covariance;  // unbiased, symmetrized
  long sample_count = 0;
};

/// Rows are samples. Needs at least two rows.
FeatureStats feature_stats(const Mat<double>& features);

/// ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2)). The square root trace is
/// taken from the eigenvalues of S1^(1/2) S2 S1^(1/2); negative eigenvalues
/// are clipped to zero as long as their total mass stays below 1e-6 of the
/// trace, otherwise NumericalStabilityError.
double frechet_distance(const FeatureStats& a, const FeatureStats& b);

/// Frozen random convolutional network: four 3x3 conv + leaky ReLU layers
/// (pooling between them) and global average pooling to `dim` features.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(std::uint64_t seed, int dim = 128);

  Mat<double> features(const std::vector<Image>& images);
  /// Features of one image and the gradient of <features, seed> w.r.t. the
  /// pixels.
  RowVec<double> features_with_grad(const Image& image, const RowVec<double>& seed, Mat<float>* d_pixels);
  int dim() const { return dim_; }

 private:
  int dim_;
  Sequential<float> net_;
};

constexpr int kMinFidSamples = 64;

double fid_proxy(const std::vector<Image>& real, const std::vector<Image>& fake, std::uint64_t extractor_seed);

enum class Upsampler { nearest, bilinear, bicubic, inr_superres };

/// Dense re-evaluation of generated images: the same w rendered on a
/// factor-times denser final grid.
struct SuperresSource {
  const Generator<float>* generator = nullptr;
  Mat<float> w;
  std::optional<float> psi;
};

std::vector<Image> upsample_images(const std::vector<Image>& images, int factor, Upsampler mode,
                                   const SuperresSource* source = nullptr);

/// FID-proxy between real_hi and fake_lo upsampled to the real resolution.
double upsampled_fid(const std::vector<Image>& real_hi, const std::vector<Image>& fake_lo, Upsampler mode,
                     std::uint64_t extractor_seed, const SuperresSource* source = nullptr);

// ---- KPL -----------------------------------------------------------------------

using KeypointOracle = std::function<RowVec<double>(const Image&)>;

enum class LatentSpace { z, w };

struct KplResult {
  double kpl_value = 0;   // held-out MSE of latent -> keypoints OLS
  double kpl_random = 0;  // same with training latents shuffled
  double target_variance = 0;
  bool regularized = false;  // ridge fallback used
  int n_train = 0;
  int n_test = 0;
  std::string metric = "mse";
};

/// OLS with intercept on the training pairs, MSE on the test pairs. A
/// rank-deficient design falls back to ridge 1e-6 and sets `regularized`.
KplResult kpl_fit(const Mat<double>& x_train, const Mat<double>& y_train, const Mat<double>& x_test,
                  const Mat<double>& y_test, std::uint64_t shuffle_seed);

KplResult kpl(const Generator<float>& generator, const KeypointOracle& oracle, int n_train, int n_test,
              LatentSpace space, std::uint64_t seed, std::optional<float> psi = std::nullopt);

// ---- MACs ----------------------------------------------------------------------

struct LayerMacs {
  int block = 0;
  int layer = 0;
  int resolution = 0;
  int n_in = 0;
  int n_out = 0;
  std::uint64_t macs = 0;
};

struct MacReport {
  int resolution = 0;
  std::vector<LayerMacs> layers;
  std::vector<std::uint64_t> fourier;       // per block
  std::vector<std::uint64_t> block_totals;  // layers + Fourier per block
  std::uint64_t mapping = 0;
  std::uint64_t head = 0;
  std::uint64_t modulation = 0;
  std::uint64_t hypernetwork = 0;  // mapping + head + modulation, resolution independent
  std::uint64_t total = 0;
};

/// Analytic cost of generating one image at `resolution`: below the native
/// resolution every block is scaled down (floor, min 1); an integer multiple
/// above it densifies the final block.
MacReport count_macs(const InrArchitecture& arch, const GeneratorConfig& gen, int resolution);
RenderPlan plan_for_resolution(const InrArchitecture& arch, int resolution);

std::string mac_report_csv(const std::vector<MacReport>& reports);

// ---- projection ----------------------------------------------------------------

struct ProjectionOptions {
  int steps = 100;
  double lr = 0.02;
  bool line_search = false;     // backtracking gradient descent, nonincreasing loss
  double feature_weight = 0.0;  // optional extractor feature loss
  std::uint64_t extractor_seed = 7;
  std::optional<RowVec<float>> init;  // defaults to the running mean of w
};

struct ProjectionResult {
  RowVec<float> w;
  std::vector<double> losses;  // loss at the start of each step, then the final loss
  double best_loss = 0;
};

/// Minimizes pixel MSE (+ feature loss) over w. Throws NanAbortError carrying
/// the loss history on divergence.
ProjectionResult project_latent(Generator<float>& generator, const Image& target, const ProjectionOptions& options);

// ---- reports -------------------------------------------------------------------

struct MetricRow {
  std::string metric;
  double value = 0;
};

/// CSV with columns metric,value,config_hash,seed.
std::string metric_csv(const std::vector<MetricRow>& rows, const std::string& config_hash, std::uint64_t seed);

}  // namespace inrgan
