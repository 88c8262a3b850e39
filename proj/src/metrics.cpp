#include "inrgan/metrics.hpp"

#include "inrgan/errors.hpp"
#include "inrgan/rng.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace inrgan {

FeatureStats feature_stats(const Mat<double>& features) {
  if (features.rows() < 2) throw std::invalid_argument("feature_stats: need at least two samples");
  FeatureStats s;
  s.sample_count = static_cast<long>(features.rows());
  s.mean = features.colwise().mean().transpose();
  const Mat<double> centered = features.rowwise() - s.mean.transpose();
  Mat<double> cov = centered.transpose() * centered / static_cast<double>(features.rows() - 1);
  s.covariance = 0.5 * (cov + cov.transpose());
  return s;
}

namespace {

// Symmetric PSD square root; rejects negative mass beyond the tolerance.
Mat<double> psd_sqrt(const Mat<double>& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  if (es.info() != Eigen::Success) throw NumericalStabilityError(std::string(what) + ": eigendecomposition failed", 0.0);
  Eigen::VectorXd ev = es.eigenvalues();
  const double trace = ev.cwiseAbs().sum();
  double negative = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < 0) negative -= ev[i];
  }
  if (negative > 1e-6 * trace && negative > 1e-300) {
    throw NumericalStabilityError(std::string(what) + " is not positive semi-definite", ev.minCoeff());
  }
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const FeatureStats& a, const FeatureStats& b) {
  const Eigen::Index d = a.mean.size();
  if (b.mean.size() != d || a.covariance.rows() != d || a.covariance.cols() != d || b.covariance.rows() != d ||
      b.covariance.cols() != d) {
    throw std::invalid_argument("frechet_distance: dimension mismatch");
  }
  const Mat<double> s1 = 0.5 * (a.covariance + a.covariance.transpose());
  const Mat<double> s2 = 0.5 * (b.covariance + b.covariance.transpose());
  const Mat<double> r1 = psd_sqrt(s1, "covariance");
  psd_sqrt(s2, "covariance");
  const Mat<double> inner = r1 * s2 * r1;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalStabilityError("frechet_distance: eigendecomposition failed", 0.0);
  const Eigen::VectorXd ev = es.eigenvalues();
  const double mass = ev.cwiseAbs().sum();
  double negative = 0, sqrt_trace = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < 0) negative -= ev[i];
    else sqrt_trace += std::sqrt(ev[i]);
  }
  if (negative > 1e-6 * mass && negative > 1e-300) {
    throw NumericalStabilityError("frechet_distance: covariance product has negative spectrum", ev.minCoeff());
  }
  const double dist = (a.mean - b.mean).squaredNorm() + s1.trace() + s2.trace() - 2.0 * sqrt_trace;
  return std::max(dist, 0.0);
}

// ---- extractor -----------------------------------------------------------------

FeatureExtractor::FeatureExtractor(std::uint64_t seed, int dim) : dim_(dim) {
  if (dim < 1) throw std::invalid_argument("FeatureExtractor: dim must be positive");
  Rng rng = make_rng(seed, Stream::extractor);
  const LinearInit init{std::sqrt(2.0), false};
  const int widths[] = {3, 32, 64, 128, dim};
  for (int l = 0; l < 4; ++l) {
    if (l > 0) net_.add(std::make_unique<AvgPool2<float>>());
    net_.add(std::make_unique<Conv2d<float>>("fx.conv" + std::to_string(l), widths[l], widths[l + 1], 3, true, init, &rng));
    net_.add(std::make_unique<LeakyRelu<float>>());
  }
  net_.add(std::make_unique<GlobalAvgPool<float>>());
}

namespace {

Activations<float> centered_batch(const std::vector<Image>& images, std::size_t begin, std::size_t end) {
  const Image& first = images[begin];
  if (first.height % 8 != 0 || first.width % 8 != 0) {
    throw std::invalid_argument("feature extractor: image sides must be multiples of 8");
  }
  Activations<float> x(static_cast<int>(end - begin), first.height, first.width, 3);
  const Eigen::Index px = x.pixels();
  for (std::size_t i = begin; i < end; ++i) {
    const Image& im = images[i];
    if (im.height != first.height || im.width != first.width || im.channels() != 3) {
      throw std::invalid_argument("feature extractor: images differ in shape");
    }
    x.data.middleRows(static_cast<Eigen::Index>(i - begin) * px, px) = (im.data.array() * 2.0f - 1.0f).matrix();
  }
  return x;
}

}  // namespace

Mat<double> FeatureExtractor::features(const std::vector<Image>& images) {
  Mat<double> out(static_cast<Eigen::Index>(images.size()), dim_);
  constexpr std::size_t chunk = 64;
  for (std::size_t b = 0; b < images.size(); b += chunk) {
    const std::size_t e = std::min(images.size(), b + chunk);
    const Activations<float> y = net_.forward(centered_batch(images, b, e));
    out.middleRows(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e - b)) = y.data.cast<double>();
  }
  return out;
}

RowVec<double> FeatureExtractor::features_with_grad(const Image& image, const RowVec<double>& seed, Mat<float>* d_pixels) {
  const std::vector<Image> one{image};
  const Activations<float> y = net_.forward(centered_batch(one, 0, 1));
  if (d_pixels != nullptr) {
    Activations<float> dy(1, 1, 1, dim_);
    dy.data.row(0) = seed.cast<float>();
    *d_pixels = 2.0f * net_.backward(dy).data;
  }
  return y.data.row(0).cast<double>();
}

double fid_proxy(const std::vector<Image>& real, const std::vector<Image>& fake, std::uint64_t extractor_seed) {
  if (static_cast<int>(real.size()) < kMinFidSamples || static_cast<int>(fake.size()) < kMinFidSamples) {
    throw std::invalid_argument("fid_proxy: need at least " + std::to_string(kMinFidSamples) + " images per side");
  }
  FeatureExtractor fx(extractor_seed);
  return frechet_distance(feature_stats(fx.features(real)), feature_stats(fx.features(fake)));
}

std::vector<Image> upsample_images(const std::vector<Image>& images, int factor, Upsampler mode,
                                   const SuperresSource* source) {
  if (factor < 1) throw std::invalid_argument("upsample_images: factor must be >= 1");
  std::vector<Image> out;
  out.reserve(images.size());
  if (mode == Upsampler::inr_superres) {
    if (source == nullptr || source->generator == nullptr) {
      throw std::invalid_argument("upsample_images: inr_superres needs the generator and latents");
    }
    if (source->w.rows() != static_cast<Eigen::Index>(images.size())) {
      throw std::invalid_argument("upsample_images: one latent per image required");
    }
    const auto& arch = source->generator->arch();
    const int r = arch.resolution() * factor;
    constexpr Eigen::Index chunk = 32;
    for (Eigen::Index b = 0; b < source->w.rows(); b += chunk) {
      const Eigen::Index n = std::min(chunk, source->w.rows() - b);
      for (auto& m : source->generator->decode(source->w.middleRows(b, n), plan_superres(arch, factor), source->psi)) {
        out.emplace_back(r, r, std::move(m));
      }
    }
    return out;
  }
  const ResizeMode rm = mode == Upsampler::nearest ? ResizeMode::nearest
                        : mode == Upsampler::bilinear ? ResizeMode::bilinear
                                                      : ResizeMode::bicubic;
  for (const auto& im : images) {
    out.push_back(factor == 1 ? im : resize(im, im.height * factor, im.width * factor, rm));
  }
  return out;
}

double upsampled_fid(const std::vector<Image>& real_hi, const std::vector<Image>& fake_lo, Upsampler mode,
                     std::uint64_t extractor_seed, const SuperresSource* source) {
  if (real_hi.empty() || fake_lo.empty()) throw std::invalid_argument("upsampled_fid: empty image set");
  const int hi = real_hi.front().height, lo = fake_lo.front().height;
  if (lo < 1 || hi % lo != 0) {
    throw std::invalid_argument("upsampled_fid: fake resolution " + std::to_string(lo) + " does not divide " +
                                std::to_string(hi));
  }
  return fid_proxy(real_hi, upsample_images(fake_lo, hi / lo, mode, source), extractor_seed);
}

// ---- KPL -----------------------------------------------------------------------

namespace {

struct OlsFit {
  Mat<double> beta;  // (1 + d) x k
  bool regularized = false;
};

OlsFit ols(const Mat<double>& x, const Mat<double>& y) {
  Eigen::MatrixXd design(x.rows(), x.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(x.cols()) = x;
  OlsFit fit;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() == design.cols()) {
    fit.beta = qr.solve(Eigen::MatrixXd(y));
    return fit;
  }
  fit.regularized = true;
  Eigen::MatrixXd gram = design.transpose() * design;
  gram.diagonal().array() += 1e-6;
  fit.beta = gram.ldlt().solve(design.transpose() * Eigen::MatrixXd(y));
  return fit;
}

double mse(const OlsFit& fit, const Mat<double>& x, const Mat<double>& y) {
  Mat<double> pred = (x * fit.beta.bottomRows(x.cols()));
  pred.rowwise() += fit.beta.row(0);
  return (pred - y).squaredNorm() / static_cast<double>(y.size());
}

}  // namespace

KplResult kpl_fit(const Mat<double>& x_train, const Mat<double>& y_train, const Mat<double>& x_test,
                  const Mat<double>& y_test, std::uint64_t shuffle_seed) {
  if (x_train.rows() != y_train.rows() || x_test.rows() != y_test.rows() || x_train.cols() != x_test.cols() ||
      y_train.cols() != y_test.cols() || x_train.rows() < 1 || x_test.rows() < 1) {
    throw std::invalid_argument("kpl_fit: inconsistent shapes");
  }
  KplResult r;
  r.n_train = static_cast<int>(x_train.rows());
  r.n_test = static_cast<int>(x_test.rows());
  const OlsFit fit = ols(x_train, y_train);
  r.kpl_value = mse(fit, x_test, y_test);
  std::vector<Eigen::Index> perm(x_train.rows());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(shuffle_seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  Mat<double> shuffled(x_train.rows(), x_train.cols());
  for (Eigen::Index i = 0; i < x_train.rows(); ++i) shuffled.row(i) = x_train.row(perm[i]);
  const OlsFit base = ols(shuffled, y_train);
  r.kpl_random = mse(base, x_test, y_test);
  r.regularized = fit.regularized || base.regularized;
  const Mat<double> centered = y_test.rowwise() - y_test.colwise().mean();
  r.target_variance = centered.squaredNorm() / static_cast<double>(y_test.size());
  return r;
}

KplResult kpl(const Generator<float>& generator, const KeypointOracle& oracle, int n_train, int n_test,
              LatentSpace space, std::uint64_t seed, std::optional<float> psi) {
  if (n_train < 1 || n_test < 1) throw std::invalid_argument("kpl: sample counts must be positive");
  const int n = n_train + n_test;
  const int z_dim = generator.config().z_dim;
  const Mat<float> z = sample_latent<float>(n, z_dim, derive_seed(seed, Stream::eval, 11));
  const int r = generator.arch().resolution();
  Mat<double> x(n, space == LatentSpace::z ? z_dim : generator.config().hidden_dim);
  Mat<double> y;
  constexpr int chunk = 64;
  for (int b = 0; b < n; b += chunk) {
    const int m = std::min(chunk, n - b);
    const Mat<float> w = generator.map_latent(z.middleRows(b, m));
    const auto images = generator.decode(w, plan_native(generator.arch()), psi);
    const Mat<float> used = psi ? truncate(w, *psi, generator.w_average()) : w;
    x.middleRows(b, m) = (space == LatentSpace::z ? z.middleRows(b, m) : used).cast<double>();
    for (int i = 0; i < m; ++i) {
      const RowVec<double> kp = oracle(Image(r, r, images[i]));
      if (y.size() == 0) y.resize(n, kp.size());
      if (kp.size() != y.cols()) throw std::invalid_argument("kpl: oracle returned keypoints of varying length");
      y.row(b + i) = kp;
    }
  }
  return kpl_fit(x.topRows(n_train), y.topRows(n_train), x.bottomRows(n_test), y.bottomRows(n_test),
                 derive_seed(seed, Stream::eval, 12));
}

// ---- MACs ----------------------------------------------------------------------

RenderPlan plan_for_resolution(const InrArchitecture& arch, int resolution) {
  const int native = arch.resolution();
  if (resolution < 1) throw std::invalid_argument("count_macs: resolution must be >= 1");
  if (resolution <= native) return plan_lowres(arch, resolution);
  if (resolution % native != 0) {
    throw std::invalid_argument("count_macs: resolutions above " + std::to_string(native) + " must be multiples of it");
  }
  return plan_superres(arch, resolution / native);
}

MacReport count_macs(const InrArchitecture& arch, const GeneratorConfig& gen, int resolution) {
  const RenderPlan plan = plan_for_resolution(arch, resolution);
  MacReport rep;
  rep.resolution = resolution;
  for (std::size_t b = 0; b < arch.blocks.size(); ++b) {
    const auto& blk = arch.blocks[b];
    const std::uint64_t px = static_cast<std::uint64_t>(plan.resolutions[b]) * plan.resolutions[b];
    const std::uint64_t fourier = px * 2 * static_cast<std::uint64_t>(blk.fourier_features);
    std::uint64_t block_total = fourier;
    for (std::size_t l = 0; l < blk.layers.size(); ++l) {
      const auto& s = blk.layers[l];
      LayerMacs lm{static_cast<int>(b), static_cast<int>(l), plan.resolutions[b], s.n_in, s.n_out,
                   px * static_cast<std::uint64_t>(s.n_in) * s.n_out};
      block_total += lm.macs;
      if (!s.direct) rep.modulation += static_cast<std::uint64_t>(s.n_out) * s.rank * s.n_in;
      rep.layers.push_back(lm);
    }
    rep.fourier.push_back(fourier);
    rep.block_totals.push_back(block_total);
  }
  const std::uint64_t h = gen.hidden_dim;
  rep.mapping = static_cast<std::uint64_t>(gen.z_dim) * h + static_cast<std::uint64_t>(gen.num_layers - 1) * h * h;
  rep.head = h * static_cast<std::uint64_t>(param_count(arch));
  rep.hypernetwork = rep.mapping + rep.head + rep.modulation;
  rep.total = rep.hypernetwork;
  for (auto t : rep.block_totals) rep.total += t;
  return rep;
}

std::string mac_report_csv(const std::vector<MacReport>& reports) {
  std::ostringstream out;
  out << "resolution,component,block,layer,working_resolution,n_in,n_out,macs\n";
  for (const auto& r : reports) {
    for (const auto& l : r.layers) {
      out << r.resolution << ",layer," << l.block << "," << l.layer << "," << l.resolution << "," << l.n_in << ","
          << l.n_out << "," << l.macs << "\n";
    }
    for (std::size_t b = 0; b < r.fourier.size(); ++b) {
      out << r.resolution << ",fourier," << b << ",,,,," << r.fourier[b] << "\n";
      out << r.resolution << ",block_total," << b << ",,,,," << r.block_totals[b] << "\n";
    }
    out << r.resolution << ",mapping,,,,,," << r.mapping << "\n";
    out << r.resolution << ",head,,,,,," << r.head << "\n";
    out << r.resolution << ",modulation,,,,,," << r.modulation << "\n";
    out << r.resolution << ",hypernetwork,,,,,," << r.hypernetwork << "\n";
    out << r.resolution << ",total,,,,,," << r.total << "\n";
  }
  return out.str();
}

// ---- projection ----------------------------------------------------------------

namespace {

struct ProjectionObjective {
  Generator<float>& g;
  const Image& target;
  double feature_weight;
  std::optional<FeatureExtractor> fx;
  RowVec<double> target_features;

  ProjectionObjective(Generator<float>& gen, const Image& t, const ProjectionOptions& o)
      : g(gen), target(t), feature_weight(o.feature_weight) {
    if (feature_weight > 0) {
      fx.emplace(o.extractor_seed);
      target_features = fx->features_with_grad(target, RowVec<double>(), nullptr);
    }
  }

  double loss(const RowVec<float>& w, RowVec<float>* grad) {
    DecodeTrace<float> trace;
    const Mat<float> img = g.decode(Mat<float>(w), plan_native(g.arch()), std::nullopt, grad ? &trace : nullptr).front();
    const Mat<float> diff = img - target.data;
    double value = diff.cast<double>().squaredNorm() / static_cast<double>(diff.size());
    Mat<float> d_img = diff * (2.0f / static_cast<float>(diff.size()));
    if (fx) {
      const int r = g.arch().resolution();
      const RowVec<double> f0 = fx->features_with_grad(Image(r, r, img), RowVec<double>::Zero(fx->dim()), nullptr);
      const RowVec<double> df = f0 - target_features;
      value += feature_weight * df.squaredNorm() / static_cast<double>(df.size());
      if (grad != nullptr) {
        Mat<float> d_feat;
        fx->features_with_grad(Image(r, r, img), df * (feature_weight / static_cast<double>(df.size())), &d_feat);
        d_img += d_feat;
      }
    }
    if (grad != nullptr) *grad = g.decode_backward(trace, {d_img}, std::nullopt, false).row(0);
    return value;
  }
};

}  // namespace

ProjectionResult project_latent(Generator<float>& generator, const Image& target, const ProjectionOptions& options) {
  const int r = generator.arch().resolution();
  if (target.height != r || target.width != r || target.channels() != 3) {
    throw std::invalid_argument("project_latent: target must be " + std::to_string(r) + "x" + std::to_string(r) + "x3");
  }
  if (options.steps < 0 || !(options.lr > 0)) throw std::invalid_argument("project_latent: invalid steps or lr");
  ProjectionObjective obj(generator, target, options);
  RowVec<float> w = options.init ? *options.init : generator.w_average();
  if (w.size() != generator.config().hidden_dim) throw std::invalid_argument("project_latent: init has the wrong size");
  ProjectionResult res;
  RowVec<float> grad;
  double current = obj.loss(w, &grad);
  res.w = w;
  res.best_loss = current;
  RowVec<float> m = RowVec<float>::Zero(w.size()), v = RowVec<float>::Zero(w.size());
  double step_size = options.lr;
  const auto check = [&](double value) {
    if (!std::isfinite(value)) {
      std::ostringstream hist;
      for (double l : res.losses) hist << l << ";";
      throw NanAbortError("project_latent: loss diverged", hist.str());
    }
  };
  check(current);
  for (int s = 0; s < options.steps; ++s) {
    res.losses.push_back(current);
    if (options.line_search) {
      bool accepted = false;
      for (int tries = 0; tries < 40 && !accepted; ++tries) {
        const RowVec<float> cand = w - static_cast<float>(step_size) * grad;
        const double value = obj.loss(cand, nullptr);
        check(value);
        if (value <= current) {
          w = cand;
          current = obj.loss(w, &grad);
          step_size *= 1.5;
          accepted = true;
        } else {
          step_size *= 0.5;
        }
      }
      if (!accepted) break;
    } else {
      constexpr float b1 = 0.9f, b2 = 0.999f;
      m = b1 * m + (1 - b1) * grad;
      v = b2 * v + (1 - b2) * grad.cwiseAbs2();
      const float c1 = 1 - std::pow(b1, static_cast<float>(s + 1));
      const float c2 = 1 - std::pow(b2, static_cast<float>(s + 1));
      w.array() -= static_cast<float>(options.lr) * (m.array() / c1) / ((v.array() / c2).sqrt() + 1e-8f);
      current = obj.loss(w, &grad);
      check(current);
    }
    if (current < res.best_loss) {
      res.best_loss = current;
      res.w = w;
    }
  }
  res.losses.push_back(current);
  return res;
}

std::string metric_csv(const std::vector<MetricRow>& rows, const std::string& config_hash, std::uint64_t seed) {
  std::ostringstream out;
  out.precision(10);
  out << "metric,value,config_hash,seed\n";
  for (const auto& r : rows) out << r.metric << "," << r.value << "," << config_hash << "," << seed << "\n";
  return out.str();
}

}  // namespace inrgan
