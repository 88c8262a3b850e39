#include "oracles.hpp"

#include "inrgan/errors.hpp"
#include "inrgan/metrics.hpp"

#include <doctest.h>

#include <algorithm>

using namespace inrgan;

namespace {

FeatureStats gaussian_1d(double mean, double var) {
  FeatureStats s;
  s.mean = Vec<double>::Constant(1, mean);
  s.covariance = Mat<double>::Constant(1, 1, var);
  s.sample_count = 1000;
  return s;
}

std::vector<Image> random_images(int n, int res, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<Image> out;
  for (int i = 0; i < n; ++i) {
    Image im(res, res);
    // Smooth-ish content: random per-image color plus noise.
    const float base = u(rng);
    for (Eigen::Index k = 0; k < im.data.size(); ++k) im.data.data()[k] = 0.5f * base + 0.5f * u(rng);
    out.push_back(std::move(im));
  }
  return out;
}

std::vector<Image> constant_images(int n, int res, float value) {
  std::vector<Image> out;
  for (int i = 0; i < n; ++i) {
    Image im(res, res);
    im.data.setConstant(value);
    out.push_back(std::move(im));
  }
  return out;
}

GeneratorConfig toy_gen() {
  GeneratorConfig c;
  c.z_dim = 4;
  c.hidden_dim = 8;
  c.head_init_std = 0.05;
  c.fourier_init_std = 2.0;
  return c;
}

}  // namespace

TEST_CASE("frechet distance closed forms") {
  CHECK(std::abs(frechet_distance(gaussian_1d(0, 1), gaussian_1d(1, 1)) - 1.0) < 1e-8);
  CHECK(std::abs(frechet_distance(gaussian_1d(0, 1), gaussian_1d(0, 4)) - 1.0) < 1e-8);

  std::mt19937_64 rng(1);
  const auto f1 = oracle::random_mat<double>(200, 5, rng);
  const auto f2 = oracle::random_mat<double>(150, 5, rng, 2.0);
  const auto a = feature_stats(f1), b = feature_stats(f2);
  CHECK(std::abs(frechet_distance(a, a)) < 1e-8);
  CHECK(std::abs(frechet_distance(a, b) - frechet_distance(b, a)) < 1e-8);
  CHECK(frechet_distance(a, b) > 0.0);
  CHECK((a.covariance - a.covariance.transpose()).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(a.sample_count == 200);
}

TEST_CASE("frechet distance matches a diagonal closed form") {
  // Diagonal covariances commute: sum_k (sqrt(a_k) - sqrt(b_k))^2.
  FeatureStats a, b;
  a.mean = Vec<double>::Zero(3);
  b.mean = Vec<double>::Zero(3);
  b.mean(1) = 2.0;
  a.covariance = Vec<double>(Eigen::Vector3d(1.0, 4.0, 9.0)).asDiagonal();
  b.covariance = Vec<double>(Eigen::Vector3d(4.0, 4.0, 1.0)).asDiagonal();
  a.sample_count = b.sample_count = 10;
  CHECK(frechet_distance(a, b) == doctest::Approx(4.0 + 1.0 + 0.0 + 4.0).epsilon(1e-12));
}

TEST_CASE("frechet distance rejects bad input") {
  CHECK_THROWS_AS(feature_stats(Mat<double>::Zero(1, 3)), std::invalid_argument);
  FeatureStats bad = gaussian_1d(0, 1), neg = gaussian_1d(0, -1);
  CHECK_THROWS_AS(frechet_distance(bad, neg), NumericalStabilityError);
  FeatureStats two;
  two.mean = Vec<double>::Zero(2);
  two.covariance = Mat<double>::Identity(2, 2);
  two.sample_count = 5;
  CHECK_THROWS_AS(frechet_distance(bad, two), std::invalid_argument);
}

TEST_CASE("fid proxy") {
  std::mt19937_64 rng(2);
  const auto a = random_images(64, 8, rng);
  const auto b = random_images(64, 8, rng);
  CHECK(std::abs(fid_proxy(a, a, 7)) < 1e-6);
  CHECK(fid_proxy(constant_images(64, 8, 0.0f), constant_images(64, 8, 1.0f), 7) > 0.0);
  auto shuffled = b;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  CHECK(fid_proxy(a, shuffled, 7) == doctest::Approx(fid_proxy(a, b, 7)).epsilon(1e-9));
  CHECK(fid_proxy(a, b, 7) == fid_proxy(a, b, 7));
  CHECK_THROWS_AS(fid_proxy(std::vector<Image>(a.begin(), a.begin() + 10), b, 7), std::invalid_argument);
}

TEST_CASE("feature extractor is deterministic per seed") {
  std::mt19937_64 rng(3);
  const auto imgs = random_images(3, 16, rng);
  FeatureExtractor e1(5), e2(5), e3(6);
  const auto f1 = e1.features(imgs);
  CHECK(f1.rows() == 3);
  CHECK(f1.cols() == 128);
  CHECK(f1 == e2.features(imgs));
  CHECK(f1 != e3.features(imgs));
  CHECK_THROWS_AS(e1.features(random_images(1, 12, rng)), std::invalid_argument);
}

TEST_CASE("feature extractor gradient matches finite differences") {
  std::mt19937_64 rng(4);
  FeatureExtractor e(9, 16);
  auto img = random_images(1, 8, rng).front();
  const RowVec<double> seed = oracle::random_mat<double>(1, 16, rng);
  Mat<float> grad;
  e.features_with_grad(img, seed, &grad);
  auto f = [&](const Image& im) { return (e.features({im}).row(0).array() * seed.array()).sum(); };
  // Float network: compare a few directional derivatives.
  for (int trial = 0; trial < 3; ++trial) {
    const Mat<float> dir = oracle::random_mat<float>(64, 3, rng);
    const float h = 1e-3f;
    Image up = img, down = img;
    up.data += h * dir;
    down.data -= h * dir;
    const double fd = (f(up) - f(down)) / (2 * h);
    const double an = (grad.cast<double>().array() * dir.cast<double>().array()).sum();
    CHECK(an == doctest::Approx(fd).epsilon(2e-2));
  }
}

TEST_CASE("upsampled fid") {
  std::mt19937_64 rng(5);
  const auto real = random_images(64, 16, rng);
  const auto lo = random_images(64, 8, rng);
  const auto same = random_images(64, 16, rng);
  CHECK(upsampled_fid(real, same, Upsampler::nearest, 7) == fid_proxy(real, same, 7));
  const auto up = upsample_images(lo, 2, Upsampler::nearest);
  for (std::size_t i = 0; i < up.size(); ++i) {
    REQUIRE(up[i].height == 16);
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) {
        for (int c = 0; c < 3; ++c) CHECK(up[i].at(y, x, c) == lo[i].at(y / 2, x / 2, c));
      }
    }
  }
  CHECK(std::isfinite(upsampled_fid(real, lo, Upsampler::bilinear, 7)));
  CHECK(std::isfinite(upsampled_fid(real, lo, Upsampler::bicubic, 7)));
  CHECK_THROWS_AS(upsampled_fid(real, random_images(64, 6, rng), Upsampler::nearest, 7), std::invalid_argument);
  CHECK_THROWS_AS(upsample_images(lo, 2, Upsampler::inr_superres), std::invalid_argument);
}

TEST_CASE("inr superres renders the same latents on a denser grid") {
  Generator<float> g(toy_gen(), oracle::small_arch(), 1);
  const Mat<float> w = g.map_latent(sample_latent<float>(3, 4, 2));
  std::vector<Image> lo;
  for (auto& m : g.decode(w, plan_native(g.arch()))) lo.emplace_back(8, 8, m);
  SuperresSource src{&g, w, std::nullopt};
  const auto hi = upsample_images(lo, 2, Upsampler::inr_superres, &src);
  const auto direct = g.decode(w, plan_superres(g.arch(), 2));
  REQUIRE(hi.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(hi[i].height == 16);
    CHECK(hi[i].data == direct[i]);
  }
}

TEST_CASE("kpl fit") {
  std::mt19937_64 rng(6);
  const auto xtr = oracle::random_mat<double>(300, 5, rng), xte = oracle::random_mat<double>(100, 5, rng);

  const Mat<double> c_tr = Mat<double>::Constant(300, 2, 0.4), c_te = Mat<double>::Constant(100, 2, 0.4);
  const auto zero = kpl_fit(xtr, c_tr, xte, c_te, 1);
  CHECK(zero.kpl_value < 1e-20);
  CHECK(zero.kpl_random < 1e-20);

  // Targets independent of the latents.
  const auto ytr = oracle::random_mat<double>(300, 2, rng, 0.5), yte = oracle::random_mat<double>(100, 2, rng, 0.5);
  const auto iid = kpl_fit(xtr, ytr, xte, yte, 2);
  CHECK(iid.kpl_random == doctest::Approx(iid.target_variance).epsilon(0.15));

  // Linear targets are predicted, the shuffled baseline is not.
  const auto beta = oracle::random_mat<double>(5, 2, rng);
  const Mat<double> ltr = xtr * beta, lte = xte * beta;
  const auto lin = kpl_fit(xtr, ltr, xte, lte, 3);
  CHECK(lin.kpl_value < 1e-20);
  CHECK(lin.kpl_random > 0.5 * lin.target_variance);
  CHECK_FALSE(lin.regularized);

  // Joint orthogonal rotation of the latents changes nothing.
  const Mat<double> q = Eigen::HouseholderQR<Mat<double>>(oracle::random_mat<double>(5, 5, rng)).householderQ();
  const Mat<double> noisy_tr = ltr + oracle::random_mat<double>(300, 2, rng, 0.3);
  const Mat<double> noisy_te = lte + oracle::random_mat<double>(100, 2, rng, 0.3);
  const auto plain = kpl_fit(xtr, noisy_tr, xte, noisy_te, 4);
  const auto rot = kpl_fit(xtr * q, noisy_tr, xte * q, noisy_te, 4);
  CHECK(rot.kpl_value == doctest::Approx(plain.kpl_value).epsilon(1e-9));
  CHECK(rot.kpl_random == doctest::Approx(plain.kpl_random).epsilon(1e-9));

  // More features than samples: ridge fallback.
  const auto wide = kpl_fit(oracle::random_mat<double>(10, 20, rng), oracle::random_mat<double>(10, 2, rng),
                            oracle::random_mat<double>(5, 20, rng), oracle::random_mat<double>(5, 2, rng), 5);
  CHECK(wide.regularized);
  CHECK(std::isfinite(wide.kpl_value));
  CHECK_THROWS_AS(kpl_fit(xtr, ytr, xte.leftCols(3), yte, 1), std::invalid_argument);
}

TEST_CASE("kpl on a generator") {
  Generator<float> g(toy_gen(), oracle::small_arch(), 3);
  const auto constant = kpl(g, [](const Image&) { return RowVec<double>::Constant(2, 0.5); }, 40, 10, LatentSpace::z, 1);
  CHECK(constant.kpl_value < 1e-20);
  CHECK(constant.kpl_random < 1e-20);
  const auto mean_red = [](const Image& im) {
    RowVec<double> r(1);
    r(0) = im.data.col(0).cast<double>().mean();
    return r;
  };
  const auto a = kpl(g, mean_red, 40, 10, LatentSpace::w, 1);
  const auto b = kpl(g, mean_red, 40, 10, LatentSpace::w, 1);
  CHECK(a.kpl_value == b.kpl_value);
  CHECK(a.n_train == 40);
  CHECK(a.metric == "mse");
}

TEST_CASE("count_macs") {
  ArchConfig one;
  one.resolutions = {4};
  one.hidden_widths = {{}};
  one.fourier_features = {1};
  one.strict = false;
  const auto tiny = make_architecture(one);
  REQUIRE(tiny.blocks[0].layers.size() == 1);
  CHECK(tiny.blocks[0].layers[0].n_in == 2);
  const auto rep = count_macs(tiny, toy_gen(), 4);
  CHECK(rep.layers[0].macs == 96);

  const auto ref = reference_architecture();
  const GeneratorConfig gen;
  const auto full = count_macs(ref, gen, 32), half = count_macs(ref, gen, 16);
  REQUIRE(full.block_totals.size() == 3);
  for (std::size_t b = 0; b < 3; ++b) CHECK(full.block_totals[b] == 4 * half.block_totals[b]);
  for (std::size_t l = 0; l < full.layers.size(); ++l) CHECK(full.layers[l].macs == 4 * half.layers[l].macs);
  CHECK(half.total < full.total);
  CHECK(full.hypernetwork == half.hypernetwork);
  std::uint64_t sum = full.hypernetwork;
  for (auto t : full.block_totals) sum += t;
  CHECK(full.total == sum);
  CHECK(full.hypernetwork == full.mapping + full.head + full.modulation);

  std::uint64_t prev = 0;
  for (int r : {1, 2, 4, 8, 16, 32, 64}) {
    const auto rr = count_macs(ref, gen, r);
    CHECK(rr.total > prev);
    prev = rr.total;
  }
  CHECK_THROWS_AS(count_macs(ref, gen, 0), std::invalid_argument);
  CHECK_THROWS_AS(count_macs(ref, gen, 48), std::invalid_argument);
  CHECK(mac_report_csv({full, half}).find("resolution") != std::string::npos);
}

TEST_CASE("count_macs equals the instrumented evaluation") {
  GeneratorConfig small = toy_gen();
  const auto ref = reference_architecture();
  for (const auto& arch : {oracle::small_arch(), oracle::single_block_arch(8), ref}) {
    const int r = arch.resolution();
    for (int res : {r, r / 2, r / 4, 2 * r}) {
      if (res < 1) continue;
      const auto plan = plan_for_resolution(arch, res);
      CHECK(count_macs(arch, small, res).total == oracle::counted_macs(arch, small, plan));
    }
  }
  // The library's own counter agrees too.
  Generator<float> g(small, oracle::small_arch(), 0);
  MacCounter mc;
  const Mat<float> w = g.map_latent(sample_latent<float>(1, 4, 0), nullptr, &mc);
  g.decode(w, plan_native(g.arch()), std::nullopt, nullptr, &mc);
  CHECK(mc.total() == count_macs(g.arch(), small, 8).total);
}

TEST_CASE("latent projection") {
  Generator<float> g(toy_gen(), oracle::small_arch(), 4);
  const RowVec<float> w_star = g.map_latent(sample_latent<float>(1, 4, 3)).row(0);
  const Image target(8, 8, g.decode(w_star, plan_native(g.arch())).front());

  ProjectionOptions fixed;
  fixed.steps = 3;
  fixed.init = w_star;
  const auto at_star = project_latent(g, target, fixed);
  CHECK(at_star.losses.front() < 1e-12);

  ProjectionOptions ls;
  ls.steps = 25;
  ls.line_search = true;
  const auto curve = project_latent(g, target, ls);
  for (std::size_t i = 1; i < curve.losses.size(); ++i) CHECK(curve.losses[i] <= curve.losses[i - 1]);

  std::mt19937_64 rng(7);
  Image random_target(8, 8);
  random_target.data = oracle::random_mat<float>(64, 3, rng, 0.2).array().abs().min(1.0f);
  ProjectionOptions adam;
  adam.steps = 30;
  adam.feature_weight = 0.1;
  const auto r1 = project_latent(g, random_target, adam);
  const auto r2 = project_latent(g, random_target, adam);
  CHECK(r1.best_loss <= r1.losses.front());
  CHECK(r1.losses == r2.losses);
  CHECK_THROWS_AS(project_latent(g, Image(4, 4), adam), std::invalid_argument);
}

TEST_CASE("metric csv") {
  const auto csv = metric_csv({{"fid_proxy", 1.5}}, "abc", 3);
  CHECK(csv.rfind("metric,value,config_hash,seed", 0) == 0);
  CHECK(csv.find("fid_proxy,") != std::string::npos);
}
