#include "oracles.hpp"

#include "inrgan/errors.hpp"
#include "inrgan/hypernet.hpp"

#include <doctest.h>

using namespace inrgan;

namespace {

GeneratorConfig toy_config() {
  GeneratorConfig c;
  c.z_dim = 4;
  c.hidden_dim = 6;
  c.num_layers = 3;
  c.head_init_std = 0.3;
  c.fourier_init_std = 2.0;
  return c;
}

Param<double>& find(ParamList<double> list, const std::string& name) {
  for (auto* p : list) {
    if (p->name == name) return *p;
  }
  FAIL("missing parameter " << name);
  throw std::logic_error("unreachable");
}

}  // namespace

TEST_CASE("sample_latent") {
  const auto a = sample_latent<float>(5, 8, 42);
  const auto b = sample_latent<float>(5, 8, 42);
  CHECK(a == b);
  CHECK(sample_latent<float>(1, 512, 0).rows() == 1);
  CHECK(sample_latent<float>(1, 512, 0).cols() == 512);
  CHECK(sample_latent<float>(5, 8, 43) != a);

  const auto z = sample_latent<double>(100000, 8, 7);
  for (int d = 0; d < 8; ++d) {
    const double mean = z.col(d).mean();
    const double std = std::sqrt((z.col(d).array() - mean).square().sum() / (z.rows() - 1));
    CHECK(std::abs(mean) <= 0.02);
    CHECK(std::abs(std - 1.0) <= 0.02);
  }
  CHECK_THROWS_AS(sample_latent<float>(0, 8, 0), std::invalid_argument);
}

TEST_CASE("truncate") {
  std::mt19937_64 rng(1);
  const auto w = oracle::random_mat<double>(3, 5, rng);
  const RowVec<double> mean = oracle::random_mat<double>(1, 5, rng);
  CHECK(truncate<double>(w, 1.0, mean) == w);
  const auto collapsed = truncate<double>(w, 0.0, mean);
  for (int r = 0; r < 3; ++r) CHECK(collapsed.row(r) == mean);

  const Mat<double> ones = Mat<double>::Ones(1, 4);
  const auto t = truncate<double>(ones, 0.9, RowVec<double>::Zero(4));
  for (int i = 0; i < 4; ++i) CHECK(t(0, i) == doctest::Approx(0.9));

  // Affine in w: T(a u + (1 - a) v) = a T(u) + (1 - a) T(v).
  const auto u = oracle::random_mat<double>(1, 5, rng), v = oracle::random_mat<double>(1, 5, rng);
  const Mat<double> mix = 0.3 * u + 0.7 * v;
  const Mat<double> lhs = truncate<double>(mix, 0.6, mean);
  const Mat<double> rhs = 0.3 * truncate<double>(u, 0.6, mean) + 0.7 * truncate<double>(v, 0.6, mean);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);

  // A linear probe ranks candidates the same way for every psi > 0.
  const auto cands = oracle::random_mat<double>(20, 5, rng);
  const auto probe = oracle::random_mat<double>(5, 1, rng);
  Eigen::Index best = 0;
  (cands * probe).col(0).maxCoeff(&best);
  for (double psi : {0.1, 0.5, 0.9}) {
    Eigen::Index b2 = 0;
    (truncate<double>(cands, psi, mean) * probe).col(0).maxCoeff(&b2);
    CHECK(b2 == best);
  }
  CHECK_THROWS_AS(truncate<double>(w, 0.5, RowVec<double>::Zero(2)), std::invalid_argument);
}

TEST_CASE("map_latent is pure and zero input follows the bias path") {
  std::mt19937_64 rng(2);
  Generator<double> g(toy_config(), oracle::small_arch(), 3);
  const auto z = oracle::random_mat<double>(2, 4, rng);
  CHECK(g.map_latent(z) == g.map_latent(z));

  auto params = g.hyper_params();
  for (int l = 0; l < 3; ++l) find(params, "mapping.layer" + std::to_string(l) + ".bias").value = oracle::random_mat<double>(1, 6, rng);
  const auto w0 = g.map_latent(Mat<double>::Zero(1, 4));
  // Scalar reference of the residual MLP at z = 0.
  std::vector<double> h(4, 0.0);
  for (int l = 0; l < 3; ++l) {
    const auto& W = find(params, "mapping.layer" + std::to_string(l) + ".weight").value;
    const auto& b = find(params, "mapping.layer" + std::to_string(l) + ".bias").value;
    std::vector<double> next(6);
    for (int o = 0; o < 6; ++o) {
      double acc = b(0, o);
      for (std::size_t i = 0; i < h.size(); ++i) acc += h[i] * W(static_cast<Eigen::Index>(i), o);
      next[o] = l == 0 ? oracle::lrelu(acc) : (h[o] + oracle::lrelu(acc)) / std::sqrt(2.0);
    }
    h = next;
  }
  for (int o = 0; o < 6; ++o) CHECK(w0(0, o) == doctest::Approx(h[o]).epsilon(1e-12));
}

TEST_CASE("mapping network Jacobian matches finite differences") {
  std::mt19937_64 rng(3);
  Generator<double> g(toy_config(), oracle::small_arch(), 4);
  for (int l = 0; l < 3; ++l) {
    find(g.hyper_params(), "mapping.layer" + std::to_string(l) + ".bias").value = oracle::random_mat<double>(1, 6, rng, 0.3);
  }
  Mat<double> z = oracle::random_mat<double>(3, 4, rng);
  // Full Jacobian row by row: probe each output unit.
  for (int o = 0; o < 6; ++o) {
    Mat<double> probe = Mat<double>::Zero(3, 6);
    probe.col(o).setOnes();
    auto f = [&] { return (g.map_latent(z).array() * probe.array()).sum(); };
    MappingTrace<double> trace;
    g.map_latent(z, &trace);
    const auto dz = g.mapping_backward(trace, probe, false);
    CHECK(oracle::rel_err(dz, oracle::numeric_grad(z, f)) < 1e-3);
  }
  const auto probe = oracle::random_mat<double>(3, 6, rng);
  auto f = [&] { return (g.map_latent(z).array() * probe.array()).sum(); };
  g.zero_grad();
  MappingTrace<double> trace;
  g.map_latent(z, &trace);
  g.mapping_backward(trace, probe, true);
  for (auto* p : g.hyper_params()) {
    if (p->name.rfind("mapping.", 0) != 0) continue;
    const Mat<double> analytic = p->grad;
    CHECK_MESSAGE(oracle::rel_err(analytic, oracle::numeric_grad(p->value, f)) < 1e-3, p->name);
  }
}

TEST_CASE("decode backward matches finite differences") {
  std::mt19937_64 rng(4);
  Generator<double> g(toy_config(), oracle::small_arch(), 5);
  g.update_w_average(oracle::random_mat<double>(1, 6, rng));
  const auto plan = plan_native(g.arch());
  for (std::optional<double> psi : {std::optional<double>{}, std::optional<double>{0.7}}) {
    Mat<double> w = oracle::random_mat<double>(2, 6, rng);
    std::vector<Mat<double>> probes{oracle::random_mat<double>(64, 3, rng), oracle::random_mat<double>(64, 3, rng)};
    auto f = [&] {
      const auto imgs = g.decode(w, plan, psi);
      double s = 0;
      for (std::size_t i = 0; i < imgs.size(); ++i) s += (imgs[i].array() * probes[i].array()).sum();
      return s;
    };
    g.zero_grad();
    DecodeTrace<double> trace;
    g.decode(w, plan, psi, &trace);
    const auto dw = g.decode_backward(trace, probes, psi, true);
    CHECK(oracle::rel_err(dw, oracle::numeric_grad(w, f)) < 1e-3);
    auto& head_bias = find(g.hyper_params(), "head.bias");
    const Mat<double> analytic = head_bias.grad;
    CHECK(oracle::rel_err(analytic, oracle::numeric_grad(head_bias.value, f)) < 1e-3);
    auto* shared = g.shared_params().front();
    const Mat<double> shared_grad = shared->grad;
    CHECK(oracle::rel_err(shared_grad, oracle::numeric_grad(shared->value, f)) < 1e-3);
  }
}

TEST_CASE("generate_params") {
  std::mt19937_64 rng(5);
  Generator<double> g(toy_config(), oracle::small_arch(), 6);
  const RowVec<double> w = oracle::random_mat<double>(1, 6, rng);
  const auto flat = g.generate_flat(w);
  CHECK(flat.cols() == param_count(g.arch()));
  CHECK(g.generate_flat(w) == flat);

  find(g.hyper_params(), "head.weight").value.setZero();
  find(g.hyper_params(), "head.bias").value.setZero();
  const auto p = g.generate_params(w);
  for (std::size_t b = 0; b < g.arch().blocks.size(); ++b) {
    for (std::size_t l = 0; l < g.arch().blocks[b].layers.size(); ++l) {
      if (g.arch().blocks[b].layers[l].direct) continue;
      const auto& f = p.blocks[b].layers[l].factors;
      CHECK(f.A.cwiseAbs().maxCoeff() == 0.0);
      CHECK(f.B.cwiseAbs().maxCoeff() == 0.0);
      const int bi = static_cast<int>(b), li = static_cast<int>(l);
      CHECK(g.decoder().effective_weight(bi, li, p.blocks[b].layers[l]) == 0.5 * g.decoder().shared(bi, li).value);
    }
  }
  CHECK_THROWS_AS(g.generate_flat(Mat<double>::Zero(1, 5)), InvalidStateError);
}

TEST_CASE("generated images") {
  Generator<float> g(toy_config(), oracle::small_arch(), 7);
  const auto z = sample_latent<float>(4, 4, 9);
  const auto a = g.generate_images(z);
  const auto b = g.generate_images(z);
  REQUIRE(a.size() == 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == b[i]);
    CHECK(a[i].rows() == 64);
    CHECK(a[i].cols() == 3);
    CHECK(a[i].minCoeff() >= 0.0f);
    CHECK(a[i].maxCoeff() <= 1.0f);
  }
  g.update_w_average(g.map_latent(sample_latent<float>(8, 4, 10)));
  const auto collapsed = g.generate_images(z, 0.0f);
  for (std::size_t i = 1; i < collapsed.size(); ++i) CHECK(collapsed[i] == collapsed[0]);
}

TEST_CASE("w average is an exponential moving average") {
  auto cfg = toy_config();
  cfg.w_avg_decay = 0.9;
  Generator<double> g(cfg, oracle::small_arch(), 8);
  CHECK(g.w_average().cwiseAbs().maxCoeff() == 0.0);
  Mat<double> w(2, 6);
  w.row(0).setConstant(1.0);
  w.row(1).setConstant(3.0);
  g.update_w_average(w);
  for (int i = 0; i < 6; ++i) CHECK(g.w_average()(i) == doctest::Approx(0.2));
  g.update_w_average(w);
  for (int i = 0; i < 6; ++i) CHECK(g.w_average()(i) == doctest::Approx(0.38));
}

TEST_CASE("the output head dominates the reference generator") {
  Generator<float> g(GeneratorConfig{}, reference_architecture(), 0);
  const auto r = g.parameter_report();
  CHECK(r.head == 1025 * param_count(g.arch()));
  CHECK(r.head_fraction() > 0.5);
  CHECK(r.total() == r.mapping + r.head + r.shared);
}

TEST_CASE("generator config validation") {
  GeneratorConfig c;
  c.z_dim = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = GeneratorConfig{};
  c.w_avg_decay = 1.5;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
