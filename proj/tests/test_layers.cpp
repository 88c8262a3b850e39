#include "oracles.hpp"

#include "inrgan/gan.hpp"
#include "inrgan/layers.hpp"

#include <doctest.h>

using namespace inrgan;

namespace {

Activations<double> random_acts(int n, int h, int w, int c, std::mt19937_64& rng) {
  Activations<double> a(n, h, w, c);
  a.data = oracle::random_mat<double>(n * h * w, c, rng);
  return a;
}

double dot(const Activations<double>& a, const Mat<double>& b) { return (a.data.array() * b.array()).sum(); }

/// Checks backward (vector-Jacobian) and tangent (Jacobian-vector)
/// against central differences of the forward pass.
void check_layer(Layer<double>& layer, Activations<double> x, std::mt19937_64& rng) {
  const auto y = layer.forward(x);
  const auto probe = oracle::random_mat<double>(static_cast<int>(y.data.rows()), y.channels, rng);
  Activations<double> dy = y;
  dy.data = probe;
  layer.forward(x);
  const auto dx = layer.backward(dy);
  auto f = [&] { return dot(layer.forward(x), probe); };
  CHECK(oracle::rel_err(dx.data, oracle::numeric_grad(x.data, f)) < 1e-3);

  Activations<double> dir = x;
  dir.data = oracle::random_mat<double>(static_cast<int>(x.data.rows()), x.channels, rng);
  layer.forward(x);
  const auto t = layer.tangent(dir);
  const double h = 1e-5;
  Activations<double> xp = x, xm = x;
  xp.data += h * dir.data;
  xm.data -= h * dir.data;
  const Mat<double> fd = (layer.forward(xp).data - layer.forward(xm).data) / (2 * h);
  CHECK(oracle::rel_err(t.data, fd) < 1e-3);
}

}  // namespace

TEST_CASE("conv2d matches a naive convolution") {
  std::mt19937_64 rng(1);
  Rng init(2);
  for (int k : {1, 3}) {
    for (bool eq : {true, false}) {
      Conv2d<double> conv("c", 3, 4, k, true, LinearInit{1.41421356237, eq}, &init);
      ParamList<double> ps;
      conv.collect_params(ps);
      REQUIRE(ps.size() == 2);
      ps[1]->value = oracle::random_mat<double>(1, 4, rng);
      const auto x = random_acts(2, 5, 6, 3, rng);
      const auto y = conv.forward(x);
      const auto ref = oracle::conv2d<double>(x, conv.weight().value, conv.weight_scale(), &ps[1]->value, k);
      CHECK((y.data - ref).cwiseAbs().maxCoeff() < 1e-10);
      CHECK(y.height == 5);
      CHECK(y.width == 6);
      if (eq) CHECK(conv.weight_scale() == doctest::Approx(1.41421356237 / std::sqrt(k * k * 3.0)));
    }
  }
  CHECK_THROWS_AS(Conv2d<double>("bad", 1, 1, 5, true, {}, &init), std::invalid_argument);
}

TEST_CASE("layer passes match finite differences") {
  std::mt19937_64 rng(3);
  Rng init(4);
  SUBCASE("conv3") {
    Conv2d<double> c("c", 2, 3, 3, true, {}, &init);
    check_layer(c, random_acts(2, 4, 4, 2, rng), rng);
  }
  SUBCASE("dense") {
    Dense<double> d("d", 5, 3, true, {}, &init);
    check_layer(d, random_acts(3, 1, 1, 5, rng), rng);
  }
  SUBCASE("lrelu") {
    LeakyRelu<double> l;
    check_layer(l, random_acts(2, 3, 3, 2, rng), rng);
  }
  SUBCASE("pools") {
    AvgPool2<double> p;
    check_layer(p, random_acts(2, 4, 6, 2, rng), rng);
    GlobalAvgPool<double> g;
    check_layer(g, random_acts(2, 4, 4, 3, rng), rng);
    Flatten<double> f;
    check_layer(f, random_acts(2, 2, 3, 2, rng), rng);
  }
  SUBCASE("resblock") {
    ResBlock<double> r("r", 2, 3, true, &init);
    check_layer(r, random_acts(2, 4, 4, 2, rng), rng);
  }
}

TEST_CASE("avgpool rejects odd sizes") {
  AvgPool2<double> p;
  Activations<double> x(1, 3, 4, 1);
  CHECK_THROWS_AS(p.forward(x), std::invalid_argument);
}

TEST_CASE("stack_images keeps pixel order") {
  std::mt19937_64 rng(5);
  std::vector<Mat<double>> imgs{oracle::random_mat<double>(6, 3, rng), oracle::random_mat<double>(6, 3, rng)};
  const auto a = stack_images(imgs, 2, 3);
  CHECK(a.batch == 2);
  CHECK(a.data.topRows(6) == imgs[0]);
  CHECK(a.data.bottomRows(6) == imgs[1]);
}

TEST_CASE("accumulated weight gradients match finite differences") {
  std::mt19937_64 rng(6);
  Rng init(7);
  Sequential<double> net;
  net.add(std::make_unique<Conv2d<double>>("c", 1, 2, 3, true, LinearInit{}, &init));
  net.add(std::make_unique<LeakyRelu<double>>());
  net.add(std::make_unique<AvgPool2<double>>());
  net.add(std::make_unique<Flatten<double>>());
  net.add(std::make_unique<Dense<double>>("out", 8, 1, true, LinearInit{1.0, true}, &init));
  Discriminator<double> d(std::move(net));
  auto params = d.params();
  std::size_t total = 0;
  for (auto* p : params) total += static_cast<std::size_t>(p->size());
  CHECK(total <= 32);
  const auto x = random_acts(3, 4, 4, 1, rng);
  const std::vector<double> s{0.3, -1.2, 0.7};
  auto f = [&] {
    const auto l = d.forward(x);
    return s[0] * l(0) + s[1] * l(1) + s[2] * l(2);
  };
  d.zero_grad();
  d.forward(x);
  d.backward(Vec<double>::Ones(3));
  d.accumulate_grads(s, 0.0);
  for (auto* p : params) {
    const Mat<double> g = p->grad;
    CHECK_MESSAGE(oracle::rel_err(g, oracle::numeric_grad(p->value, f)) < 1e-3, p->name);
  }
}
