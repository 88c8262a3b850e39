#pragma once

// Independent reference implementations used by the tests: plain scalar
// loops with no Eigen expressions beyond storage.

#include "inrgan/config.hpp"
#include "inrgan/coords.hpp"
#include "inrgan/hypernet.hpp"
#include "inrgan/inr.hpp"
#include "inrgan/layers.hpp"

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <functional>
#include <tuple>
#include <random>
#include <vector>

namespace oracle {

using inrgan::Mat;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double lrelu(double x, double s = 0.2) { return x > 0 ? x : s * x; }

template <typename T>
Mat<T> random_mat(int rows, int cols, std::mt19937_64& rng, double std = 1.0) {
  std::normal_distribution<double> n(0.0, std);
  Mat<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(n(rng));
  return m;
}

/// Counts multiplications performed by the scalar evaluators.
struct MulCounter {
  std::uint64_t n = 0;
  double mul(double a, double b) {
    ++n;
    return a * b;
  }
};

/// Scalar multi-scale INR: per pixel, per layer, per weight; nearest or
/// bilinear replication by explicit index arithmetic.
inline std::vector<std::vector<double>> evaluate_inr(const inrgan::InrArchitecture& arch,
                                                     const inrgan::InrDecoder<double>& dec,
                                                     const inrgan::InrParams<double>& p,
                                                     const std::vector<int>& resolutions,
                                                     const inrgan::Extent& e, MulCounter* counter = nullptr) {
  MulCounter local;
  MulCounter& c = counter ? *counter : local;
  std::vector<std::vector<double>> prev;  // pixels x width of the previous block
  int prev_res = 0;
  for (std::size_t b = 0; b < arch.blocks.size(); ++b) {
    const auto& blk = arch.blocks[b];
    const int res = resolutions[b];
    // Modulated weights, once per image.
    std::vector<std::vector<std::vector<double>>> weights;
    for (std::size_t l = 0; l < blk.layers.size(); ++l) {
      const auto& s = blk.layers[l];
      const auto& lp = p.blocks[b].layers[l];
      std::vector<std::vector<double>> w(s.n_out, std::vector<double>(s.n_in));
      for (int i = 0; i < s.n_out; ++i) {
        for (int j = 0; j < s.n_in; ++j) {
          if (s.direct) {
            w[i][j] = lp.weight(i, j);
          } else {
            double h = 0;
            for (int r = 0; r < s.rank; ++r) h += c.mul(lp.factors.A(i, r), lp.factors.B(r, j));
            const double m = arch.modulation == inrgan::Modulation::sigmoid ? sigmoid(h) : h;
            w[i][j] = dec.shared(static_cast<int>(b), static_cast<int>(l)).value(i, j) * m;
          }
        }
      }
      weights.push_back(std::move(w));
    }
    std::vector<std::vector<double>> cur(static_cast<std::size_t>(res) * res);
    for (int y = 0; y < res; ++y) {
      for (int x = 0; x < res; ++x) {
        const double px = e.x_min + (x + 0.5) / res * (e.x_max - e.x_min);
        const double py = e.y_min + (y + 0.5) / res * (e.y_max - e.y_min);
        std::vector<double> in;
        const auto& U = p.blocks[b].frequencies;
        std::vector<double> ph(U.rows());
        for (Eigen::Index k = 0; k < U.rows(); ++k) {
          ph[k] = arch.fourier_gamma * (c.mul(U(k, 0), px) + c.mul(U(k, 1), py));
        }
        for (double v : ph) in.push_back(std::sin(v));
        if (arch.fourier_mode == inrgan::FourierMode::sincos) {
          for (double v : ph) in.push_back(std::cos(v));
        }
        if (b > 0) {
          const std::size_t width = prev.front().size();
          if (arch.upsample == inrgan::UpsampleMode::nearest) {
            const int sy = std::min(prev_res - 1, static_cast<int>(std::floor((y + 0.5) * prev_res / res)));
            const int sx = std::min(prev_res - 1, static_cast<int>(std::floor((x + 0.5) * prev_res / res)));
            const auto& f = prev[static_cast<std::size_t>(sy) * prev_res + sx];
            in.insert(in.end(), f.begin(), f.end());
          } else {
            auto coord = [&](int i) {
              const double s = std::clamp((i + 0.5) * prev_res / res - 0.5, 0.0, static_cast<double>(prev_res - 1));
              const int i0 = static_cast<int>(std::floor(s));
              return std::make_tuple(i0, std::min(i0 + 1, prev_res - 1), s - i0);
            };
            const auto [y0, y1, fy] = coord(y);
            const auto [x0, x1, fx] = coord(x);
            for (std::size_t ch = 0; ch < width; ++ch) {
              auto at = [&](int yy, int xx) { return prev[static_cast<std::size_t>(yy) * prev_res + xx][ch]; };
              in.push_back((1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
                           fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1)));
            }
          }
        }
        for (std::size_t l = 0; l < blk.layers.size(); ++l) {
          const auto& s = blk.layers[l];
          const auto& bias = p.blocks[b].layers[l].factors.bias;
          std::vector<double> out(s.n_out);
          for (int i = 0; i < s.n_out; ++i) {
            double acc = bias(i);
            for (int j = 0; j < s.n_in; ++j) acc += c.mul(weights[l][i][j], in[j]);
            const bool last = b + 1 == arch.blocks.size() && l + 1 == blk.layers.size();
            if (last) {
              out[i] = arch.output == inrgan::OutputActivation::sigmoid_to_unit ? sigmoid(acc) : std::clamp(acc, 0.0, 1.0);
            } else {
              out[i] = lrelu(acc, arch.leaky_slope);
            }
          }
          in = std::move(out);
        }
        cur[static_cast<std::size_t>(y) * res + x] = std::move(in);
      }
    }
    prev = std::move(cur);
    prev_res = res;
  }
  return prev;
}

/// Multiplications of a scalar hypernetwork forward pass (mapping + head)
/// for one latent.
inline std::uint64_t hypernetwork_mults(const inrgan::GeneratorConfig& g, std::int64_t head_width) {
  MulCounter c;
  // Multiply with ones; only the count matters.
  std::vector<double> h(g.z_dim, 1.0);
  for (int l = 0; l < g.num_layers; ++l) {
    std::vector<double> out(g.hidden_dim, 0.0);
    for (int o = 0; o < g.hidden_dim; ++o) {
      for (double v : h) out[o] += c.mul(v, 1.0);
    }
    h = std::move(out);
  }
  for (std::int64_t o = 0; o < head_width; ++o) {
    double acc = 0;
    for (double v : h) acc += c.mul(v, 1.0);
    (void)acc;
  }
  return c.n;
}

/// Naive NHWC k x k convolution, zero padding.
template <typename T>
Mat<T> conv2d(const inrgan::Activations<T>& x, const Mat<T>& weight, T scale, const Mat<T>* bias, int k) {
  const int pad = k / 2, cin = x.channels, cout = static_cast<int>(weight.cols());
  Mat<T> out = Mat<T>::Zero(x.data.rows(), cout);
  for (int n = 0; n < x.batch; ++n) {
    for (int y = 0; y < x.height; ++y) {
      for (int xx = 0; xx < x.width; ++xx) {
        for (int o = 0; o < cout; ++o) {
          double acc = 0;
          for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
              const int sy = y + ky - pad, sx = xx + kx - pad;
              if (sy < 0 || sy >= x.height || sx < 0 || sx >= x.width) continue;
              for (int ci = 0; ci < cin; ++ci) {
                acc += static_cast<double>(x.data((static_cast<Eigen::Index>(n) * x.height + sy) * x.width + sx, ci)) *
                       weight((ky * k + kx) * cin + ci, o);
              }
            }
          }
          out((static_cast<Eigen::Index>(n) * x.height + y) * x.width + xx, o) =
              static_cast<T>(scale * acc + (bias ? (*bias)(0, o) : T(0)));
        }
      }
    }
  }
  return out;
}

/// Central finite difference of f with respect to every entry of m.
inline Mat<double> numeric_grad(Mat<double>& m, const std::function<double()>& f, double h = 1e-5) {
  Mat<double> g(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const double keep = m.data()[i];
    m.data()[i] = keep + h;
    const double up = f();
    m.data()[i] = keep - h;
    const double down = f();
    m.data()[i] = keep;
    g.data()[i] = (up - down) / (2 * h);
  }
  return g;
}

/// max |a - b| / max(|a|_inf, |b|_inf, floor)
inline double rel_err(const Mat<double>& a, const Mat<double>& b, double floor = 1e-8) {
  const double scale = std::max({a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff(), floor});
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

/// Every generated parameter drawn from N(0, std^2).
template <typename T>
inrgan::InrParams<T> random_params(const inrgan::InrArchitecture& arch, std::mt19937_64& rng, double std = 1.0) {
  const auto n = inrgan::param_count(arch);
  const Mat<T> flat = random_mat<T>(1, static_cast<int>(n), rng, std);
  return inrgan::unflatten_params<T>(arch, flat.data(), n);
}

/// Blocks 4^2 -> 8^2 with widths <= 8.
inline inrgan::InrArchitecture small_arch(inrgan::UpsampleMode up = inrgan::UpsampleMode::nearest,
                                          inrgan::Modulation mod = inrgan::Modulation::sigmoid,
                                          inrgan::FourierMode fm = inrgan::FourierMode::sincos) {
  inrgan::ArchConfig c;
  c.resolutions = {4, 8};
  c.hidden_widths = {{8, 6}, {5}};
  c.fourier_features = {3, 2};
  c.rank = 2;
  c.upsample = up;
  c.modulation = mod;
  c.fourier_mode = fm;
  return inrgan::make_architecture(c);
}

inline inrgan::InrArchitecture single_block_arch(int resolution = 4) {
  inrgan::ArchConfig c;
  c.resolutions = {resolution};
  c.hidden_widths = {{8, 8}};
  c.fourier_features = {4};
  c.rank = 3;
  return inrgan::make_architecture(c);
}

template <typename T>
inrgan::InrDecoder<T> decoder(const inrgan::InrArchitecture& arch, std::mt19937_64& rng) {
  inrgan::InrDecoder<T> d(arch);
  d.init_shared(rng);
  return d;
}

/// Multiplications counted while actually running the scalar hypernetwork
/// and the scalar INR at the working resolutions of `plan`.
inline std::uint64_t counted_macs(const inrgan::InrArchitecture& arch, const inrgan::GeneratorConfig& gen,
                                  const inrgan::RenderPlan& plan, std::uint64_t seed = 0) {
  std::mt19937_64 rng(seed);
  auto dec = decoder<double>(arch, rng);
  const auto p = random_params<double>(arch, rng, 0.1);
  MulCounter c;
  evaluate_inr(arch, dec, p, plan.resolutions, plan.extent, &c);
  return c.n + hypernetwork_mults(gen, inrgan::param_count(arch));
}

/// 8x8 end-to-end configuration that trains in milliseconds per step.
inline inrgan::RunConfig tiny_run_config() {
  inrgan::RunConfig c;
  c.arch.resolutions = {4, 8};
  c.arch.hidden_widths = {{8, 8}, {8}};
  c.arch.fourier_features = {4, 4};
  c.arch.rank = 3;
  c.generator.z_dim = 8;
  c.generator.hidden_dim = 16;
  c.discriminator.resolution = 8;
  c.discriminator.final_resolution = 4;
  c.discriminator.channels = {8, 16};
  c.discriminator.fc_dim = 16;
  c.train.resolution = 8;
  c.train.batch_size = 4;
  c.train.total_steps = 6;
  c.train.checkpoint_every = 3;
  c.train.sample_every = 3;
  c.train.sample_count = 4;
  c.data.count = 32;
  c.data.synthetic.resolution = 8;
  c.eval.fid_samples = 64;
  c.eval.kpl_train = 40;
  c.eval.kpl_test = 16;
  c.eval.sample_count = 4;
  c.eval.projection_steps = 3;
  return c;
}

}  // namespace oracle
