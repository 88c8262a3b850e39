#include "inrgan/inr.hpp"

#include "inrgan/errors.hpp"

#include <cmath>
#include <stdexcept>

namespace inrgan {

// ---------------------------------------------------------------------------
// Architecture

int InrArchitecture::fourier_dim(std::size_t block) const {
  return FourierEmbedding<double>::output_dim_for(blocks.at(block).fourier_features, fourier_mode);
}

int InrArchitecture::num_layers() const {
  int n = 0;
  for (const auto& b : blocks) n += static_cast<int>(b.layers.size());
  return n;
}

void InrArchitecture::validate(bool strict) const {
  if (blocks.empty()) throw std::invalid_argument("architecture: no blocks");
  if (output_channels < 1) throw std::invalid_argument("architecture: output_channels must be positive");
  int prev_width = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto& block = blocks[b];
    const std::string where = "architecture block " + std::to_string(b) + ": ";
    if (block.resolution < 1) throw std::invalid_argument(where + "resolution must be positive");
    if (b > 0 && block.resolution != 2 * blocks[b - 1].resolution) {
      throw std::invalid_argument(where + "resolution must double the previous block's");
    }
    if (block.fourier_features < 1) throw std::invalid_argument(where + "needs Fourier features");
    const int n_layers = static_cast<int>(block.layers.size());
    if (n_layers < 1 || (strict && (n_layers < 2 || n_layers > 4))) {
      throw std::invalid_argument(where + "has " + std::to_string(n_layers) + " layers, expected 2-4");
    }
    int width = prev_width + fourier_dim(b);
    for (std::size_t l = 0; l < block.layers.size(); ++l) {
      const auto& layer = block.layers[l];
      if (layer.n_in != width) {
        throw std::invalid_argument(where + "layer " + std::to_string(l) + " expects " +
                                    std::to_string(layer.n_in) + " inputs but receives " +
                                    std::to_string(width));
      }
      if (layer.n_out < 1) throw std::invalid_argument(where + "layer width must be positive");
      if (!layer.direct && (layer.rank < 1 || layer.rank > std::min(layer.n_in, layer.n_out))) {
        throw std::invalid_argument(where + "layer " + std::to_string(l) + " rank out of range");
      }
      width = layer.n_out;
    }
    prev_width = width;
  }
  if (prev_width != output_channels) {
    throw std::invalid_argument("architecture: final layer must output " + std::to_string(output_channels) +
                                " channels");
  }
}

InrArchitecture make_architecture(const ArchConfig& c) {
  const std::size_t k = c.resolutions.size();
  if (k == 0 || c.hidden_widths.size() != k || c.fourier_features.size() != k) {
    throw std::invalid_argument("make_architecture: resolutions, widths and Fourier sizes must align");
  }
  InrArchitecture arch;
  arch.upsample = c.upsample;
  arch.output = c.output;
  arch.modulation = c.modulation;
  arch.fourier_mode = c.fourier_mode;
  arch.fourier_gamma = c.fourier_gamma;
  int prev_width = 0;
  for (std::size_t b = 0; b < k; ++b) {
    BlockSpec block;
    block.resolution = c.resolutions[b];
    block.fourier_features = c.fourier_features[b];
    std::vector<int> widths = c.hidden_widths[b];
    if (b + 1 == k) widths.push_back(arch.output_channels);
    int width = prev_width + FourierEmbedding<double>::output_dim_for(block.fourier_features, c.fourier_mode);
    for (int w : widths) {
      LayerShape layer{width, w, 0, false};
      block.layers.push_back(layer);
      width = w;
    }
    prev_width = width;
    arch.blocks.push_back(std::move(block));
  }
  for (std::size_t b = 0; b < k; ++b) {
    for (std::size_t l = 0; l < arch.blocks[b].layers.size(); ++l) {
      auto& layer = arch.blocks[b].layers[l];
      const bool first = b == 0 && l == 0;
      const bool last = b + 1 == k && l + 1 == arch.blocks[b].layers.size();
      layer.direct = first || last;
      layer.rank = layer.direct ? 0 : std::min({c.rank, layer.n_in, layer.n_out});
    }
  }
  arch.validate(c.strict);
  return arch;
}

InrArchitecture reference_architecture() { return make_architecture(ArchConfig{}); }

// ---------------------------------------------------------------------------
// Parameter layout

std::string ParamSegment::name() const {
  const std::string prefix = "block" + std::to_string(block);
  switch (kind) {
    case Kind::frequencies: return prefix + ".frequencies";
    case Kind::weight: return prefix + ".layer" + std::to_string(layer) + ".weight";
    case Kind::factor_a: return prefix + ".layer" + std::to_string(layer) + ".A";
    case Kind::factor_b: return prefix + ".layer" + std::to_string(layer) + ".B";
    case Kind::bias: return prefix + ".layer" + std::to_string(layer) + ".bias";
  }
  return prefix;
}

std::vector<ParamSegment> param_layout(const InrArchitecture& arch) {
  std::vector<ParamSegment> out;
  Eigen::Index offset = 0;
  auto add = [&](ParamSegment::Kind kind, int b, int l, int rows, int cols) {
    out.push_back({kind, b, l, rows, cols, offset});
    offset += static_cast<Eigen::Index>(rows) * cols;
  };
  for (std::size_t b = 0; b < arch.blocks.size(); ++b) {
    const auto& block = arch.blocks[b];
    const int bi = static_cast<int>(b);
    add(ParamSegment::Kind::frequencies, bi, -1, block.fourier_features, 2);
    for (std::size_t l = 0; l < block.layers.size(); ++l) {
      const auto& s = block.layers[l];
      const int li = static_cast<int>(l);
      if (s.direct) {
        add(ParamSegment::Kind::weight, bi, li, s.n_out, s.n_in);
      } else {
        add(ParamSegment::Kind::factor_a, bi, li, s.n_out, s.rank);
        add(ParamSegment::Kind::factor_b, bi, li, s.rank, s.n_in);
      }
      add(ParamSegment::Kind::bias, bi, li, 1, s.n_out);
    }
  }
  return out;
}

Eigen::Index param_count(const InrArchitecture& arch) {
  const auto layout = param_layout(arch);
  if (layout.empty()) return 0;
  const auto& last = layout.back();
  return last.offset + static_cast<Eigen::Index>(last.rows) * last.cols;
}

namespace {

template <typename T, typename Fn>
void for_each_segment(const InrArchitecture& arch, InrParams<T>& p, Fn&& fn) {
  for (const auto& seg : param_layout(arch)) {
    auto& block = p.blocks[seg.block];
    switch (seg.kind) {
      case ParamSegment::Kind::frequencies: fn(seg, block.frequencies); break;
      case ParamSegment::Kind::weight: fn(seg, block.layers[seg.layer].weight); break;
      case ParamSegment::Kind::factor_a: fn(seg, block.layers[seg.layer].factors.A); break;
      case ParamSegment::Kind::factor_b: fn(seg, block.layers[seg.layer].factors.B); break;
      case ParamSegment::Kind::bias: fn(seg, block.layers[seg.layer].factors.bias); break;
    }
  }
}

template <typename T>
InrParams<T> shaped_params(const InrArchitecture& arch) {
  InrParams<T> p;
  p.blocks.resize(arch.blocks.size());
  for (std::size_t b = 0; b < arch.blocks.size(); ++b) p.blocks[b].layers.resize(arch.blocks[b].layers.size());
  return p;
}

}  // namespace

template <typename T>
InrParams<T> zero_params(const InrArchitecture& arch) {
  InrParams<T> p = shaped_params<T>(arch);
  for_each_segment(arch, p, [](const ParamSegment& seg, auto& m) { m.setZero(seg.rows, seg.cols); });
  return p;
}

template <typename T>
InrParams<T> unflatten_params(const InrArchitecture& arch, const T* data, Eigen::Index size) {
  if (size != param_count(arch)) {
    throw std::invalid_argument("unflatten_params: got " + std::to_string(size) + " values, expected " +
                                std::to_string(param_count(arch)));
  }
  InrParams<T> p = shaped_params<T>(arch);
  for_each_segment(arch, p, [data](const ParamSegment& seg, auto& m) {
    m.resize(seg.rows, seg.cols);
    std::copy(data + seg.offset, data + seg.offset + m.size(), m.data());
  });
  return p;
}

template <typename T>
void check_params(const InrArchitecture& arch, const InrParams<T>& params) {
  if (params.blocks.size() != arch.blocks.size()) {
    throw std::invalid_argument("INR params: block count does not match architecture");
  }
  for (std::size_t b = 0; b < arch.blocks.size(); ++b) {
    if (params.blocks[b].layers.size() != arch.blocks[b].layers.size()) {
      throw std::invalid_argument("INR params: layer count mismatch in block " + std::to_string(b));
    }
  }
  auto& mutable_params = const_cast<InrParams<T>&>(params);
  for_each_segment(arch, mutable_params, [](const ParamSegment& seg, const auto& m) {
    if (m.rows() != seg.rows || m.cols() != seg.cols) {
      throw std::invalid_argument("INR params: " + seg.name() + " is " + std::to_string(m.rows()) + "x" +
                                  std::to_string(m.cols()) + ", expected " + std::to_string(seg.rows) +
                                  "x" + std::to_string(seg.cols));
    }
  });
}

template <typename T>
void flatten_params(const InrArchitecture& arch, const InrParams<T>& params, T* out, Eigen::Index size) {
  if (size != param_count(arch)) throw std::invalid_argument("flatten_params: output size mismatch");
  check_params(arch, params);
  auto& p = const_cast<InrParams<T>&>(params);
  for_each_segment(arch, p, [out](const ParamSegment& seg, const auto& m) {
    std::copy(m.data(), m.data() + m.size(), out + seg.offset);
  });
}

template <typename T>
InrParams<T> lerp_params(const InrParams<T>& p1, const InrParams<T>& p2, T t) {
  auto same = [](const auto& a, const auto& b) { return a.rows() == b.rows() && a.cols() == b.cols(); };
  if (p1.blocks.size() != p2.blocks.size()) throw std::invalid_argument("lerp_params: block count mismatch");
  InrParams<T> out = p1;
  auto mix = [&](auto& dst, const auto& a, const auto& b) {
    if (!same(a, b)) throw std::invalid_argument("lerp_params: shape mismatch");
    dst = (T(1) - t) * a + t * b;
  };
  for (std::size_t b = 0; b < p1.blocks.size(); ++b) {
    const auto& b1 = p1.blocks[b];
    const auto& b2 = p2.blocks[b];
    if (b1.layers.size() != b2.layers.size()) throw std::invalid_argument("lerp_params: layer count mismatch");
    mix(out.blocks[b].frequencies, b1.frequencies, b2.frequencies);
    for (std::size_t l = 0; l < b1.layers.size(); ++l) {
      auto& o = out.blocks[b].layers[l];
      mix(o.weight, b1.layers[l].weight, b2.layers[l].weight);
      mix(o.factors.A, b1.layers[l].factors.A, b2.layers[l].factors.A);
      mix(o.factors.B, b1.layers[l].factors.B, b2.layers[l].factors.B);
      mix(o.factors.bias, b1.layers[l].factors.bias, b2.layers[l].factors.bias);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Resampling

Resampler Resampler::make(int in_res, int out_res, UpsampleMode mode) {
  if (in_res < 1 || out_res < 1) throw std::invalid_argument("Resampler: resolutions must be positive");
  Resampler r;
  r.in_res = in_res;
  r.out_res = out_res;
  const double scale = static_cast<double>(in_res) / out_res;
  // Per-axis taps, combined as an outer product.
  std::vector<std::vector<std::pair<int, double>>> taps(out_res);
  for (int i = 0; i < out_res; ++i) {
    if (mode == UpsampleMode::nearest) {
      const int src = std::min(in_res - 1, static_cast<int>(std::floor((i + 0.5) * scale)));
      taps[i] = {{src, 1.0}};
    } else {
      const double pos = std::clamp((i + 0.5) * scale - 0.5, 0.0, static_cast<double>(in_res - 1));
      const int i0 = static_cast<int>(std::floor(pos));
      const int i1 = std::min(i0 + 1, in_res - 1);
      const double f = pos - i0;
      if (i1 == i0 || f == 0.0) {
        taps[i] = {{i0, 1.0}};
      } else {
        taps[i] = {{i0, 1.0 - f}, {i1, f}};
      }
    }
  }
  r.offsets.reserve(static_cast<std::size_t>(out_res) * out_res + 1);
  r.offsets.push_back(0);
  for (int y = 0; y < out_res; ++y) {
    for (int x = 0; x < out_res; ++x) {
      for (const auto& [sy, wy] : taps[y]) {
        for (const auto& [sx, wx] : taps[x]) {
          r.index.push_back(sy * in_res + sx);
          r.weight.push_back(wy * wx);
        }
      }
      r.offsets.push_back(static_cast<int>(r.index.size()));
    }
  }
  return r;
}

template <typename T>
Mat<T> Resampler::apply(const Mat<T>& f) const {
  if (f.rows() != static_cast<Eigen::Index>(in_res) * in_res) {
    throw std::invalid_argument("Resampler::apply: expected " + std::to_string(in_res * in_res) + " rows");
  }
  const Eigen::Index n_out = static_cast<Eigen::Index>(out_res) * out_res;
  Mat<T> out(n_out, f.cols());
  for (Eigen::Index o = 0; o < n_out; ++o) {
    const int begin = offsets[o];
    const int end = offsets[o + 1];
    if (end - begin == 1 && weight[begin] == 1.0) {
      out.row(o) = f.row(index[begin]);
      continue;
    }
    out.row(o).setZero();
    for (int k = begin; k < end; ++k) out.row(o) += static_cast<T>(weight[k]) * f.row(index[k]);
  }
  return out;
}

template <typename T>
Mat<T> Resampler::adjoint(const Mat<T>& g) const {
  const Eigen::Index n_out = static_cast<Eigen::Index>(out_res) * out_res;
  if (g.rows() != n_out) throw std::invalid_argument("Resampler::adjoint: row count mismatch");
  Mat<T> out = Mat<T>::Zero(static_cast<Eigen::Index>(in_res) * in_res, g.cols());
  for (Eigen::Index o = 0; o < n_out; ++o) {
    for (int k = offsets[o]; k < offsets[o + 1]; ++k) out.row(index[k]) += static_cast<T>(weight[k]) * g.row(o);
  }
  return out;
}

template <typename T>
Mat<T> upsample_features(const Mat<T>& features, int resolution, UpsampleMode mode) {
  if (resolution < 1 || features.rows() != static_cast<Eigen::Index>(resolution) * resolution) {
    throw std::invalid_argument("upsample_features: feature map is not square with the given resolution");
  }
  return Resampler::make(resolution, 2 * resolution, mode).apply(features);
}

// ---------------------------------------------------------------------------
// Render plans

RenderPlan plan_native(const InrArchitecture& arch, const Extent& extent) {
  RenderPlan plan;
  for (const auto& b : arch.blocks) plan.resolutions.push_back(b.resolution);
  plan.extent = extent;
  return plan;
}

RenderPlan plan_superres(const InrArchitecture& arch, int factor) {
  if (factor < 1) throw std::invalid_argument("superresolve: factor must be >= 1");
  RenderPlan plan = plan_native(arch);
  plan.resolutions.back() *= factor;
  return plan;
}

RenderPlan plan_lowres(const InrArchitecture& arch, int r_low) {
  const int full = arch.resolution();
  if (r_low < 1) throw std::invalid_argument("evaluate_lowres: resolution must be >= 1");
  if (r_low > full) {
    throw std::invalid_argument("evaluate_lowres: resolution " + std::to_string(r_low) +
                                " exceeds the final block resolution " + std::to_string(full));
  }
  RenderPlan plan;
  for (const auto& b : arch.blocks) {
    const long scaled = static_cast<long>(b.resolution) * r_low / full;
    plan.resolutions.push_back(static_cast<int>(std::max(1L, scaled)));
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Decoder

template <typename T>
InrDecoder<T>::InrDecoder(InrArchitecture arch) : arch_(std::move(arch)) {
  arch_.validate(false);
  for (std::size_t b = 0; b < arch_.blocks.size(); ++b) {
    layer_offset_.push_back(static_cast<int>(shared_.size()));
    for (std::size_t l = 0; l < arch_.blocks[b].layers.size(); ++l) {
      const auto& s = arch_.blocks[b].layers[l];
      const std::string name = "inr.block" + std::to_string(b) + ".layer" + std::to_string(l) + ".shared";
      shared_.emplace_back(name, s.direct ? Mat<T>() : Mat<T>(Mat<T>::Zero(s.n_out, s.n_in)));
    }
  }
}

template <typename T>
ParamList<T> InrDecoder<T>::shared_params() {
  ParamList<T> out;
  for (auto& p : shared_) {
    if (p.size() > 0) out.push_back(&p);
  }
  return out;
}

template <typename T>
FmmLayerSpec<T> InrDecoder<T>::layer_spec(int block, int layer) const {
  const auto& s = arch_.blocks.at(block).layers.at(layer);
  FmmLayerSpec<T> spec;
  spec.n_in = s.n_in;
  spec.n_out = s.n_out;
  spec.rank = s.rank;
  spec.activation = arch_.modulation;
  spec.direct = s.direct;
  spec.shared_weight = shared(block, layer).value;
  return spec;
}

template <typename T>
Mat<T> InrDecoder<T>::effective_weight(int block, int layer, const LayerParams<T>& p, MacCounter* macs) const {
  const auto& s = arch_.blocks[block].layers[layer];
  if (s.direct) return p.weight;
  if (macs != nullptr) macs->modulation += static_cast<std::uint64_t>(s.n_out) * s.rank * s.n_in;
  return modulate(layer_spec(block, layer), p.factors);
}

template <typename T>
Mat<T> InrDecoder<T>::run_layers(const InrParams<T>& params, int block, Mat<T> x, bool final_block,
                                 InrTrace<T>* trace, MacCounter* macs) const {
  const auto& layers = arch_.blocks[block].layers;
  const T slope = static_cast<T>(arch_.leaky_slope);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& lp = params.blocks[block].layers[l];
    Mat<T> w = effective_weight(block, static_cast<int>(l), lp, macs);
    Mat<T> z = apply_affine(w, lp.factors.bias, x);
    if (macs != nullptr) macs->affine += static_cast<std::uint64_t>(x.rows()) * w.rows() * w.cols();
    const bool output_layer = final_block && l + 1 == layers.size();
    Mat<T> next;
    if (output_layer) {
      if (arch_.output == OutputActivation::sigmoid_to_unit) {
        next = z.unaryExpr([](T v) { return sigmoid(v); });
      } else {
        next = z.cwiseMax(T(0)).cwiseMin(T(1));
      }
    } else {
      next = z.unaryExpr([slope](T v) { return leaky_relu(v, slope); });
    }
    if (trace != nullptr) {
      trace->inputs[block].push_back(std::move(x));
      trace->preacts[block].push_back(std::move(z));
      trace->weights[block].push_back(std::move(w));
    }
    x = std::move(next);
  }
  return x;
}

template <typename T>
Mat<T> InrDecoder<T>::render(const InrParams<T>& params, const RenderPlan& plan, InrTrace<T>* trace,
                             MacCounter* macs) const {
  check_params(arch_, params);
  const std::size_t k = arch_.blocks.size();
  if (plan.resolutions.size() != k) throw std::invalid_argument("render: plan has wrong number of blocks");
  if (trace != nullptr) {
    *trace = InrTrace<T>{};
    trace->plan = plan;
    trace->points.resize(k);
    trace->phases.resize(k);
    trace->inputs.resize(k);
    trace->preacts.resize(k);
    trace->weights.resize(k);
  }
  Mat<T> hidden;
  for (std::size_t b = 0; b < k; ++b) {
    const int res = plan.resolutions[b];
    const CoordGrid grid = make_grid(res, res, plan.extent);
    FourierEmbedding<T> emb{params.blocks[b].frequencies, static_cast<T>(arch_.fourier_gamma), arch_.fourier_mode};
    Mat<T> phases;
    Mat<T> feats = fourier_embed<T>(grid.points, emb, &phases);
    if (macs != nullptr) macs->fourier += static_cast<std::uint64_t>(grid.size()) * emb.num_frequencies() * 2;
    Mat<T> x;
    if (b == 0) {
      x = std::move(feats);
    } else {
      const Mat<T> up = Resampler::make(plan.resolutions[b - 1], res, arch_.upsample).apply(hidden);
      x.resize(grid.size(), feats.cols() + up.cols());
      x << feats, up;
    }
    if (trace != nullptr) {
      trace->points[b] = grid.points;
      trace->phases[b] = std::move(phases);
    }
    hidden = run_layers(params, static_cast<int>(b), std::move(x), b + 1 == k, trace, macs);
  }
  if (trace != nullptr) trace->output = hidden;
  return hidden;
}

template <typename T>
Mat<T> InrDecoder<T>::evaluate(const InrParams<T>& params, const Extent& extent) const {
  return render(params, plan_native(arch_, extent));
}

template <typename T>
Mat<T> InrDecoder<T>::superresolve(const InrParams<T>& params, int factor) const {
  return render(params, plan_superres(arch_, factor));
}

template <typename T>
Mat<T> InrDecoder<T>::zoom(const InrParams<T>& params, const Extent& extent) const {
  return render(params, plan_native(arch_, extent));
}

template <typename T>
Mat<T> InrDecoder<T>::evaluate_lowres(const InrParams<T>& params, int r_low, MacCounter* macs) const {
  return render(params, plan_lowres(arch_, r_low), nullptr, macs);
}

template <typename T>
Mat<T> InrDecoder<T>::evaluate_points(const InrParams<T>& params, const Mat<double>& points) const {
  if (arch_.blocks.size() != 1) {
    throw InvalidStateError("evaluate_points: only single-block decoders are pointwise");
  }
  check_params(arch_, params);
  FourierEmbedding<T> emb{params.blocks[0].frequencies, static_cast<T>(arch_.fourier_gamma), arch_.fourier_mode};
  return run_layers(params, 0, fourier_embed<T>(points, emb, nullptr), true, nullptr, nullptr);
}

template <typename T>
InrGrads<T> InrDecoder<T>::backward(const InrParams<T>& /*params*/, const InrTrace<T>& trace,
                                    const Mat<T>& d_output) const {
  const std::size_t k = arch_.blocks.size();
  if (trace.inputs.size() != k) throw std::invalid_argument("InrDecoder::backward: trace does not match");
  if (d_output.rows() != trace.output.rows() || d_output.cols() != trace.output.cols()) {
    throw std::invalid_argument("InrDecoder::backward: output gradient shape mismatch");
  }
  const T slope = static_cast<T>(arch_.leaky_slope);
  const T gamma = static_cast<T>(arch_.fourier_gamma);
  InrGrads<T> g;
  g.frequencies.resize(k);
  g.weights.resize(k);
  g.biases.resize(k);

  // Gradient w.r.t. the post-activation output of the current layer.
  Mat<T> d_act = d_output;
  for (std::size_t bi = k; bi-- > 0;) {
    const auto& layers = arch_.blocks[bi].layers;
    const std::size_t n_layers = layers.size();
    g.weights[bi].resize(n_layers);
    g.biases[bi].resize(n_layers);
    for (std::size_t li = n_layers; li-- > 0;) {
      const Mat<T>& z = trace.preacts[bi][li];
      Mat<T> dz;
      if (bi + 1 == k && li + 1 == n_layers) {
        if (arch_.output == OutputActivation::sigmoid_to_unit) {
          dz = d_act.cwiseProduct(trace.output.unaryExpr([](T s) { return s * (T(1) - s); }));
        } else {
          dz = d_act.cwiseProduct(z.unaryExpr([](T v) { return (v > T(0) && v < T(1)) ? T(1) : T(0); }));
        }
      } else {
        dz = d_act.cwiseProduct(z.unaryExpr([slope](T v) { return v > T(0) ? T(1) : slope; }));
      }
      AffineGrads<T> ag = apply_affine_backward(trace.weights[bi][li], trace.inputs[bi][li], dz);
      g.weights[bi][li] = std::move(ag.dWeight);
      g.biases[bi][li] = std::move(ag.dBias);
      d_act = std::move(ag.dInputs);
    }
    // d_act is now the gradient w.r.t. the block input [fourier | upsampled hidden].
    const int n_f = arch_.blocks[bi].fourier_features;
    const int f_dim = arch_.fourier_dim(bi);
    const Mat<T>& phase = trace.phases[bi];
    Mat<T> d_phase = d_act.leftCols(n_f).cwiseProduct(phase.array().cos().matrix());
    if (arch_.fourier_mode == FourierMode::sincos) {
      d_phase -= d_act.middleCols(n_f, n_f).cwiseProduct(phase.array().sin().matrix());
    }
    g.frequencies[bi] = gamma * (d_phase.transpose() * trace.points[bi].template cast<T>());
    if (bi > 0) {
      const Mat<T> d_up = d_act.rightCols(d_act.cols() - f_dim);
      const auto resampler =
          Resampler::make(trace.plan.resolutions[bi - 1], trace.plan.resolutions[bi], arch_.upsample);
      d_act = resampler.adjoint(d_up);
    }
  }
  return g;
}

template <typename T>
InrParams<T> InrDecoder<T>::param_grads(const InrParams<T>& params, const InrGrads<T>& grads,
                                        bool accumulate_shared) {
  InrParams<T> out = shaped_params<T>(arch_);
  for (std::size_t b = 0; b < arch_.blocks.size(); ++b) {
    out.blocks[b].frequencies = grads.frequencies[b];
    for (std::size_t l = 0; l < arch_.blocks[b].layers.size(); ++l) {
      const auto& s = arch_.blocks[b].layers[l];
      auto& o = out.blocks[b].layers[l];
      o.factors.bias = grads.biases[b][l];
      if (s.direct) {
        o.weight = grads.weights[b][l];
        continue;
      }
      const int bi = static_cast<int>(b);
      const int li = static_cast<int>(l);
      ModulateGrads<T> mg = modulate_backward(layer_spec(bi, li), params.blocks[b].layers[l].factors,
                                              grads.weights[b][l]);
      o.factors.A = std::move(mg.dA);
      o.factors.B = std::move(mg.dB);
      if (accumulate_shared) shared(bi, li).grad += mg.dShared;
    }
  }
  return out;
}

#define INRGAN_INSTANTIATE_INR(T)                                                                 \
  template InrParams<T> zero_params<T>(const InrArchitecture&);                                   \
  template InrParams<T> unflatten_params<T>(const InrArchitecture&, const T*, Eigen::Index);      \
  template void flatten_params<T>(const InrArchitecture&, const InrParams<T>&, T*, Eigen::Index); \
  template void check_params<T>(const InrArchitecture&, const InrParams<T>&);                     \
  template InrParams<T> lerp_params<T>(const InrParams<T>&, const InrParams<T>&, T);              \
  template Mat<T> Resampler::apply<T>(const Mat<T>&) const;                                       \
  template Mat<T> Resampler::adjoint<T>(const Mat<T>&) const;                                     \
  template Mat<T> upsample_features<T>(const Mat<T>&, int, UpsampleMode);                         \
  template class InrDecoder<T>;

INRGAN_INSTANTIATE_INR(float)
INRGAN_INSTANTIATE_INR(double)

}  // namespace inrgan
