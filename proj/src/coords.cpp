#include "inrgan/coords.hpp"

#include <numeric>
#include <stdexcept>

namespace inrgan {

CoordGrid make_grid(int height, int width, const Extent& extent) {
  if (height < 1 || width < 1) {
    throw std::invalid_argument("make_grid: dimensions must be positive, got " +
                                std::to_string(height) + "x" + std::to_string(width));
  }
  if (!(extent.x_min < extent.x_max) || !(extent.y_min < extent.y_max)) {
    throw std::invalid_argument("make_grid: degenerate extent");
  }
  CoordGrid grid{height, width, extent, Mat<double>(static_cast<Eigen::Index>(height) * width, 2)};
  const double dx = (extent.x_max - extent.x_min) / width;
  const double dy = (extent.y_max - extent.y_min) / height;
  for (int i = 0; i < height; ++i) {
    const double y = extent.y_min + (i + 0.5) * dy;
    for (int j = 0; j < width; ++j) {
      const Eigen::Index row = static_cast<Eigen::Index>(i) * width + j;
      grid.points(row, 0) = extent.x_min + (j + 0.5) * dx;
      grid.points(row, 1) = y;
    }
  }
  return grid;
}

template <typename T>
Mat<T> fourier_embed(const Mat<double>& points, const FourierEmbedding<T>& emb, Mat<T>* phases) {
  if (emb.frequencies.cols() != 2 || points.cols() != 2) {
    throw std::invalid_argument("fourier_embed: frequency matrix and points must have 2 columns");
  }
  const int n_f = emb.num_frequencies();
  Mat<T> phase = (points.cast<T>() * emb.frequencies.transpose()) * emb.gamma;
  Mat<T> out(points.rows(), emb.output_dim());
  out.leftCols(n_f) = phase.array().sin().matrix();
  if (emb.mode == FourierMode::sincos) out.rightCols(n_f) = phase.array().cos().matrix();
  if (phases != nullptr) *phases = std::move(phase);
  return out;
}

template <typename T>
Mat<T> fourier_embed(const CoordGrid& grid, const FourierEmbedding<T>& emb) {
  return fourier_embed<T>(grid.points, emb, nullptr);
}

int Histogram::total() const { return std::accumulate(counts.begin(), counts.end(), 0); }

template <typename T>
Histogram frequency_histogram(const FourierEmbedding<T>& emb, int num_bins) {
  if (num_bins < 1) throw std::invalid_argument("frequency_histogram: num_bins must be >= 1");
  Histogram h;
  h.counts.assign(num_bins, 0);
  const int n = emb.num_frequencies();
  if (n == 0) {
    h.edges.assign(num_bins + 1, 0.0);
    return h;
  }
  std::vector<double> norms(n);
  for (int i = 0; i < n; ++i) norms[i] = static_cast<double>(emb.frequencies.row(i).norm());
  const auto [lo_it, hi_it] = std::minmax_element(norms.begin(), norms.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  const double width = hi > lo ? (hi - lo) / num_bins : 1.0;
  h.edges.resize(num_bins + 1);
  for (int b = 0; b <= num_bins; ++b) h.edges[b] = lo + b * width;
  for (double v : norms) {
    int b = static_cast<int>((v - lo) / width);
    h.counts[std::clamp(b, 0, num_bins - 1)] += 1;
  }
  return h;
}

template Mat<float> fourier_embed(const Mat<double>&, const FourierEmbedding<float>&, Mat<float>*);
template Mat<double> fourier_embed(const Mat<double>&, const FourierEmbedding<double>&, Mat<double>*);
template Mat<float> fourier_embed(const CoordGrid&, const FourierEmbedding<float>&);
template Mat<double> fourier_embed(const CoordGrid&, const FourierEmbedding<double>&);
template Histogram frequency_histogram(const FourierEmbedding<float>&, int);
template Histogram frequency_histogram(const FourierEmbedding<double>&, int);

}  // namespace inrgan
