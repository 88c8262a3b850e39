#pragma once

#include "inrgan/tensor.hpp"

#include <vector>

namespace inrgan {

/// Axis-aligned rectangle of the coordinate plane. The training domain is
/// the unit square.
struct Extent {
  double x_min = 0.0;
  double x_max = 1.0;
  double y_min = 0.0;
  double y_max = 1.0;

  static Extent unit() { return {}; }
  static Extent square(double lo, double hi) { return {lo, hi, lo, hi}; }
  bool operator==(const Extent&) const = default;
};

/// Uniform pixel-center grid; `points` is (height*width) x 2 holding (x, y)
/// in row-major pixel order.
struct CoordGrid {
  int height = 0;
  int width = 0;
  Extent extent;
  Mat<double> points;

  Eigen::Index size() const { return points.rows(); }
};

/// x_j = x_min + (j + 0.5) / width * (x_max - x_min), likewise for rows.
CoordGrid make_grid(int height, int width, const Extent& extent = Extent::unit());

enum class FourierMode { sincos, sin };

/// Fourier coordinate features e(p) = [sin(gamma U p), cos(gamma U p)].
template <typename T>
struct FourierEmbedding {
  Mat<T> frequencies;  // n_f x 2, one row per wave
  T gamma = T(1);
  FourierMode mode = FourierMode::sincos;

  int num_frequencies() const { return static_cast<int>(frequencies.rows()); }
  int output_dim() const { return output_dim_for(num_frequencies(), mode); }

  static int output_dim_for(int n_f, FourierMode m) { return m == FourierMode::sincos ? 2 * n_f : n_f; }
};

/// Row i of the result embeds grid point i.
template <typename T>
Mat<T> fourier_embed(const CoordGrid& grid, const FourierEmbedding<T>& emb);

/// Same as fourier_embed but also returns the phases gamma*U*p (rows x n_f),
/// which the backward pass needs.
template <typename T>
Mat<T> fourier_embed(const Mat<double>& points, const FourierEmbedding<T>& emb, Mat<T>* phases);

struct Histogram {
  std::vector<double> edges;  // num_bins + 1 ascending edges
  std::vector<int> counts;
  int total() const;
};

/// Histogram of the row norms of U (the spatial frequencies). Bins span
/// [min norm, max norm]; the maximum lands in the last bin.
template <typename T>
Histogram frequency_histogram(const FourierEmbedding<T>& emb, int num_bins);

}  // namespace inrgan
