#pragma once

#include "inrgan/image.hpp"
#include "inrgan/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace inrgan {

/// Gaussian blobs on a flat background. Blob k is drawn into color channel
/// k, so keypoints can be read back per channel.
struct SyntheticShapeSpec {
  int resolution = 32;
  int shapes_per_image = 1;  // 1 to 3
  double sigma_min = 0.06;   // fractions of the image side
  double sigma_max = 0.12;
  double max_aspect = 1.5;   // ellipse axis ratio; 1 gives round blobs
  double center_min = 0.2;
  double center_max = 0.8;
  double amplitude_min = 0.6;
  double amplitude_max = 1.0;
  double background = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ImageDataset {
  int resolution = 0;
  bool augment_hflip = false;
  std::vector<Image> images;
  std::vector<std::string> sources;
  Mat<double> keypoints;  // rows per image, (x0, y0, x1, y1, ...); empty for folders

  std::size_t size() const { return images.size(); }
  /// Image i, mirrored when flip is set.
  Image get(std::size_t i, bool flip) const;
};

struct Batch {
  std::vector<std::size_t> indices;
  std::vector<bool> flipped;
  std::vector<Image> images;
  Mat<double> keypoints;  // flipped consistently with the images
};

/// Uniform draw with replacement; flips drawn per image when augmenting.
Batch sample_batch(const ImageDataset& dataset, int batch_size, std::uint64_t seed);

/// Sorted directory walk; center crop then bilinear resize. Files that are
/// not decodable images are skipped and reported in `warnings` (stderr when null).
ImageDataset load_folder(const std::string& path, int resolution, bool hflip,
                         std::vector<std::string>* warnings = nullptr);

/// Analytic rasterization: each pixel holds the area average of the blob
/// over the pixel footprint.
ImageDataset make_synthetic(const SyntheticShapeSpec& spec, int count, bool hflip = false);

/// x -> 1 - x for every keypoint.
Mat<double> flip_keypoints(const Mat<double>& keypoints);

/// Pixel-center position of the maximum of channel k, k < shapes.
RowVec<double> keypoints_argmax(const Image& img, int shapes);
/// Intensity centroid of channel k above half of its peak over the
/// background.
RowVec<double> keypoints_center_of_mass(const Image& img, int shapes, double background = 0.0);

void write_keypoints_csv(const std::string& path, const Mat<double>& keypoints);

}  // namespace inrgan
