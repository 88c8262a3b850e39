#pragma once

#include "inrgan/tensor.hpp"

#include <string>
#include <vector>

namespace inrgan {

/// RGB image with float values in [0, 1]; pixels are rows in row-major
/// order, channels are columns.
struct Image {
  int height = 0;
  int width = 0;
  Mat<float> data;

  Image() = default;
  Image(int h, int w, int channels = 3) : height(h), width(w), data(Mat<float>::Zero(static_cast<Eigen::Index>(h) * w, channels)) {}
  Image(int h, int w, Mat<float> pixels);

  int channels() const { return static_cast<int>(data.cols()); }
  float& at(int y, int x, int c) { return data(static_cast<Eigen::Index>(y) * width + x, c); }
  float at(int y, int x, int c) const { return data(static_cast<Eigen::Index>(y) * width + x, c); }
};

enum class ResizeMode { nearest, bilinear, bicubic };

/// Resampling at pixel centers with clamped borders (bicubic: Keys, a = -0.5,
/// clamped to [0, 1]).
Image resize(const Image& img, int height, int width, ResizeMode mode);
Image center_crop_square(const Image& img);
Image hflip(const Image& img);
/// Rounds to the nearest 8-bit level.
Image quantize8(const Image& img);

/// Reads PNG or JPEG (by signature) into RGB; grayscale and alpha are
/// converted. Throws IoError.
Image read_image(const std::string& path);
void write_png(const std::string& path, const Image& img);
std::vector<unsigned char> encode_png(const Image& img);

/// ceil(sqrt(n)) cells per side separated by `gap` pixels of `background`.
Image tile_grid(const std::vector<Image>& images, int gap = 2, float background = 1.0f);
/// Single row of images separated by `gap` pixels.
Image tile_row(const std::vector<Image>& images, int gap = 2, float background = 1.0f);

}  // namespace inrgan
