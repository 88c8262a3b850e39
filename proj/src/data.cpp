#include "inrgan/data.hpp"

#include "inrgan/errors.hpp"
#include "inrgan/rng.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <stdexcept>

namespace inrgan {

void SyntheticShapeSpec::validate() const {
  if (resolution < 1) throw std::invalid_argument("synthetic: resolution must be positive");
  if (shapes_per_image < 1 || shapes_per_image > 3) throw std::invalid_argument("synthetic: shapes_per_image must be 1 to 3");
  if (!(sigma_min > 0 && sigma_min <= sigma_max)) throw std::invalid_argument("synthetic: need 0 < sigma_min <= sigma_max");
  if (!(max_aspect >= 1)) throw std::invalid_argument("synthetic: max_aspect must be >= 1");
  if (!(center_min >= 0 && center_min <= center_max && center_max <= 1)) {
    throw std::invalid_argument("synthetic: centers must lie in [0, 1]");
  }
  if (!(amplitude_min >= 0 && amplitude_min <= amplitude_max)) throw std::invalid_argument("synthetic: invalid amplitudes");
  if (!(background >= 0 && background + amplitude_max <= 1)) {
    throw std::invalid_argument("synthetic: background + amplitude_max must stay within [0, 1]");
  }
}

Image ImageDataset::get(std::size_t i, bool flip) const {
  if (i >= images.size()) throw std::out_of_range("dataset index out of range");
  return flip ? hflip(images[i]) : images[i];
}

Batch sample_batch(const ImageDataset& dataset, int batch_size, std::uint64_t seed) {
  if (dataset.size() == 0) throw std::invalid_argument("sample_batch: empty dataset");
  if (batch_size < 1) throw std::invalid_argument("sample_batch: batch_size must be positive");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  std::bernoulli_distribution coin(0.5);
  Batch b;
  const bool has_kp = dataset.keypoints.rows() == static_cast<Eigen::Index>(dataset.size());
  if (has_kp) b.keypoints.resize(batch_size, dataset.keypoints.cols());
  for (int i = 0; i < batch_size; ++i) {
    const std::size_t idx = pick(rng);
    const bool flip = dataset.augment_hflip && coin(rng);
    b.indices.push_back(idx);
    b.flipped.push_back(flip);
    b.images.push_back(dataset.get(idx, flip));
    if (has_kp) {
      Mat<double> row = dataset.keypoints.row(static_cast<Eigen::Index>(idx));
      if (flip) row = flip_keypoints(row);
      b.keypoints.row(i) = row.row(0);
    }
  }
  return b;
}

ImageDataset load_folder(const std::string& path, int resolution, bool hflip, std::vector<std::string>* warnings) {
  namespace fs = std::filesystem;
  if (resolution < 1) throw std::invalid_argument("load_folder: resolution must be positive");
  std::error_code ec;
  if (!fs::is_directory(path, ec)) throw IoError("not a directory", path);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(path)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  ImageDataset ds;
  ds.resolution = resolution;
  ds.augment_hflip = hflip;
  std::vector<std::string> offenders;
  for (const auto& f : files) {
    try {
      Image img = center_crop_square(read_image(f.string()));
      if (img.height != resolution) img = resize(img, resolution, resolution, ResizeMode::bilinear);
      ds.images.push_back(std::move(img));
      ds.sources.push_back(f.string());
    } catch (const IoError& e) {
      offenders.push_back(f.string());
      const std::string msg = std::string("skipping ") + e.what();
      if (warnings != nullptr) {
        warnings->push_back(msg);
      } else {
        std::cerr << "warning: " << msg << "\n";
      }
    }
  }
  if (ds.images.empty()) throw IngestionError("no decodable images in " + path, offenders);
  return ds;
}

namespace {

// Mean of exp(-(u - c)^2 / (2 s^2)) over [u0, u1].
double gaussian_area(double u0, double u1, double c, double s) {
  const double k = s * std::sqrt(2.0);
  return s * std::sqrt(M_PI / 2.0) * (std::erf((u1 - c) / k) - std::erf((u0 - c) / k)) / (u1 - u0);
}

}  // namespace

ImageDataset make_synthetic(const SyntheticShapeSpec& spec, int count, bool hflip) {
  spec.validate();
  if (count < 1) throw std::invalid_argument("make_synthetic: count must be positive");
  const int r = spec.resolution;
  const int k = spec.shapes_per_image;
  Rng rng = make_rng(spec.seed, Stream::data);
  std::uniform_real_distribution<double> center(spec.center_min, spec.center_max);
  std::uniform_real_distribution<double> sigma(spec.sigma_min, spec.sigma_max);
  std::uniform_real_distribution<double> log_aspect(0.0, std::log(spec.max_aspect));
  std::uniform_real_distribution<double> amp(spec.amplitude_min, spec.amplitude_max);
  std::bernoulli_distribution wide(0.5);
  ImageDataset ds;
  ds.resolution = r;
  ds.augment_hflip = hflip;
  ds.keypoints.resize(count, 2 * k);
  std::vector<double> gx(r), gy(r);
  for (int n = 0; n < count; ++n) {
    Image img(r, r, 3);
    img.data.setConstant(static_cast<float>(spec.background));
    for (int s = 0; s < k; ++s) {
      const double cx = center(rng), cy = center(rng), base = sigma(rng);
      const double aspect = std::exp(log_aspect(rng));
      const bool horizontal = wide(rng);
      const double sx = horizontal ? base * aspect : base, sy = horizontal ? base : base * aspect;
      const double a = amp(rng);
      for (int i = 0; i < r; ++i) {
        gx[i] = gaussian_area(static_cast<double>(i) / r, static_cast<double>(i + 1) / r, cx, sx);
        gy[i] = gaussian_area(static_cast<double>(i) / r, static_cast<double>(i + 1) / r, cy, sy);
      }
      for (int y = 0; y < r; ++y) {
        for (int x = 0; x < r; ++x) img.at(y, x, s) += static_cast<float>(a * gy[y] * gx[x]);
      }
      ds.keypoints(n, 2 * s) = cx;
      ds.keypoints(n, 2 * s + 1) = cy;
    }
    img.data = img.data.cwiseMax(0.0f).cwiseMin(1.0f);
    ds.images.push_back(std::move(img));
    ds.sources.push_back("synthetic:" + std::to_string(n));
  }
  return ds;
}

Mat<double> flip_keypoints(const Mat<double>& keypoints) {
  Mat<double> out = keypoints;
  for (Eigen::Index c = 0; c < out.cols(); c += 2) out.col(c) = (1.0 - out.col(c).array()).matrix();
  return out;
}

namespace {

void check_channels(const Image& img, int shapes) {
  if (shapes < 1 || shapes > img.channels()) throw std::invalid_argument("keypoint oracle: shapes exceed channels");
}

}  // namespace

RowVec<double> keypoints_argmax(const Image& img, int shapes) {
  check_channels(img, shapes);
  RowVec<double> out(2 * shapes);
  for (int s = 0; s < shapes; ++s) {
    Eigen::Index best = 0;
    img.data.col(s).maxCoeff(&best);
    out(2 * s) = (static_cast<double>(best % img.width) + 0.5) / img.width;
    out(2 * s + 1) = (static_cast<double>(best / img.width) + 0.5) / img.height;
  }
  return out;
}

RowVec<double> keypoints_center_of_mass(const Image& img, int shapes, double background) {
  check_channels(img, shapes);
  RowVec<double> out(2 * shapes);
  for (int s = 0; s < shapes; ++s) {
    const double peak = img.data.col(s).maxCoeff();
    const double threshold = background + 0.5 * (peak - background);
    double sw = 0, sx = 0, sy = 0;
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        const double w = std::max(0.0, static_cast<double>(img.at(y, x, s)) - threshold);
        sw += w;
        sx += w * (x + 0.5) / img.width;
        sy += w * (y + 0.5) / img.height;
      }
    }
    out(2 * s) = sw > 0 ? sx / sw : 0.5;
    out(2 * s + 1) = sw > 0 ? sy / sw : 0.5;
  }
  return out;
}

void write_keypoints_csv(const std::string& path, const Mat<double>& keypoints) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write file", path);
  out << "image_index";
  for (Eigen::Index c = 0; c < keypoints.cols() / 2; ++c) out << ",kp" << c << "_x,kp" << c << "_y";
  out << "\n";
  out.precision(10);
  for (Eigen::Index i = 0; i < keypoints.rows(); ++i) {
    out << i;
    for (Eigen::Index c = 0; c < keypoints.cols(); ++c) out << "," << keypoints(i, c);
    out << "\n";
  }
  if (!out) throw IoError("write failed", path);
}

}  // namespace inrgan
