#include "oracles.hpp"

#include "inrgan/data.hpp"
#include "inrgan/errors.hpp"
#include "inrgan/image.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace inrgan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("inrgan_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

SyntheticShapeSpec centered(int res) {
  SyntheticShapeSpec s;
  s.resolution = res;
  s.center_min = s.center_max = 0.5;
  s.max_aspect = 1.0;
  return s;
}

}  // namespace

TEST_CASE("a centered blob peaks at the center") {
  const auto odd = make_synthetic(centered(31), 3);
  for (const auto& im : odd.images) {
    Eigen::Index best = 0;
    im.data.col(0).maxCoeff(&best);
    CHECK(best == 15 * 31 + 15);
  }
  const auto even = make_synthetic(centered(32), 1);
  const auto& im = even.images[0];
  const float c = im.at(15, 15, 0);
  CHECK(std::abs(im.at(16, 16, 0) - c) < 1e-6f);
  CHECK(std::abs(im.at(15, 16, 0) - c) < 1e-6f);
  CHECK(std::abs(im.at(16, 15, 0) - c) < 1e-6f);
  CHECK(im.data.col(0).maxCoeff() == doctest::Approx(c).epsilon(1e-6));
  CHECK(even.keypoints(0, 0) == 0.5);
  CHECK(even.keypoints(0, 1) == 0.5);
}

TEST_CASE("keypoint oracles recover blob centers within a pixel") {
  for (int shapes : {1, 2, 3}) {
    SyntheticShapeSpec s;
    s.shapes_per_image = shapes;
    s.seed = 10 + static_cast<std::uint64_t>(shapes);
    const auto ds = make_synthetic(s, 50);
    REQUIRE(ds.keypoints.cols() == 2 * shapes);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto am = keypoints_argmax(ds.images[i], shapes);
      const auto com = keypoints_center_of_mass(ds.images[i], shapes);
      for (int k = 0; k < 2 * shapes; ++k) {
        CHECK(std::abs(am(k) - ds.keypoints(static_cast<Eigen::Index>(i), k)) <= 1.0 / 32);
        CHECK(std::abs(com(k) - ds.keypoints(static_cast<Eigen::Index>(i), k)) <= 1.0 / 32);
      }
    }
  }
}

TEST_CASE("synthetic corpus is deterministic and in range") {
  SyntheticShapeSpec s;
  s.seed = 3;
  const auto a = make_synthetic(s, 20), b = make_synthetic(s, 20);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.images[i].data == b.images[i].data);
  CHECK(a.keypoints == b.keypoints);
  s.seed = 4;
  CHECK(make_synthetic(s, 1).images[0].data != a.images[0].data);

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    SyntheticShapeSpec r;
    r.resolution = 8 + 4 * (trial % 6);
    r.shapes_per_image = 1 + trial % 3;
    r.sigma_min = 0.02 + 0.05 * u(rng);
    r.sigma_max = r.sigma_min + 0.1 * u(rng);
    r.max_aspect = 1.0 + u(rng);
    r.amplitude_min = 0.3 * u(rng);
    r.background = 0.2 * u(rng);
    r.amplitude_max = r.amplitude_min + (1 - r.background - r.amplitude_min) * u(rng);
    r.seed = static_cast<std::uint64_t>(trial);
    const auto ds = make_synthetic(r, 5);
    for (const auto& im : ds.images) {
      CHECK(im.height == r.resolution);
      CHECK(im.width == r.resolution);
      CHECK(im.channels() == 3);
      CHECK(im.data.minCoeff() >= 0.0f);
      CHECK(im.data.maxCoeff() <= 1.0f);
    }
  }
  SyntheticShapeSpec bad;
  bad.shapes_per_image = 4;
  CHECK_THROWS_AS(make_synthetic(bad, 1), std::invalid_argument);
  CHECK_THROWS_AS(make_synthetic(SyntheticShapeSpec{}, 0), std::invalid_argument);
}

TEST_CASE("horizontal flips mirror images and keypoints") {
  SyntheticShapeSpec s;
  s.shapes_per_image = 2;
  const auto ds = make_synthetic(s, 30, true);
  const auto b1 = sample_batch(ds, 40, 9), b2 = sample_batch(ds, 40, 9);
  CHECK(b1.indices == b2.indices);
  CHECK(b1.flipped == b2.flipped);
  CHECK(std::count(b1.flipped.begin(), b1.flipped.end(), true) > 0);
  CHECK(std::count(b1.flipped.begin(), b1.flipped.end(), false) > 0);
  for (std::size_t i = 0; i < b1.images.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(b1.indices[i]);
    const auto& src = ds.images[b1.indices[i]];
    if (b1.flipped[i]) {
      CHECK(b1.images[i].data == hflip(src).data);
      CHECK(b1.keypoints(static_cast<Eigen::Index>(i), 0) == doctest::Approx(1.0 - ds.keypoints(idx, 0)));
    } else {
      CHECK(b1.images[i].data == src.data);
    }
    CHECK(b1.keypoints(static_cast<Eigen::Index>(i), 1) == ds.keypoints(idx, 1));
    const auto am = keypoints_argmax(b1.images[i], 2);
    for (int k = 0; k < 4; ++k) CHECK(std::abs(am(k) - b1.keypoints(static_cast<Eigen::Index>(i), k)) <= 1.0 / 32);
  }
  const auto plain = make_synthetic(s, 30, false);
  const auto nb = sample_batch(plain, 20, 1);
  CHECK(std::count(nb.flipped.begin(), nb.flipped.end(), true) == 0);
}

TEST_CASE("load_folder") {
  TempDir dir("folder");
  const auto ds = make_synthetic(SyntheticShapeSpec{}, 3);
  for (int i = 0; i < 3; ++i) write_png((dir.path / ("img" + std::to_string(i) + ".png")).string(), ds.images[i]);
  std::ofstream(dir.path / "notes.txt") << "not an image";

  std::vector<std::string> warnings;
  const auto loaded = load_folder(dir.path.string(), 32, false, &warnings);
  REQUIRE(loaded.size() == 3);
  CHECK(warnings.size() == 1);
  for (int i = 0; i < 3; ++i) {
    CHECK((loaded.images[i].data - quantize8(ds.images[i]).data).cwiseAbs().maxCoeff() < 1e-6f);
  }
  CHECK(loaded.sources[0] < loaded.sources[1]);
  CHECK(loaded.keypoints.size() == 0);

  // A wide image is center-cropped before resizing.
  Image wide(32, 64);
  for (int y = 0; y < 32; ++y) {
    for (int x = 16; x < 48; ++x) wide.at(y, x, 1) = 1.0f;
  }
  TempDir other("wide");
  write_png((other.path / "wide.png").string(), wide);
  const auto cropped = load_folder(other.path.string(), 16, false);
  CHECK(cropped.images[0].data.col(1).minCoeff() == doctest::Approx(1.0f));

  TempDir empty("empty");
  std::ofstream(empty.path / "a.txt") << "x";
  CHECK_THROWS_AS(load_folder(empty.path.string(), 32, false), IngestionError);
  CHECK_THROWS_AS(load_folder((dir.path / "missing").string(), 32, false), IoError);
}

TEST_CASE("image helpers") {
  std::mt19937_64 rng(1);
  Image im(4, 6);
  im.data = oracle::random_mat<float>(24, 3, rng).array().abs().min(1.0f);
  CHECK(hflip(hflip(im)).data == im.data);
  CHECK(hflip(im).at(1, 0, 2) == im.at(1, 5, 2));
  const auto q = quantize8(im);
  CHECK((q.data - im.data).cwiseAbs().maxCoeff() <= 0.5f / 255 + 1e-7f);
  CHECK(resize(im, 4, 6, ResizeMode::bilinear).data == im.data);
  CHECK(resize(im, 8, 12, ResizeMode::nearest).at(3, 5, 0) == im.at(1, 2, 0));

  TempDir dir("png");
  const auto path = (dir.path / "x.png").string();
  write_png(path, q);
  CHECK((read_image(path).data - q.data).cwiseAbs().maxCoeff() < 1e-6f);
  CHECK(encode_png(q) == encode_png(q));
  std::ofstream(dir.path / "bad.png") << "garbage";
  CHECK_THROWS_AS(read_image((dir.path / "bad.png").string()), IoError);

  const auto grid = tile_grid({im, im, im, im, im});
  CHECK(grid.width == 3 * 6 + 2 * 2);
  CHECK(grid.height == 2 * 4 + 2);
}

TEST_CASE("keypoint csv") {
  TempDir dir("kp");
  Mat<double> kp{{0.25, 0.5, 0.75, 0.125}};
  const auto path = (dir.path / "kp.csv").string();
  write_keypoints_csv(path, kp);
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "image_index,kp0_x,kp0_y,kp1_x,kp1_y");
  CHECK(row == "0,0.25,0.5,0.75,0.125");
  CHECK(flip_keypoints(kp)(0, 2) == 0.25);
}
