#include "inrgan/image.hpp"

#include "inrgan/errors.hpp"

#include <png.h>
#include <jpeglib.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <stdexcept>

namespace inrgan {

Image::Image(int h, int w, Mat<float> pixels) : height(h), width(w), data(std::move(pixels)) {
  if (data.rows() != static_cast<Eigen::Index>(h) * w) throw std::invalid_argument("image: pixel count does not match shape");
}

namespace {

float cubic(float t) {
  constexpr float a = -0.5f;
  t = std::abs(t);
  if (t <= 1) return ((a + 2) * t - (a + 3)) * t * t + 1;
  if (t < 2) return ((a * t - 5 * a) * t + 8 * a) * t - 4 * a;
  return 0;
}

// Source coordinate of destination pixel center i.
float source_coord(int i, int in, int out) {
  return (static_cast<float>(i) + 0.5f) * static_cast<float>(in) / static_cast<float>(out) - 0.5f;
}

}  // namespace

Image resize(const Image& img, int height, int width, ResizeMode mode) {
  if (height < 1 || width < 1) throw std::invalid_argument("resize: target size must be positive");
  if (img.height < 1 || img.width < 1) throw std::invalid_argument("resize: empty image");
  Image out(height, width, img.channels());
  const int c = img.channels();
  for (int y = 0; y < height; ++y) {
    const float sy = source_coord(y, img.height, height);
    for (int x = 0; x < width; ++x) {
      const float sx = source_coord(x, img.width, width);
      auto dst = out.data.row(static_cast<Eigen::Index>(y) * width + x);
      if (mode == ResizeMode::nearest) {
        const int iy = std::min(img.height - 1, static_cast<int>(std::floor((y + 0.5f) * img.height / height)));
        const int ix = std::min(img.width - 1, static_cast<int>(std::floor((x + 0.5f) * img.width / width)));
        dst = img.data.row(static_cast<Eigen::Index>(iy) * img.width + ix);
      } else if (mode == ResizeMode::bilinear) {
        const float cy = std::clamp(sy, 0.0f, static_cast<float>(img.height - 1));
        const float cx = std::clamp(sx, 0.0f, static_cast<float>(img.width - 1));
        const int y0 = static_cast<int>(std::floor(cy)), x0 = static_cast<int>(std::floor(cx));
        const int y1 = std::min(y0 + 1, img.height - 1), x1 = std::min(x0 + 1, img.width - 1);
        const float fy = cy - y0, fx = cx - x0;
        for (int ch = 0; ch < c; ++ch) {
          const float top = (1 - fx) * img.at(y0, x0, ch) + fx * img.at(y0, x1, ch);
          const float bot = (1 - fx) * img.at(y1, x0, ch) + fx * img.at(y1, x1, ch);
          dst(ch) = (1 - fy) * top + fy * bot;
        }
      } else {
        const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
        for (int ch = 0; ch < c; ++ch) {
          float acc = 0;
          for (int dy = -1; dy <= 2; ++dy) {
            const int yy = std::clamp(y0 + dy, 0, img.height - 1);
            const float wy = cubic(sy - static_cast<float>(y0 + dy));
            for (int dx = -1; dx <= 2; ++dx) {
              const int xx = std::clamp(x0 + dx, 0, img.width - 1);
              acc += wy * cubic(sx - static_cast<float>(x0 + dx)) * img.at(yy, xx, ch);
            }
          }
          dst(ch) = std::clamp(acc, 0.0f, 1.0f);
        }
      }
    }
  }
  return out;
}

Image center_crop_square(const Image& img) {
  const int side = std::min(img.height, img.width);
  const int oy = (img.height - side) / 2, ox = (img.width - side) / 2;
  Image out(side, side, img.channels());
  for (int y = 0; y < side; ++y) {
    out.data.middleRows(static_cast<Eigen::Index>(y) * side, side) =
        img.data.middleRows(static_cast<Eigen::Index>(y + oy) * img.width + ox, side);
  }
  return out;
}

Image hflip(const Image& img) {
  Image out(img.height, img.width, img.channels());
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      out.data.row(static_cast<Eigen::Index>(y) * img.width + x) =
          img.data.row(static_cast<Eigen::Index>(y) * img.width + (img.width - 1 - x));
    }
  }
  return out;
}

Image quantize8(const Image& img) {
  Image out = img;
  out.data = img.data.unaryExpr([](float v) { return std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0f; });
  return out;
}

// ---- decoding ------------------------------------------------------------------

namespace {

std::vector<unsigned char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file", path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Image from_interleaved(const unsigned char* px, int h, int w, int channels) {
  Image img(h, w, 3);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(h) * w; ++i) {
    const unsigned char* p = px + i * channels;
    for (int c = 0; c < 3; ++c) img.data(i, c) = (channels >= 3 ? p[c] : p[0]) / 255.0f;
  }
  return img;
}

Image decode_png(const std::vector<unsigned char>& bytes, const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw IoError(std::string("cannot decode PNG (") + image.message + ")", path);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError(std::string("cannot decode PNG (") + image.message + ")", path);
  }
  return from_interleaved(buf.data(), static_cast<int>(image.height), static_cast<int>(image.width), 3);
}

struct JpegError {
  jpeg_error_mgr mgr;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegError*>(cinfo->err);
  std::longjmp(err->jump, 1);
}

Image decode_jpeg(const std::vector<unsigned char>& bytes, const std::string& path) {
  jpeg_decompress_struct cinfo{};
  JpegError err{};
  cinfo.err = jpeg_std_error(&err.mgr);
  err.mgr.error_exit = jpeg_error_exit;
  std::vector<unsigned char> buf;
  int h = 0, w = 0, c = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw IoError("cannot decode JPEG", path);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);
  h = static_cast<int>(cinfo.output_height);
  w = static_cast<int>(cinfo.output_width);
  c = cinfo.output_components;
  buf.resize(static_cast<std::size_t>(h) * w * c);
  while (cinfo.output_scanline < cinfo.output_height) {
    unsigned char* row = buf.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * c;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return from_interleaved(buf.data(), h, w, c);
}

}  // namespace

Image read_image(const std::string& path) {
  const auto bytes = read_bytes(path);
  static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (bytes.size() >= 8 && std::equal(png_sig, png_sig + 8, bytes.begin())) return decode_png(bytes, path);
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) return decode_jpeg(bytes, path);
  throw IoError("not a PNG or JPEG file", path);
}

std::vector<unsigned char> encode_png(const Image& img) {
  if (img.channels() != 3 && img.channels() != 1) throw std::invalid_argument("encode_png: need 1 or 3 channels");
  std::vector<unsigned char> px(static_cast<std::size_t>(img.data.size()));
  for (Eigen::Index i = 0; i < img.data.rows(); ++i) {
    for (int c = 0; c < img.channels(); ++c) {
      const float v = img.data(i, c);
      px[i * img.channels() + c] = static_cast<unsigned char>(std::lround(std::clamp(std::isfinite(v) ? v : 0.0f, 0.0f, 1.0f) * 255.0f));
    }
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, px.data(), 0, nullptr)) {
    throw std::runtime_error(std::string("encode_png: ") + image.message);
  }
  std::vector<unsigned char> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, px.data(), 0, nullptr)) {
    throw std::runtime_error(std::string("encode_png: ") + image.message);
  }
  out.resize(size);
  return out;
}

void write_png(const std::string& path, const Image& img) {
  const auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file", path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed", path);
}

namespace {

Image tile(const std::vector<Image>& images, int cols, int gap, float background) {
  if (images.empty()) throw std::invalid_argument("tile: no images");
  const int h = images.front().height, w = images.front().width, c = images.front().channels();
  for (const auto& im : images) {
    if (im.height != h || im.width != w || im.channels() != c) throw std::invalid_argument("tile: images differ in shape");
  }
  const int n = static_cast<int>(images.size());
  const int rows = (n + cols - 1) / cols;
  Image out(rows * h + (rows - 1) * gap, cols * w + (cols - 1) * gap, c);
  out.data.setConstant(background);
  for (int i = 0; i < n; ++i) {
    const int oy = (i / cols) * (h + gap), ox = (i % cols) * (w + gap);
    for (int y = 0; y < h; ++y) {
      out.data.middleRows(static_cast<Eigen::Index>(oy + y) * out.width + ox, w) =
          images[i].data.middleRows(static_cast<Eigen::Index>(y) * w, w);
    }
  }
  return out;
}

}  // namespace

Image tile_grid(const std::vector<Image>& images, int gap, float background) {
  const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(images.size()))));
  return tile(images, std::max(side, 1), gap, background);
}

Image tile_row(const std::vector<Image>& images, int gap, float background) {
  return tile(images, static_cast<int>(std::max<std::size_t>(images.size(), 1)), gap, background);
}

}  // namespace inrgan
