#include "logonet/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "logonet/error.hpp"

namespace logonet {
namespace fs = std::filesystem;

namespace {

// Copies one planar channel into a float Mat.
cv::Mat plane_of(const Tensor<float>& image, std::size_t c) {
  const int h = static_cast<int>(image.dim(1));
  const int w = static_cast<int>(image.dim(2));
  cv::Mat m(h, w, CV_32F);
  const float* src = image.data().data() + c * image.dim(1) * image.dim(2);
  std::copy(src, src + static_cast<std::size_t>(h) * w, m.ptr<float>());
  return m;
}

Tensor<float> decode_mat(const cv::Mat& bgr, std::size_t channels, std::size_t size,
                         const std::string& what) {
  if (bgr.empty()) throw Error("cannot decode image: " + what);
  if (channels != 1 && channels != 3)
    throw ConfigError("decode_image: channels must be 1 or 3, got " + std::to_string(channels));
  if (size == 0) throw ConfigError("decode_image: size must be positive");
  const int h = bgr.rows;
  const int w = bgr.cols;
  std::vector<cv::Mat> planes;
  if (channels == 1) {
    cv::Mat lum(h, w, CV_32F);
    for (int y = 0; y < h; ++y) {
      const auto* row = bgr.ptr<cv::Vec3b>(y);
      auto* out = lum.ptr<float>(y);
      for (int x = 0; x < w; ++x)
        out[x] = (0.299f * row[x][2] + 0.587f * row[x][1] + 0.114f * row[x][0]) / 255.0f;
    }
    planes.push_back(lum);
  } else {
    cv::Mat as_float;
    bgr.convertTo(as_float, CV_32F, 1.0 / 255.0);
    std::vector<cv::Mat> bgr_planes;
    cv::split(as_float, bgr_planes);
    planes = {bgr_planes[2], bgr_planes[1], bgr_planes[0]};
  }
  Tensor<float> out({channels, size, size});
  auto dst = out.data();
  for (std::size_t c = 0; c < channels; ++c) {
    cv::Mat plane = planes[c];
    if (plane.rows != static_cast<int>(size) || plane.cols != static_cast<int>(size)) {
      cv::Mat resized;
      cv::resize(plane, resized, cv::Size(static_cast<int>(size), static_cast<int>(size)), 0, 0,
                 cv::INTER_LINEAR);
      plane = resized;
    }
    float* o = dst.data() + c * size * size;
    for (std::size_t y = 0; y < size; ++y) {
      const float* row = plane.ptr<float>(static_cast<int>(y));
      for (std::size_t x = 0; x < size; ++x) o[y * size + x] = std::clamp(row[x], 0.0f, 1.0f);
    }
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write file: " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_text_atomic(const fs::path& path, std::string_view text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Tensor<float> decode_image(const fs::path& path, std::size_t channels, std::size_t size) {
  if (!fs::exists(path)) throw Error("missing image file: " + path.string());
  const auto bytes = read_file_bytes(path);
  cv::Mat bgr;
  if (!bytes.empty()) bgr = cv::imdecode(cv::Mat(1, static_cast<int>(bytes.size()), CV_8U,
                                                 const_cast<std::uint8_t*>(bytes.data())),
                                         cv::IMREAD_COLOR);
  return decode_mat(bgr, channels, size, path.string());
}

Tensor<float> decode_image_bytes(std::span<const std::uint8_t> bytes, std::size_t channels,
                                 std::size_t size) {
  cv::Mat bgr;
  if (!bytes.empty()) bgr = cv::imdecode(cv::Mat(1, static_cast<int>(bytes.size()), CV_8U,
                                                 const_cast<std::uint8_t*>(bytes.data())),
                                         cv::IMREAD_COLOR);
  return decode_mat(bgr, channels, size, "<" + std::to_string(bytes.size()) + " bytes>");
}

Tensor<float> resize_bilinear(const Tensor<float>& image, std::size_t height, std::size_t width) {
  if (image.rank() != 3) throw ShapeError("resize_bilinear: expected [C,H,W], got " +
                                          shape_string(image.shape()));
  const std::size_t channels = image.dim(0);
  Tensor<float> out({channels, height, width});
  for (std::size_t c = 0; c < channels; ++c) {
    cv::Mat resized;
    cv::resize(plane_of(image, c), resized,
               cv::Size(static_cast<int>(width), static_cast<int>(height)), 0, 0, cv::INTER_LINEAR);
    std::copy(resized.ptr<float>(), resized.ptr<float>() + height * width,
              out.data().data() + c * height * width);
  }
  return out;
}

std::vector<std::uint8_t> encode_png(const Tensor<float>& image) {
  if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3))
    throw ShapeError("encode_png: expected [1,H,W] or [3,H,W], got " + shape_string(image.shape()));
  const int h = static_cast<int>(image.dim(1));
  const int w = static_cast<int>(image.dim(2));
  const std::size_t plane = image.dim(1) * image.dim(2);
  auto to_byte = [](float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
  };
  cv::Mat mat;
  const auto src = image.data();
  if (image.dim(0) == 1) {
    mat.create(h, w, CV_8U);
    for (std::size_t i = 0; i < plane; ++i) mat.data[i] = to_byte(src[i]);
  } else {
    mat.create(h, w, CV_8UC3);
    for (std::size_t i = 0; i < plane; ++i) {
      mat.data[3 * i + 0] = to_byte(src[2 * plane + i]);
      mat.data[3 * i + 1] = to_byte(src[plane + i]);
      mat.data[3 * i + 2] = to_byte(src[i]);
    }
  }
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", mat, out)) throw Error("png encoding failed");
  return out;
}

}  // namespace logonet
