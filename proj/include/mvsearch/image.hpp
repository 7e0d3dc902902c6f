#ifndef MVSEARCH_IMAGE_HPP
#define MVSEARCH_IMAGE_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mvsearch/binary_io.hpp"
#include "mvsearch/error.hpp"

#if defined(MVSEARCH_WITH_OPENCV)
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#endif

namespace mvs {

/// Row-major grayscale image with intensities in [0, 1].
class GrayImage {
 public:
  GrayImage() = default;

  GrayImage(int width, int height, float fill = 0.0f) : width_(width), height_(height) {
    if (width < 1 || height < 1) throw Error(ErrorCode::InvalidArgument, "image dimensions must be >= 1");
    pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  GrayImage(int width, int height, std::vector<float> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width < 1 || height < 1) throw Error(ErrorCode::InvalidArgument, "image dimensions must be >= 1");
    if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
      throw Error(ErrorCode::InvalidArgument, "pixel count does not match width*height");
    for (float& p : pixels_) {
      if (!(p >= 0.0f && p <= 1.0f)) throw Error(ErrorCode::InvalidArgument, "intensity outside [0,1]");
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }

  float operator()(int x, int y) const noexcept { return pixels_[index(x, y)]; }
  float& operator()(int x, int y) noexcept { return pixels_[index(x, y)]; }

  /// Clamp-to-edge access.
  float at_clamped(int x, int y) const noexcept {
    return (*this)(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1));
  }

  std::span<const float> pixels() const noexcept { return pixels_; }

  /// 90 degrees clockwise: (x, y) -> (h - 1 - y, x).
  GrayImage rotated_cw() const {
    GrayImage out(height_, width_);
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x) out(height_ - 1 - y, x) = (*this)(x, y);
    return out;
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<float> pixels_;
};

constexpr float luma(float r, float g, float b) noexcept { return 0.299f * r + 0.587f * g + 0.114f * b; }

namespace detail {

class PnmParser {
 public:
  explicit PnmParser(std::span<const std::uint8_t> data) : data_(data) {}

  GrayImage parse() {
    if (data_.size() < 2 || data_[0] != 'P') fail("missing P magic");
    const char kind = static_cast<char>(data_[1]);
    if (kind != '2' && kind != '3' && kind != '5' && kind != '6') fail("unsupported PNM variant");
    pos_ = 2;
    const int width = next_int();
    const int height = next_int();
    const int maxval = next_int();
    if (width < 1 || height < 1 || maxval < 1 || maxval > 65535) fail("bad header");
    const bool color = kind == '3' || kind == '6';
    const bool binary = kind == '5' || kind == '6';
    const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    std::vector<float> px(count);
    const float scale = 1.0f / static_cast<float>(maxval);

    if (binary) {
      ++pos_;  // single whitespace after maxval
      const std::size_t sample_bytes = maxval > 255 ? 2 : 1;
      const std::size_t channels = color ? 3 : 1;
      if (data_.size() < pos_ + count * channels * sample_bytes) fail("truncated raster");
      auto sample = [&]() -> float {
        unsigned v = data_[pos_++];
        if (sample_bytes == 2) v = (v << 8) | data_[pos_++];
        return std::min(1.0f, static_cast<float>(v) * scale);
      };
      for (std::size_t i = 0; i < count; ++i) {
        if (color) {
          const float r = sample(), g = sample(), b = sample();
          px[i] = std::clamp(luma(r, g, b), 0.0f, 1.0f);
        } else {
          px[i] = sample();
        }
      }
    } else {
      for (std::size_t i = 0; i < count; ++i) {
        if (color) {
          const float r = next_int() * scale, g = next_int() * scale, b = next_int() * scale;
          px[i] = std::clamp(luma(r, g, b), 0.0f, 1.0f);
        } else {
          px[i] = std::min(1.0f, next_int() * scale);
        }
      }
    }
    return GrayImage(width, height, std::move(px));
  }

 private:
  [[noreturn]] static void fail(const std::string& why) {
    throw Error(ErrorCode::MalformedPayload, "PNM: " + why);
  }

  void skip_space() {
    while (pos_ < data_.size()) {
      if (data_[pos_] == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
      } else if (std::isspace(data_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  int next_int() {
    skip_space();
    if (pos_ >= data_.size() || !std::isdigit(data_[pos_])) fail("expected integer");
    long v = 0;
    while (pos_ < data_.size() && std::isdigit(data_[pos_])) {
      v = v * 10 + (data_[pos_++] - '0');
      if (v > 1'000'000) fail("integer out of range");
    }
    return static_cast<int>(v);
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline bool is_pnm(std::span<const std::uint8_t> data) noexcept {
  return data.size() >= 2 && data[0] == 'P' && (data[1] == '2' || data[1] == '3' || data[1] == '5' || data[1] == '6');
}

/// True when the bytes start with a recognised image container signature.
inline bool looks_like_image(std::span<const std::uint8_t> data) noexcept {
  if (is_pnm(data)) return true;
  if (has_magic(data, "\x89PNG")) return true;
  if (data.size() >= 3 && data[0] == 0xFF && data[1] == 0xD8 && data[2] == 0xFF) return true;
  return has_magic(data, "BM");
}

inline bool image_codecs_available() noexcept {
#if defined(MVSEARCH_WITH_OPENCV)
  return true;
#else
  return false;
#endif
}

/// Decodes PNM natively and PNG/JPEG/BMP through OpenCV when built with it.
/// Colour inputs are reduced to luma.
inline GrayImage decode_image(std::span<const std::uint8_t> data) {
  if (is_pnm(data)) return detail::PnmParser(data).parse();
#if defined(MVSEARCH_WITH_OPENCV)
  if (looks_like_image(data)) {
    const cv::Mat raw(1, static_cast<int>(data.size()), CV_8U, const_cast<std::uint8_t*>(data.data()));
    cv::Mat bgr = cv::imdecode(raw, cv::IMREAD_COLOR);
    if (bgr.empty()) throw Error(ErrorCode::MalformedPayload, "image decoder rejected payload");
    std::vector<float> px(static_cast<std::size_t>(bgr.rows) * static_cast<std::size_t>(bgr.cols));
    for (int y = 0; y < bgr.rows; ++y) {
      const auto* row = bgr.ptr<cv::Vec3b>(y);
      for (int x = 0; x < bgr.cols; ++x) {
        const float b = row[x][0] / 255.0f, g = row[x][1] / 255.0f, r = row[x][2] / 255.0f;
        px[static_cast<std::size_t>(y) * bgr.cols + x] = std::clamp(luma(r, g, b), 0.0f, 1.0f);
      }
    }
    return GrayImage(bgr.cols, bgr.rows, std::move(px));
  }
#endif
  throw Error(ErrorCode::MalformedPayload, "unrecognised image container");
}

inline GrayImage load_image(const std::string& path) {
  const Bytes data = read_file(path);
  return decode_image(data);
}

/// Binary PGM (P5, maxval 255).
inline Bytes encode_pgm(const GrayImage& img) {
  const std::string header =
      "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.reserve(out.size() + img.pixels().size());
  for (float p : img.pixels()) out.push_back(static_cast<std::uint8_t>(std::lround(p * 255.0f)));
  return out;
}

}  // namespace mvs

#endif  // MVSEARCH_IMAGE_HPP
