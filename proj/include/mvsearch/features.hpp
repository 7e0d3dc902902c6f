#ifndef MVSEARCH_FEATURES_HPP
#define MVSEARCH_FEATURES_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "mvsearch/error.hpp"
#include "mvsearch/image.hpp"

namespace mvs {

inline constexpr std::size_t kDescriptorDim = 128;
inline constexpr int kMinDetectSide = 16;

enum class Channel : std::uint8_t { Corner = 0, Blob = 1 };

constexpr std::string_view channel_name(Channel c) noexcept { return c == Channel::Corner ? "corner" : "blob"; }

/// Detector and descriptor parameters.
///
/// Scales are reported as characteristic radii (sqrt(2) times the Gaussian
/// sigma of the detection level). The descriptor patch side is
/// 16 * scale / base_scale pixels, so a corner (scale == base_scale) uses a
/// 16 px patch.
struct DetectorConfig {
  double harris_kappa = 0.04;
  double harris_window_sigma = 1.5;
  double harris_rel_threshold = 1e-4;  // fraction of the image's max response
  double nms_radius = 4.0;
  std::size_t max_points = 1000;  // per channel

  double blob_base_sigma = 1.6;
  int blob_levels_per_octave = 3;
  int blob_levels = 9;
  double blob_threshold = 1e-3;  // scale-normalised determinant of Hessian

  double base_scale = std::numbers::sqrt2 * 1.6;

  std::vector<double> blob_sigmas() const {
    std::vector<double> out;
    for (int i = 0; i < blob_levels; ++i)
      out.push_back(blob_base_sigma * std::exp2(static_cast<double>(i) / blob_levels_per_octave));
    return out;
  }
};

struct InterestPoint {
  double x = 0.0;
  double y = 0.0;
  double scale = 0.0;
  double response = 0.0;
  Channel channel = Channel::Corner;
};

struct Descriptor {
  std::array<float, kDescriptorDim> values{};
  Channel channel = Channel::Corner;

  friend bool operator==(const Descriptor&, const Descriptor&) = default;
};

struct DescriptorSet {
  std::string image_id;
  std::vector<Descriptor> corner_descriptors;
  std::vector<Descriptor> blob_descriptors;

  std::size_t size() const noexcept { return corner_descriptors.size() + blob_descriptors.size(); }

  friend bool operator==(const DescriptorSet&, const DescriptorSet&) = default;
};

/// Dense double-precision map over the image grid.
struct ResponseMap {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  ResponseMap() = default;
  ResponseMap(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0.0) {}

  double operator()(int x, int y) const noexcept { return data[static_cast<std::size_t>(y) * width + x]; }
  double& operator()(int x, int y) noexcept { return data[static_cast<std::size_t>(y) * width + x]; }
  double clamped(int x, int y) const noexcept {
    return (*this)(std::clamp(x, 0, width - 1), std::clamp(y, 0, height - 1));
  }
};

namespace detail {

inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable Gaussian blur, clamp-to-edge, rows then columns.
inline ResponseMap gaussian_blur(const ResponseMap& in, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  ResponseMap tmp(in.width, in.height);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * in.clamped(x + i, y);
      tmp(x, y) = acc;
    }
  ResponseMap out(in.width, in.height);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.clamped(x, y + i);
      out(x, y) = acc;
    }
  return out;
}

inline ResponseMap to_map(const GrayImage& img) {
  ResponseMap m(img.width(), img.height());
  auto px = img.pixels();
  std::copy(px.begin(), px.end(), m.data.begin());
  return m;
}

inline void require_detectable(const GrayImage& img) {
  if (img.width() < kMinDetectSide || img.height() < kMinDetectSide)
    throw Error(ErrorCode::ImageTooSmall, "image is " + std::to_string(img.width()) + "x" +
                                              std::to_string(img.height()) + ", need at least 16x16");
}

// Vertex offset of the parabola through (-1, a), (0, b), (1, c), limited to half a pixel.
inline double parabolic_offset(double a, double b, double c) noexcept {
  const double denom = a - 2.0 * b + c;
  if (denom >= 0.0) return 0.0;
  return std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
}

// Greedy suppression in descending response order; ties resolve by (y, x).
inline std::vector<InterestPoint> suppress(std::vector<InterestPoint> cands, double radius, std::size_t cap) {
  std::sort(cands.begin(), cands.end(), [](const InterestPoint& a, const InterestPoint& b) {
    if (a.response != b.response) return a.response > b.response;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  std::vector<InterestPoint> kept;
  const double r2 = radius * radius;
  for (const auto& c : cands) {
    if (kept.size() >= cap) break;
    const bool clear = std::none_of(kept.begin(), kept.end(), [&](const InterestPoint& k) {
      const double dx = k.x - c.x, dy = k.y - c.y;
      return dx * dx + dy * dy <= r2;
    });
    if (clear) kept.push_back(c);
  }
  return kept;
}

}  // namespace detail

/// Harris corner response R = det(M) - kappa * trace(M)^2, where M is the
/// Gaussian-windowed structure tensor of central-difference gradients.
inline ResponseMap harris_response(const GrayImage& img, const DetectorConfig& cfg = {}) {
  const int w = img.width(), h = img.height();
  ResponseMap ixx(w, h), iyy(w, h), ixy(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double gx = 0.5 * (static_cast<double>(img.at_clamped(x + 1, y)) - img.at_clamped(x - 1, y));
      const double gy = 0.5 * (static_cast<double>(img.at_clamped(x, y + 1)) - img.at_clamped(x, y - 1));
      ixx(x, y) = gx * gx;
      iyy(x, y) = gy * gy;
      ixy(x, y) = gx * gy;
    }
  const auto sxx = detail::gaussian_blur(ixx, cfg.harris_window_sigma);
  const auto syy = detail::gaussian_blur(iyy, cfg.harris_window_sigma);
  const auto sxy = detail::gaussian_blur(ixy, cfg.harris_window_sigma);
  ResponseMap r(w, h);
  for (std::size_t i = 0; i < r.data.size(); ++i) {
    const double det = sxx.data[i] * syy.data[i] - sxy.data[i] * sxy.data[i];
    const double tr = sxx.data[i] + syy.data[i];
    r.data[i] = det - cfg.harris_kappa * tr * tr;
  }
  return r;
}

inline std::vector<InterestPoint> detect_corners(const GrayImage& img, const DetectorConfig& cfg = {}) {
  detail::require_detectable(img);
  const auto r = harris_response(img, cfg);
  const double max_r = *std::max_element(r.data.begin(), r.data.end());
  if (!(max_r > 0.0)) return {};
  const double threshold = cfg.harris_rel_threshold * max_r;

  std::vector<InterestPoint> cands;
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x) {
      const double v = r(x, y);
      if (v <= threshold) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if ((dx || dy) && r.clamped(x + dx, y + dy) > v) {
            is_max = false;
            break;
          }
        }
      if (!is_max) continue;
      InterestPoint p;
      p.x = x + (x > 0 && x < r.width - 1 ? detail::parabolic_offset(r(x - 1, y), v, r(x + 1, y)) : 0.0);
      p.y = y + (y > 0 && y < r.height - 1 ? detail::parabolic_offset(r(x, y - 1), v, r(x, y + 1)) : 0.0);
      p.scale = cfg.base_scale;
      p.response = v;
      p.channel = Channel::Corner;
      cands.push_back(p);
    }
  return detail::suppress(std::move(cands), cfg.nms_radius, cfg.max_points);
}

/// Scale-normalised determinant of Hessian, sigma^4 (Lxx Lyy - Lxy^2), at one level.
inline ResponseMap hessian_response(const GrayImage& img, double sigma) {
  const auto l = detail::gaussian_blur(detail::to_map(img), sigma);
  ResponseMap d(img.width(), img.height());
  const double norm = sigma * sigma * sigma * sigma;
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x) {
      const double c = l(x, y);
      const double lxx = l.clamped(x + 1, y) - 2.0 * c + l.clamped(x - 1, y);
      const double lyy = l.clamped(x, y + 1) - 2.0 * c + l.clamped(x, y - 1);
      const double lxy = 0.25 * (l.clamped(x + 1, y + 1) - l.clamped(x + 1, y - 1) - l.clamped(x - 1, y + 1) +
                                 l.clamped(x - 1, y - 1));
      d(x, y) = norm * (lxx * lyy - lxy * lxy);
    }
  return d;
}

inline std::vector<InterestPoint> detect_blobs(const GrayImage& img, const DetectorConfig& cfg = {}) {
  detail::require_detectable(img);
  const auto sigmas = cfg.blob_sigmas();
  std::vector<ResponseMap> stack;
  stack.reserve(sigmas.size());
  for (double s : sigmas) stack.push_back(hessian_response(img, s));

  std::vector<InterestPoint> cands;
  const int w = img.width(), h = img.height();
  for (std::size_t level = 1; level + 1 < stack.size(); ++level) {
    const auto& cur = stack[level];
    for (int y = 1; y < h - 1; ++y)
      for (int x = 1; x < w - 1; ++x) {
        const double v = cur(x, y);
        if (v <= cfg.blob_threshold) continue;
        bool is_max = true;
        for (std::size_t l = level - 1; l <= level + 1 && is_max; ++l)
          for (int dy = -1; dy <= 1 && is_max; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              if (l == level && dx == 0 && dy == 0) continue;
              if (stack[l](x + dx, y + dy) > v) {
                is_max = false;
                break;
              }
            }
        if (!is_max) continue;
        InterestPoint p;
        p.x = x + detail::parabolic_offset(cur(x - 1, y), v, cur(x + 1, y));
        p.y = y + detail::parabolic_offset(cur(x, y - 1), v, cur(x, y + 1));
        p.scale = std::numbers::sqrt2 * sigmas[level];
        p.response = v;
        p.channel = Channel::Blob;
        cands.push_back(p);
      }
  }
  return detail::suppress(std::move(cands), cfg.nms_radius, cfg.max_points);
}

/// Half-width of the descriptor patch and the distance from the centre that
/// must stay inside the image (the outermost cell ring may be cut off).
struct PatchGeometry {
  double half = 0.0;
  double cell = 0.0;
  double required = 0.0;
};

inline PatchGeometry patch_geometry(const InterestPoint& pt, const DetectorConfig& cfg = {}) {
  const double s = pt.scale / cfg.base_scale;
  PatchGeometry g;
  g.half = 8.0 * s;
  g.cell = 4.0 * s;
  g.required = g.half - g.cell;
  return g;
}

inline bool patch_fits(const GrayImage& img, const InterestPoint& pt, const DetectorConfig& cfg = {}) {
  const auto g = patch_geometry(pt, cfg);
  return pt.x - g.required >= 0.0 && pt.y - g.required >= 0.0 && pt.x + g.required <= img.width() - 1 &&
         pt.y + g.required <= img.height() - 1;
}

/// 4x4 spatial cells x 8 orientation bins of Gaussian-weighted gradient
/// magnitude with trilinear interpolation, then L2 normalise, clip at 0.2 and
/// renormalise. Upright: no dominant-orientation rotation. Samples outside the
/// image are skipped rather than padded.
inline Descriptor describe(const GrayImage& img, const InterestPoint& pt, const DetectorConfig& cfg = {}) {
  if (!(pt.scale > 0.0)) throw Error(ErrorCode::InvalidArgument, "interest point scale must be positive");
  if (!patch_fits(img, pt, cfg))
    throw Error(ErrorCode::PatchOutOfBounds,
                "patch around (" + std::to_string(pt.x) + ", " + std::to_string(pt.y) + ") leaves the image");
  const auto g = patch_geometry(pt, cfg);
  std::array<double, kDescriptorDim> hist{};

  const int x0 = std::max(0, static_cast<int>(std::ceil(pt.x - g.half)));
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::floor(pt.x + g.half)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(pt.y - g.half)));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::floor(pt.y + g.half)));
  const double inv_two_var = 1.0 / (2.0 * g.half * g.half);
  constexpr double kTwoPi = 2.0 * std::numbers::pi;

  for (int py = y0; py <= y1; ++py) {
    for (int px = x0; px <= x1; ++px) {
      const double gx = 0.5 * (static_cast<double>(img.at_clamped(px + 1, py)) - img.at_clamped(px - 1, py));
      const double gy = 0.5 * (static_cast<double>(img.at_clamped(px, py + 1)) - img.at_clamped(px, py - 1));
      const double mag = std::sqrt(gx * gx + gy * gy);
      if (mag == 0.0) continue;
      const double dx = px - pt.x, dy = py - pt.y;
      const double weight = mag * std::exp(-(dx * dx + dy * dy) * inv_two_var);

      // Cell coordinates with cell centres at integer positions 0..3.
      const double cu = dx / g.cell + 1.5;
      const double cv = dy / g.cell + 1.5;
      double theta = std::atan2(gy, gx);
      if (theta < 0.0) theta += kTwoPi;
      double ob = theta * 8.0 / kTwoPi;
      if (ob >= 8.0) ob -= 8.0;

      const int iu = static_cast<int>(std::floor(cu)), iv = static_cast<int>(std::floor(cv));
      const int io = static_cast<int>(std::floor(ob));
      const double fu = cu - iu, fv = cv - iv, fo = ob - io;
      for (int a = 0; a <= 1; ++a) {
        const int v = iv + a;
        if (v < 0 || v > 3) continue;
        const double wv = a ? fv : 1.0 - fv;
        for (int b = 0; b <= 1; ++b) {
          const int u = iu + b;
          if (u < 0 || u > 3) continue;
          const double wu = b ? fu : 1.0 - fu;
          for (int c = 0; c <= 1; ++c) {
            const double wo = c ? fo : 1.0 - fo;
            const double contrib = weight * wv * wu * wo;
            if (contrib == 0.0) continue;
            const int o = (io + c) % 8;
            hist[static_cast<std::size_t>((v * 4 + u) * 8 + o)] += contrib;
          }
        }
      }
    }
  }

  auto normalise = [&hist]() {
    double ss = 0.0;
    for (double v : hist) ss += v * v;
    if (ss == 0.0) return false;
    const double inv = 1.0 / std::sqrt(ss);
    for (double& v : hist) v *= inv;
    return true;
  };

  Descriptor out;
  out.channel = pt.channel;
  if (!normalise()) return out;
  for (double& v : hist) v = std::min(v, 0.2);
  normalise();
  for (std::size_t i = 0; i < kDescriptorDim; ++i) out.values[i] = static_cast<float>(hist[i]);
  return out;
}

/// Runs both detectors and describes every point whose patch fits.
inline DescriptorSet extract(const GrayImage& img, const DetectorConfig& cfg = {}, std::string image_id = {}) {
  DescriptorSet ds;
  ds.image_id = std::move(image_id);
  for (const auto& p : detect_corners(img, cfg))
    if (patch_fits(img, p, cfg)) ds.corner_descriptors.push_back(describe(img, p, cfg));
  for (const auto& p : detect_blobs(img, cfg))
    if (patch_fits(img, p, cfg)) ds.blob_descriptors.push_back(describe(img, p, cfg));
  return ds;
}

}  // namespace mvs

#endif  // MVSEARCH_FEATURES_HPP
