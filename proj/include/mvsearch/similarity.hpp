#ifndef MVSEARCH_SIMILARITY_HPP
#define MVSEARCH_SIMILARITY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string_view>

#include "mvsearch/error.hpp"
#include "mvsearch/vocabulary.hpp"

namespace mvs {

enum class SimilarityKind { Dot, HI, NHI, NC, MinMax };

inline constexpr std::array<SimilarityKind, 5> kAllSimilarities = {
    SimilarityKind::Dot, SimilarityKind::HI, SimilarityKind::NHI, SimilarityKind::NC, SimilarityKind::MinMax};

constexpr std::string_view similarity_name(SimilarityKind k) noexcept {
  switch (k) {
    case SimilarityKind::Dot: return "dot";
    case SimilarityKind::HI: return "hi";
    case SimilarityKind::NHI: return "nhi";
    case SimilarityKind::NC: return "nc";
    case SimilarityKind::MinMax: return "minmax";
  }
  return "";
}

inline std::optional<SimilarityKind> parse_similarity(std::string_view name) noexcept {
  for (auto k : kAllSimilarities)
    if (similarity_name(k) == name) return k;
  return std::nullopt;
}

/// Histogram similarity over non-negative bins, evaluated in double precision.
///
///   dot    sum q_i d_i
///   hi     sum min(q_i, d_i) / min(|q|_1, |d|_1)
///   nhi    sum min(q_i / |q|_1, d_i / |d|_1)
///   nc     sum q_i d_i / (||q||_2 ||d||_2)
///   minmax sum min(q_i, d_i) / sum max(q_i, d_i)
///
/// If either histogram is all zero the score is 0 for every kind. The
/// normalised kinds are clamped to [0, 1] against rounding.
template <class A, class B>
double similarity(std::span<const A> q, std::span<const B> d, SimilarityKind kind) {
  if (q.size() != d.size())
    throw Error(ErrorCode::LengthMismatch,
                "histogram lengths " + std::to_string(q.size()) + " and " + std::to_string(d.size()));
  const std::size_t n = q.size();
  double sum_q = 0.0, sum_d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum_q += static_cast<double>(q[i]);
    sum_d += static_cast<double>(d[i]);
  }
  if (sum_q == 0.0 || sum_d == 0.0) return 0.0;

  switch (kind) {
    case SimilarityKind::Dot: {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(q[i]) * static_cast<double>(d[i]);
      return acc;
    }
    case SimilarityKind::HI: {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += std::min<double>(q[i], d[i]);
      return std::clamp(acc / std::min(sum_q, sum_d), 0.0, 1.0);
    }
    case SimilarityKind::NHI: {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        acc += std::min(static_cast<double>(q[i]) / sum_q, static_cast<double>(d[i]) / sum_d);
      return std::clamp(acc, 0.0, 1.0);
    }
    case SimilarityKind::NC: {
      double dot = 0.0, qq = 0.0, dd = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double a = q[i], b = d[i];
        dot += a * b;
        qq += a * a;
        dd += b * b;
      }
      return std::clamp(dot / std::sqrt(qq * dd), 0.0, 1.0);
    }
    case SimilarityKind::MinMax: {
      double lo = 0.0, hi = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        lo += std::min<double>(q[i], d[i]);
        hi += std::max<double>(q[i], d[i]);
      }
      return std::clamp(lo / hi, 0.0, 1.0);
    }
  }
  return 0.0;
}

inline double similarity(const BowHistogram& q, const BowHistogram& d, SimilarityKind kind) {
  return similarity(std::span<const std::uint32_t>(q.bins), std::span<const std::uint32_t>(d.bins), kind);
}

}  // namespace mvs

#endif  // MVSEARCH_SIMILARITY_HPP
