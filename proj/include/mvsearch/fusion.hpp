#ifndef MVSEARCH_FUSION_HPP
#define MVSEARCH_FUSION_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mvsearch/error.hpp"
#include "mvsearch/vocabulary.hpp"

namespace mvs {

enum class EarlyFusionKind { Sum, Average, Maximum };

enum class LateFusionKind {
  MaxSim,
  WeightedSim,
  Count,
  HighestRank,
  RankSum,
  SetMax,
  SetAverage,
  SetWeightedAverage,
  SetAverageMax,
  SetWeightedAverageMax,
};

inline constexpr std::array<EarlyFusionKind, 3> kAllEarlyFusions = {EarlyFusionKind::Sum, EarlyFusionKind::Average,
                                                                    EarlyFusionKind::Maximum};

inline constexpr std::array<LateFusionKind, 10> kAllLateFusions = {
    LateFusionKind::MaxSim,        LateFusionKind::WeightedSim,  LateFusionKind::Count,
    LateFusionKind::HighestRank,   LateFusionKind::RankSum,      LateFusionKind::SetMax,
    LateFusionKind::SetAverage,    LateFusionKind::SetWeightedAverage,
    LateFusionKind::SetAverageMax, LateFusionKind::SetWeightedAverageMax};

constexpr std::string_view fusion_name(EarlyFusionKind k) noexcept {
  switch (k) {
    case EarlyFusionKind::Sum: return "sum";
    case EarlyFusionKind::Average: return "average";
    case EarlyFusionKind::Maximum: return "maximum";
  }
  return "";
}

constexpr std::string_view fusion_name(LateFusionKind k) noexcept {
  switch (k) {
    case LateFusionKind::MaxSim: return "max_sim";
    case LateFusionKind::WeightedSim: return "weighted_sim";
    case LateFusionKind::Count: return "count";
    case LateFusionKind::HighestRank: return "highest_rank";
    case LateFusionKind::RankSum: return "rank_sum";
    case LateFusionKind::SetMax: return "set_max";
    case LateFusionKind::SetAverage: return "set_average";
    case LateFusionKind::SetWeightedAverage: return "set_weighted_average";
    case LateFusionKind::SetAverageMax: return "set_average_max";
    case LateFusionKind::SetWeightedAverageMax: return "set_weighted_average_max";
  }
  return "";
}

constexpr bool is_set_kind(LateFusionKind k) noexcept {
  return k == LateFusionKind::SetMax || k == LateFusionKind::SetAverage || k == LateFusionKind::SetWeightedAverage ||
         k == LateFusionKind::SetAverageMax || k == LateFusionKind::SetWeightedAverageMax;
}

/// No fusion: a single query view ranked directly.
struct SingleMode {
  friend bool operator==(SingleMode, SingleMode) = default;
};

using FusionMode = std::variant<SingleMode, EarlyFusionKind, LateFusionKind>;

inline std::string_view fusion_name(const FusionMode& mode) noexcept {
  if (const auto* e = std::get_if<EarlyFusionKind>(&mode)) return fusion_name(*e);
  if (const auto* l = std::get_if<LateFusionKind>(&mode)) return fusion_name(*l);
  return "none";
}

/// The 13 early and late fusion modes, in wire-name order.
inline std::vector<FusionMode> all_fusion_modes() {
  std::vector<FusionMode> out;
  for (auto e : kAllEarlyFusions) out.emplace_back(e);
  for (auto l : kAllLateFusions) out.emplace_back(l);
  return out;
}

/// Accepts "none" plus the 13 fusion wire names.
inline std::optional<FusionMode> parse_fusion(std::string_view name) {
  if (name == "none") return FusionMode{SingleMode{}};
  for (const auto& m : all_fusion_modes())
    if (fusion_name(m) == name) return m;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Early fusion

/// Streaming per-bin combination; average is kept as a running sum and divided
/// once at the end, so folding views one at a time matches the batch result.
class EarlyFusionAccumulator {
 public:
  explicit EarlyFusionAccumulator(EarlyFusionKind kind) : kind_(kind) {}

  template <class T>
  void add(std::span<const T> hist) {
    if (count_ == 0) {
      acc_.assign(hist.size(), 0.0);
    } else if (hist.size() != acc_.size()) {
      throw Error(ErrorCode::LengthMismatch, "early fusion over histograms of different lengths");
    }
    for (std::size_t i = 0; i < hist.size(); ++i) {
      const double v = static_cast<double>(hist[i]);
      if (kind_ == EarlyFusionKind::Maximum)
        acc_[i] = count_ == 0 ? v : std::max(acc_[i], v);
      else
        acc_[i] += v;
    }
    ++count_;
  }

  void add(const BowHistogram& h) { add(std::span<const std::uint32_t>(h.bins)); }

  std::size_t count() const noexcept { return count_; }

  std::vector<double> result() const {
    if (count_ == 0) throw Error(ErrorCode::EmptyInput, "early fusion needs at least one histogram");
    std::vector<double> out = acc_;
    if (kind_ == EarlyFusionKind::Average)
      for (double& v : out) v /= static_cast<double>(count_);
    return out;
  }

 private:
  EarlyFusionKind kind_;
  std::size_t count_ = 0;
  std::vector<double> acc_;
};

inline std::vector<double> early_fuse(std::span<const BowHistogram> hists, EarlyFusionKind kind) {
  EarlyFusionAccumulator acc(kind);
  for (const auto& h : hists) acc.add(h);
  return acc.result();
}

template <class T>
std::vector<double> early_fuse(std::span<const std::vector<T>> hists, EarlyFusionKind kind) {
  EarlyFusionAccumulator acc(kind);
  for (const auto& h : hists) acc.add(std::span<const T>(h));
  return acc.result();
}

// ---------------------------------------------------------------------------
// Image-set similarity

/// M x N similarities between query images (rows) and one object's views.
class ScoreMatrix {
 public:
  ScoreMatrix(std::size_t m, std::size_t n, std::vector<double> scores) : m_(m), n_(n), s_(std::move(scores)) {
    if (m == 0 || n == 0) throw Error(ErrorCode::InvalidArgument, "score matrix needs m, n >= 1");
    if (s_.size() != m * n) throw Error(ErrorCode::InvalidArgument, "score matrix size does not match m x n");
    for (double v : s_)
      if (!std::isfinite(v) || v < 0.0) throw Error(ErrorCode::InvalidArgument, "scores must be finite and >= 0");
  }

  std::size_t rows() const noexcept { return m_; }
  std::size_t cols() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return s_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const noexcept { return std::span<const double>(s_).subspan(i * n_, n_); }
  std::span<const double> values() const noexcept { return s_; }

 private:
  std::size_t m_;
  std::size_t n_;
  std::vector<double> s_;
};

namespace detail {

// sum_i x_i * (x_i / sum x); zero when everything is zero.
inline double self_weighted_sum(std::span<const double> xs) {
  double total = 0.0;
  for (double x : xs) total += x;
  if (total == 0.0) return 0.0;
  double acc = 0.0;
  for (double x : xs) acc += x * (x / total);
  return acc;
}

}  // namespace detail

inline double set_similarity(const ScoreMatrix& sm, LateFusionKind kind) {
  const auto all = sm.values();
  switch (kind) {
    case LateFusionKind::SetMax:
      return *std::max_element(all.begin(), all.end());
    case LateFusionKind::SetAverage: {
      double sum = 0.0;
      for (double v : all) sum += v;
      return sum / static_cast<double>(all.size());
    }
    case LateFusionKind::SetWeightedAverage:
      return detail::self_weighted_sum(all);
    case LateFusionKind::SetAverageMax:
    case LateFusionKind::SetWeightedAverageMax: {
      std::vector<double> row_max(sm.rows());
      for (std::size_t i = 0; i < sm.rows(); ++i) {
        auto r = sm.row(i);
        row_max[i] = *std::max_element(r.begin(), r.end());
      }
      if (kind == LateFusionKind::SetWeightedAverageMax) return detail::self_weighted_sum(row_max);
      double sum = 0.0;
      for (double v : row_max) sum += v;
      return sum / static_cast<double>(row_max.size());
    }
    default:
      throw Error(ErrorCode::InvalidArgument,
                  std::string(fusion_name(kind)) + " is not an image-set similarity");
  }
}

// ---------------------------------------------------------------------------
// Ranked lists

template <class Id>
struct Scored {
  Id id;
  double score = 0.0;

  friend bool operator==(const Scored&, const Scored&) = default;
};

/// Descending score, ascending id on ties.
template <class Id>
bool ranks_before(const Scored<Id>& a, const Scored<Id>& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

template <class Id>
void sort_ranked(std::vector<Scored<Id>>& items) {
  std::sort(items.begin(), items.end(), ranks_before<Id>);
}

/// 1-based ranks of the positive-score entries of `scores` (descending score,
/// ascending universe position on ties); zero scores share rank P + 1 where P
/// is the number of positive entries.
inline std::vector<std::size_t> positive_ranks(std::span<const double> scores) {
  std::vector<std::size_t> order;
  for (std::size_t u = 0; u < scores.size(); ++u)
    if (scores[u] > 0.0) order.push_back(u);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::size_t> rank(scores.size(), order.size() + 1);
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r + 1;
  return rank;
}

/// Combines m per-query-image score lists over the same image universe.
///
///   max_sim       max_j S_j(d)
///   weighted_sim  sum_j S_j(d)^2 / sum_j S_j(d)
///   count         lists whose top-L contains d, ties broken by rank sum;
///                 score = count + 1 / (1 + rank_sum)
///   highest_rank  -min_j rank_j(d)
///   rank_sum      -sum_j rank_j(d)
///
/// Returns at most k entries in descending score order, ties by ascending id.
template <class Id>
std::vector<Scored<Id>> fuse_image_rankings(std::span<const std::vector<Scored<Id>>> lists, LateFusionKind kind,
                                            std::size_t list_depth, std::size_t k) {
  if (lists.empty()) throw Error(ErrorCode::EmptyInput, "image-level fusion needs at least one result list");
  if (is_set_kind(kind))
    throw Error(ErrorCode::InvalidArgument, std::string(fusion_name(kind)) + " is not an image-level fusion");

  // Universe in ascending id order; each list is re-indexed onto it.
  std::vector<Id> universe;
  universe.reserve(lists.front().size());
  for (const auto& e : lists.front()) universe.push_back(e.id);
  std::sort(universe.begin(), universe.end());
  if (std::adjacent_find(universe.begin(), universe.end()) != universe.end())
    throw Error(ErrorCode::InconsistentUniverse, "duplicate id within a result list");
  const std::size_t u_size = universe.size();
  const std::size_t m = lists.size();

  std::vector<std::vector<double>> scores(m, std::vector<double>(u_size, 0.0));
  for (std::size_t j = 0; j < m; ++j) {
    if (lists[j].size() != u_size) throw Error(ErrorCode::InconsistentUniverse, "result lists differ in length");
    std::vector<bool> seen(u_size, false);
    for (const auto& e : lists[j]) {
      auto it = std::lower_bound(universe.begin(), universe.end(), e.id);
      if (it == universe.end() || !(*it == e.id))
        throw Error(ErrorCode::InconsistentUniverse, "result lists cover different images");
      const auto u = static_cast<std::size_t>(it - universe.begin());
      if (seen[u]) throw Error(ErrorCode::InconsistentUniverse, "duplicate id within a result list");
      seen[u] = true;
      scores[j][u] = e.score;
    }
  }

  std::vector<double> fused(u_size, 0.0);
  switch (kind) {
    case LateFusionKind::MaxSim:
      for (std::size_t u = 0; u < u_size; ++u) {
        double best = 0.0;
        for (std::size_t j = 0; j < m; ++j) best = std::max(best, scores[j][u]);
        fused[u] = best;
      }
      break;
    case LateFusionKind::WeightedSim:
      for (std::size_t u = 0; u < u_size; ++u) {
        std::vector<double> col(m);
        for (std::size_t j = 0; j < m; ++j) col[j] = scores[j][u];
        fused[u] = detail::self_weighted_sum(col);
      }
      break;
    case LateFusionKind::Count:
    case LateFusionKind::HighestRank:
    case LateFusionKind::RankSum: {
      std::vector<std::size_t> rank_sum(u_size, 0), best_rank(u_size, u_size + 1), hits(u_size, 0);
      for (std::size_t j = 0; j < m; ++j) {
        const auto ranks = positive_ranks(scores[j]);
        for (std::size_t u = 0; u < u_size; ++u) {
          rank_sum[u] += ranks[u];
          best_rank[u] = std::min(best_rank[u], ranks[u]);
          if (scores[j][u] > 0.0 && ranks[u] <= list_depth) ++hits[u];
        }
      }
      for (std::size_t u = 0; u < u_size; ++u) {
        if (kind == LateFusionKind::Count)
          fused[u] = static_cast<double>(hits[u]) + 1.0 / (1.0 + static_cast<double>(rank_sum[u]));
        else if (kind == LateFusionKind::HighestRank)
          fused[u] = -static_cast<double>(best_rank[u]);
        else
          fused[u] = -static_cast<double>(rank_sum[u]);
      }
      break;
    }
    default:
      break;
  }

  std::vector<Scored<Id>> out;
  out.reserve(u_size);
  for (std::size_t u = 0; u < u_size; ++u) out.push_back({universe[u], fused[u]});
  sort_ranked(out);
  if (out.size() > k) out.resize(k);
  return out;
}

template <class Id>
std::vector<Scored<Id>> fuse_image_rankings(const std::vector<std::vector<Scored<Id>>>& lists, LateFusionKind kind,
                                            std::size_t list_depth, std::size_t k) {
  return fuse_image_rankings(std::span<const std::vector<Scored<Id>>>(lists), kind, list_depth, k);
}

// ---------------------------------------------------------------------------
// Object-level results

struct ResultEntry {
  std::string object_id;
  std::string category;
  double score = 0.0;

  friend bool operator==(const ResultEntry&, const ResultEntry&) = default;
};

/// Descending score, ascending object_id on ties, no duplicate ids.
using ResultList = std::vector<ResultEntry>;

}  // namespace mvs

#endif  // MVSEARCH_FUSION_HPP
