#ifndef MVSEARCH_KMEANS_HPP
#define MVSEARCH_KMEANS_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "mvsearch/error.hpp"

namespace mvs {

struct KMeansConfig {
  std::uint64_t seed = 42;
  double tol = 1e-4;  // stop when relative distortion improvement drops below this
  int max_iters = 100;
};

struct KMeansResult {
  std::vector<float> centroids;  // k x dim, row-major
  std::vector<std::uint32_t> assignment;
  /// Mean squared distance after the seeding assignment and after every
  /// accepted Lloyd update. Non-increasing.
  std::vector<double> distortion_history;
  std::uint32_t iterations = 0;
  double distortion = 0.0;
};

struct Nearest {
  std::size_t index = 0;
  double dist2 = std::numeric_limits<double>::infinity();
};

/// Exhaustive nearest row of `centroids` by squared Euclidean distance; ties go
/// to the lowest index. Partial sums abandon a row once they exceed the best.
inline Nearest nearest_centroid(std::span<const float> point, std::span<const float> centroids, std::size_t dim) {
  Nearest best;
  const std::size_t k = centroids.size() / dim;
  for (std::size_t c = 0; c < k; ++c) {
    const float* row = centroids.data() + c * dim;
    double acc = 0.0;
    std::size_t i = 0;
    for (; i < dim; ++i) {
      const double diff = static_cast<double>(point[i]) - static_cast<double>(row[i]);
      acc += diff * diff;
      if (acc > best.dist2) break;
    }
    if (i == dim && acc < best.dist2) {
      best.index = c;
      best.dist2 = acc;
    }
  }
  return best;
}

namespace detail {

// Uniform double in [0, 1) from the top 53 bits; stable across standard libraries.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t weighted_pick(std::span<const double> weights, double total, std::mt19937_64& rng) {
  const double target = unit_uniform(rng) * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = i;
    if (acc > target) return i;
  }
  return last_positive;
}

class KMeansRun {
 public:
  KMeansRun(std::span<const float> data, std::size_t dim, std::size_t k)
      : data_(data), dim_(dim), n_(data.size() / dim), k_(k) {}

  KMeansResult run(const KMeansConfig& cfg) {
    std::mt19937_64 rng(cfg.seed);
    seed_plus_plus(rng);
    KMeansResult res;
    double current = assign(centroids_, assignment_, dist2_);
    res.distortion_history.push_back(current);
    std::uint32_t iterations = 0;
    while (static_cast<int>(iterations) < cfg.max_iters && current > 0.0) {
      std::vector<float> next = update();
      std::vector<std::uint32_t> next_assign(n_);
      std::vector<double> next_dist(n_);
      const double d = assign(next, next_assign, next_dist);
      if (d > current) break;  // float rounding of the means; keep the previous state
      centroids_ = std::move(next);
      assignment_ = std::move(next_assign);
      dist2_ = std::move(next_dist);
      ++iterations;
      res.distortion_history.push_back(d);
      const double improvement = (current - d) / current;
      current = d;
      if (improvement < cfg.tol) break;
    }
    res.centroids = std::move(centroids_);
    res.assignment = std::move(assignment_);
    res.iterations = iterations;
    res.distortion = current;
    return res;
  }

 private:
  std::span<const float> row(std::size_t i) const { return data_.subspan(i * dim_, dim_); }

  double sq_dist(std::span<const float> a, std::span<const float> b) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) {
      const double diff = static_cast<double>(a[i]) - static_cast<double>(b[i]);
      acc += diff * diff;
    }
    return acc;
  }

  void seed_plus_plus(std::mt19937_64& rng) {
    centroids_.assign(k_ * dim_, 0.0f);
    const std::size_t first = static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(n_));
    std::copy_n(row(first).begin(), dim_, centroids_.begin());
    std::vector<double> d2(n_);
    for (std::size_t i = 0; i < n_; ++i) d2[i] = sq_dist(row(i), row(first));
    for (std::size_t c = 1; c < k_; ++c) {
      double total = 0.0;
      for (double v : d2) total += v;
      if (!(total > 0.0))
        throw Error(ErrorCode::TooFewDescriptors,
                    "only " + std::to_string(c) + " distinct points available for k=" + std::to_string(k_));
      const std::size_t pick = weighted_pick(d2, total, rng);
      std::copy_n(row(pick).begin(), dim_, centroids_.begin() + static_cast<std::ptrdiff_t>(c * dim_));
      for (std::size_t i = 0; i < n_; ++i) d2[i] = std::min(d2[i], sq_dist(row(i), row(pick)));
    }
    assignment_.assign(n_, 0);
    dist2_.assign(n_, 0.0);
  }

  double assign(std::span<const float> centroids, std::vector<std::uint32_t>& out, std::vector<double>& dist) const {
    double sum = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
      const auto nn = nearest_centroid(row(i), centroids, dim_);
      out[i] = static_cast<std::uint32_t>(nn.index);
      dist[i] = nn.dist2;
      sum += nn.dist2;
    }
    return sum / static_cast<double>(n_);
  }

  // Cluster means; empty clusters take the points farthest from their current centroid.
  std::vector<float> update() const {
    std::vector<double> sums(k_ * dim_, 0.0);
    std::vector<std::size_t> counts(k_, 0);
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t c = assignment_[i];
      ++counts[c];
      auto r = row(i);
      for (std::size_t j = 0; j < dim_; ++j) sums[c * dim_ + j] += r[j];
    }
    std::vector<float> next(k_ * dim_);
    std::vector<std::size_t> empty;
    for (std::size_t c = 0; c < k_; ++c) {
      if (counts[c] == 0) {
        empty.push_back(c);
        continue;
      }
      for (std::size_t j = 0; j < dim_; ++j)
        next[c * dim_ + j] = static_cast<float>(sums[c * dim_ + j] / static_cast<double>(counts[c]));
    }
    if (!empty.empty()) {
      std::vector<std::size_t> order(n_);
      for (std::size_t i = 0; i < n_; ++i) order[i] = i;
      std::stable_sort(order.begin(), order.end(),
                       [this](std::size_t a, std::size_t b) { return dist2_[a] > dist2_[b]; });
      for (std::size_t e = 0; e < empty.size(); ++e) {
        auto r = row(order[e]);
        std::copy_n(r.begin(), dim_, next.begin() + static_cast<std::ptrdiff_t>(empty[e] * dim_));
      }
    }
    return next;
  }

  std::span<const float> data_;
  std::size_t dim_;
  std::size_t n_;
  std::size_t k_;
  std::vector<float> centroids_;
  std::vector<std::uint32_t> assignment_;
  std::vector<double> dist2_;
};

}  // namespace detail

/// Lloyd's algorithm from k-means++ seeding over `data` (n x dim, row-major).
inline KMeansResult kmeans(std::span<const float> data, std::size_t dim, std::size_t k, const KMeansConfig& cfg = {}) {
  if (dim == 0 || data.size() % dim != 0) throw Error(ErrorCode::InvalidArgument, "data size is not a multiple of dim");
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
  const std::size_t n = data.size() / dim;
  if (n < k)
    throw Error(ErrorCode::TooFewDescriptors,
                std::to_string(n) + " points for k=" + std::to_string(k));
  return detail::KMeansRun(data, dim, k).run(cfg);
}

}  // namespace mvs

#endif  // MVSEARCH_KMEANS_HPP
