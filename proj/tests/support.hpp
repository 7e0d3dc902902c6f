// Synthetic images, histograms and descriptor datasets shared by the unit
// tests and the acceptance runner.
#ifndef MVSEARCH_TESTS_SUPPORT_HPP
#define MVSEARCH_TESTS_SUPPORT_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mvsearch/mvsearch.hpp"

namespace mvs::testing {

inline GrayImage square_image(int size = 64, int x0 = 20, int y0 = 20, int x1 = 43, int y1 = 43) {
  GrayImage img(size, size, 0.0f);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) img(x, y) = 1.0f;
  return img;
}

struct Blob {
  double cx, cy, sigma;
};

inline GrayImage blob_image(int w, int h, const std::vector<Blob>& blobs) {
  GrayImage img(w, h, 0.0f);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = 0.0;
      for (const auto& b : blobs) {
        const double dx = x - b.cx, dy = y - b.cy;
        v += std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
      }
      img(x, y) = static_cast<float>(std::min(1.0, v));
    }
  return img;
}

/// Random smooth-ish texture for extraction smoke tests.
inline GrayImage texture_image(std::mt19937_64& rng, int w = 96, int h = 96) {
  std::uniform_real_distribution<double> pos(8.0, w - 8.0), sig(2.0, 6.0), amp(0.2, 0.8);
  std::vector<Blob> blobs;
  GrayImage img(w, h, 0.0f);
  for (int i = 0; i < 12; ++i) {
    const Blob b{pos(rng), pos(rng), sig(rng)};
    const double a = amp(rng);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double dx = x - b.cx, dy = y - b.cy;
        img(x, y) = static_cast<float>(std::min(1.0, img(x, y) + a * std::exp(-(dx * dx + dy * dy) / (2 * b.sigma * b.sigma))));
      }
  }
  return img;
}

inline std::vector<std::uint32_t> random_bins(std::mt19937_64& rng, std::size_t n, std::uint32_t max_count,
                                              double zero_fraction = 0.3) {
  std::uniform_int_distribution<std::uint32_t> count(1, max_count);
  std::bernoulli_distribution zero(zero_fraction);
  std::vector<std::uint32_t> out(n);
  for (auto& v : out) v = zero(rng) ? 0 : count(rng);
  return out;
}

inline Descriptor random_descriptor(std::mt19937_64& rng, Channel ch = Channel::Corner) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Descriptor d;
  d.channel = ch;
  for (auto& v : d.values) v = u(rng);
  return d;
}

inline Vocabulary random_vocabulary(std::mt19937_64& rng, Channel ch, std::uint32_t k) {
  Vocabulary v;
  v.channel = ch;
  v.k = k;
  for (std::uint32_t i = 0; i < k; ++i) {
    const auto d = random_descriptor(rng, ch);
    v.centroids.insert(v.centroids.end(), d.values.begin(), d.values.end());
  }
  return v;
}

/// Store with random vocabularies and random view histograms, objects named
/// o00, o01, ... in categories c0..c{categories-1}.
inline IndexStore random_store(std::mt19937_64& rng, std::size_t objects, std::size_t views, std::uint32_t corner_k = 6,
                               std::uint32_t blob_k = 4, std::size_t categories = 3, std::uint32_t max_count = 5) {
  IndexStore s;
  s.corner_vocab = random_vocabulary(rng, Channel::Corner, corner_k);
  s.blob_vocab = random_vocabulary(rng, Channel::Blob, blob_k);
  s.build_meta = "{}";
  for (std::size_t o = 0; o < objects; ++o) {
    char id[32];
    std::snprintf(id, sizeof id, "o%02zu", o);
    ObjectRecord rec{id, "c" + std::to_string(o % categories), {}};
    for (std::size_t v = 0; v < views; ++v)
      rec.views.push_back({std::to_string(v), {random_bins(rng, s.bins(), max_count)}, std::string(id) + "_" + std::to_string(v)});
    s.objects.push_back(std::move(rec));
  }
  return s;
}

/// Per-object descriptor distributions: every category owns a set of
/// prototype descriptors per channel, every object draws a subset of its
/// category's prototypes plus a few of its own, and each view observes a
/// random part of its object's prototypes with noise plus background clutter.
struct SyntheticConfig {
  std::size_t categories = 5;
  std::size_t objects_per_category = 4;
  std::size_t views = 4;
  std::size_t query_objects_per_category = 2;
  std::size_t category_prototypes = 24;
  std::size_t object_prototypes = 12;   // drawn from the category pool
  std::size_t private_prototypes = 4;   // unique to the object
  double view_coverage = 0.35;          // fraction of the object's prototypes seen per view
  std::size_t clutter = 14;             // random descriptors per view and channel
  double noise = 0.06;
};

struct SyntheticObject {
  std::string id;
  std::string category;
  std::vector<DescriptorSet> views;
};

struct SyntheticDataset {
  std::vector<SyntheticObject> database;
  std::vector<SyntheticObject> queries;
};

namespace detail {

inline Descriptor normalised(Descriptor d) {
  double ss = 0.0;
  for (float v : d.values) ss += double(v) * v;
  const double inv = ss > 0.0 ? 1.0 / std::sqrt(ss) : 0.0;
  for (float& v : d.values) v = static_cast<float>(v * inv);
  return d;
}

inline Descriptor sparse_random(std::mt19937_64& rng, Channel ch) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::bernoulli_distribution active(0.25);
  Descriptor d;
  d.channel = ch;
  for (auto& v : d.values) v = active(rng) ? u(rng) : 0.0f;
  return normalised(d);
}

inline Descriptor jitter(std::mt19937_64& rng, const Descriptor& base, double sigma) {
  std::normal_distribution<double> n(0.0, sigma);
  Descriptor d = base;
  for (auto& v : d.values) v = static_cast<float>(std::max(0.0, v + n(rng)));
  return normalised(d);
}

}  // namespace detail

inline SyntheticDataset synthetic_dataset(std::uint64_t seed, const SyntheticConfig& cfg = {}) {
  std::mt19937_64 rng(seed);
  const Channel channels[2] = {Channel::Corner, Channel::Blob};

  std::vector<std::array<std::vector<Descriptor>, 2>> category_protos(cfg.categories);
  for (auto& cp : category_protos)
    for (int c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < cfg.category_prototypes; ++i) cp[c].push_back(detail::sparse_random(rng, channels[c]));

  auto make_object = [&](const std::string& id, std::size_t cat) {
    std::array<std::vector<Descriptor>, 2> protos;
    for (int c = 0; c < 2; ++c) {
      std::vector<std::size_t> idx(cfg.category_prototypes);
      std::iota(idx.begin(), idx.end(), 0);
      std::shuffle(idx.begin(), idx.end(), rng);
      for (std::size_t i = 0; i < cfg.object_prototypes; ++i) protos[c].push_back(category_protos[cat][c][idx[i]]);
      for (std::size_t i = 0; i < cfg.private_prototypes; ++i) protos[c].push_back(detail::sparse_random(rng, channels[c]));
    }
    SyntheticObject obj{id, "cat" + std::to_string(cat), {}};
    std::bernoulli_distribution seen(cfg.view_coverage);
    for (std::size_t v = 0; v < cfg.views; ++v) {
      DescriptorSet ds;
      ds.image_id = id + "_" + std::to_string(v);
      for (int c = 0; c < 2; ++c) {
        auto& out = c == 0 ? ds.corner_descriptors : ds.blob_descriptors;
        for (const auto& p : protos[c])
          if (seen(rng)) out.push_back(detail::jitter(rng, p, cfg.noise));
        for (std::size_t i = 0; i < cfg.clutter; ++i) out.push_back(detail::sparse_random(rng, channels[c]));
      }
      obj.views.push_back(std::move(ds));
    }
    return obj;
  };

  SyntheticDataset out;
  for (std::size_t cat = 0; cat < cfg.categories; ++cat)
    for (std::size_t o = 0; o < cfg.objects_per_category; ++o) {
      char id[32];
      std::snprintf(id, sizeof id, "obj%02zu_%zu", cat, o);
      out.database.push_back(make_object(id, cat));
    }
  for (std::size_t cat = 0; cat < cfg.categories; ++cat)
    for (std::size_t q = 0; q < cfg.query_objects_per_category; ++q) {
      char id[32];
      std::snprintf(id, sizeof id, "query%02zu_%zu", cat, q);
      out.queries.push_back(make_object(id, cat));
    }
  return out;
}

inline std::vector<ObjectDescriptors> to_object_descriptors(const std::vector<SyntheticObject>& objects) {
  std::vector<ObjectDescriptors> out;
  for (const auto& o : objects) {
    ObjectDescriptors od{o.id, o.category, {}};
    for (const auto& v : o.views) od.views.emplace_back(v.image_id, v);
    out.push_back(std::move(od));
  }
  return out;
}

inline BuildConfig small_build_config(std::size_t k, std::uint64_t seed = 7) {
  BuildConfig cfg;
  cfg.corner_k = cfg.blob_k = k;
  cfg.kmeans.seed = seed;
  cfg.kmeans.max_iters = 30;
  return cfg;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("mvsearch_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace mvs::testing

#endif  // MVSEARCH_TESTS_SUPPORT_HPP
