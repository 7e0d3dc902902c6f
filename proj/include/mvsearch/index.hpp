#ifndef MVSEARCH_INDEX_HPP
#define MVSEARCH_INDEX_HPP

#include <algorithm>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvsearch/binary_io.hpp"
#include "mvsearch/descriptor_io.hpp"
#include "mvsearch/fusion.hpp"
#include "mvsearch/manifest.hpp"
#include "mvsearch/similarity.hpp"
#include "mvsearch/vocabulary.hpp"

namespace mvs {

struct ViewRecord {
  std::string view_id;
  BowHistogram histogram;
  std::string source;

  friend bool operator==(const ViewRecord&, const ViewRecord&) = default;
};

struct ObjectRecord {
  std::string object_id;
  std::string category;
  std::vector<ViewRecord> views;

  friend bool operator==(const ObjectRecord&, const ObjectRecord&) = default;
};

/// Vocabulary pair plus every database object's view histograms. Immutable
/// once built or loaded; concurrent queries only read it.
struct IndexStore {
  Vocabulary corner_vocab;
  Vocabulary blob_vocab;
  std::vector<ObjectRecord> objects;
  std::string build_meta;  // JSON snapshot of the build configuration

  std::size_t bins() const noexcept { return static_cast<std::size_t>(corner_vocab.k) + blob_vocab.k; }

  std::size_t view_count() const noexcept {
    std::size_t n = 0;
    for (const auto& o : objects) n += o.views.size();
    return n;
  }

  const ObjectRecord* find(std::string_view object_id) const noexcept {
    for (const auto& o : objects)
      if (o.object_id == object_id) return &o;
    return nullptr;
  }

  BowHistogram histogram(const DescriptorSet& ds) const { return build_bow(ds, corner_vocab, blob_vocab); }

  friend bool operator==(const IndexStore&, const IndexStore&) = default;
};

struct BuildConfig {
  DetectorConfig detector;
  std::size_t corner_k = 3000;
  std::size_t blob_k = 3000;
  KMeansConfig kmeans;
  std::size_t max_training_descriptors = 500'000;  // per channel

  nlohmann::json to_json() const {
    return {{"corner_k", corner_k},
            {"blob_k", blob_k},
            {"seed", kmeans.seed},
            {"tol", kmeans.tol},
            {"max_iters", kmeans.max_iters},
            {"max_training_descriptors", max_training_descriptors},
            {"harris_kappa", detector.harris_kappa},
            {"harris_rel_threshold", detector.harris_rel_threshold},
            {"nms_radius", detector.nms_radius},
            {"max_points", detector.max_points},
            {"blob_threshold", detector.blob_threshold}};
  }

  /// Overrides fields present in `j`; unknown keys are rejected.
  static BuildConfig from_json(const nlohmann::json& j) {
    BuildConfig c;
    try {
      for (const auto& [key, value] : j.items()) {
        if (key == "corner_k") c.corner_k = value.get<std::size_t>();
        else if (key == "blob_k") c.blob_k = value.get<std::size_t>();
        else if (key == "vocab_size") c.corner_k = c.blob_k = value.get<std::size_t>();
        else if (key == "seed") c.kmeans.seed = value.get<std::uint64_t>();
        else if (key == "tol") c.kmeans.tol = value.get<double>();
        else if (key == "max_iters") c.kmeans.max_iters = value.get<int>();
        else if (key == "max_training_descriptors") c.max_training_descriptors = value.get<std::size_t>();
        else if (key == "harris_kappa") c.detector.harris_kappa = value.get<double>();
        else if (key == "harris_rel_threshold") c.detector.harris_rel_threshold = value.get<double>();
        else if (key == "nms_radius") c.detector.nms_radius = value.get<double>();
        else if (key == "max_points") c.detector.max_points = value.get<std::size_t>();
        else if (key == "blob_threshold") c.detector.blob_threshold = value.get<double>();
        else throw Error(ErrorCode::InvalidArgument, "unknown build config key " + key);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, std::string("build config: ") + e.what());
    }
    return c;
  }
};

/// Descriptors of one database object, one set per view.
struct ObjectDescriptors {
  std::string object_id;
  std::string category;
  std::vector<std::pair<std::string, DescriptorSet>> views;  // (source path, descriptors)
};

/// Trains both vocabularies on the pooled descriptors and quantizes every view.
inline IndexStore build_store(std::span<const ObjectDescriptors> objects, const BuildConfig& cfg) {
  std::set<std::string> ids;
  std::vector<Descriptor> corner_pool, blob_pool;
  for (const auto& o : objects) {
    if (!ids.insert(o.object_id).second) throw Error(ErrorCode::DuplicateObjectId, "object_id " + o.object_id);
    if (o.views.empty()) throw Error(ErrorCode::InvalidArgument, "object " + o.object_id + " has no views");
    for (const auto& [src, ds] : o.views) {
      corner_pool.insert(corner_pool.end(), ds.corner_descriptors.begin(), ds.corner_descriptors.end());
      blob_pool.insert(blob_pool.end(), ds.blob_descriptors.begin(), ds.blob_descriptors.end());
    }
  }
  if (corner_pool.size() < cfg.corner_k || corner_pool.empty())
    throw Error(ErrorCode::TooFewDescriptors, std::to_string(corner_pool.size()) +
                                                  " corner descriptors for k=" + std::to_string(cfg.corner_k));
  if (blob_pool.size() < cfg.blob_k || blob_pool.empty())
    throw Error(ErrorCode::TooFewDescriptors,
                std::to_string(blob_pool.size()) + " blob descriptors for k=" + std::to_string(cfg.blob_k));

  IndexStore store;
  store.corner_vocab =
      train(sample_for_training(corner_pool, cfg.max_training_descriptors, cfg.kmeans.seed), cfg.corner_k, cfg.kmeans);
  store.blob_vocab =
      train(sample_for_training(blob_pool, cfg.max_training_descriptors, cfg.kmeans.seed), cfg.blob_k, cfg.kmeans);
  store.build_meta = cfg.to_json().dump();

  for (const auto& o : objects) {
    ObjectRecord rec;
    rec.object_id = o.object_id;
    rec.category = o.category;
    for (std::size_t v = 0; v < o.views.size(); ++v)
      rec.views.push_back({std::to_string(v), store.histogram(o.views[v].second), o.views[v].first});
    store.objects.push_back(std::move(rec));
  }
  return store;
}

/// Loads or extracts descriptors for every manifest object view, then builds.
inline IndexStore build_index(const Manifest& manifest, const BuildConfig& cfg) {
  std::vector<ObjectDescriptors> objects;
  for (const auto& e : manifest.objects) {
    ObjectDescriptors od{e.id, e.category, {}};
    for (const auto& v : e.views) od.views.emplace_back(v, descriptors_from_file(manifest.resolve(v), cfg.detector));
    objects.push_back(std::move(od));
  }
  return build_store(objects, cfg);
}

// ---------------------------------------------------------------------------
// Querying

struct QuerySpec {
  std::vector<BowHistogram> queries;
  SimilarityKind similarity = SimilarityKind::MinMax;
  FusionMode mode = SingleMode{};
  std::size_t k = 20;
  std::size_t list_depth = 100;
};

/// Similarity of one (possibly fused) query histogram against every stored
/// view, in object-major order.
template <class T>
std::vector<double> score_views(const IndexStore& store, std::span<const T> query, SimilarityKind kind) {
  std::vector<double> out;
  out.reserve(store.view_count());
  for (const auto& o : store.objects)
    for (const auto& v : o.views) out.push_back(similarity(query, std::span<const std::uint32_t>(v.histogram.bins), kind));
  return out;
}

inline std::vector<double> score_views(const IndexStore& store, const BowHistogram& query, SimilarityKind kind) {
  return score_views(store, std::span<const std::uint32_t>(query.bins), kind);
}

namespace detail {

inline ResultList finish(const IndexStore& store, std::vector<Scored<std::size_t>> per_object, std::size_t k) {
  std::sort(per_object.begin(), per_object.end(), [&](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return store.objects[a.id].object_id < store.objects[b.id].object_id;
  });
  if (per_object.size() > k) per_object.resize(k);
  ResultList out;
  out.reserve(per_object.size());
  for (const auto& e : per_object) out.push_back({store.objects[e.id].object_id, store.objects[e.id].category, e.score});
  return out;
}

}  // namespace detail

/// Object score = its best view's score.
inline ResultList rank_by_best_view(const IndexStore& store, std::span<const double> view_scores, std::size_t k) {
  std::vector<Scored<std::size_t>> per_object;
  std::size_t pos = 0;
  for (std::size_t o = 0; o < store.objects.size(); ++o) {
    double best = 0.0;
    for (std::size_t v = 0; v < store.objects[o].views.size(); ++v) best = std::max(best, view_scores[pos++]);
    per_object.push_back({o, best});
  }
  return detail::finish(store, std::move(per_object), k);
}

/// Late fusion from per-query-image view scores (each in `score_views` order).
inline ResultList rank_late(const IndexStore& store, std::span<const std::vector<double>> per_query,
                            LateFusionKind kind, std::size_t list_depth, std::size_t k) {
  const std::size_t m = per_query.size();
  if (m == 0) throw Error(ErrorCode::EmptyInput, "late fusion needs at least one query image");

  if (is_set_kind(kind)) {
    std::vector<Scored<std::size_t>> per_object;
    std::size_t offset = 0;
    for (std::size_t o = 0; o < store.objects.size(); ++o) {
      const std::size_t n = store.objects[o].views.size();
      std::vector<double> s(m * n);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) s[i * n + j] = per_query[i][offset + j];
      per_object.push_back({o, set_similarity(ScoreMatrix(m, n, std::move(s)), kind)});
      offset += n;
    }
    return detail::finish(store, std::move(per_object), k);
  }

  // Image-level: rank all views, then each object takes its best-placed view.
  using ImageId = std::pair<std::string_view, std::size_t>;
  std::vector<std::vector<Scored<ImageId>>> lists(m);
  std::unordered_map<std::string_view, std::size_t> object_index;
  for (std::size_t o = 0; o < store.objects.size(); ++o) object_index.emplace(store.objects[o].object_id, o);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t pos = 0;
    for (std::size_t o = 0; o < store.objects.size(); ++o)
      for (std::size_t v = 0; v < store.objects[o].views.size(); ++v, ++pos)
        lists[i].push_back({ImageId{store.objects[o].object_id, v}, per_query[i][pos]});
  }
  const auto fused = fuse_image_rankings(lists, kind, list_depth, store.view_count());

  std::vector<Scored<std::size_t>> per_object;
  std::vector<bool> placed(store.objects.size(), false);
  for (const auto& e : fused) {
    const std::size_t o = object_index.at(e.id.first);
    if (placed[o]) continue;
    placed[o] = true;
    per_object.push_back({o, e.score});
  }
  return detail::finish(store, std::move(per_object), k);
}

inline void validate(const IndexStore& store, const QuerySpec& spec) {
  if (store.objects.empty()) throw Error(ErrorCode::EmptyStore, "index holds no objects");
  if (spec.queries.empty()) throw Error(ErrorCode::SpecInvalid, "query needs at least one histogram");
  if (spec.k == 0) throw Error(ErrorCode::SpecInvalid, "k must be >= 1");
  if (std::holds_alternative<SingleMode>(spec.mode) && spec.queries.size() != 1)
    throw Error(ErrorCode::SpecInvalid, "single mode takes exactly one query view, got " +
                                            std::to_string(spec.queries.size()));
  for (const auto& q : spec.queries)
    if (q.size() != store.bins())
      throw Error(ErrorCode::SpecInvalid, "query histogram has " + std::to_string(q.size()) + " bins, index has " +
                                              std::to_string(store.bins()));
}

inline ResultList query(const IndexStore& store, const QuerySpec& spec) {
  validate(store, spec);
  if (std::holds_alternative<SingleMode>(spec.mode))
    return rank_by_best_view(store, score_views(store, spec.queries.front(), spec.similarity), spec.k);
  if (const auto* early = std::get_if<EarlyFusionKind>(&spec.mode)) {
    const auto fused = early_fuse(std::span<const BowHistogram>(spec.queries), *early);
    return rank_by_best_view(store, score_views(store, std::span<const double>(fused), spec.similarity), spec.k);
  }
  const auto late = std::get<LateFusionKind>(spec.mode);
  std::vector<std::vector<double>> per_query;
  per_query.reserve(spec.queries.size());
  for (const auto& q : spec.queries) per_query.push_back(score_views(store, q, spec.similarity));
  return rank_late(store, per_query, late, spec.list_depth, spec.k);
}

// ---------------------------------------------------------------------------
// Persistence

// "MVIX": magic[4] version:u16=1 meta:str16 corner MVVC block, blob MVVC block
//         objects:u32, per object: id:str16 category:str16 views:u32,
//         per view: view_id:str16 source:str16 bins x u32
// Strings are u16 length-prefixed; everything little-endian.
inline constexpr std::string_view kStoreMagic = "MVIX";
inline constexpr std::uint16_t kStoreVersion = 1;

inline Bytes encode_store(const IndexStore& store) {
  ByteWriter w;
  w.raw(kStoreMagic);
  w.u16(kStoreVersion);
  w.str16(store.build_meta);
  write_vocabulary(w, store.corner_vocab);
  write_vocabulary(w, store.blob_vocab);
  w.u32(static_cast<std::uint32_t>(store.objects.size()));
  for (const auto& o : store.objects) {
    w.str16(o.object_id);
    w.str16(o.category);
    w.u32(static_cast<std::uint32_t>(o.views.size()));
    for (const auto& v : o.views) {
      w.str16(v.view_id);
      w.str16(v.source);
      for (auto b : v.histogram.bins) w.u32(b);
    }
  }
  return std::move(w).bytes();
}

inline IndexStore decode_store(std::span<const std::uint8_t> data) {
  if (!has_magic(data, kStoreMagic)) throw Error(ErrorCode::BadMagic, "index file does not start with MVIX");
  ByteReader r(data.subspan(kStoreMagic.size()), ErrorCode::CorruptPayload);
  const auto version = r.u16();
  if (version != kStoreVersion)
    throw Error(ErrorCode::VersionMismatch, "index format version " + std::to_string(version));
  IndexStore s;
  try {
    s.build_meta = r.str16();
    s.corner_vocab = read_vocabulary(r);
    s.blob_vocab = read_vocabulary(r);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptPayload) throw;
    throw Error(ErrorCode::CorruptPayload, std::string("embedded vocabulary: ") + e.what());
  }
  if (s.corner_vocab.channel != Channel::Corner || s.blob_vocab.channel != Channel::Blob)
    throw Error(ErrorCode::CorruptPayload, "vocabulary blocks out of order");
  const std::size_t bins = s.bins();
  const auto count = r.u32();
  std::set<std::string> ids;
  for (std::uint32_t i = 0; i < count; ++i) {
    ObjectRecord o;
    o.object_id = r.str16();
    o.category = r.str16();
    if (!ids.insert(o.object_id).second) throw Error(ErrorCode::CorruptPayload, "duplicate object_id " + o.object_id);
    const auto views = r.u32();
    if (views == 0) throw Error(ErrorCode::CorruptPayload, "object " + o.object_id + " has no views");
    std::set<std::string> view_ids;
    for (std::uint32_t v = 0; v < views; ++v) {
      ViewRecord rec;
      rec.view_id = r.str16();
      rec.source = r.str16();
      if (!view_ids.insert(rec.view_id).second) throw Error(ErrorCode::CorruptPayload, "duplicate view_id");
      if (r.remaining() / 4 < bins) throw Error(ErrorCode::CorruptPayload, "histogram truncated");
      rec.histogram.bins.resize(bins);
      for (auto& b : rec.histogram.bins) b = r.u32();
      o.views.push_back(std::move(rec));
    }
    s.objects.push_back(std::move(o));
  }
  if (r.remaining() != 0) throw Error(ErrorCode::CorruptPayload, "trailing bytes after object table");
  return s;
}

inline void save_store(const IndexStore& store, const std::string& path) { write_file(path, encode_store(store)); }

inline IndexStore load_store(const std::string& path) { return decode_store(read_file(path)); }

}  // namespace mvs

#endif  // MVSEARCH_INDEX_HPP
