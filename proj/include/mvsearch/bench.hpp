#ifndef MVSEARCH_BENCH_HPP
#define MVSEARCH_BENCH_HPP

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "mvsearch/index.hpp"

namespace mvs {

struct BenchRow {
  std::string similarity;
  std::string fusion;
  std::size_t query_views = 0;
  std::size_t db_views_per_object = 0;  // largest N in the store used
  double mean_ms = 0.0;
  double ratio = 0.0;  // mean_ms over the single-view baseline
};

/// Copy of `store` keeping only each object's first view.
inline IndexStore single_view_store(const IndexStore& store) {
  IndexStore out;
  out.corner_vocab = store.corner_vocab;
  out.blob_vocab = store.blob_vocab;
  out.build_meta = store.build_meta;
  for (const auto& o : store.objects) out.objects.push_back({o.object_id, o.category, {o.views.front()}});
  return out;
}

inline std::size_t max_views(const IndexStore& store) {
  std::size_t n = 0;
  for (const auto& o : store.objects) n = std::max(n, o.views.size());
  return n;
}

/// Server-side matching: quantization, histogram construction, similarity,
/// fusion and ranking for one query.
inline ResultList match(const IndexStore& store, std::span<const DescriptorSet> views, SimilarityKind sim,
                        const FusionMode& mode, std::size_t k, std::size_t list_depth) {
  QuerySpec spec;
  spec.similarity = sim;
  spec.mode = mode;
  spec.k = k;
  spec.list_depth = list_depth;
  for (const auto& ds : views) spec.queries.push_back(store.histogram(ds));
  return query(store, spec);
}

/// Mean wall time of `match` over `repeat` runs, in milliseconds.
inline double time_match(const IndexStore& store, std::span<const DescriptorSet> views, SimilarityKind sim,
                         const FusionMode& mode, std::size_t repeat, std::size_t k = 20, std::size_t list_depth = 100) {
  using clock = std::chrono::steady_clock;
  double total = 0.0;
  volatile std::size_t sink = 0;
  for (std::size_t r = 0; r < repeat; ++r) {
    const auto t0 = clock::now();
    sink = sink + match(store, views, sim, mode, k, list_depth).size();
    total += std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  }
  return total / static_cast<double>(std::max<std::size_t>(repeat, 1));
}

/// First row: single view against the single-view copy of the store (M=1,
/// N=1). Then one row per fusion mode with every view against the full store.
inline std::vector<BenchRow> run_bench(const IndexStore& store, std::span<const DescriptorSet> views, SimilarityKind sim,
                                       std::size_t repeat) {
  if (views.empty()) throw Error(ErrorCode::EmptyInput, "bench needs at least one query view");
  std::vector<BenchRow> rows;
  const auto single = single_view_store(store);
  const double base = time_match(single, views.first(1), sim, SingleMode{}, repeat);
  rows.push_back({std::string(similarity_name(sim)), "none", 1, 1, base, 1.0});
  const std::size_t n = max_views(store);
  for (const auto& mode : all_fusion_modes()) {
    const double ms = time_match(store, views, sim, mode, repeat);
    rows.push_back({std::string(similarity_name(sim)), std::string(fusion_name(mode)), views.size(), n, ms,
                    base > 0.0 ? ms / base : 0.0});
  }
  return rows;
}

inline std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out = "similarity,fusion,query_views,db_views_per_object,mean_ms,ratio_to_single\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%zu,%zu,%.3f,%.3f\n", r.similarity.c_str(), r.fusion.c_str(), r.query_views,
                  r.db_views_per_object, r.mean_ms, r.ratio);
    out += buf;
  }
  return out;
}

}  // namespace mvs

#endif  // MVSEARCH_BENCH_HPP
