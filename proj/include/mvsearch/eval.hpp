#ifndef MVSEARCH_EVAL_HPP
#define MVSEARCH_EVAL_HPP

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mvsearch/index.hpp"

namespace mvs {

/// A result is relevant when its category equals the query's.
struct RelevanceJudgment {
  std::string query_id;
  std::string category;

  bool relevant(const ResultEntry& e) const noexcept { return e.category == category; }
};

enum class AvePVariant {
  ListLength,  // sum_k P(k) rel(k) / N
  Standard,    // sum_k P(k) rel(k) / min(N, relevant in collection)
};

/// Average precision over the first N results:
///   P(k) = |relevant among first k| / k,  AveP = sum_{k<=N} P(k) rel(k) / N.
/// The Standard variant divides by min(N, relevant_total) instead.
inline double ave_p(const ResultList& results, const RelevanceJudgment& judge, std::size_t n,
                    AvePVariant variant = AvePVariant::ListLength, std::size_t relevant_total = 0) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "list length N must be >= 1");
  if (results.size() < n)
    throw Error(ErrorCode::ListTooShort,
                std::to_string(results.size()) + " results for N=" + std::to_string(n));
  double acc = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 1; k <= n; ++k) {
    if (!judge.relevant(results[k - 1])) continue;
    ++hits;
    acc += static_cast<double>(hits) / static_cast<double>(k);
  }
  if (variant == AvePVariant::ListLength) return acc / static_cast<double>(n);
  const std::size_t denom = std::min(n, relevant_total);
  return denom == 0 ? 0.0 : acc / static_cast<double>(denom);
}

/// A query with its views already quantized against the store's vocabularies.
struct EvalQuery {
  std::string query_id;
  std::string category;
  std::vector<BowHistogram> views;
};

/// Similarity, fusion and list depth shared by every query of an experiment.
struct QueryTemplate {
  SimilarityKind similarity = SimilarityKind::MinMax;
  FusionMode mode = SingleMode{};
  std::size_t list_depth = 100;
};

/// Single mode queries with the first view only.
inline QuerySpec make_spec(const EvalQuery& q, const QueryTemplate& t, std::size_t k) {
  QuerySpec s;
  s.similarity = t.similarity;
  s.mode = t.mode;
  s.k = k;
  s.list_depth = t.list_depth;
  if (std::holds_alternative<SingleMode>(t.mode))
    s.queries.assign(q.views.begin(), q.views.begin() + std::min<std::size_t>(1, q.views.size()));
  else
    s.queries = q.views;
  return s;
}

inline double mean_ave_p(std::span<const EvalQuery> queries, const IndexStore& store, const QueryTemplate& t,
                         std::size_t n) {
  if (queries.empty()) throw Error(ErrorCode::EmptyInput, "mean AveP needs at least one query");
  double sum = 0.0;
  for (const auto& q : queries) sum += ave_p(query(store, make_spec(q, t, n)), {q.query_id, q.category}, n);
  return sum / static_cast<double>(queries.size());
}

struct CurvePoint {
  std::size_t k = 0;
  double avep = 0.0;
};

using PrecisionCurve = std::vector<CurvePoint>;

/// Point k is the mean AveP at list length k. Each query runs once with
/// k = k_max; shorter lists are prefixes of the same ranking.
inline PrecisionCurve precision_curve(std::span<const EvalQuery> queries, const IndexStore& store,
                                      const QueryTemplate& t, std::size_t k_max) {
  if (queries.empty()) throw Error(ErrorCode::EmptyInput, "precision curve needs at least one query");
  if (k_max == 0 || k_max > store.objects.size())
    throw Error(ErrorCode::InvalidArgument, "k_max must be in [1, " + std::to_string(store.objects.size()) + "]");
  std::vector<ResultList> results;
  results.reserve(queries.size());
  for (const auto& q : queries) results.push_back(query(store, make_spec(q, t, k_max)));
  PrecisionCurve curve;
  for (std::size_t k = 1; k <= k_max; ++k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < queries.size(); ++i)
      sum += ave_p(results[i], {queries[i].query_id, queries[i].category}, k);
    curve.push_back({k, sum / static_cast<double>(queries.size())});
  }
  return curve;
}

inline std::string curve_csv(const PrecisionCurve& curve) {
  std::string out = "k,avep\n";
  char buf[64];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f\n", p.k, p.avep);
    out += buf;
  }
  return out;
}

inline void emit_csv(const PrecisionCurve& curve, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << curve_csv(curve);
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path);
}

inline PrecisionCurve parse_curve_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "k,avep") throw Error(ErrorCode::CorruptPayload, "missing k,avep header");
  PrecisionCurve curve;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::CorruptPayload, "bad curve row: " + line);
    curve.push_back({std::stoul(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
  }
  return curve;
}

inline std::string curve_filename(SimilarityKind s, const FusionMode& f) {
  return "curve_" + std::string(similarity_name(s)) + "_" + std::string(fusion_name(f)) + ".csv";
}

/// Quantizes every manifest query against the store's vocabularies.
inline std::vector<EvalQuery> prepare_queries(const Manifest& manifest, const IndexStore& store,
                                              const DetectorConfig& detector = {}) {
  std::vector<EvalQuery> out;
  for (const auto& q : manifest.queries) {
    EvalQuery eq{q.id, q.category, {}};
    for (const auto& v : q.views)
      eq.views.push_back(store.histogram(descriptors_from_file(manifest.resolve(v), detector)));
    out.push_back(std::move(eq));
  }
  return out;
}

}  // namespace mvs

#endif  // MVSEARCH_EVAL_HPP
