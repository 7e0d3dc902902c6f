#ifndef MVSEARCH_MANIFEST_HPP
#define MVSEARCH_MANIFEST_HPP

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvsearch/error.hpp"

namespace mvs {

/// One database object or one query: an id, a category label and its view paths.
struct ManifestEntry {
  std::string id;
  std::string category;
  std::vector<std::string> views;
  std::string background = "clean";  // queries only: "clean" or "cluttered"
};

/// Dataset description. View paths are relative to the manifest's directory
/// unless absolute.
///
///   {"dataset": "...",
///    "objects": [{"object_id": "...", "category": "...", "views": ["a.pgm", ...]}],
///    "queries": [{"query_id": "...", "category": "...", "views": [...], "background": "clean"}]}
struct Manifest {
  std::string dataset;
  std::vector<ManifestEntry> objects;
  std::vector<ManifestEntry> queries;
  std::filesystem::path base_dir;

  std::string resolve(const std::string& view) const {
    const std::filesystem::path p(view);
    return (p.is_absolute() ? p : base_dir / p).lexically_normal().string();
  }
};

namespace detail {

inline ManifestEntry parse_entry(const nlohmann::json& j, const char* id_field, bool is_query) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "manifest entry is not an object");
  ManifestEntry e;
  e.id = j.at(id_field).get<std::string>();
  e.category = j.at("category").get<std::string>();
  e.views = j.at("views").get<std::vector<std::string>>();
  if (e.views.empty()) throw Error(ErrorCode::InvalidArgument, "entry " + e.id + " has no views");
  if (is_query) {
    e.background = j.value("background", std::string("clean"));
    if (e.background != "clean" && e.background != "cluttered")
      throw Error(ErrorCode::InvalidArgument, "query " + e.id + " background must be clean or cluttered");
  }
  return e;
}

}  // namespace detail

inline Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir = {}) {
  Manifest m;
  m.base_dir = base_dir;
  try {
    const auto j = nlohmann::json::parse(text);
    m.dataset = j.value("dataset", std::string());
    for (const auto& o : j.value("objects", nlohmann::json::array()))
      m.objects.push_back(detail::parse_entry(o, "object_id", false));
    for (const auto& q : j.value("queries", nlohmann::json::array()))
      m.queries.push_back(detail::parse_entry(q, "query_id", true));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("manifest: ") + e.what());
  }
  std::set<std::string> ids;
  for (const auto& o : m.objects)
    if (!ids.insert(o.id).second) throw Error(ErrorCode::DuplicateObjectId, "object_id " + o.id + " repeats");
  ids.clear();
  for (const auto& q : m.queries)
    if (!ids.insert(q.id).second) throw Error(ErrorCode::InvalidArgument, "query_id " + q.id + " repeats");
  return m;
}

inline Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open manifest " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_manifest(text, std::filesystem::path(path).parent_path());
}

/// Throws io-error naming the first view path that does not exist.
inline void check_manifest_files(const Manifest& m) {
  for (const auto* list : {&m.objects, &m.queries})
    for (const auto& e : *list)
      for (const auto& v : e.views) {
        const auto p = m.resolve(v);
        if (!std::filesystem::exists(p)) throw Error(ErrorCode::IoError, "missing view file " + p);
      }
}

inline nlohmann::json manifest_to_json(const Manifest& m) {
  nlohmann::json j;
  j["dataset"] = m.dataset;
  j["objects"] = nlohmann::json::array();
  for (const auto& o : m.objects)
    j["objects"].push_back({{"object_id", o.id}, {"category", o.category}, {"views", o.views}});
  j["queries"] = nlohmann::json::array();
  for (const auto& q : m.queries)
    j["queries"].push_back(
        {{"query_id", q.id}, {"category", q.category}, {"views", q.views}, {"background", q.background}});
  return j;
}

}  // namespace mvs

#endif  // MVSEARCH_MANIFEST_HPP
