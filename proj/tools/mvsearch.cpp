// mvsearch: command-line front end for the multi-view image search engine.
//
//   mvsearch extract <manifest> <out-dir>
//   mvsearch index   <manifest> <store> [--config cfg.json] [--seed N]
//   mvsearch query   <store> <view>... [--similarity S] [--fusion F] [--k K] [--list-depth L]
//   mvsearch eval    <store> <manifest> <out-dir> [--similarity-set ...] [--fusion-set ...] [--kmax K]
//   mvsearch bench   <store> <view>... [--similarity S] [--repeat R]
//   mvsearch serve   <store> [--port P]
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 io error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>

#include "mvsearch/http_service.hpp"
#include "mvsearch/mvsearch.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitIo = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string similarity_names() {
  std::string out;
  for (auto s : mvs::kAllSimilarities) out += (out.empty() ? "" : ", ") + std::string(mvs::similarity_name(s));
  return out;
}

std::string fusion_names() {
  std::string out = "none";
  for (const auto& m : mvs::all_fusion_modes()) out += ", " + std::string(mvs::fusion_name(m));
  return out;
}

mvs::SimilarityKind similarity_arg(const std::string& name) {
  auto s = mvs::parse_similarity(name);
  if (!s) throw UsageError("unknown similarity '" + name + "'; valid: " + similarity_names());
  return *s;
}

mvs::FusionMode fusion_arg(const std::string& name) {
  auto f = mvs::parse_fusion(name);
  if (!f) throw UsageError("unknown fusion '" + name + "'; valid: " + fusion_names());
  return *f;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// One descriptor file name per view path, unique within a manifest.
std::string descriptor_name(const std::string& view) {
  std::string name = fs::path(view).lexically_normal().replace_extension().string();
  for (char& c : name)
    if (c == '/' || c == '\\' || c == ':') c = '_';
  while (!name.empty() && (name.front() == '.' || name.front() == '_')) name.erase(name.begin());
  return name + ".mvds";
}

int cmd_extract(const std::string& manifest_path, const std::string& out_dir) {
  const auto manifest = mvs::load_manifest(manifest_path);
  mvs::check_manifest_files(manifest);
  std::size_t images = 0;
  for (const auto* list : {&manifest.objects, &manifest.queries}) images += list->size();
  if (images == 0) {
    std::cout << "extracted 0 images\n";
    return 0;
  }
  fs::create_directories(out_dir);
  mvs::Manifest derived = manifest;
  derived.base_dir = out_dir;
  std::size_t written = 0, descriptors = 0;
  for (auto* list : {&derived.objects, &derived.queries}) {
    for (auto& entry : *list) {
      for (auto& view : entry.views) {
        const auto src = manifest.resolve(view);
        const auto name = descriptor_name(view);
        auto ds = mvs::descriptors_from_file(src);
        mvs::save_descriptors(ds, (fs::path(out_dir) / name).string());
        descriptors += ds.size();
        view = name;
        ++written;
      }
    }
  }
  std::ofstream out(fs::path(out_dir) / "manifest.json");
  out << mvs::manifest_to_json(derived).dump(2) << "\n";
  if (!out) throw mvs::Error(mvs::ErrorCode::IoError, "cannot write manifest into " + out_dir);
  std::cout << "extracted " << written << " images, " << descriptors << " descriptors -> " << out_dir << "\n";
  return 0;
}

int cmd_index(const std::string& manifest_path, const std::string& store_path, const std::string& config_path,
              std::optional<std::uint64_t> seed) {
  mvs::BuildConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw mvs::Error(mvs::ErrorCode::IoError, "cannot open config " + config_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw mvs::Error(mvs::ErrorCode::InvalidArgument, std::string("config: ") + e.what());
    }
    cfg = mvs::BuildConfig::from_json(j);
  }
  if (seed) cfg.kmeans.seed = *seed;
  const auto manifest = mvs::load_manifest(manifest_path);
  mvs::check_manifest_files(manifest);
  const auto store = mvs::build_index(manifest, cfg);
  mvs::save_store(store, store_path);
  std::cout << "indexed objects=" << store.objects.size() << " views=" << store.view_count()
            << " bins=" << store.bins() << " -> " << store_path << "\n";
  return 0;
}

int cmd_query(const std::string& store_path, const std::vector<std::string>& views, const std::string& sim_name,
              const std::string& fusion, std::size_t k, std::size_t list_depth) {
  const auto sim = similarity_arg(sim_name);
  const auto mode = fusion_arg(fusion);
  if (std::holds_alternative<mvs::SingleMode>(mode) && views.size() != 1)
    throw UsageError("--fusion none takes exactly one view; got " + std::to_string(views.size()));
  if (k == 0 || list_depth == 0) throw UsageError("--k and --list-depth must be >= 1");
  const auto store = mvs::load_store(store_path);
  std::vector<mvs::DescriptorSet> sets;
  for (const auto& v : views) sets.push_back(mvs::descriptors_from_file(v));
  const auto results = mvs::match(store, sets, sim, mode, k, list_depth);
  std::printf("%-5s %-24s %-16s %s\n", "rank", "object_id", "category", "score");
  for (std::size_t i = 0; i < results.size(); ++i)
    std::printf("%-5zu %-24s %-16s %.6f\n", i + 1, results[i].object_id.c_str(), results[i].category.c_str(),
                results[i].score);
  return 0;
}

int cmd_eval(const std::string& store_path, const std::string& manifest_path, const std::string& out_dir,
             const std::string& sim_set, const std::string& fusion_set, std::size_t kmax, std::size_t list_depth) {
  std::vector<mvs::SimilarityKind> sims;
  for (const auto& s : split_list(sim_set)) sims.push_back(similarity_arg(s));
  std::vector<mvs::FusionMode> modes;
  for (const auto& f : split_list(fusion_set)) modes.push_back(fusion_arg(f));
  if (sims.empty() || modes.empty()) throw UsageError("--similarity-set and --fusion-set must not be empty");

  const auto store = mvs::load_store(store_path);
  const auto manifest = mvs::load_manifest(manifest_path);
  mvs::check_manifest_files(manifest);
  if (manifest.queries.empty()) throw mvs::Error(mvs::ErrorCode::InvalidArgument, "manifest has no queries");
  if (kmax == 0) kmax = std::min<std::size_t>(20, store.objects.size());
  const auto queries = mvs::prepare_queries(manifest, store);
  fs::create_directories(out_dir);
  for (auto sim : sims) {
    for (const auto& mode : modes) {
      const auto curve = mvs::precision_curve(queries, store, {sim, mode, list_depth}, kmax);
      const auto path = (fs::path(out_dir) / mvs::curve_filename(sim, mode)).string();
      mvs::emit_csv(curve, path);
      std::printf("%s avep@%zu=%.6f\n", path.c_str(), kmax, curve.back().avep);
    }
  }
  return 0;
}

int cmd_bench(const std::string& store_path, const std::vector<std::string>& views, const std::string& sim_name,
              std::size_t repeat) {
  const auto sim = similarity_arg(sim_name);
  if (repeat == 0) throw UsageError("--repeat must be >= 1");
  const auto store = mvs::load_store(store_path);
  std::vector<mvs::DescriptorSet> sets;
  for (const auto& v : views) sets.push_back(mvs::descriptors_from_file(v));
  const auto rows = mvs::run_bench(store, sets, sim, repeat);
  std::cout << mvs::bench_csv(rows);
  double worst = 0.0;
  for (std::size_t i = 1; i < rows.size(); ++i) worst = std::max(worst, rows[i].ratio);
  std::fprintf(stderr, "max multi/single ratio %.3f (M x N = %zu)\n", worst,
               rows.back().query_views * rows.back().db_views_per_object);
  return 0;
}

int cmd_serve(const std::string& store_path, const std::string& host, int port) {
  auto store = std::make_shared<const mvs::IndexStore>(mvs::load_store(store_path));
  mvs::SessionManager sessions(store);
  httplib::Server server;
  mvs::register_routes(server, sessions);
  // httplib's defaults include SO_REUSEPORT, which would let a second server
  // silently share a port that is already taken.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
  });
  if (!server.bind_to_port(host, port))
    throw mvs::Error(mvs::ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
  std::printf("serving %zu objects on %s:%d\n", store->objects.size(), host.c_str(), port);
  std::fflush(stdout);
  server.listen_after_bind();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-view object image search"};
  app.require_subcommand(1);

  std::string manifest, out_dir, store_path, config_path, sim = "minmax", fusion = "none";
  std::string sim_set, fusion_set, host = "0.0.0.0";
  std::vector<std::string> views;
  std::size_t k = 20, list_depth = 100, kmax = 0, repeat = 5;
  std::optional<std::uint64_t> seed;
  int port = 8080;

  auto* extract = app.add_subcommand("extract", "Extract descriptor files for every manifest image");
  extract->add_option("manifest", manifest, "manifest.json")->required();
  extract->add_option("out-dir", out_dir, "Output directory")->required();

  auto* index = app.add_subcommand("index", "Train vocabularies and build the index store");
  index->add_option("manifest", manifest, "manifest.json")->required();
  index->add_option("store", store_path, "Output store file")->required();
  index->add_option("--config", config_path, "Build config JSON");
  index->add_option("--seed", seed, "k-means seed");

  auto* query = app.add_subcommand("query", "Run one query and print the ranking");
  query->add_option("store", store_path, "Store file")->required();
  query->add_option("views", views, "Query images or descriptor files")->required();
  query->add_option("--similarity", sim, "Similarity: " + similarity_names());
  query->add_option("--fusion", fusion, "Fusion: " + fusion_names());
  query->add_option("--k", k, "Results to return");
  query->add_option("--list-depth", list_depth, "List depth for count fusion");

  auto* eval = app.add_subcommand("eval", "Write precision curves for similarity x fusion combinations");
  eval->add_option("store", store_path, "Store file")->required();
  eval->add_option("manifest", manifest, "manifest.json with queries")->required();
  eval->add_option("out-dir", out_dir, "Output directory")->required();
  eval->add_option("--similarity-set", sim_set, "Comma-separated similarities (default: all)");
  eval->add_option("--fusion-set", fusion_set, "Comma-separated fusion modes (default: all 13)");
  eval->add_option("--kmax", kmax, "Longest list length (default: min(20, objects))");
  eval->add_option("--list-depth", list_depth, "List depth for count fusion");

  auto* bench = app.add_subcommand("bench", "Time server-side matching per fusion mode");
  bench->add_option("store", store_path, "Store file")->required();
  bench->add_option("views", views, "Query images or descriptor files")->required();
  bench->add_option("--similarity", sim, "Similarity");
  bench->add_option("--repeat", repeat, "Repetitions per configuration");

  auto* serve = app.add_subcommand("serve", "Serve the HTTP query API");
  serve->add_option("store", store_path, "Store file")->required();
  serve->add_option("--port", port, "TCP port");
  serve->add_option("--host", host, "Bind address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  if (sim_set.empty()) sim_set = "dot,hi,nhi,nc,minmax";
  if (fusion_set.empty()) {
    for (const auto& m : mvs::all_fusion_modes()) fusion_set += std::string(mvs::fusion_name(m)) + ",";
  }

  try {
    if (*extract) return cmd_extract(manifest, out_dir);
    if (*index) return cmd_index(manifest, store_path, config_path, seed);
    if (*query) return cmd_query(store_path, views, sim, fusion, k, list_depth);
    if (*eval) return cmd_eval(store_path, manifest, out_dir, sim_set, fusion_set, kmax, list_depth);
    if (*bench) return cmd_bench(store_path, views, sim, repeat);
    if (*serve) return cmd_serve(store_path, host, port);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const mvs::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == mvs::ErrorCode::IoError ? kExitIo : kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
