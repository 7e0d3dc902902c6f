#include <random>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "support.hpp"

using namespace mvs;
using namespace mvs::testing;

namespace {

std::vector<FusionMode> every_mode() {
  auto modes = all_fusion_modes();
  modes.insert(modes.begin(), SingleMode{});
  return modes;
}

ResultList run(const IndexStore& store, std::vector<BowHistogram> queries, SimilarityKind sim, const FusionMode& mode,
               std::size_t k = 100, std::size_t list_depth = 100) {
  QuerySpec spec;
  spec.queries = std::move(queries);
  spec.similarity = sim;
  spec.mode = mode;
  spec.k = k;
  spec.list_depth = list_depth;
  return query(store, spec);
}

ErrorCode error_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;  // sentinel: nothing thrown
}

}  // namespace

TEST(Query, SelfMatchRanksFirst) {
  std::mt19937_64 rng(30);
  const auto store = random_store(rng, 8, 3, 20, 12, 3, 30);
  for (auto sim : {SimilarityKind::HI, SimilarityKind::NHI, SimilarityKind::NC, SimilarityKind::MinMax})
    for (std::size_t o = 0; o < store.objects.size(); ++o) {
      const auto& target = store.objects[o];
      const auto res = run(store, {target.views[1].histogram}, sim, SingleMode{});
      ASSERT_FALSE(res.empty());
      EXPECT_NEAR(res[0].score, 1.0, 1e-12) << similarity_name(sim);
      EXPECT_EQ(res[0].object_id, target.object_id) << similarity_name(sim);
    }
}

TEST(Query, ReductionToSingleView) {
  // M = 1 against N = 1: every fusion mode orders objects like plain
  // similarity ranking.
  for (int db = 0; db < 30; ++db) {
    std::mt19937_64 rng(300 + db);
    const auto store = random_store(rng, 12, 1, 8, 4, 3, 3);
    const BowHistogram q{random_bins(rng, store.bins(), 3)};
    for (auto sim : kAllSimilarities) {
      const auto base = oracle::ids(run(store, {q}, sim, SingleMode{}));
      for (const auto& mode : all_fusion_modes())
        ASSERT_EQ(oracle::ids(run(store, {q}, sim, mode)), base) << fusion_name(mode) << "/" << similarity_name(sim);
    }
  }
}

TEST(Query, MatchesFullEnumeration) {
  for (int trial = 0; trial < 25; ++trial) {
    std::mt19937_64 rng(400 + trial);
    const auto store = random_store(rng, 5, 3, 6, 4, 2, 4);
    const std::vector<BowHistogram> qs = {{random_bins(rng, store.bins(), 4)}, {random_bins(rng, store.bins(), 4)}};
    const std::size_t depth = 1 + trial % 8;
    for (auto sim : kAllSimilarities)
      for (const auto& mode : every_mode()) {
        const auto queries = std::holds_alternative<SingleMode>(mode) ? std::vector<BowHistogram>{qs[0]} : qs;
        const auto got = run(store, queries, sim, mode, 5, depth);
        const auto want = oracle::query(store, queries, sim, mode, 5, depth);
        ASSERT_EQ(got.size(), want.size());
        if (mode == FusionMode{LateFusionKind::Count}) {
          // Count orders by (hits, rank sum, id); the oracle keeps them as separate keys.
          ASSERT_EQ(oracle::ids(got), oracle::ids(want)) << "count/" << similarity_name(sim);
          continue;
        }
        for (std::size_t i = 0; i < got.size(); ++i) {
          ASSERT_NEAR(got[i].score, want[i].second, 1e-9 * (1 + std::abs(want[i].second)))
              << fusion_name(mode) << "/" << similarity_name(sim) << " position " << i;
          if (got[i].object_id != want[i].first) {
            // Only acceptable as a rounding-level tie.
            const auto other = std::find_if(want.begin(), want.end(), [&](auto& w) { return w.first == got[i].object_id; });
            ASSERT_NE(other, want.end());
            ASSERT_NEAR(other->second, want[i].second, 1e-12) << fusion_name(mode) << "/" << similarity_name(sim);
          }
        }
      }
  }
}

TEST(Query, SetAverageAgainstRawHistograms) {
  std::mt19937_64 rng(31);
  const auto store = random_store(rng, 5, 3, 10, 6, 2, 6);
  const std::vector<BowHistogram> qs = {{random_bins(rng, store.bins(), 6)}, {random_bins(rng, store.bins(), 6)}};
  const auto res = run(store, qs, SimilarityKind::MinMax, LateFusionKind::SetAverage);
  ASSERT_EQ(res.size(), 5u);
  for (const auto& r : res) {
    const auto* obj = store.find(r.object_id);
    ASSERT_NE(obj, nullptr);
    double sum = 0.0;
    for (const auto& q : qs)
      for (const auto& v : obj->views) {
        double mn = 0, mx = 0;
        for (std::size_t i = 0; i < q.size(); ++i) {
          mn += std::min(q.bins[i], v.histogram.bins[i]);
          mx += std::max(q.bins[i], v.histogram.bins[i]);
        }
        sum += mn / mx;
      }
    EXPECT_NEAR(r.score, sum / 6.0, 1e-12);
  }
  for (std::size_t i = 1; i < res.size(); ++i) EXPECT_GE(res[i - 1].score, res[i].score);
}

TEST(Query, TruncatesAndNeverDuplicates) {
  std::mt19937_64 rng(32);
  const auto store = random_store(rng, 9, 4);
  const std::vector<BowHistogram> qs = {{random_bins(rng, store.bins(), 5)}, {random_bins(rng, store.bins(), 5)},
                                        {random_bins(rng, store.bins(), 5)}};
  for (const auto& mode : all_fusion_modes())
    for (std::size_t k : {1u, 4u, 9u, 50u}) {
      const auto res = run(store, qs, SimilarityKind::NHI, mode, k, 3);
      EXPECT_EQ(res.size(), std::min<std::size_t>(k, 9));
      std::set<std::string> seen;
      for (const auto& r : res) EXPECT_TRUE(seen.insert(r.object_id).second);
      for (std::size_t i = 1; i < res.size(); ++i) {
        EXPECT_GE(res[i - 1].score, res[i].score);
        if (res[i - 1].score == res[i].score) {
          EXPECT_LT(res[i - 1].object_id, res[i].object_id);
        }
      }
    }
}

TEST(Query, ZeroObjectKeepsRelativeOrder) {
  for (int trial = 0; trial < 20; ++trial) {
    std::mt19937_64 rng(500 + trial);
    auto store = random_store(rng, 6, 3, 6, 4, 2, 3);
    const std::vector<BowHistogram> qs = {{random_bins(rng, store.bins(), 3)}, {random_bins(rng, store.bins(), 3)}};
    auto with_zero = store;
    ObjectRecord blank{trial % 2 ? "a_blank" : "z_blank", "c0", {}};
    for (int v = 0; v < 3; ++v) blank.views.push_back({std::to_string(v), {std::vector<std::uint32_t>(store.bins(), 0)}, ""});
    with_zero.objects.insert(with_zero.objects.begin() + trial % 7, blank);
    for (auto sim : kAllSimilarities)
      for (const auto& mode : every_mode()) {
        const auto queries = std::holds_alternative<SingleMode>(mode) ? std::vector<BowHistogram>{qs[0]} : qs;
        const auto before = oracle::ids(run(store, queries, sim, mode));
        auto after = oracle::ids(run(with_zero, queries, sim, mode));
        after.erase(std::remove(after.begin(), after.end(), blank.object_id), after.end());
        ASSERT_EQ(after, before) << fusion_name(mode) << "/" << similarity_name(sim);
      }
  }
}

TEST(Query, SpecValidation) {
  std::mt19937_64 rng(33);
  const auto store = random_store(rng, 3, 2);
  const BowHistogram q{random_bins(rng, store.bins(), 3)};
  EXPECT_EQ(error_of([&] { run(IndexStore{}, {q}, SimilarityKind::HI, SingleMode{}); }), ErrorCode::EmptyStore);
  EXPECT_EQ(error_of([&] { run(store, {}, SimilarityKind::HI, LateFusionKind::SetMax); }), ErrorCode::SpecInvalid);
  EXPECT_EQ(error_of([&] { run(store, {q, q}, SimilarityKind::HI, SingleMode{}); }), ErrorCode::SpecInvalid);
  EXPECT_EQ(error_of([&] { run(store, {q}, SimilarityKind::HI, SingleMode{}, 0); }), ErrorCode::SpecInvalid);
  EXPECT_EQ(error_of([&] { run(store, {BowHistogram{{1, 2}}}, SimilarityKind::HI, SingleMode{}); }),
            ErrorCode::SpecInvalid);
}

TEST(Store, RoundTripAndCorruption) {
  std::mt19937_64 rng(34);
  auto store = random_store(rng, 4, 3);
  store.build_meta = R"({"corner_k":6})";
  TempDir dir("store");
  save_store(store, dir.file("s.mvix"));
  const auto back = load_store(dir.file("s.mvix"));
  EXPECT_EQ(back, store);

  const auto bytes = read_file(dir.file("s.mvix"));
  for (std::size_t cut : {3ul, 7ul, bytes.size() / 2, bytes.size() - 1}) {
    const Bytes truncated(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    const auto code = error_of([&] { decode_store(truncated); });
    EXPECT_EQ(code, cut < 4 ? ErrorCode::BadMagic : ErrorCode::CorruptPayload) << "cut " << cut;
  }
  auto bad = bytes;
  bad[0] = 'Q';
  EXPECT_EQ(error_of([&] { decode_store(bad); }), ErrorCode::BadMagic);
  bad = bytes;
  bad[4] = 7;
  EXPECT_EQ(error_of([&] { decode_store(bad); }), ErrorCode::VersionMismatch);
  bad = bytes;
  bad.push_back(1);
  EXPECT_EQ(error_of([&] { decode_store(bad); }), ErrorCode::CorruptPayload);
  EXPECT_EQ(error_of([&] { load_store(dir.file("missing.mvix")); }), ErrorCode::IoError);
}

TEST(Build, TwoByTwoAndDeterministicRebuild) {
  SyntheticConfig cfg;
  cfg.categories = 2;
  cfg.objects_per_category = 1;
  cfg.views = 2;
  const auto data = synthetic_dataset(40, cfg);
  const auto objects = to_object_descriptors(data.database);
  const auto store = build_store(objects, small_build_config(8));
  ASSERT_EQ(store.objects.size(), 2u);
  EXPECT_EQ(store.view_count(), 4u);
  EXPECT_EQ(store.bins(), 16u);
  for (const auto& o : store.objects)
    for (const auto& v : o.views) EXPECT_EQ(v.histogram.size(), 16u);
  // Histogram mass equals the descriptor count of each view.
  EXPECT_EQ(store.objects[0].views[1].histogram.total(), objects[0].views[1].second.size());

  TempDir dir("build");
  save_store(store, dir.file("a.mvix"));
  save_store(build_store(objects, small_build_config(8)), dir.file("b.mvix"));
  EXPECT_EQ(read_file(dir.file("a.mvix")), read_file(dir.file("b.mvix")));
  save_store(build_store(objects, small_build_config(8, 8)), dir.file("c.mvix"));
  EXPECT_NE(read_file(dir.file("a.mvix")), read_file(dir.file("c.mvix")));
}

TEST(Build, Errors) {
  EXPECT_EQ(error_of([] { build_store({}, small_build_config(4)); }), ErrorCode::TooFewDescriptors);
  const auto data = synthetic_dataset(41);
  auto objects = to_object_descriptors(data.database);
  EXPECT_EQ(error_of([&] { build_store(objects, small_build_config(100000)); }), ErrorCode::TooFewDescriptors);
  objects[1].object_id = objects[0].object_id;
  EXPECT_EQ(error_of([&] { build_store(objects, small_build_config(4)); }), ErrorCode::DuplicateObjectId);
}

TEST(Build, ConfigJson) {
  const auto cfg = BuildConfig::from_json(nlohmann::json{{"vocab_size", 50}, {"seed", 3}});
  EXPECT_EQ(cfg.corner_k, 50u);
  EXPECT_EQ(cfg.blob_k, 50u);
  EXPECT_EQ(cfg.kmeans.seed, 3u);
  const auto back = BuildConfig::from_json(cfg.to_json());
  EXPECT_EQ(back.to_json(), cfg.to_json());
  EXPECT_THROW(BuildConfig::from_json(nlohmann::json{{"vocab", 1}}), Error);
  EXPECT_THROW(BuildConfig::from_json(nlohmann::json{{"seed", "x"}}), Error);
  EXPECT_EQ(BuildConfig{}.corner_k, 3000u);
}
