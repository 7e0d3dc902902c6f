#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "support.hpp"

using namespace mvs;
using namespace mvs::testing;

namespace {

const LateFusionKind kSetKinds[] = {LateFusionKind::SetMax, LateFusionKind::SetAverage,
                                    LateFusionKind::SetWeightedAverage, LateFusionKind::SetAverageMax,
                                    LateFusionKind::SetWeightedAverageMax};
const LateFusionKind kImageKinds[] = {LateFusionKind::MaxSim, LateFusionKind::WeightedSim, LateFusionKind::Count,
                                      LateFusionKind::HighestRank, LateFusionKind::RankSum};

using Lists = std::vector<std::vector<Scored<std::string>>>;

Lists lists_from(const std::vector<std::vector<std::pair<std::string, double>>>& raw) {
  Lists out;
  for (const auto& l : raw) {
    std::vector<Scored<std::string>> list;
    for (const auto& [id, s] : l) list.push_back({id, s});
    out.push_back(list);
  }
  return out;
}

std::vector<std::string> ids_of(const std::vector<Scored<std::string>>& v) {
  std::vector<std::string> out;
  for (const auto& e : v) out.push_back(e.id);
  return out;
}

}  // namespace

TEST(EarlyFusion, TableValues) {
  const std::vector<std::vector<int>> h = {{1, 2}, {3, 0}};
  const std::span<const std::vector<int>> hs(h);
  EXPECT_EQ(early_fuse(hs, EarlyFusionKind::Sum), (std::vector<double>{4, 2}));
  EXPECT_EQ(early_fuse(hs, EarlyFusionKind::Average), (std::vector<double>{2, 1}));
  EXPECT_EQ(early_fuse(hs, EarlyFusionKind::Maximum), (std::vector<double>{3, 2}));

  const std::vector<std::vector<int>> one = {{5, 0, 7}};
  for (auto k : kAllEarlyFusions)
    EXPECT_EQ(early_fuse(std::span<const std::vector<int>>(one), k), (std::vector<double>{5, 0, 7}));

  const std::vector<std::vector<int>> zeros = {{0, 0}, {0, 0}};
  for (auto k : kAllEarlyFusions)
    EXPECT_EQ(early_fuse(std::span<const std::vector<int>>(zeros), k), (std::vector<double>{0, 0}));
}

TEST(EarlyFusion, Errors) {
  EXPECT_THROW(early_fuse(std::span<const BowHistogram>(), EarlyFusionKind::Sum), Error);
  const std::vector<std::vector<int>> ragged = {{1, 2}, {1}};
  try {
    early_fuse(std::span<const std::vector<int>>(ragged), EarlyFusionKind::Sum);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
  }
}

TEST(SetSimilarity, FixedMatrix) {
  const ScoreMatrix s(2, 2, {0.8, 0.2, 0.4, 0.6});
  EXPECT_DOUBLE_EQ(set_similarity(s, LateFusionKind::SetMax), 0.8);
  EXPECT_DOUBLE_EQ(set_similarity(s, LateFusionKind::SetAverage), 0.5);
  EXPECT_NEAR(set_similarity(s, LateFusionKind::SetWeightedAverage), 0.6, 1e-15);
  EXPECT_DOUBLE_EQ(set_similarity(s, LateFusionKind::SetAverageMax), 0.7);
  EXPECT_NEAR(set_similarity(s, LateFusionKind::SetWeightedAverageMax), 1.0 / 1.4, 1e-15);
  EXPECT_NEAR(set_similarity(s, LateFusionKind::SetWeightedAverageMax), 0.714286, 1e-6);
}

TEST(SetSimilarity, DegenerateMatrices) {
  for (auto k : kSetKinds) {
    EXPECT_DOUBLE_EQ(set_similarity(ScoreMatrix(1, 1, {0.37}), k), 0.37);
    EXPECT_NEAR(set_similarity(ScoreMatrix(3, 2, std::vector<double>(6, 0.25)), k), 0.25, 1e-15);
    EXPECT_EQ(set_similarity(ScoreMatrix(2, 3, std::vector<double>(6, 0.0)), k), 0.0);
  }
  EXPECT_THROW(ScoreMatrix(0, 2, {}), Error);
  EXPECT_THROW(ScoreMatrix(1, 2, {0.1}), Error);
  EXPECT_THROW(ScoreMatrix(1, 1, {-0.1}), Error);
  EXPECT_THROW(ScoreMatrix(1, 1, {std::nan("")}), Error);
  EXPECT_THROW(set_similarity(ScoreMatrix(1, 1, {1}), LateFusionKind::Count), Error);
}

TEST(SetSimilarity, MatchesBruteForce) {
  std::mt19937_64 rng(20);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    oracle::Matrix m(3, std::vector<double>(4));
    std::vector<double> flat;
    for (auto& row : m)
      for (double& v : row) flat.push_back(v = u(rng));
    const ScoreMatrix s(3, 4, flat);
    for (auto k : kSetKinds) ASSERT_NEAR(set_similarity(s, k), oracle::set_similarity(m, k), 1e-12) << fusion_name(k);
  }
}

TEST(SetSimilarity, Monotone) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> flat(6);
    for (double& v : flat) v = u(rng);
    auto bumped = flat;
    bumped[trial % 6] += u(rng);
    for (auto k : {LateFusionKind::SetMax, LateFusionKind::SetAverage, LateFusionKind::SetAverageMax})
      EXPECT_GE(set_similarity(ScoreMatrix(2, 3, bumped), k), set_similarity(ScoreMatrix(2, 3, flat), k));
  }
}

TEST(RankFusion, HandExamples) {
  // list1 ranks A > B > C, list2 ranks B > A > C.
  const auto lists = lists_from({{{"A", 0.9}, {"B", 0.5}, {"C", 0.1}}, {{"A", 0.6}, {"B", 0.8}, {"C", 0.2}}});
  const auto rank_sum = fuse_image_rankings(lists, LateFusionKind::RankSum, 100, 10);
  EXPECT_EQ(ids_of(rank_sum), (std::vector<std::string>{"A", "B", "C"}));
  EXPECT_EQ(rank_sum[0].score, -3.0);
  EXPECT_EQ(rank_sum[1].score, -3.0);
  EXPECT_EQ(rank_sum[2].score, -6.0);

  const auto highest = fuse_image_rankings(lists, LateFusionKind::HighestRank, 100, 10);
  EXPECT_EQ(ids_of(highest), (std::vector<std::string>{"A", "B", "C"}));
  EXPECT_EQ(highest[0].score, -1.0);
  EXPECT_EQ(highest[2].score, -3.0);

  const auto count = fuse_image_rankings(lists, LateFusionKind::Count, 2, 10);
  EXPECT_EQ(ids_of(count), (std::vector<std::string>{"A", "B", "C"}));
  EXPECT_EQ(std::floor(count[0].score), 2.0);
  EXPECT_EQ(std::floor(count[1].score), 2.0);
  EXPECT_EQ(std::floor(count[2].score), 0.0);

  const auto max_sim = fuse_image_rankings(lists, LateFusionKind::MaxSim, 100, 2);
  ASSERT_EQ(max_sim.size(), 2u);
  EXPECT_EQ(max_sim[0].id, "A");
  EXPECT_DOUBLE_EQ(max_sim[1].score, 0.8);

  const auto weighted = fuse_image_rankings(lists, LateFusionKind::WeightedSim, 100, 10);
  EXPECT_EQ(weighted[0].id, "A");
  EXPECT_NEAR(weighted[0].score, (0.81 + 0.36) / 1.5, 1e-15);
  EXPECT_NEAR(weighted[1].score, (0.25 + 0.64) / 1.3, 1e-15);
}

TEST(RankFusion, SingleListIdentity) {
  const auto lists = lists_from({{{"x", 0.3}, {"y", 0.9}, {"z", 0.0}, {"w", 0.3}}});
  for (auto k : kImageKinds)
    EXPECT_EQ(ids_of(fuse_image_rankings(lists, k, 100, 10)), (std::vector<std::string>{"y", "w", "x", "z"}))
        << fusion_name(k);
}

TEST(RankFusion, Errors) {
  try {
    fuse_image_rankings(Lists{}, LateFusionKind::MaxSim, 10, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyInput);
  }
  try {
    fuse_image_rankings(lists_from({{{"A", 1}, {"B", 1}}, {{"A", 1}, {"C", 1}}}), LateFusionKind::MaxSim, 10, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InconsistentUniverse);
  }
  EXPECT_THROW(fuse_image_rankings(lists_from({{{"A", 1}}, {{"A", 1}, {"B", 1}}}), LateFusionKind::Count, 10, 10),
               Error);
  EXPECT_THROW(fuse_image_rankings(lists_from({{{"A", 1}}}), LateFusionKind::SetMax, 10, 10), Error);
}

TEST(RankFusion, MatchesBruteForce) {
  std::mt19937_64 rng(22);
  // Few distinct score levels force plenty of ties.
  std::uniform_int_distribution<int> level(0, 6);
  std::uniform_int_distribution<std::size_t> depth(1, 25);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<oracle::ScoreList<std::string>> raw(3);
    Lists lists(3);
    for (std::size_t j = 0; j < 3; ++j)
      for (int o = 0; o < 20; ++o) {
        const std::string id = "img" + std::to_string(o);
        const double s = level(rng) / 6.0;
        raw[j][id] = s;
        lists[j].push_back({id, s});
      }
    for (auto& l : lists) std::shuffle(l.begin(), l.end(), rng);
    const std::size_t l_depth = depth(rng);
    for (auto k : kImageKinds) {
      const auto got = fuse_image_rankings(lists, k, l_depth, 20);
      const auto want = oracle::fuse_rankings(raw, k, l_depth);
      ASSERT_EQ(got.size(), want.size());
      std::map<std::string, double> want_score(want.begin(), want.end());
      for (std::size_t i = 0; i < got.size(); ++i) {
        if (k == LateFusionKind::Count) {
          ASSERT_EQ(got[i].id, want[i].first) << "count position " << i;
          continue;
        }
        // Similarity-valued kinds may differ in the last ulp between the two
        // summation orders; a swapped id is only acceptable for such a tie.
        ASSERT_NEAR(got[i].score, want[i].second, 1e-12) << fusion_name(k) << " position " << i;
        if (got[i].id != want[i].first) {
          ASSERT_NEAR(want_score[got[i].id], want[i].second, 1e-12) << fusion_name(k) << " position " << i;
        }
      }
    }
  }
}

TEST(RankFusion, CountInvariantToEntryOrder) {
  std::mt19937_64 rng(23);
  auto lists = lists_from({{{"a", 0.5}, {"b", 0.5}, {"c", 0.2}, {"d", 0.5}}, {{"a", 0.1}, {"b", 0.5}, {"c", 0.5}, {"d", 0.0}}});
  const auto base = fuse_image_rankings(lists, LateFusionKind::Count, 2, 10);
  for (int i = 0; i < 20; ++i) {
    for (auto& l : lists) std::shuffle(l.begin(), l.end(), rng);
    EXPECT_EQ(fuse_image_rankings(lists, LateFusionKind::Count, 2, 10), base);
  }
}

TEST(FusionNames, ThirteenModes) {
  const auto modes = all_fusion_modes();
  ASSERT_EQ(modes.size(), 13u);
  std::set<std::string_view> names;
  for (const auto& m : modes) {
    names.insert(fusion_name(m));
    EXPECT_EQ(parse_fusion(fusion_name(m)), m);
  }
  EXPECT_EQ(names.size(), 13u);
  EXPECT_TRUE(names.count("set_weighted_average_max"));
  EXPECT_TRUE(names.count("highest_rank"));
  EXPECT_EQ(parse_fusion("none"), FusionMode{SingleMode{}});
  EXPECT_FALSE(parse_fusion("median").has_value());
}
