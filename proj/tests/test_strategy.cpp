#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <set>
#include <sstream>

#include "support.hpp"

using namespace sawde;

namespace {

std::vector<int> ids(const EnsembleStrategy& e) {
  std::vector<int> out;
  for (auto c : e.members) out.push_back(to_int(c));
  return out;
}

}  // namespace

TEST(StrategyPool, DefaultTenTriples) {
  const auto pool = default_strategy_pool();
  ASSERT_EQ(pool.size(), 10u);
  const std::vector<std::vector<int>> want{{1, 2, 4}, {1, 2, 5}, {1, 2, 6}, {1, 4, 5}, {1, 4, 6},
                                          {1, 5, 6}, {2, 4, 5}, {2, 4, 6}, {2, 5, 6}, {4, 5, 6}};
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(pool[i].id, static_cast<int>(i) + 1);
    EXPECT_EQ(ids(pool[i]), want[i]);
  }
}

TEST(StrategyPool, AnyBaseGivesTenDistinctTriples) {
  const std::array<Cms, 5> base{Cms::best_3, Cms::rand_3, Cms::best_1, Cms::rand_2, Cms::best_2};
  const auto pool = build_strategy_pool(base);
  std::set<std::vector<int>> seen;
  for (const auto& e : pool) {
    EXPECT_EQ(e.members.size(), 3u);
    seen.insert(ids(e));
  }
  EXPECT_EQ(seen.size(), 10u);
  const std::array<Cms, 4> four{Cms::best_3, Cms::rand_3, Cms::best_1, Cms::rand_2};
  EXPECT_THROW(build_strategy_pool(four), ContractError);
  const std::array<Cms, 5> dup{Cms::best_3, Cms::best_3, Cms::best_1, Cms::rand_2, Cms::best_2};
  EXPECT_THROW(build_strategy_pool(dup), ContractError);
}

TEST(SelectEns, UniformInFirstHalf) {
  StrategyStats stats(10);
  stats.rewards[2] = 50;  // must be ignored before the half-point
  stats.selections[2] = 50;
  Rng rng(2024);
  std::array<double, 10> counts{};
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(select_ens(stats, 500, 1000, rng) - 1)];
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - draws / 10.0) * (c - draws / 10.0) / (draws / 10.0);
  const double p = boost::math::cdf(boost::math::complement(boost::math::chi_squared(9), chi2));
  EXPECT_GT(p, 0.01) << "chi2=" << chi2;
}

TEST(SelectEns, TopFiveAfterHalfPoint) {
  StrategyStats stats(10);
  const std::array<std::uint64_t, 10> rewards{5, 4, 3, 2, 1, 0, 0, 0, 0, 0};
  for (std::size_t i = 0; i < 10; ++i) {
    stats.rewards[i] = rewards[i];
    stats.selections[i] = 10;
  }
  Rng rng(1);
  std::set<int> seen;
  for (int i = 0; i < 10000; ++i) {
    const int id = select_ens(stats, 501, 1000, rng);
    EXPECT_LE(id, 5);
    seen.insert(id);
  }
  EXPECT_EQ(seen.size(), 5u);
}

TEST(SelectEns, RandomStatsStayInTopFive) {
  std::mt19937 gen(6);
  Rng rng(6);
  for (int trial = 0; trial < 10000; ++trial) {
    StrategyStats stats(10);
    for (std::size_t i = 0; i < 10; ++i) {
      stats.selections[i] = gen() % 20;
      stats.rewards[i] = stats.selections[i] == 0 ? 0 : gen() % (stats.selections[i] + 1);
    }
    const int id = select_ens(stats, 900, 1000, rng);
    // Independent top-5: count strictly better ratios plus better-or-equal with lower id.
    const double sr = stats.success_ratio(static_cast<std::size_t>(id - 1));
    int ahead = 0;
    for (std::size_t i = 0; i < 10; ++i) {
      const double other = stats.success_ratio(i);
      if (other > sr || (other == sr && static_cast<int>(i) + 1 < id)) ++ahead;
    }
    EXPECT_LT(ahead, 5);
  }
}

TEST(SelectEns, AllEqualRatiosUseLowestIds) {
  StrategyStats stats(10);
  EXPECT_EQ(top_strategies(stats), (std::vector<int>{1, 2, 3, 4, 5}));
}

TEST(RecordOutcome, Accumulates) {
  StrategyStats stats(10);
  record_outcome(stats, 3, 0.03, 20);
  record_outcome(stats, 3, 0.03, 20);
  EXPECT_NEAR(stats.change[2], 0.06, 1e-15);
  EXPECT_EQ(stats.selections[2], 2u);
  EXPECT_EQ(stats.consumed[2], 40u);
  record_outcome(stats, 4, 0.0, 60);
  EXPECT_EQ(stats.change[3], 0.0);
  EXPECT_EQ(stats.selections[3], 1u);
  EXPECT_EQ(stats.consumed[3], 60u);
  EXPECT_THROW(record_outcome(stats, 1, -0.1, 1), ContractError);
  EXPECT_THROW(record_outcome(stats, 11, 0.1, 1), ContractError);
}

TEST(ApplyReward, ArgmaxOfGainRate) {
  StrategyStats stats(10);
  for (std::size_t i = 0; i < 10; ++i) {
    stats.consumed[i] = 100;
    stats.change[i] = 0.01 * static_cast<double>(i % 4);
  }
  stats.change[6] = 0.5;
  EXPECT_EQ(apply_reward(stats, 20), 7);
  EXPECT_EQ(stats.rewards[6], 1u);

  const auto before = stats.rewards;
  EXPECT_FALSE(apply_reward(stats, 19).has_value());
  EXPECT_EQ(stats.rewards, before);
}

TEST(ApplyReward, ZeroConsumptionTiesToLowestId) {
  StrategyStats stats(10);
  EXPECT_EQ(apply_reward(stats, 20), 1);
  EXPECT_EQ(stats.rewards[0], 1u);
  EXPECT_EQ(apply_reward(stats, 40), 1);
  EXPECT_EQ(stats.rewards[0], 2u);
}

TEST(RankCms, CountVectorSelectsBase) {
  const auto r = rank_cms_from_counts({3, 1, 8, 3, 5, 3, 5, 6});
  std::vector<int> got;
  for (auto c : r.selected) got.push_back(to_int(c));
  EXPECT_EQ(got, (std::vector<int>{1, 2, 4, 5, 6}));
}

TEST(RankCms, DominatedScenarioExcluded) {
  CmsAccuracyTable t;
  for (int d = 0; d < 4; ++d) {
    std::array<double, 8> row{};
    for (int c = 0; c < 8; ++c) row[static_cast<std::size_t>(c)] = 0.8 + 0.01 * ((c * 3 + d) % 7);
    row[2] = 0.5;
    t.accuracy.push_back(row);
  }
  const auto r = rank_cms(t);
  EXPECT_EQ(std::count(r.selected.begin(), r.selected.end(), Cms::rand_3), 0);
  EXPECT_EQ(r.order.back(), Cms::rand_3);
  EXPECT_THROW(rank_cms(CmsAccuracyTable{}), ContractError);
}

TEST(RankCms, AllEqualDatasetContributesNothing) {
  CmsAccuracyTable t;
  t.accuracy.push_back({0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9});
  EXPECT_EQ(rank_cms(t).worst_counts, (std::array<int, 8>{}));
}

TEST(RankCms, PerDatasetWorstSetsReproduceCounts) {
  // Per-dataset bottom sets; the two all-equal and four-way-tie cases included.
  const std::vector<std::vector<int>> worst{{3, 5, 7}, {3, 5, 6}, {1, 6, 7}, {1, 3, 8}, {3, 7, 8}, {3, 5, 8}, {},
                                            {4, 7, 8}, {1, 2, 3, 8}, {3, 6, 8}, {4, 5, 7}, {3, 4, 5}};
  std::ostringstream csv;
  csv << "dataset,cms1,cms2,cms3,cms4,cms5,cms6,cms7,cms8\n";
  for (std::size_t d = 0; d < worst.size(); ++d) {
    csv << "d" << d;
    for (int c = 1; c <= 8; ++c)
      csv << ',' << (std::count(worst[d].begin(), worst[d].end(), c) ? "0.5" : (worst[d].empty() ? "0.7" : "0.9"));
    csv << '\n';
  }
  std::istringstream in(csv.str());
  const auto r = rank_cms(parse_cms_table(in));
  EXPECT_EQ(r.worst_counts, (std::array<int, 8>{3, 1, 8, 3, 5, 3, 5, 6}));
  std::vector<int> got;
  for (auto c : r.selected) got.push_back(to_int(c));
  EXPECT_EQ(got, (std::vector<int>{1, 2, 4, 5, 6}));
}

TEST(RankCms, TableParseErrors) {
  std::istringstream bad("dataset,a,b\nx,1,2\n");
  EXPECT_THROW(parse_cms_table(bad), DatasetError);
  std::istringstream nonnum("h,1,2,3,4,5,6,7,8\nx,1,2,3,4,zz,6,7,8\n");
  EXPECT_THROW(parse_cms_table(nonnum), DatasetError);
}
