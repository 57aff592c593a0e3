#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "rtb/common/error.hpp"
#include "rtb/strategies/rlb.hpp"
#include "rtb/strategies/static.hpp"

namespace rtb::strategies {
namespace {

using ingest::BudgetFraction;
using ingest::Episode;
using testing::make_day;
using testing::make_record;

TEST(Lin, HandValues) {
  const LinParams p{80, 0.001};
  EXPECT_EQ(lin_bid(0.001, p), 80);
  EXPECT_EQ(lin_bid(0.002, p), 160);
  EXPECT_EQ(lin_bid(0.01, p), 300);
  EXPECT_EQ(lin_bid(0.0, p), 0);
  EXPECT_THROW(lin_bid(0.001, LinParams{80, 0.0}), ConfigError);
  EXPECT_THROW(LinStrategy(LinParams{80, 0.0}), ConfigError);
  EXPECT_THROW(LinStrategy(LinParams{301, 0.1}), ConfigError);
}

TEST(Ortb, HandValuesAndMonotone) {
  const OrtbParams p{34.0, 5.2e-7};
  EXPECT_EQ(ortb_bid(0.001, p), 224);
  EXPECT_EQ(ortb_bid(0.9, p), 300);
  EXPECT_EQ(ortb_bid(0.0, p), 0);
  int prev = 0;
  for (int i = 0; i <= 1000; ++i) {
    const int b = ortb_bid(i / 10000.0, p);
    ASSERT_GE(b, prev);
    prev = b;
  }
  EXPECT_THROW(OrtbStrategy(OrtbParams{0.0, 1e-6}), ConfigError);
  EXPECT_THROW(OrtbStrategy(OrtbParams{34.0, -1.0}), ConfigError);
}

Episode single_impression(int price) {
  return Episode(make_day({make_record(100, price, 1, 0.01)}), 24, BudgetFraction{2}).with_budget(price);
}

TEST(Tune, SingleImpressionPicksLowestWinningBid) {
  const std::vector<Episode> eps{single_impression(100)};
  const auto r = tune_base_bid(eps, 0.01);
  EXPECT_EQ(r.base_bid, 100);
  EXPECT_EQ(r.clicks, 1);
  ASSERT_EQ(r.candidates.size(), 300u);
  EXPECT_EQ(r.candidates[98].clicks, 0);
  EXPECT_EQ(r.candidates[99].clicks, 1);
}

// A high bid buys the unclicked impression first and spends the day out.
TEST(Tune, ClicksNeedNotRiseWithTheBid) {
  const auto day = make_day({make_record(100, 60, 0, 0.01), make_record(200, 50, 1, 0.01)});
  const std::vector<Episode> eps{Episode(day, 24, BudgetFraction{2}).with_budget(60)};
  const auto r = tune_base_bid(eps, 0.01);
  EXPECT_EQ(r.base_bid, 50);
  EXPECT_EQ(r.clicks, 1);
  EXPECT_EQ(r.candidates[59].clicks, 0);
}

TEST(Tune, MatchesExhaustiveOracle) {
  testing::Rng rng(11);
  for (int c = 0; c < 200; ++c) {
    std::vector<Episode> eps;
    const int days = 1 + static_cast<int>(rng() % 3);
    for (int d = 0; d < days; ++d) {
      auto shape = testing::random_shape(rng, 100);
      shape.scored = true;
      eps.emplace_back(testing::random_day(rng, shape), 24, ingest::kStandardFractions[rng() % 4]);
      if (eps.back().budget() == 0) eps.back() = eps.back().with_budget(1);
    }
    const double avg = 0.001 + static_cast<double>(rng() % 100) / 1000.0;
    const auto lib = tune_base_bid(eps, avg, 1 + c % 2);
    const auto oracle = testing::oracle_best_base_bid(eps, avg, 1, 300);
    ASSERT_EQ(lib.clicks, oracle.clicks) << "case " << c;
    ASSERT_EQ(lib.base_bid, oracle.base_bid) << "case " << c;
    ASSERT_NEAR(lib.pctr_sum, oracle.pctr_sum, 1e-12 * (1.0 + oracle.pctr_sum));
  }
}

TEST(Tune, RejectsUnscoredDays) {
  const std::vector<Episode> eps{
      Episode(make_day({make_record(100, 10, 1, std::nullopt)}), 24, BudgetFraction{2}).with_budget(10)};
  EXPECT_THROW(tune_base_bid(eps, 0.01), DataError);
  EXPECT_THROW(require_scored(eps), DataError);
}

TEST(PerSlot, MatchesOracle) {
  testing::Rng rng(12);
  for (int c = 0; c < 100; ++c) {
    auto shape = testing::random_shape(rng, 150);
    shape.scored = true;
    shape.click_rate = 0.2;
    const Episode ep(testing::random_day(rng, shape), 24, BudgetFraction{2});
    const int slots = ingest::kSupportedSlotCounts[rng() % 3];
    const int denom = ingest::kStandardFractions[rng() % 4].denominator;
    const double avg = 0.01 + static_cast<double>(rng() % 50) / 1000.0;
    const auto lib = per_slot_optimal_base_bid(ep, slots, avg, BudgetFraction{denom});
    ASSERT_EQ(lib, testing::oracle_per_slot(ep, slots, avg, denom)) << "case " << c;
    ASSERT_EQ(lib.size(), static_cast<std::size_t>(slots));
  }
}

TEST(PerSlot, ZeroClickSlotsGiveZeroAndScalingIsNeutral) {
  const auto day = make_day({make_record(100, 40, 0, 0.02), make_record(4000, 40, 1, 0.02),
                             make_record(4001, 30, 0, 0.01), make_record(4002, 90, 1, 0.02)});
  const Episode ep(day, 24, BudgetFraction{2});
  const auto b = per_slot_optimal_base_bid(ep, 24, 0.02, BudgetFraction{1});
  EXPECT_EQ(b[0], 0);
  EXPECT_EQ(b[1], 90);  // budget 160 buys 40 + 30 + 90; lowest bid taking both clicks is 90
  for (std::size_t t = 2; t < b.size(); ++t) EXPECT_EQ(b[t], 0);

  // Scaling every pctr and the average by a power of two leaves the bids unchanged.
  std::vector<ingest::ImpressionRecord> scaled(day->records.begin(), day->records.end());
  for (auto& r : scaled) r.pctr = *r.pctr * 4.0;
  EXPECT_EQ(per_slot_optimal_base_bid(Episode(make_day(scaled), 24, BudgetFraction{2}), 24, 0.08, BudgetFraction{1}), b);
}

TEST(Deviation, HandValues) {
  const std::vector<double> b{90, 110, 105, 95};
  EXPECT_NEAR(base_bid_deviation(100, b), std::sqrt(0.025) / 4.0, 1e-15);
  const std::vector<double> flat(96, 70.0);
  EXPECT_EQ(base_bid_deviation(70, flat), 0.0);
  const std::vector<double> zeros{0.0};
  EXPECT_EQ(base_bid_deviation(50, zeros), 1.0);
  const std::vector<double> doubled{180, 220, 210, 190};
  EXPECT_EQ(base_bid_deviation(200, doubled), base_bid_deviation(100, b));
  EXPECT_THROW(base_bid_deviation(0, b), ConfigError);
}

// Dyadic inputs keep every intermediate exact, so any reordering of the sums agrees bit for bit.
TEST(Rlb, ValuesEqualExpectimaxExactlyOnDyadicInputs) {
  testing::Rng rng(13);
  for (int c = 0; c < 200; ++c) {
    const int k = 1 + static_cast<int>(rng() % 4);
    std::vector<double> values, probs;
    for (int i = 0; i < k; ++i) values.push_back(static_cast<double>(rng() % 9) / 8.0);
    for (int i = 0; i < k; ++i) probs.push_back(k == 3 ? (i == 2 ? 0.5 : 0.25) : 1.0 / k);
    std::vector<double> pmf(1 + rng() % 6, 0.0);
    for (int q = 0; q < 4; ++q) pmf[rng() % pmf.size()] += 0.25;
    const int steps = 1 + static_cast<int>(rng() % 3);
    const int budget = static_cast<int>(rng() % 12);
    const auto t = RlbTable::build(values, probs, pmf, steps, budget);
    const auto v = testing::oracle_rlb_values(values, probs, pmf, steps, budget);
    for (int n = 0; n <= steps; ++n) {
      for (int b = 0; b <= budget; ++b) ASSERT_EQ(t.value(n, b), v[n][b]) << "case " << c;
    }
    for (int n = 1; n <= steps; ++n) {
      for (int b = 0; b <= budget; ++b) {
        for (const double p : values) ASSERT_EQ(t.bid(n, b, p), testing::oracle_rlb_bid(v, n, b, p));
      }
    }
  }
}

TEST(Rlb, ValuesCloseToExpectimaxAndMonotone) {
  testing::Rng rng(14);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int c = 0; c < 100; ++c) {
    const int k = 1 + static_cast<int>(rng() % 6);
    std::vector<double> values, probs, pmf(1 + rng() % 20);
    double ps = 0.0, ms = 0.0;
    for (int i = 0; i < k; ++i) {
      values.push_back(u(rng) * 0.1);
      probs.push_back(u(rng) + 0.01);
      ps += probs.back();
    }
    for (auto& p : probs) p /= ps;
    for (auto& m : pmf) ms += (m = u(rng));
    for (auto& m : pmf) m /= ms;
    const int steps = 1 + static_cast<int>(rng() % 8);
    const int budget = static_cast<int>(rng() % 40);
    const auto t = RlbTable::build(values, probs, pmf, steps, budget);
    const auto v = testing::oracle_rlb_values(values, probs, pmf, steps, budget);
    for (int n = 0; n <= steps; ++n) {
      for (int b = 0; b <= budget; ++b) {
        ASSERT_NEAR(t.value(n, b), v[n][b], 1e-12);
        if (n > 0) ASSERT_GE(t.value(n, b), t.value(n - 1, b));
        if (b > 0) ASSERT_GE(t.value(n, b), t.value(n, b - 1));
      }
    }
    // A bid from the table must satisfy the oracle's acceptance test up to rounding.
    for (int b = 0; b <= budget; ++b) {
      const double p = values[rng() % values.size()];
      const int d = t.bid(steps, b, p);
      ASSERT_GE(p + v[steps - 1][b - d], v[steps - 1][b] - 1e-12);
    }
  }
}

TEST(Rlb, SinglePriceHandCase) {
  std::vector<double> pmf(11, 0.0);
  pmf[10] = 1.0;
  const auto t = RlbTable::build({0.1}, {1.0}, pmf, 1, 10);
  EXPECT_DOUBLE_EQ(t.value(1, 10), 0.1);
  EXPECT_EQ(t.value(1, 9), 0.0);
  EXPECT_EQ(t.bid(1, 10, 0.1), 10);
  EXPECT_TRUE(auction::settle_auction(t.bid(1, 10, 0.1), make_record(0, 10, 0, 0.1), 10).won);
  EXPECT_THROW(t.bid(0, 10, 0.1), std::out_of_range);
}

TEST(Rlb, BuildErrorsAndStrategy) {
  EXPECT_THROW(RlbTable::build({}, {}, {1.0}, 1, 1), DataError);
  EXPECT_THROW(RlbTable::build({0.1}, {1.0}, {}, 1, 1), DataError);
  EXPECT_THROW(rlb_lite_build({}), DataError);
  const auto empty_day = make_day({});
  const std::vector<Episode> none{Episode(empty_day, 24, BudgetFraction{2})};
  EXPECT_THROW(rlb_lite_build(none), DataError);

  testing::Rng rng(15);
  auto shape = testing::random_shape(rng, 400);
  shape.scored = true;
  std::vector<Episode> train;
  for (int d = 0; d < 3; ++d) train.emplace_back(testing::random_day(rng, shape), 24, BudgetFraction{4});
  const auto model = rlb_lite_build(train, RlbConfig{200, 20, 2.0, 50});
  EXPECT_LE(model.table.pctr_values().size(), 20u);
  double mass = 0.0;
  for (const double p : model.table.pctr_probabilities()) mass += p;
  EXPECT_NEAR(mass, 1.0, 1e-12);
  RlbStrategy a(model), b(model);
  const auto ra = auction::run_episode(a, train[0]);
  EXPECT_EQ(ra, auction::run_episode(b, train[0]));
  EXPECT_LE(ra.cost, ra.budget);
  RlbStrategy wrong(model);
  EXPECT_THROW(auction::run_episode(wrong, train[0].with_slots(96)), ConfigError);
}

}  // namespace
}  // namespace rtb::strategies
