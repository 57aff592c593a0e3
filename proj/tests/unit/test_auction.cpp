#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "fixtures.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "rtb/auction/replay.hpp"
#include "rtb/common/error.hpp"
#include "rtb/strategies/static.hpp"

namespace rtb::auction {
namespace {

using ingest::BudgetFraction;
using ingest::Episode;
using testing::make_day;
using testing::make_record;

constexpr int kCases = 1000;

// Pseudo-random bid that depends only on the record, so an oracle can recompute it.
double hashed_bid(const ingest::ImpressionRecord& r, std::uint64_t seed) {
  std::uint64_t h = seed * 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(r.second_of_day) * 0xff51afd7ed558ccdULL ^
                    static_cast<std::uint64_t>(r.market_price);
  h ^= h >> 33;
  h *= 0xc4ceb9fe1a85ec53ULL;
  h ^= h >> 29;
  return static_cast<double>(h % 4000) / 10.0 - 50.0;  // [-50, 350), often out of range
}

class HashedStrategy final : public BidStrategy {
 public:
  explicit HashedStrategy(std::uint64_t seed) : seed_(seed) {}
  std::string name() const override { return "hashed"; }
  double bid(const ingest::ImpressionRecord& r, const BidContext&) override { return hashed_bid(r, seed_); }

 private:
  std::uint64_t seed_;
};

// Adversarial: always bids what is left, whatever the record.
class AllInStrategy final : public BidStrategy {
 public:
  std::string name() const override { return "all-in"; }
  double bid(const ingest::ImpressionRecord&, const BidContext& c) override {
    return static_cast<double>(c.budget_remaining);
  }
};

// Records the slot-boundary calls.
class ProbeStrategy final : public BidStrategy {
 public:
  std::string name() const override { return "probe"; }
  void begin_slot(int slot, const SlotStats* previous, std::int64_t remaining) override {
    calls.push_back(slot);
    had_previous.push_back(previous != nullptr);
    if (previous) previous_slots.push_back(previous->slot);
    remainders.push_back(remaining);
  }
  double bid(const ingest::ImpressionRecord&, const BidContext&) override { return 300.0; }
  std::vector<int> calls, previous_slots;
  std::vector<bool> had_previous;
  std::vector<std::int64_t> remainders;
};

struct Case {
  Episode episode;
  std::uint64_t seed;
};

Case random_case(testing::Rng& rng) {
  const auto shape = testing::random_shape(rng, 120);
  const int slots = ingest::kSupportedSlotCounts[rng() % 3];
  const auto f = ingest::kStandardFractions[rng() % 4];
  Episode ep(testing::random_day(rng, shape), slots, f);
  if (ep.budget() == 0) ep = ep.with_budget(1 + static_cast<std::int64_t>(rng() % 200));
  return {ep, rng()};
}

TEST(Settle, HandCases) {
  const auto r = make_record(0, 80, 1, 0.3);
  auto o = settle_auction(100, r, 500);
  EXPECT_TRUE(o.won);
  EXPECT_EQ(o.cost, 80);
  EXPECT_EQ(o.click, 1);
  EXPECT_DOUBLE_EQ(o.pctr, 0.3);
  o = settle_auction(80, r, 500);
  EXPECT_TRUE(o.won);
  EXPECT_EQ(o.cost, 80);
  o = settle_auction(79, r, 500);
  EXPECT_FALSE(o.won);
  EXPECT_EQ(o.cost, 0);
  EXPECT_FALSE(settle_auction(100, r, 79).won);  // affordable only up to the last unit
  EXPECT_TRUE(settle_auction(100, r, 80).won);
  EXPECT_TRUE(settle_auction(5000, make_record(0, 300, 0, {}), 1000).won);  // clipped to 300, still wins
}

TEST(AuctionLaw, WinIffBidCoversPriceAndBudgetCoversIt) {
  testing::Rng rng(1);
  std::uniform_int_distribution<std::int64_t> bid(-50, 400), budget(0, 400);
  std::uniform_int_distribution<int> price(0, 300);
  for (int c = 0; c < kCases * 10; ++c) {
    const auto r = make_record(0, price(rng), c % 2, 0.01);
    const auto b = bid(rng);
    const auto rem = budget(rng);
    const auto o = settle_auction(b, r, rem);
    const bool expected = std::clamp<std::int64_t>(b, 0, 300) >= r.market_price && r.market_price <= rem;
    ASSERT_EQ(o.won, expected);
    ASSERT_EQ(o.cost, expected ? r.market_price : 0);
    ASSERT_EQ(o.click, expected ? r.click : 0);
  }
}

// Unlimited budget: a higher bid wins a superset of auctions, each at the same price.
TEST(AuctionLaw, SecondPriceDominance) {
  testing::Rng rng(2);
  for (int c = 0; c < kCases; ++c) {
    const auto day = testing::random_day(rng, testing::random_shape(rng, 100));
    const int lo = static_cast<int>(rng() % 301);
    const int hi = lo + static_cast<int>(rng() % (301 - static_cast<unsigned>(lo)));
    for (const auto& r : day->records) {
      const auto a = settle_auction(lo, r, day->total_cost);
      const auto b = settle_auction(hi, r, day->total_cost);
      if (a.won) {
        ASSERT_TRUE(b.won);
        ASSERT_EQ(a.cost, b.cost);
      }
      if (b.won) ASSERT_EQ(b.cost, r.market_price);
    }
    ConstantStrategy s_lo(lo), s_hi(hi);
    const Episode ep(day, 24, BudgetFraction{2});
    const auto full = ep.with_budget(day->total_cost);
    const auto ra = run_episode(s_lo, full);
    const auto rb = run_episode(s_hi, full);
    ASSERT_LE(ra.wins, rb.wins);
    ASSERT_LE(ra.clicks, rb.clicks);
  }
}

TEST(AuctionLaw, BudgetConservation) {
  testing::Rng rng(3);
  for (int c = 0; c < kCases; ++c) {
    const auto k = random_case(rng);
    HashedStrategy hashed(k.seed);
    AllInStrategy all_in;
    strategies::LinStrategy lin({static_cast<int>(1 + k.seed % 300), 0.005});
    for (BidStrategy* s : std::initializer_list<BidStrategy*>{&hashed, &all_in, &lin}) {
      const auto r = run_episode(*s, k.episode);
      ASSERT_LE(r.cost, r.budget);
      ASSERT_GE(r.cost, 0);
      std::int64_t slot_cost = 0, slot_wins = 0, seen = 0;
      std::int64_t running = r.budget;
      for (const auto& slot : r.slots) {
        ASSERT_EQ(slot.budget_start, running);
        ASSERT_EQ(slot.budget_remaining_at_end, slot.budget_start - slot.cost);
        ASSERT_GE(slot.budget_remaining_at_end, 0);
        ASSERT_LE(slot.imps_won + slot.imps_lost_to_budget, slot.imps_seen);
        running = slot.budget_remaining_at_end;
        slot_cost += slot.cost;
        slot_wins += slot.imps_won;
        seen += slot.imps_seen;
      }
      ASSERT_EQ(slot_cost, r.cost);
      ASSERT_EQ(slot_wins, r.wins);
      ASSERT_EQ(seen, static_cast<std::int64_t>(k.episode.size()));
    }
  }
}

// The engine against the flat oracle loop: totals and the early-stop point.
TEST(AuctionLaw, ReplayMatchesFlatOracle) {
  testing::Rng rng(4);
  for (int c = 0; c < kCases; ++c) {
    const auto k = random_case(rng);
    HashedStrategy s(k.seed);
    const auto r = run_episode(s, k.episode);
    const auto o = testing::oracle_replay(k.episode.records(), k.episode.budget(), [&](const ingest::ImpressionRecord& rec) {
      return round_clip_bid(hashed_bid(rec, k.seed));
    });
    ASSERT_EQ(r.wins, o.wins);
    ASSERT_EQ(r.clicks, o.clicks);
    ASSERT_EQ(r.cost, o.cost);
    ASSERT_NEAR(r.pctr_sum, o.pctr_sum, 1e-12 * (1.0 + o.pctr_sum));  // summed per slot vs flat
    ASSERT_EQ(r.early_stop_index, o.stop_index);
    if (o.stop_index) {
      const auto& rec = k.episode.records()[*o.stop_index];
      ASSERT_EQ(*r.early_stop_slot, ingest::assign_time_slot(rec.second_of_day, k.episode.slot_count()));
    }
  }
}

TEST(AuctionLaw, StaticStrategyBudgetMonotonicity) {
  testing::Rng rng(5);
  for (int c = 0; c < kCases; ++c) {
    const auto k = random_case(rng);
    HashedStrategy hashed(k.seed);
    strategies::LinStrategy lin({static_cast<int>(1 + k.seed % 300), 0.01});
    strategies::OrtbStrategy ortb({34.0, 5.2e-7});
    for (BidStrategy* s : std::initializer_list<BidStrategy*>{&hashed, &lin, &ortb}) {
      std::int64_t prev_wins = -1, prev_clicks = -1;
      for (int d : {16, 8, 4, 2}) {
        auto ep = k.episode.with_fraction(BudgetFraction{d});
        if (ep.budget() == 0) continue;
        const auto r = run_episode(*s, ep);
        ASSERT_GE(r.wins, prev_wins) << s->name() << " 1/" << d;
        ASSERT_GE(r.clicks, prev_clicks) << s->name() << " 1/" << d;
        prev_wins = r.wins;
        prev_clicks = r.clicks;
      }
      // Every budget step, not only the standard fractions.
      std::int64_t w = -1;
      for (std::int64_t b = 1; b <= k.episode.total_cost(); b += 1 + k.episode.total_cost() / 25) {
        const auto r = run_episode(*s, k.episode.with_budget(b));
        ASSERT_GE(r.wins, w);
        w = r.wins;
      }
    }
  }
}

TEST(AuctionLaw, ReplayDeterminism) {
  testing::Rng rng(6);
  for (int c = 0; c < kCases; ++c) {
    const auto k = random_case(rng);
    HashedStrategy a(k.seed), b(k.seed);
    ASSERT_EQ(run_episode(a, k.episode), run_episode(b, k.episode));
    ASSERT_EQ(run_episode(a, k.episode), run_episode(a, k.episode));
  }
}

TEST(AuctionLaw, SlotStatsDerivedFieldsRecompute) {
  testing::Rng rng(7);
  for (int c = 0; c < kCases; ++c) {
    const auto k = random_case(rng);
    HashedStrategy s(k.seed);
    for (const auto& slot : run_episode(s, k.episode).slots) {
      const double wr = slot.imps_seen ? static_cast<double>(slot.imps_won) / static_cast<double>(slot.imps_seen) : 0.0;
      const double cpm = slot.imps_won ? static_cast<double>(slot.cost) / static_cast<double>(slot.imps_won) * 1000.0 : 0.0;
      const double bcr = slot.budget_start ? static_cast<double>(slot.cost) / static_cast<double>(slot.budget_start) : 0.0;
      ASSERT_EQ(slot.win_rate, wr);
      ASSERT_EQ(slot.cpm, cpm);
      ASSERT_EQ(slot.budget_cost_ratio, bcr);
    }
  }
}

std::vector<ingest::ImpressionRecord> priced_fixture() {
  std::vector<ingest::ImpressionRecord> recs;
  for (int i = 0; i < 40; ++i) recs.push_back(make_record(i * 2000, 10 + (i * 37) % 90, i % 3 == 0, 0.01));
  return recs;
}

TEST(Replay, ConstantStrategies) {
  const auto day = make_day(priced_fixture());
  std::int64_t all_clicks = 0;
  for (const auto& r : day->records) all_clicks += r.click;
  const Episode full = Episode(day, 96, BudgetFraction{2}).with_budget(day->total_cost);

  ConstantStrategy cap(300);
  const auto r = run_episode(cap, full);
  EXPECT_EQ(r.wins, static_cast<std::int64_t>(day->records.size()));
  EXPECT_EQ(r.clicks, all_clicks);
  EXPECT_EQ(r.cost, day->total_cost);
  EXPECT_FALSE(r.early_stop_slot);

  ConstantStrategy zero(0);
  const auto z = run_episode(zero, full);
  EXPECT_EQ(z.wins, 0);
  EXPECT_EQ(z.cost, 0);
  EXPECT_FALSE(z.early_stop_slot);
}

// Constant 300 at half the day's cost: the prefix sum of prices locates the stop point.
TEST(Replay, EarlyStopAtPrefixSumCrossing) {
  const auto day = make_day(priced_fixture());
  const Episode half(day, 96, BudgetFraction{2});
  ConstantStrategy cap(300);
  const auto r = run_episode(cap, half);
  std::int64_t prefix = 0;
  std::size_t stop = 0;
  while (prefix + day->records[stop].market_price <= half.budget()) prefix += day->records[stop++].market_price;
  ASSERT_TRUE(r.early_stop_slot);
  EXPECT_EQ(*r.early_stop_index, stop);
  EXPECT_EQ(*r.early_stop_slot, ingest::assign_time_slot(day->records[stop].second_of_day, 96));
  EXPECT_EQ(r.cost, prefix);
  EXPECT_LE(r.cost, half.budget());
  std::int64_t foregone = 0;
  for (std::size_t i = stop; i < day->records.size(); ++i) foregone += day->records[i].click;
  EXPECT_EQ(r.foregone_clicks, foregone);
}

TEST(Replay, SlotHookCalledOncePerSlotWithPreviousStats) {
  const auto day = make_day(priced_fixture());
  ProbeStrategy probe;
  const auto r = run_episode(probe, Episode(day, 24, BudgetFraction{4}));
  ASSERT_EQ(probe.calls.size(), 24u);
  for (int t = 0; t < 24; ++t) EXPECT_EQ(probe.calls[static_cast<std::size_t>(t)], t);
  EXPECT_FALSE(probe.had_previous[0]);
  for (int t = 1; t < 24; ++t) {
    EXPECT_TRUE(probe.had_previous[static_cast<std::size_t>(t)]);
    EXPECT_EQ(probe.previous_slots[static_cast<std::size_t>(t - 1)], t - 1);
    EXPECT_EQ(probe.remainders[static_cast<std::size_t>(t)], r.slots[static_cast<std::size_t>(t - 1)].budget_remaining_at_end);
  }
}

TEST(Replay, Errors) {
  const auto day = make_day(priced_fixture());
  ConstantStrategy nan(std::numeric_limits<double>::quiet_NaN());
  EXPECT_THROW(run_episode(nan, Episode(day, 24, BudgetFraction{2})), NumericalError);
  ConstantStrategy inf(std::numeric_limits<double>::infinity());
  EXPECT_THROW(run_episode(inf, Episode(day, 24, BudgetFraction{2})), NumericalError);
  ConstantStrategy ok(100);
  EXPECT_THROW(run_episode(ok, Episode(day, 24, BudgetFraction{2}).with_budget(0)), DataError);
}

TEST(Objective, Additivity) {
  EpisodeResult empty;
  EXPECT_EQ(objective_value(empty).clicks, 0);
  EXPECT_EQ(objective_value(empty).pctr_sum, 0.0);

  const auto day = make_day({make_record(100, 10, 1, 0.2), make_record(4000, 10, 1, 0.1), make_record(4100, 10, 1, 0.2)});
  ConstantStrategy cap(300);
  const auto r = run_episode(cap, Episode(day, 24, BudgetFraction{2}).with_budget(1000));
  EXPECT_EQ(r.slots[0].clicks, 1);
  EXPECT_EQ(r.slots[1].clicks, 2);
  EXPECT_EQ(objective_value(r).clicks, 3);
  EXPECT_NEAR(objective_value(r).pctr_sum, 0.5, 1e-15);
  EXPECT_TRUE(better({3, 0.1}, {2, 9.0}));
  EXPECT_TRUE(better({3, 0.2}, {3, 0.1}));
  EXPECT_FALSE(better({3, 0.1}, {3, 0.1}));
}

TEST(Replay, JsonLineAndTrace) {
  const auto day = make_day(priced_fixture());
  ConstantStrategy cap(300);
  const auto r = run_episode(cap, Episode(day, 24, BudgetFraction{2}));
  const auto j = nlohmann::json::parse(to_json_line(r, "constant"));
  EXPECT_EQ(j["strategy"], "constant");
  EXPECT_EQ(j["clicks"].get<std::int64_t>(), r.clicks);
  EXPECT_EQ(j["early_stop_slot"].get<int>(), *r.early_stop_slot);
  EXPECT_EQ(j["slots"].size(), 24u);
  std::ostringstream os;
  write_slot_trace_csv(os, r);
  std::size_t lines = 0;
  for (char ch : os.str()) lines += ch == '\n';
  EXPECT_EQ(lines, 25u);
}

}  // namespace
}  // namespace rtb::auction
