#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "fixtures.hpp"
#include "rtb/common/error.hpp"
#include "rtb/ingest/cache.hpp"
#include "rtb/ingest/episode.hpp"
#include "rtb/ingest/log_format.hpp"
#include "rtb/ingest/statistics.hpp"
#include "rtb/ingest/synthetic.hpp"

namespace rtb::ingest {
namespace {

using testing::make_day;
using testing::make_record;

// A processed-iPinYou line with every non-semantic column filled with a placeholder.
std::string ipinyou_line(int click, int hour, const std::string& timestamp, int payprice) {
  const auto schema = LogSchema::ipinyou();
  std::vector<std::string> fields;
  for (const auto& c : schema.columns) {
    if (c == "click") fields.push_back(std::to_string(click));
    else if (c == "hour") fields.push_back(std::to_string(hour));
    else if (c == "timestamp") fields.push_back(timestamp);
    else if (c == "payprice") fields.push_back(std::to_string(payprice));
    else fields.push_back(c + "-v");
  }
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) out += (i ? "\t" : "") + fields[i];
  return out;
}

TEST(LogFormat, ParsesIpinyouLine) {
  const auto schema = LogSchema::ipinyou();
  TokenPool pool;
  const auto r = parse_log_record(ipinyou_line(0, 14, "20130606140512123", 80), schema.resolve(), schema, 1, pool);
  EXPECT_EQ(r.click, 0);
  EXPECT_EQ(r.market_price, 80);
  EXPECT_EQ(r.date, 20130606);
  EXPECT_EQ(r.second_of_day, 14 * 3600 + 5 * 60 + 12);
  EXPECT_FALSE(r.pctr);
  EXPECT_EQ(r.features.size(), schema.feature_columns.size());
  EXPECT_TRUE(pool.find("hour=14"));
  EXPECT_EQ(assign_time_slot(r.second_of_day, 96), 56);
}

TEST(LogFormat, ClipsPriceAboveThePlatformCap) {
  const auto schema = LogSchema::ipinyou();
  TokenPool pool;
  const auto r = parse_log_record(ipinyou_line(1, 3, "20130606030000000", 305), schema.resolve(), schema, 1, pool);
  EXPECT_EQ(r.market_price, 300);
  EXPECT_EQ(r.click, 1);
}

TEST(LogFormat, ReadsFixtureFileAndCountsClicks) {
  testing::TempDir dir("ingest");
  const auto schema = LogSchema::ipinyou();
  const std::vector<int> clicks{0, 1, 0, 0, 1, 0, 0, 0, 1, 0};
  {
    std::ofstream out(dir / "train.log.txt");
    out << format_log_header(schema) << "\n";
    for (std::size_t i = 0; i < clicks.size(); ++i) {
      out << ipinyou_line(clicks[i], static_cast<int>(i), "201306060" + std::to_string(i) + "0000000", 50 + static_cast<int>(i))
          << "\n";
    }
  }
  TokenPool pool;
  const auto result = read_log_file(dir / "train.log.txt", schema, pool);
  ASSERT_EQ(result.records.size(), 10u);
  EXPECT_EQ(result.skipped_lines, 0u);
  int total = 0;
  for (const auto& r : result.records) total += r.click;
  EXPECT_EQ(total, 3);
}

TEST(LogFormat, SkipsMalformedLinesWithLineNumbers) {
  const auto schema = LogSchema::ipinyou();
  std::stringstream in;
  in << ipinyou_line(0, 1, "20130606010000000", 10) << "\n"
     << "too\tfew\tcolumns\n"
     << ipinyou_line(2, 1, "20130606010000000", 10) << "\n"  // click out of range
     << ipinyou_line(0, 1, "2013060601", 10) << "\n"         // truncated timestamp
     << ipinyou_line(0, 1, "20130606250000000", 10) << "\n"  // hour 25
     << ipinyou_line(1, 2, "20130606020000000", 20) << "\n";
  TokenPool pool;
  const auto result = read_log(in, schema, pool);
  EXPECT_EQ(result.records.size(), 2u);
  EXPECT_EQ(result.skipped_lines, 4u);
  ASSERT_EQ(result.first_errors.size(), 4u);
  EXPECT_TRUE(result.first_errors[0].starts_with("line 2:"));
  EXPECT_TRUE(result.first_errors[1].starts_with("line 3:"));

  try {
    parse_log_record(ipinyou_line(2, 1, "20130606010000000", 10), schema.resolve(), schema, 17, pool);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line_number(), 17u);
  }
}

// serialize(parse(line)) reproduces the semantic fields exactly, on random records.
TEST(LogFormat, RoundTripProperty) {
  testing::Rng rng(5);
  const auto schema = synthetic_schema(4);
  const auto resolved = schema.resolve();
  TokenPool pool;
  std::uniform_int_distribution<int> sec(0, kSecondsPerDay - 1), price(0, 300), bit(0, 1), value(0, 40);
  for (int i = 0; i < 1000; ++i) {
    ImpressionRecord r;
    r.date = add_days(20130101, i % 400);
    r.second_of_day = sec(rng);
    r.market_price = price(rng);
    r.click = bit(rng);
    r.features.push_back(pool.intern("hour=" + std::to_string(r.second_of_day / 3600)));
    for (int f = 0; f < 4; ++f) r.features.push_back(pool.intern("f" + std::to_string(f) + "=" + std::to_string(value(rng))));
    const auto line = format_log_record(r, schema, pool);
    const auto back = parse_log_record(line, resolved, schema, 1, pool);
    ASSERT_EQ(back, r) << line;
    ASSERT_EQ(format_log_record(back, schema, pool), line);
  }
}

TEST(LogSchema, ParsesCustomLayoutAndRejectsBadOnes) {
  const auto s = LogSchema::parse(
      "# custom layout\n"
      "columns = y, ts, price, a, b\n"
      "click = y\n"
      "timestamp = ts\n"
      "market_price = price\n"
      "features = a b\n");
  const auto r = s.resolve();
  EXPECT_EQ(r.column_count, 5u);
  EXPECT_EQ(r.price, 2u);
  EXPECT_EQ(r.features, (std::vector<std::size_t>{3, 4}));
  EXPECT_THROW(LogSchema::parse("colour = y\n"), ConfigError);
  EXPECT_THROW(LogSchema::parse("columns = a, b\nclick = a\n").resolve(), ConfigError);
}

TEST(TimeSlots, HandValues) {
  EXPECT_EQ(assign_time_slot(0, 96), 0);
  EXPECT_EQ(assign_time_slot(86399, 96), 95);
  EXPECT_EQ(assign_time_slot(7230, 24), 2);
  EXPECT_EQ(assign_time_slot(1799, 48), 0);
  EXPECT_EQ(assign_time_slot(1800, 48), 1);
  EXPECT_THROW(assign_time_slot(10, 12), ConfigError);
  EXPECT_THROW(assign_time_slot(86400, 24), std::out_of_range);
  EXPECT_THROW(assign_time_slot(-1, 24), std::out_of_range);
}

TEST(TimeSlots, MonotoneAndSurjective) {
  for (const int slots : kSupportedSlotCounts) {
    int prev = 0;
    std::vector<bool> hit(static_cast<std::size_t>(slots), false);
    for (int s = 0; s < kSecondsPerDay; s += 7) {
      const int t = assign_time_slot(s, slots);
      ASSERT_GE(t, prev);
      ASSERT_LT(t, slots);
      hit[static_cast<std::size_t>(t)] = true;
      prev = t;
    }
    EXPECT_TRUE(std::all_of(hit.begin(), hit.end(), [](bool b) { return b; }));
  }
}

TEST(Episodes, SlotsPartitionTheDay) {
  testing::Rng rng(9);
  for (int c = 0; c < 200; ++c) {
    const auto day = testing::random_day(rng, testing::random_shape(rng, 300));
    for (const int slots : kSupportedSlotCounts) {
      const Episode ep(day, slots, BudgetFraction{4});
      std::size_t total = 0;
      std::int64_t cost = 0;
      for (int t = 0; t < slots; ++t) {
        ASSERT_EQ(ep.slot_begin(t), total);
        for (const auto& r : ep.slot(t)) ASSERT_EQ(assign_time_slot(r.second_of_day, slots), t);
        total += ep.slot(t).size();
        cost += ep.slot_cost(t);
      }
      ASSERT_EQ(total, ep.size());
      ASSERT_EQ(cost, ep.total_cost());
    }
  }
}

TEST(Budget, FloorOfFraction) {
  auto day = make_day({make_record(10, 600, 0, 0.1), make_record(20, 400, 1, 0.2)});
  ASSERT_EQ(day->total_cost, 1000);
  EXPECT_EQ(Episode(day, 24, BudgetFraction{2}).budget(), 500);
  EXPECT_EQ(Episode(day, 24, BudgetFraction{16}).budget(), 62);
  EXPECT_EQ(Episode(day, 24, BudgetFraction{2}).with_budget(7).budget(), 7);
  EXPECT_EQ(BudgetFraction{8}.label(), "1/8");
}

TEST(Budget, MonotoneInFraction) {
  testing::Rng rng(3);
  for (int c = 0; c < 1000; ++c) {
    const std::int64_t cost = std::uniform_int_distribution<std::int64_t>(1, 10'000'000)(rng);
    for (std::size_t i = 1; i < kStandardFractions.size(); ++i) {
      ASSERT_LE(kStandardFractions[i].apply(cost), kStandardFractions[i - 1].apply(cost));
    }
  }
}

TEST(Budget, ParsesOnlyTheStandardFractions) {
  EXPECT_EQ(BudgetFraction::parse("1/2").denominator, 2);
  EXPECT_EQ(BudgetFraction::parse("16").denominator, 16);
  EXPECT_EQ(BudgetFraction::parse("0.125").denominator, 8);
  EXPECT_THROW(BudgetFraction::parse("1/3"), ConfigError);
  EXPECT_THROW(BudgetFraction::parse("0.3"), ConfigError);
  EXPECT_THROW(BudgetFraction::parse("half"), ConfigError);
}

TEST(Episodes, GroupsDaysAndRejectsUnsortedStreams) {
  std::vector<ImpressionRecord> stream{make_record(5, 10, 0, {}, 20130606), make_record(9, 20, 1, {}, 20130606),
                                       make_record(1, 30, 0, {}, 20130607), make_record(2, 0, 0, {}, 20130608)};
  const auto days = group_days(stream);
  ASSERT_EQ(days.size(), 2u);  // the zero-cost day is dropped
  EXPECT_EQ(days[0]->records.size(), 2u);
  EXPECT_EQ(days[1]->records.size(), 1u);
  EXPECT_EQ(days[0]->total_cost, 30);
  EXPECT_EQ(days[1]->date, 20130607);

  std::swap(stream[0], stream[2]);
  EXPECT_THROW(group_days(stream), DataError);
  EXPECT_THROW(split_campaign("x", days, nullptr, 7, 3), DataError);
}

TEST(Synthetic, DeterministicForFixedSeed) {
  const auto c = SyntheticConfig::parse("seed=7,n=1000");
  const auto a = gen_synthetic_log(c);
  const auto b = gen_synthetic_log(c);
  ASSERT_EQ(a.records.size(), 1000u);
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(a.click_probability, b.click_probability);
  EXPECT_EQ(a.tokens->tokens(), b.tokens->tokens());
  const auto schema = synthetic_schema(c.n_fields);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    ASSERT_EQ(format_log_record(a.records[i], schema, *a.tokens), format_log_record(b.records[i], schema, *b.tokens));
  }
  EXPECT_NE(gen_synthetic_log(SyntheticConfig::parse("seed=8,n=1000")).records, a.records);
  EXPECT_TRUE(std::is_sorted(a.records.begin(), a.records.end(), chronological));
}

TEST(Synthetic, SignalFreeClicksFollowTheBaseRate) {
  const auto c = SyntheticConfig::parse("seed=3,n=200000,signal=0,ctr=0.01");
  const auto log = gen_synthetic_log(c);
  double clicks = 0;
  for (const auto& r : log.records) clicks += r.click;
  const double n = static_cast<double>(log.records.size());
  const double sigma = std::sqrt(n * 0.01 * 0.99);
  EXPECT_NEAR(clicks, n * 0.01, 3.0 * sigma);
  for (const double p : log.click_probability) ASSERT_NEAR(p, 0.01, 1e-12);
}

TEST(Synthetic, IntradayShiftMovesSlotMeanPrices) {
  auto spread = [](const std::string& spec) {
    auto log = gen_synthetic_log(SyntheticConfig::parse(spec));
    const auto days = group_days(std::move(log.records));
    const Episode ep(days.front(), 24, BudgetFraction{2});
    double lo = 1e9, hi = 0.0;
    for (int t = 0; t < 24; ++t) {
      if (ep.slot(t).empty()) continue;
      const double mean = static_cast<double>(ep.slot_cost(t)) / static_cast<double>(ep.slot(t).size());
      lo = std::min(lo, mean);
      hi = std::max(hi, mean);
    }
    return hi / lo;
  };
  const double flat = spread("seed=2,n=200000,days=1,test_days=0,signal=0,intraday=0");
  const double shifted = spread("seed=2,n=200000,days=1,test_days=0,signal=0,intraday=0.6");
  EXPECT_LT(flat, 1.1);
  EXPECT_GT(shifted, 1.5);
}

TEST(Synthetic, RejectsBadParameters) {
  EXPECT_THROW(SyntheticConfig::parse("n=0"), ConfigError);
  EXPECT_THROW(SyntheticConfig::parse("bogus=1"), ConfigError);
  EXPECT_THROW(SyntheticConfig::parse("ctr=1.5"), ConfigError);
  EXPECT_THROW(SyntheticConfig::parse("seed"), ConfigError);
  EXPECT_EQ(add_days(20130630, 1), 20130701);
  EXPECT_EQ(add_days(20121231, 1), 20130101);
  EXPECT_EQ(add_days(20120228, 1), 20120229);
}

TEST(Statistics, HandArithmeticFixture) {
  auto day = make_day({make_record(0, 100, 1, 0.1), make_record(10, 100, 0, 0.1), make_record(20, 100, 0, 0.1),
                       make_record(30, 100, 0, 0.1)});
  const auto s = split_statistics("train", {day});
  EXPECT_EQ(s.imps, 4);
  EXPECT_EQ(s.clicks, 1);
  EXPECT_EQ(s.cost, 400);
  EXPECT_DOUBLE_EQ(s.ctr, 0.25);
  EXPECT_DOUBLE_EQ(s.cpm, 100000.0);
  ASSERT_TRUE(s.cpc);
  EXPECT_DOUBLE_EQ(*s.cpc, 400.0);
}

TEST(Statistics, ZeroClickCpcIsUndefined) {
  auto day = make_day({make_record(0, 100, 0, {}), make_record(10, 50, 0, {})});
  const auto s = split_statistics("train", {day});
  EXPECT_FALSE(s.cpc);
  CampaignDataset ds;
  ds.train_days = {day};
  ds.test_days = {day};
  std::ostringstream os;
  write_split_statistics_csv(os, dataset_statistics(ds));
  EXPECT_NE(os.str().find(kUndefinedMarker), std::string::npos);
}

TEST(Statistics, SyntheticVolumeIdentity) {
  auto log = gen_synthetic_log(SyntheticConfig::parse("seed=1,n=10000"));
  const auto ds = split_campaign("s", group_days(std::move(log.records)), log.tokens);
  const auto stats = dataset_statistics(ds, 24);
  EXPECT_EQ(stats.train.imps + stats.test.imps, 10000);
  EXPECT_EQ(stats.days.size(), 10u);
  std::int64_t per_slot = 0;
  for (const auto& s : stats.slot_prices) per_slot += s.imps;
  EXPECT_EQ(per_slot, 10000);
}

TEST(Cache, RoundTripKeepsRecordsTokensAndProvenance) {
  testing::TempDir dir("cache");
  auto ds = testing::planted_campaign(SyntheticConfig::parse("seed=4,n=3000"));
  save_dataset(dir / "c.bin", ds, "command=ingest\nslots=96\n");
  const auto loaded = load_dataset(dir / "c.bin");
  EXPECT_EQ(loaded.provenance, "command=ingest\nslots=96\n");
  EXPECT_EQ(loaded.dataset.campaign_id, ds.campaign_id);
  EXPECT_EQ(loaded.dataset.tokens->tokens(), ds.tokens->tokens());
  EXPECT_DOUBLE_EQ(loaded.dataset.avg_pctr_train, ds.avg_pctr_train);
  ASSERT_EQ(loaded.dataset.train_days.size(), 7u);
  ASSERT_EQ(loaded.dataset.test_days.size(), 3u);
  for (std::size_t d = 0; d < 7; ++d) {
    EXPECT_EQ(loaded.dataset.train_days[d]->records, ds.train_days[d]->records);
    EXPECT_EQ(loaded.dataset.train_days[d]->total_cost, ds.train_days[d]->total_cost);
  }

  const auto bytes = testing::read_file(dir / "c.bin");
  {
    std::ofstream out(dir / "cut.bin", std::ios::binary);
    out << bytes.substr(0, bytes.size() / 2);
  }
  EXPECT_THROW(load_dataset(dir / "cut.bin"), DataError);
  EXPECT_THROW(load_dataset(dir / "missing.bin"), DataError);
}

}  // namespace
}  // namespace rtb::ingest
