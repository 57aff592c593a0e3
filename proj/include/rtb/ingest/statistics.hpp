#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rtb/ingest/episode.hpp"

namespace rtb::ingest {

struct SplitStatistics {
  std::string split;
  std::int64_t imps = 0;
  std::int64_t clicks = 0;
  std::int64_t cost = 0;
  std::size_t days = 0;
  double avg_cost_per_day = 0.0;
  double ctr = 0.0;
  double avg_pctr = 0.0;
  double cpm = 0.0;            // cost / imps * 1000
  std::optional<double> cpc;   // undefined without clicks
};

struct DayStatistics {
  std::int32_t date = 0;
  std::string split;
  std::int64_t imps = 0;
  std::int64_t clicks = 0;
  std::int64_t cost = 0;
  double cpm = 0.0;
};

struct SlotPriceStatistics {
  std::int32_t date = 0;
  int slot = 0;
  std::int64_t imps = 0;
  double mean_price = 0.0;  // 0 for an empty slot
};

struct DatasetStatistics {
  SplitStatistics train;
  SplitStatistics test;
  std::vector<DayStatistics> days;
  std::vector<SlotPriceStatistics> slot_prices;
};

SplitStatistics split_statistics(const std::string& name, const std::vector<DayPtr>& days);

// Split totals plus per-day volumes and per-slot mean market prices at `slot_count`.
DatasetStatistics dataset_statistics(const CampaignDataset& dataset, int slot_count = 24);

inline constexpr const char* kUndefinedMarker = "NA";

void write_split_statistics_csv(std::ostream& out, const DatasetStatistics& stats);
void write_daily_market_csv(std::ostream& out, const DatasetStatistics& stats);
void write_slot_market_price_csv(std::ostream& out, const DatasetStatistics& stats);

}  // namespace rtb::ingest
