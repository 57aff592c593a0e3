#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "rtb/ingest/log_format.hpp"
#include "rtb/ingest/record.hpp"

namespace rtb::ingest {

// Market-price model: log-normal around a day- and time-of-day-dependent level, shifted
// by the impression's click propensity, capped at 300.
struct PriceModel {
  double log_price_mean = 4.25;      // median price ~70
  double log_price_sigma = 0.55;
  double value_correlation = 0.3;    // price log-shift per unit of click logit
  double intraday_amplitude = 0.3;   // log amplitude of the intraday price curve
  double day_level_sigma = 0.2;      // day-to-day log price level noise
  double test_level_shift = 0.15;    // extra log price level on the held-out days
};

struct SyntheticConfig {
  std::uint64_t seed = 1;
  std::size_t n_impressions = 500'000;
  int n_days = 10;
  int test_days = 3;
  int n_fields = 8;
  int field_cardinality = 16;
  // Scales the planted logistic click model; 0 makes clicks independent of features.
  double click_signal_strength = 1.0;
  double base_ctr = 0.005;
  double test_volume_factor = 0.6;
  std::int32_t first_date = 20130606;
  PriceModel price;

  // Parses "seed=7,n=1000,fields=8,signal=1.0,ctr=0.005,days=10,..." on top of defaults.
  static SyntheticConfig parse(const std::string& spec);
  std::string describe() const;
};

struct SyntheticLog {
  std::vector<ImpressionRecord> records;  // chronologically sorted
  std::vector<double> click_probability;  // planted model's probability, aligned with records
  std::shared_ptr<TokenPool> tokens;
};

// Deterministic for a fixed config. Clicks follow a planted logistic model over the
// categorical fields plus an hour-of-day effect.
SyntheticLog gen_synthetic_log(const SyntheticConfig& config);

// TSV layout the generator's records serialize to: click, hour, timestamp, payprice, f0..fN.
LogSchema synthetic_schema(int n_fields);

// yyyymmdd plus `days` calendar days.
std::int32_t add_days(std::int32_t yyyymmdd, int days);

}  // namespace rtb::ingest
