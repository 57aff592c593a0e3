#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rtb/ingest/episode.hpp"
#include "rtb/ingest/record.hpp"
#include "rtb/ingest/synthetic.hpp"

namespace rtb::testing {

using Rng = std::mt19937_64;

inline constexpr std::int32_t kFixtureDate = 20130606;

ingest::ImpressionRecord make_record(int second_of_day, int market_price, int click, std::optional<double> pctr,
                                     std::int32_t date = kFixtureDate);

// Sorts chronologically and fills date and total cost.
ingest::DayPtr make_day(std::vector<ingest::ImpressionRecord> records);

struct DayShape {
  std::size_t imps = 100;
  int min_price = 0;
  int max_price = 300;
  double click_rate = 0.05;
  double max_pctr = 0.01;
  bool scored = true;
  std::int32_t date = kFixtureDate;
};

// Uniform timestamps, prices and pctr; clicks are Bernoulli(click_rate). Total cost is
// kept positive so every episode has a budget.
ingest::DayPtr random_day(Rng& rng, const DayShape& shape);

// A random shape: 1..max_imps impressions, random price range and volumes.
DayShape random_shape(Rng& rng, std::size_t max_imps);

// Synthetic campaign with pctr set to the generator's planted click probability, so
// strategy tests do not need a trained CTR model.
ingest::CampaignDataset planted_campaign(const ingest::SyntheticConfig& config);

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);

}  // namespace rtb::testing
