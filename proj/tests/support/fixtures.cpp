#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace rtb::testing {

ingest::ImpressionRecord make_record(int second_of_day, int market_price, int click, std::optional<double> pctr,
                                     std::int32_t date) {
  ingest::ImpressionRecord r;
  r.date = date;
  r.second_of_day = second_of_day;
  r.market_price = market_price;
  r.click = click;
  r.pctr = pctr;
  return r;
}

ingest::DayPtr make_day(std::vector<ingest::ImpressionRecord> records) {
  ingest::sort_chronologically(records);
  auto day = std::make_shared<ingest::DayLog>();
  day->date = records.empty() ? kFixtureDate : records.front().date;
  for (const auto& r : records) day->total_cost += r.market_price;
  day->records = std::move(records);
  return day;
}

ingest::DayPtr random_day(Rng& rng, const DayShape& shape) {
  std::uniform_int_distribution<int> second(0, ingest::kSecondsPerDay - 1);
  std::uniform_int_distribution<int> price(shape.min_price, shape.max_price);
  std::uniform_real_distribution<double> pctr(1e-6, shape.max_pctr);
  std::bernoulli_distribution click(shape.click_rate);
  std::vector<ingest::ImpressionRecord> records;
  records.reserve(shape.imps);
  for (std::size_t i = 0; i < shape.imps; ++i) {
    std::optional<double> p;
    if (shape.scored) p = pctr(rng);
    records.push_back(make_record(second(rng), price(rng), click(rng) ? 1 : 0, p, shape.date));
  }
  if (std::all_of(records.begin(), records.end(), [](const auto& r) { return r.market_price == 0; })) {
    records.front().market_price = std::max(1, shape.max_price);
  }
  return make_day(std::move(records));
}

DayShape random_shape(Rng& rng, std::size_t max_imps) {
  DayShape s;
  s.imps = std::uniform_int_distribution<std::size_t>(1, max_imps)(rng);
  s.min_price = std::uniform_int_distribution<int>(0, 100)(rng);
  s.max_price = std::uniform_int_distribution<int>(s.min_price, 300)(rng);
  s.click_rate = std::uniform_real_distribution<double>(0.0, 0.5)(rng);
  s.max_pctr = std::uniform_real_distribution<double>(1e-3, 0.2)(rng);
  return s;
}

ingest::CampaignDataset planted_campaign(const ingest::SyntheticConfig& config) {
  auto log = ingest::gen_synthetic_log(config);
  for (std::size_t i = 0; i < log.records.size(); ++i) log.records[i].pctr = log.click_probability[i];
  auto days = ingest::group_days(std::move(log.records));
  const auto test = static_cast<std::size_t>(config.test_days);
  const auto train = days.size() - test;
  auto ds = ingest::split_campaign("planted", std::move(days), log.tokens, train, test);
  ds.avg_pctr_train = ingest::mean_pctr(ds.train_days);
  return ds;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("rtb-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace rtb::testing
