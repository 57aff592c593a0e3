#include "rtb/ingest/cache.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "rtb/common/binary_io.hpp"
#include "rtb/common/error.hpp"

namespace rtb::ingest {
namespace {

constexpr std::uint32_t kVersion = 1;

void write_day(BinaryWriter& w, const DayLog& day) {
  const std::size_t n = day.records.size();
  std::vector<std::int32_t> seconds(n), prices(n);
  std::vector<std::uint8_t> clicks(n);
  std::vector<double> pctr(n);
  std::vector<std::uint64_t> offsets(n + 1, 0);
  std::vector<TokenId> features;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = day.records[i];
    seconds[i] = r.second_of_day;
    prices[i] = r.market_price;
    clicks[i] = static_cast<std::uint8_t>(r.click);
    pctr[i] = r.pctr.value_or(std::numeric_limits<double>::quiet_NaN());
    features.insert(features.end(), r.features.begin(), r.features.end());
    offsets[i + 1] = features.size();
  }
  w.pod(day.date);
  w.array<std::int32_t>(seconds);
  w.array<std::int32_t>(prices);
  w.array<std::uint8_t>(clicks);
  w.array<double>(pctr);
  w.array<std::uint64_t>(offsets);
  w.array<TokenId>(features);
}

DayPtr read_day(BinaryReader& r) {
  auto day = std::make_shared<DayLog>();
  day->date = r.pod<std::int32_t>();
  const auto seconds = r.array<std::int32_t>();
  const auto prices = r.array<std::int32_t>();
  const auto clicks = r.array<std::uint8_t>();
  const auto pctr = r.array<double>();
  const auto offsets = r.array<std::uint64_t>();
  const auto features = r.array<TokenId>();
  const std::size_t n = seconds.size();
  if (prices.size() != n || clicks.size() != n || pctr.size() != n || offsets.size() != n + 1 ||
      offsets.back() != features.size()) {
    throw DataError("corrupt episode cache: column lengths disagree");
  }
  day->records.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& rec = day->records[i];
    rec.date = day->date;
    rec.second_of_day = seconds[i];
    rec.market_price = prices[i];
    rec.click = clicks[i];
    if (!std::isnan(pctr[i])) rec.pctr = pctr[i];
    if (offsets[i] > offsets[i + 1]) throw DataError("corrupt episode cache: feature offsets");
    rec.features.assign(features.begin() + static_cast<std::ptrdiff_t>(offsets[i]),
                        features.begin() + static_cast<std::ptrdiff_t>(offsets[i + 1]));
    day->total_cost += rec.market_price;
  }
  return day;
}

}  // namespace

void save_dataset(const std::filesystem::path& path, const CampaignDataset& dataset,
                  const std::string& provenance) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  BinaryWriter w(out);
  w.header({kKindEpisodeCache, kVersion});
  w.string(provenance);
  w.string(dataset.campaign_id);
  const auto& tokens = dataset.tokens ? dataset.tokens->tokens() : std::vector<std::string>{};
  w.pod<std::uint64_t>(tokens.size());
  for (const auto& t : tokens) w.string(t);
  w.pod<std::uint64_t>(dataset.train_days.size());
  w.pod<std::uint64_t>(dataset.test_days.size());
  for (const auto& d : dataset.train_days) write_day(w, *d);
  for (const auto& d : dataset.test_days) write_day(w, *d);
  w.check();
}

LoadedDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  BinaryReader r(in);
  r.header(kKindEpisodeCache, kVersion);
  LoadedDataset out;
  out.provenance = r.string();
  out.dataset.campaign_id = r.string();
  auto pool = std::make_shared<TokenPool>();
  const auto n_tokens = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < n_tokens; ++i) {
    if (pool->intern(r.string()) != i) throw DataError("corrupt episode cache: duplicate token");
  }
  out.dataset.tokens = pool;
  const auto n_train = r.pod<std::uint64_t>();
  const auto n_test = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < n_train; ++i) out.dataset.train_days.push_back(read_day(r));
  for (std::uint64_t i = 0; i < n_test; ++i) out.dataset.test_days.push_back(read_day(r));
  for (const auto& d : out.dataset.train_days) {
    for (const auto& rec : d->records) {
      for (auto f : rec.features) {
        if (f >= pool->size()) throw DataError("corrupt episode cache: token id out of range");
      }
    }
  }
  out.dataset.avg_pctr_train = mean_pctr(out.dataset.train_days);
  return out;
}

}  // namespace rtb::ingest
