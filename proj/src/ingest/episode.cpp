#include "rtb/ingest/episode.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rtb/common/error.hpp"
#include "rtb/common/log.hpp"
#include "rtb/common/text.hpp"

namespace rtb::ingest {

bool is_supported_slot_count(int slot_count) {
  return std::find(kSupportedSlotCounts.begin(), kSupportedSlotCounts.end(), slot_count) !=
         kSupportedSlotCounts.end();
}

int assign_time_slot(int second_of_day, int slot_count) {
  if (!is_supported_slot_count(slot_count)) {
    throw ConfigError("slots", std::to_string(slot_count) + " is not one of 24, 48, 96");
  }
  if (second_of_day < 0 || second_of_day >= kSecondsPerDay) {
    throw std::out_of_range("timestamp " + std::to_string(second_of_day) + " outside [0, 86400)");
  }
  return second_of_day / (kSecondsPerDay / slot_count);
}

BudgetFraction BudgetFraction::parse(const std::string& s) {
  const auto body = text::trim(s);
  int denominator = 0;
  if (body.starts_with("1/")) {
    denominator = text::parse_int<int>(body.substr(2)).value_or(0);
  } else if (const auto d = text::parse_int<int>(body)) {
    denominator = *d;
  } else if (const auto v = text::parse_double(body); v && *v > 0) {
    denominator = static_cast<int>(std::lround(1.0 / *v));
    if (std::abs(1.0 / denominator - *v) > 1e-12) denominator = 0;
  }
  const BudgetFraction f{denominator};
  if (std::find(kStandardFractions.begin(), kStandardFractions.end(), f) == kStandardFractions.end()) {
    throw ConfigError("budget-frac", "'" + s + "' is not one of 1/2, 1/4, 1/8, 1/16");
  }
  return f;
}

Episode::Episode(DayPtr day, int slot_count, BudgetFraction fraction)
    : day_(std::move(day)), slot_count_(slot_count), fraction_(fraction) {
  if (!day_) throw std::invalid_argument("episode without a day log");
  if (fraction_.denominator <= 0) throw ConfigError("budget-frac", "non-positive denominator");
  budget_ = fraction_.apply(day_->total_cost);
  offsets_.assign(static_cast<std::size_t>(slot_count_) + 1, 0);
  const auto& recs = day_->records;
  std::size_t i = 0;
  for (int t = 0; t < slot_count_; ++t) {
    offsets_[static_cast<std::size_t>(t)] = i;
    while (i < recs.size() && assign_time_slot(recs[i].second_of_day, slot_count_) == t) ++i;
  }
  offsets_.back() = i;
  if (i != recs.size()) throw DataError("day log is not chronologically sorted");
}

Episode Episode::with_budget(std::int64_t budget) const {
  Episode e = *this;
  e.budget_ = budget;
  return e;
}

std::span<const ImpressionRecord> Episode::slot(int t) const {
  const auto b = offsets_.at(static_cast<std::size_t>(t));
  const auto e = offsets_.at(static_cast<std::size_t>(t) + 1);
  return std::span<const ImpressionRecord>(day_->records).subspan(b, e - b);
}

std::int64_t Episode::slot_cost(int t) const {
  std::int64_t c = 0;
  for (const auto& r : slot(t)) c += r.market_price;
  return c;
}

std::vector<DayPtr> group_days(std::vector<ImpressionRecord> records) {
  if (!std::is_sorted(records.begin(), records.end(), chronological)) {
    throw DataError("records must be sorted by (date, timestamp) before building episodes");
  }
  std::vector<DayPtr> days;
  std::size_t i = 0;
  while (i < records.size()) {
    auto day = std::make_shared<DayLog>();
    day->date = records[i].date;
    std::size_t j = i;
    while (j < records.size() && records[j].date == day->date) {
      day->total_cost += records[j].market_price;
      ++j;
    }
    day->records.assign(std::make_move_iterator(records.begin() + static_cast<std::ptrdiff_t>(i)),
                        std::make_move_iterator(records.begin() + static_cast<std::ptrdiff_t>(j)));
    i = j;
    if (day->total_cost == 0) {
      log::warn("day " + std::to_string(day->date) + " has zero total cost; episode excluded");
      continue;
    }
    days.push_back(std::move(day));
  }
  return days;
}

std::vector<Episode> build_episodes(std::vector<ImpressionRecord> records, int slot_count,
                                    BudgetFraction fraction) {
  std::vector<Episode> episodes;
  for (auto& day : group_days(std::move(records))) episodes.emplace_back(day, slot_count, fraction);
  return episodes;
}

namespace {

std::vector<Episode> make_episodes(const std::vector<DayPtr>& days, int slot_count,
                                   BudgetFraction fraction) {
  std::vector<Episode> out;
  out.reserve(days.size());
  for (const auto& d : days) out.emplace_back(d, slot_count, fraction);
  return out;
}

}  // namespace

std::vector<Episode> CampaignDataset::train_episodes(int slot_count, BudgetFraction fraction) const {
  return make_episodes(train_days, slot_count, fraction);
}

std::vector<Episode> CampaignDataset::test_episodes(int slot_count, BudgetFraction fraction) const {
  return make_episodes(test_days, slot_count, fraction);
}

bool CampaignDataset::scored() const {
  auto all_scored = [](const std::vector<DayPtr>& days) {
    return std::all_of(days.begin(), days.end(), [](const DayPtr& d) {
      return std::all_of(d->records.begin(), d->records.end(),
                         [](const ImpressionRecord& r) { return r.pctr.has_value(); });
    });
  };
  return all_scored(train_days) && all_scored(test_days) && avg_pctr_train > 0.0;
}

CampaignDataset split_campaign(std::string campaign_id, std::vector<DayPtr> days,
                               std::shared_ptr<const TokenPool> tokens, std::size_t train_days,
                               std::size_t test_days) {
  if (days.size() < train_days + test_days) {
    throw DataError("campaign " + campaign_id + " has " + std::to_string(days.size()) +
                    " days; need " + std::to_string(train_days + test_days));
  }
  CampaignDataset ds;
  ds.campaign_id = std::move(campaign_id);
  ds.tokens = std::move(tokens);
  ds.train_days.assign(days.begin(), days.begin() + static_cast<std::ptrdiff_t>(train_days));
  ds.test_days.assign(days.begin() + static_cast<std::ptrdiff_t>(train_days),
                      days.begin() + static_cast<std::ptrdiff_t>(train_days + test_days));
  ds.avg_pctr_train = mean_pctr(ds.train_days);
  return ds;
}

double mean_pctr(const std::vector<DayPtr>& days) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& d : days) {
    for (const auto& r : d->records) {
      if (!r.pctr) return 0.0;
      sum += *r.pctr;
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace rtb::ingest
