#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rtb/ingest/record.hpp"

namespace rtb::ingest {

inline constexpr std::array<int, 3> kSupportedSlotCounts{24, 48, 96};

bool is_supported_slot_count(int slot_count);

// floor(second_of_day / (86400 / slot_count)). Throws ConfigError for an unsupported slot
// count and std::out_of_range for a timestamp outside [0, 86400).
int assign_time_slot(int second_of_day, int slot_count);

// Budget as a fraction 1/denominator of the day's total market-price cost.
struct BudgetFraction {
  int denominator = 2;

  double value() const { return 1.0 / denominator; }
  std::string label() const { return "1/" + std::to_string(denominator); }
  // Integer budgets round down.
  std::int64_t apply(std::int64_t total_cost) const { return total_cost / denominator; }

  // Accepts "1/2", "2" or "0.5"; only 1/2, 1/4, 1/8, 1/16 are valid.
  static BudgetFraction parse(const std::string& text);

  friend bool operator==(BudgetFraction, BudgetFraction) = default;
  friend auto operator<=>(BudgetFraction, BudgetFraction) = default;
};

inline constexpr std::array<BudgetFraction, 4> kStandardFractions{
    BudgetFraction{2}, BudgetFraction{4}, BudgetFraction{8}, BudgetFraction{16}};

// All records of one calendar day, chronologically ordered.
struct DayLog {
  std::int32_t date = 0;
  std::vector<ImpressionRecord> records;
  std::int64_t total_cost = 0;
};

using DayPtr = std::shared_ptr<const DayLog>;

// One ad-delivery period: a day split into equal time slots with a budget. Episodes
// share the immutable day log, so re-slotting or re-budgeting is cheap.
class Episode {
 public:
  Episode(DayPtr day, int slot_count, BudgetFraction fraction);

  Episode with_fraction(BudgetFraction fraction) const { return Episode(day_, slot_count_, fraction); }
  Episode with_slots(int slot_count) const { return Episode(day_, slot_count, fraction_); }
  // Overrides the budget (e.g. the full day cost in tests); the fraction tag is kept.
  Episode with_budget(std::int64_t budget) const;

  std::int32_t date() const { return day_->date; }
  int slot_count() const { return slot_count_; }
  std::int64_t total_cost() const { return day_->total_cost; }
  std::int64_t budget() const { return budget_; }
  BudgetFraction fraction() const { return fraction_; }
  const DayPtr& day() const { return day_; }

  std::span<const ImpressionRecord> records() const { return day_->records; }
  std::size_t size() const { return day_->records.size(); }
  std::span<const ImpressionRecord> slot(int t) const;
  std::size_t slot_begin(int t) const { return offsets_.at(static_cast<std::size_t>(t)); }
  std::int64_t slot_cost(int t) const;

 private:
  DayPtr day_;
  int slot_count_;
  BudgetFraction fraction_;
  std::int64_t budget_;
  std::vector<std::size_t> offsets_;  // slot_count + 1 entries
};

// Groups a chronologically sorted stream into day logs. Throws DataError when the
// stream is not sorted. Days whose total cost is zero are dropped with a warning.
std::vector<DayPtr> group_days(std::vector<ImpressionRecord> records);

std::vector<Episode> build_episodes(std::vector<ImpressionRecord> records, int slot_count,
                                    BudgetFraction fraction);

struct CampaignDataset {
  std::string campaign_id;
  std::vector<DayPtr> train_days;
  std::vector<DayPtr> test_days;
  std::shared_ptr<const TokenPool> tokens;
  double avg_pctr_train = 0.0;  // > 0 once the CTR model has scored the training days

  std::vector<Episode> train_episodes(int slot_count, BudgetFraction fraction) const;
  std::vector<Episode> test_episodes(int slot_count, BudgetFraction fraction) const;
  bool scored() const;
};

// First `train_days` dates train, the following `test_days` dates test. Throws DataError
// when fewer days are available.
CampaignDataset split_campaign(std::string campaign_id, std::vector<DayPtr> days,
                               std::shared_ptr<const TokenPool> tokens, std::size_t train_days = 7,
                               std::size_t test_days = 3);

// Mean pctr over every record of the given days; 0 when unscored or empty.
double mean_pctr(const std::vector<DayPtr>& days);

}  // namespace rtb::ingest
