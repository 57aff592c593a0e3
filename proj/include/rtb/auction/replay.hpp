#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rtb/common/error.hpp"
#include "rtb/common/rounding.hpp"
#include "rtb/ingest/episode.hpp"

namespace rtb::auction {

struct AuctionOutcome {
  bool won = false;
  std::int64_t cost = 0;
  int click = 0;
  double pctr = 0.0;
};

// Second-price replay against a logged market price. The bid is clipped to [0, 300]
// first; a win also requires the price to be affordable from the remaining budget.
inline AuctionOutcome settle_auction(std::int64_t bid, const ingest::ImpressionRecord& record,
                                     std::int64_t budget_remaining) {
  const std::int64_t clipped = std::clamp<std::int64_t>(bid, 0, kMaxBid);
  AuctionOutcome out;
  if (clipped >= record.market_price && record.market_price <= budget_remaining) {
    out.won = true;
    out.cost = record.market_price;
    out.click = record.click;
    out.pctr = record.pctr.value_or(0.0);
  }
  return out;
}

struct SlotStats {
  int slot = 0;
  std::int64_t imps_seen = 0;
  std::int64_t imps_won = 0;
  std::int64_t clicks = 0;
  double pctr_sum = 0.0;
  std::int64_t cost = 0;
  std::int64_t budget_start = 0;
  std::int64_t budget_remaining_at_end = 0;
  // Impressions from the spend-out point on: the one the budget could not pay for, then
  // every later one (no longer bid on).
  std::int64_t imps_lost_to_budget = 0;
  std::int64_t clicks_lost_to_budget = 0;
  double win_rate = 0.0;           // imps_won / imps_seen
  double cpm = 0.0;                // cost / imps_won * 1000
  double budget_cost_ratio = 0.0;  // cost / budget_start

  void finalize();
  friend bool operator==(const SlotStats&, const SlotStats&) = default;
};

struct EpisodeResult {
  std::int32_t date = 0;
  std::int64_t budget = 0;
  std::int64_t imps = 0;
  std::int64_t wins = 0;
  std::int64_t clicks = 0;
  double pctr_sum = 0.0;
  std::int64_t cost = 0;
  // First slot in which a winnable impression could not be paid for.
  std::optional<int> early_stop_slot;
  std::optional<std::size_t> early_stop_index;
  std::int64_t foregone_clicks = 0;
  std::vector<SlotStats> slots;

  friend bool operator==(const EpisodeResult&, const EpisodeResult&) = default;
};

struct BidContext {
  int slot = 0;
  int slot_count = 0;
  std::int64_t budget = 0;
  std::int64_t budget_remaining = 0;
};

class BidStrategy {
 public:
  virtual ~BidStrategy() = default;
  virtual std::string name() const = 0;
  virtual void begin_episode(const ingest::Episode& episode) { (void)episode; }
  // Called exactly once before each slot, with the previous slot's stats (nullptr at t=0).
  virtual void begin_slot(int slot, const SlotStats* previous, std::int64_t budget_remaining) {
    (void)slot;
    (void)previous;
    (void)budget_remaining;
  }
  // Real-valued bid; the engine rounds half up and clips to [0, 300].
  virtual double bid(const ingest::ImpressionRecord& record, const BidContext& context) = 0;
  virtual void end_episode(const EpisodeResult& result) { (void)result; }
};

// Core replay loop. `bid_fn(record, context) -> double` and
// `slot_fn(slot, const SlotStats* previous, budget_remaining)` are called in the same
// pattern as BidStrategy. After the spend-out point bid_fn is no longer called.
template <typename BidFn, typename SlotFn>
EpisodeResult replay_episode(const ingest::Episode& episode, BidFn&& bid_fn, SlotFn&& slot_fn) {
  EpisodeResult result;
  result.date = episode.date();
  result.budget = episode.budget();
  result.slots.reserve(static_cast<std::size_t>(episode.slot_count()));
  std::int64_t remaining = episode.budget();
  BidContext ctx{0, episode.slot_count(), episode.budget(), remaining};
  std::size_t global = 0;
  // The first winnable impression the budget cannot pay for spends the day out: bidding
  // stops there, so a larger budget never wins fewer auctions on the same bids.
  bool spent_out = false;
  for (int t = 0; t < episode.slot_count(); ++t) {
    slot_fn(t, t == 0 ? static_cast<const SlotStats*>(nullptr) : &result.slots.back(), remaining);
    SlotStats s;
    s.slot = t;
    s.budget_start = remaining;
    ctx.slot = t;
    for (const auto& rec : episode.slot(t)) {
      ++s.imps_seen;
      bool winnable = true;
      if (remaining > 0 && !spent_out) {
        ctx.budget_remaining = remaining;
        const double raw = bid_fn(rec, ctx);
        if (!std::isfinite(raw)) {
          throw NumericalError("non-finite bid in slot " + std::to_string(t) + " of day " +
                               std::to_string(episode.date()));
        }
        const int price = round_clip_bid(raw);
        const auto outcome = settle_auction(price, rec, remaining);
        if (outcome.won) {
          ++s.imps_won;
          s.clicks += outcome.click;
          s.pctr_sum += outcome.pctr;
          s.cost += outcome.cost;
          remaining -= outcome.cost;
          ++global;
          continue;
        }
        winnable = price >= rec.market_price;
      }
      if (winnable) {
        spent_out = true;
        ++s.imps_lost_to_budget;
        s.clicks_lost_to_budget += rec.click;
        if (!result.early_stop_slot) {
          result.early_stop_slot = t;
          result.early_stop_index = global;
        }
      }
      ++global;
    }
    s.budget_remaining_at_end = remaining;
    s.finalize();
    result.imps += s.imps_seen;
    result.wins += s.imps_won;
    result.clicks += s.clicks;
    result.pctr_sum += s.pctr_sum;
    result.cost += s.cost;
    result.foregone_clicks += s.clicks_lost_to_budget;
    result.slots.push_back(s);
  }
  return result;
}

template <typename BidFn>
EpisodeResult replay_episode(const ingest::Episode& episode, BidFn&& bid_fn) {
  return replay_episode(episode, std::forward<BidFn>(bid_fn), [](int, const SlotStats*, std::int64_t) {});
}

// Replays `episode` against `strategy`, calling begin_episode / begin_slot / end_episode.
// Throws DataError for a non-positive budget and NumericalError for a non-finite bid.
EpisodeResult run_episode(BidStrategy& strategy, const ingest::Episode& episode);

struct Objective {
  std::int64_t clicks = 0;
  double pctr_sum = 0.0;
};

Objective objective_value(const EpisodeResult& result);

// Clicks first, pctr_sum as the tie-breaker.
inline bool better(const Objective& a, const Objective& b) {
  return a.clicks != b.clicks ? a.clicks > b.clicks : a.pctr_sum > b.pctr_sum;
}

std::string to_json_line(const EpisodeResult& result, const std::string& strategy);
void write_slot_trace_csv(std::ostream& out, const EpisodeResult& result);
void write_slot_trace_header(std::ostream& out);
void write_slot_trace_rows(std::ostream& out, const EpisodeResult& result, const std::string& label);

// Strategy that bids the same value for every impression.
class ConstantStrategy final : public BidStrategy {
 public:
  explicit ConstantStrategy(double value) : value_(value) {}
  std::string name() const override { return "constant"; }
  double bid(const ingest::ImpressionRecord&, const BidContext&) override { return value_; }

 private:
  double value_;
};

}  // namespace rtb::auction
