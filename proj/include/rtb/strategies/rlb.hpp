#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rtb/auction/replay.hpp"
#include "rtb/ingest/episode.hpp"

namespace rtb::strategies {

// Value table of a simplified dynamic-programming bidder. V(n, b) is the expected pctr
// collected over n auctions with b budget units left, when each auction draws a pctr
// and a market price independently from the empirical histograms:
//   V(n, b) = V(n-1, b) + sum_{d <= b} m(d) * E_theta[max(0, theta - (V(n-1, b) - V(n-1, b-d)))]
class RlbTable {
 public:
  RlbTable() = default;

  // pctr_values/probabilities describe the pctr buckets; price_pmf[d] is P(price = d).
  static RlbTable build(std::vector<double> pctr_values, std::vector<double> pctr_probabilities,
                        std::vector<double> price_pmf, int steps, int budget_units);

  int steps() const { return steps_; }
  int budget_units() const { return budget_units_; }
  double value(int n, int b) const { return values_.at(static_cast<std::size_t>(n) * stride() + static_cast<std::size_t>(b)); }

  // Largest d <= min(300, b) with pctr + V(n-1, b-d) >= V(n-1, b); n >= 1.
  int bid(int n, int b, double pctr) const;

  const std::vector<double>& pctr_values() const { return pctr_values_; }
  const std::vector<double>& pctr_probabilities() const { return pctr_probs_; }
  const std::vector<double>& price_pmf() const { return price_pmf_; }

 private:
  std::size_t stride() const { return static_cast<std::size_t>(budget_units_) + 1; }

  int steps_ = 0;
  int budget_units_ = 0;
  std::vector<double> pctr_values_, pctr_probs_, price_pmf_;
  std::vector<double> values_;
};

struct RlbConfig {
  int budget_units = 1000;
  int pctr_buckets = 100;
  // The table horizon N is chosen so that the budget per step at the start of a day sits
  // at budget_units / headroom, leaving room for the bidder to get ahead of pace.
  double headroom = 2.0;
  int max_steps = 500;
};

struct RlbModel {
  RlbTable table;
  std::vector<double> slot_volume;  // mean impressions per slot over the training days
  int slot_count = 96;
};

// Histograms from the training episodes (prices native 0..300, pctr in equal-count
// quantile buckets). Throws DataError when the episodes hold no impressions.
RlbModel rlb_lite_build(std::span<const ingest::Episode> train, const RlbConfig& config = {});

// Bids from the table with the remaining budget rescaled to the table horizon:
// b' = min(G, b_rem * N / n_rem), where n_rem is re-anchored at every slot boundary from
// the training slot volumes.
class RlbStrategy final : public auction::BidStrategy {
 public:
  explicit RlbStrategy(const RlbModel& model);
  std::string name() const override { return "RLB"; }
  void begin_episode(const ingest::Episode& episode) override;
  void begin_slot(int slot, const auction::SlotStats* previous, std::int64_t budget_remaining) override;
  double bid(const ingest::ImpressionRecord& record, const auction::BidContext& context) override;

 private:
  const RlbModel& model_;
  int slot_count_ = 0;
  double remaining_imps_ = 1.0;
};

}  // namespace rtb::strategies
