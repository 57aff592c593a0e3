#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rtb/auction/replay.hpp"
#include "rtb/ingest/episode.hpp"

namespace rtb::strategies {

struct LinParams {
  int base_bid = 1;
  double avg_pctr = 0.0;
  void validate() const;
  friend bool operator==(const LinParams&, const LinParams&) = default;
};

// pctr * base_bid / avg_pctr before rounding and clipping.
double lin_bid_unclipped(double pctr, const LinParams& params);
int lin_bid(double pctr, const LinParams& params);

struct OrtbParams {
  double c = 34.0;
  double lambda = 5.2e-7;
  void validate() const;
};

double ortb_bid_unclipped(double pctr, const OrtbParams& params);
int ortb_bid(double pctr, const OrtbParams& params);

class LinStrategy final : public auction::BidStrategy {
 public:
  explicit LinStrategy(LinParams params);
  std::string name() const override { return "LIN"; }
  double bid(const ingest::ImpressionRecord& record, const auction::BidContext&) override;

 private:
  LinParams params_;
};

class OrtbStrategy final : public auction::BidStrategy {
 public:
  explicit OrtbStrategy(OrtbParams params);
  std::string name() const override { return "ORTB"; }
  double bid(const ingest::ImpressionRecord& record, const auction::BidContext&) override;

 private:
  OrtbParams params_;
};

// Replays LIN with one base bid over the episodes and sums the objective.
auction::Objective replay_lin(std::span<const ingest::Episode> episodes, int base_bid, double avg_pctr);

struct TuneResult {
  int base_bid = 0;
  std::int64_t clicks = 0;
  double pctr_sum = 0.0;
  std::vector<auction::Objective> candidates;  // index b-1 holds base bid b
};

// Exhaustive search over base bids 1..300 on the training episodes (each under its own
// budget). Ties: more clicks, then higher pctr_sum, then lower base bid.
TuneResult tune_base_bid(std::span<const ingest::Episode> train, double avg_pctr, unsigned jobs = 1);

// Ground-truth base bid per slot: each slot is replayed alone with budget
// floor(slot cost * fraction) over the grid 0..300. Slots without clicks give 0.
std::vector<int> per_slot_optimal_base_bid(const ingest::Episode& episode, int slot_count, double avg_pctr,
                                           ingest::BudgetFraction slot_fraction = ingest::BudgetFraction{2});

// sqrt(sum_i (b_i / b0 - 1)^2) / N.
double base_bid_deviation(double b0, std::span<const double> b);

// Throws DataError when any record lacks a pctr.
void require_scored(std::span<const ingest::Episode> episodes);

}  // namespace rtb::strategies
