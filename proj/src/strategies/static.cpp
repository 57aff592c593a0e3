#include "rtb/strategies/static.hpp"

#include <cmath>

#include "rtb/common/error.hpp"
#include "rtb/common/parallel.hpp"
#include "rtb/common/rounding.hpp"

namespace rtb::strategies {

void LinParams::validate() const {
  if (!(avg_pctr > 0.0)) throw ConfigError("avg-pctr", "LIN needs a positive average pCTR");
  if (base_bid < 0 || base_bid > kMaxBid) throw ConfigError("base-bid", "must be in [0, 300]");
}

double lin_bid_unclipped(double pctr, const LinParams& params) {
  if (!(params.avg_pctr > 0.0)) throw ConfigError("avg-pctr", "LIN needs a positive average pCTR");
  return pctr * params.base_bid / params.avg_pctr;
}

int lin_bid(double pctr, const LinParams& params) { return round_clip_bid(lin_bid_unclipped(pctr, params)); }

void OrtbParams::validate() const {
  if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("ortb-c", "must be finite and positive");
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ConfigError("ortb-lambda", "must be finite and positive");
}

double ortb_bid_unclipped(double pctr, const OrtbParams& p) {
  return std::sqrt(p.c / p.lambda * pctr + p.c * p.c) - p.c;
}

int ortb_bid(double pctr, const OrtbParams& params) { return round_clip_bid(ortb_bid_unclipped(pctr, params)); }

LinStrategy::LinStrategy(LinParams params) : params_(params) { params_.validate(); }

double LinStrategy::bid(const ingest::ImpressionRecord& record, const auction::BidContext&) {
  return lin_bid(record.pctr.value_or(0.0), params_);
}

OrtbStrategy::OrtbStrategy(OrtbParams params) : params_(params) { params_.validate(); }

double OrtbStrategy::bid(const ingest::ImpressionRecord& record, const auction::BidContext&) {
  return ortb_bid(record.pctr.value_or(0.0), params_);
}

void require_scored(std::span<const ingest::Episode> episodes) {
  for (const auto& ep : episodes) {
    for (const auto& r : ep.records()) {
      if (!r.pctr) throw DataError("day " + std::to_string(ep.date()) + " is not scored by the CTR model");
    }
  }
}

auction::Objective replay_lin(std::span<const ingest::Episode> episodes, int base_bid, double avg_pctr) {
  auction::Objective total;
  for (const auto& ep : episodes) {
    // Same expression as lin_bid_unclipped, so tuning and LinStrategy round identically.
    const auto r = auction::replay_episode(ep, [base_bid, avg_pctr](const ingest::ImpressionRecord& rec,
                                                                    const auction::BidContext&) {
      return *rec.pctr * base_bid / avg_pctr;
    });
    total.clicks += r.clicks;
    total.pctr_sum += r.pctr_sum;
  }
  return total;
}

TuneResult tune_base_bid(std::span<const ingest::Episode> train, double avg_pctr, unsigned jobs) {
  if (train.empty()) throw DataError("tune_base_bid needs at least one training episode");
  if (!(avg_pctr > 0.0)) throw ConfigError("avg-pctr", "LIN needs a positive average pCTR");
  require_scored(train);
  TuneResult out;
  out.candidates.resize(kMaxBid);
  parallel_for(kMaxBid, jobs, [&](std::size_t i) {
    out.candidates[i] = replay_lin(train, static_cast<int>(i) + 1, avg_pctr);
  });
  std::size_t best = 0;
  for (std::size_t i = 1; i < out.candidates.size(); ++i) {
    if (auction::better(out.candidates[i], out.candidates[best])) best = i;
  }
  out.base_bid = static_cast<int>(best) + 1;
  out.clicks = out.candidates[best].clicks;
  out.pctr_sum = out.candidates[best].pctr_sum;
  return out;
}

std::vector<int> per_slot_optimal_base_bid(const ingest::Episode& episode, int slot_count, double avg_pctr,
                                           ingest::BudgetFraction slot_fraction) {
  if (!(avg_pctr > 0.0)) throw ConfigError("avg-pctr", "LIN needs a positive average pCTR");
  const auto ep = episode.with_slots(slot_count);
  require_scored(std::span<const ingest::Episode>(&ep, 1));
  std::vector<int> out(static_cast<std::size_t>(slot_count), 0);
  for (int t = 0; t < slot_count; ++t) {
    const auto recs = ep.slot(t);
    bool any_click = false;
    for (const auto& r : recs) any_click |= r.click != 0;
    if (!any_click) continue;
    const std::int64_t budget = slot_fraction.apply(ep.slot_cost(t));
    auction::Objective best{-1, 0.0};
    int best_bid = 0;
    for (int b = 0; b <= kMaxBid; ++b) {
      std::int64_t remaining = budget;
      auction::Objective o;
      for (const auto& r : recs) {
        if (remaining <= 0) break;  // same spend-out rule as the replay engine
        const int price = round_clip_bid(*r.pctr * b / avg_pctr);
        const auto won = auction::settle_auction(price, r, remaining);
        if (!won.won && price >= r.market_price) break;
        if (won.won) {
          remaining -= won.cost;
          o.clicks += won.click;
          o.pctr_sum += won.pctr;
        }
      }
      if (auction::better(o, best)) {
        best = o;
        best_bid = b;
      }
    }
    out[static_cast<std::size_t>(t)] = best_bid;
  }
  return out;
}

double base_bid_deviation(double b0, std::span<const double> b) {
  if (b0 == 0.0) throw ConfigError("b0", "training-optimal base bid must be non-zero");
  if (b.empty()) throw ConfigError("b", "need at least one base bid");
  double s = 0.0;
  for (const double x : b) s += (x / b0 - 1.0) * (x / b0 - 1.0);
  return std::sqrt(s) / static_cast<double>(b.size());
}

}  // namespace rtb::strategies
