#include "rtb/strategies/rlb.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rtb/common/error.hpp"
#include "rtb/common/rounding.hpp"

namespace rtb::strategies {

RlbTable RlbTable::build(std::vector<double> pctr_values, std::vector<double> pctr_probabilities,
                         std::vector<double> price_pmf, int steps, int budget_units) {
  if (pctr_values.empty() || pctr_values.size() != pctr_probabilities.size()) {
    throw DataError("RLB needs a non-empty pctr histogram");
  }
  if (price_pmf.empty()) throw DataError("RLB needs a non-empty market-price histogram");
  if (steps < 0 || budget_units < 0) throw ConfigError("rlb", "steps and budget units must be >= 0");
  if (price_pmf.size() > static_cast<std::size_t>(kMaxBid) + 1) price_pmf.resize(static_cast<std::size_t>(kMaxBid) + 1);

  // Sort buckets by value so E[max(0, theta - x)] is a suffix sum after a binary search.
  std::vector<std::size_t> order(pctr_values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pctr_values[a] < pctr_values[b]; });
  RlbTable t;
  for (const auto i : order) {
    t.pctr_values_.push_back(pctr_values[i]);
    t.pctr_probs_.push_back(pctr_probabilities[i]);
  }
  t.price_pmf_ = std::move(price_pmf);
  t.steps_ = steps;
  t.budget_units_ = budget_units;
  const std::size_t k = t.pctr_values_.size();
  std::vector<double> suffix_p(k + 1, 0.0), suffix_pv(k + 1, 0.0);
  for (std::size_t i = k; i-- > 0;) {
    suffix_p[i] = suffix_p[i + 1] + t.pctr_probs_[i];
    suffix_pv[i] = suffix_pv[i + 1] + t.pctr_probs_[i] * t.pctr_values_[i];
  }
  auto expected_excess = [&](double x) {
    const auto first = static_cast<std::size_t>(
        std::upper_bound(t.pctr_values_.begin(), t.pctr_values_.end(), x) - t.pctr_values_.begin());
    return suffix_pv[first] - x * suffix_p[first];
  };

  const std::size_t stride = t.stride();
  t.values_.assign((static_cast<std::size_t>(steps) + 1) * stride, 0.0);
  const int max_price = static_cast<int>(t.price_pmf_.size()) - 1;
  for (int n = 1; n <= steps; ++n) {
    const double* prev = t.values_.data() + static_cast<std::size_t>(n - 1) * stride;
    double* cur = t.values_.data() + static_cast<std::size_t>(n) * stride;
    for (int b = 0; b <= budget_units; ++b) {
      double gain = 0.0;
      const int top = std::min(b, max_price);
      for (int d = 0; d <= top; ++d) {
        const double m = t.price_pmf_[static_cast<std::size_t>(d)];
        if (m == 0.0) continue;
        gain += m * expected_excess(prev[b] - prev[b - d]);
      }
      cur[b] = prev[b] + gain;
    }
  }
  return t;
}

int RlbTable::bid(int n, int b, double pctr) const {
  if (n < 1 || n > steps_) throw std::out_of_range("RLB step index");
  b = std::clamp(b, 0, budget_units_);
  const std::size_t row = static_cast<std::size_t>(n - 1) * stride();
  const double keep = values_[row + static_cast<std::size_t>(b)];
  int best = 0;
  const int top = std::min(b, kMaxBid);
  for (int d = 0; d <= top; ++d) {
    if (pctr + values_[row + static_cast<std::size_t>(b - d)] >= keep) best = d;
  }
  return best;
}

RlbModel rlb_lite_build(std::span<const ingest::Episode> train, const RlbConfig& config) {
  if (train.empty()) throw DataError("RLB needs training episodes");
  if (config.budget_units < 1 || config.pctr_buckets < 1) throw ConfigError("rlb", "granularity must be positive");
  std::vector<double> pctrs;
  std::vector<double> price_count(static_cast<std::size_t>(kMaxBid) + 1, 0.0);
  RlbModel model;
  model.slot_count = train.front().slot_count();
  model.slot_volume.assign(static_cast<std::size_t>(model.slot_count), 0.0);
  double price_sum = 0.0;
  double budget_share = 0.0;
  for (const auto& ep : train) {
    if (ep.slot_count() != model.slot_count) throw DataError("RLB training episodes disagree on slot count");
    for (const auto& r : ep.records()) {
      if (!r.pctr) throw DataError("RLB needs scored episodes");
      pctrs.push_back(*r.pctr);
      price_count[static_cast<std::size_t>(std::clamp(r.market_price, 0, kMaxBid))] += 1.0;
      price_sum += r.market_price;
    }
    for (int t = 0; t < model.slot_count; ++t) {
      model.slot_volume[static_cast<std::size_t>(t)] += static_cast<double>(ep.slot(t).size());
    }
    budget_share += ep.total_cost() > 0 ? static_cast<double>(ep.budget()) / static_cast<double>(ep.total_cost()) : 0.0;
  }
  if (pctrs.empty()) throw DataError("RLB histograms are empty");
  for (auto& v : model.slot_volume) v /= static_cast<double>(train.size());
  const double n = static_cast<double>(pctrs.size());
  for (auto& c : price_count) c /= n;

  std::sort(pctrs.begin(), pctrs.end());
  const std::size_t buckets = std::min<std::size_t>(static_cast<std::size_t>(config.pctr_buckets), pctrs.size());
  std::vector<double> values, probs;
  for (std::size_t q = 0; q < buckets; ++q) {
    const std::size_t lo = q * pctrs.size() / buckets;
    const std::size_t hi = (q + 1) * pctrs.size() / buckets;
    if (hi <= lo) continue;
    const double sum = std::accumulate(pctrs.begin() + static_cast<std::ptrdiff_t>(lo),
                                       pctrs.begin() + static_cast<std::ptrdiff_t>(hi), 0.0);
    values.push_back(sum / static_cast<double>(hi - lo));
    probs.push_back(static_cast<double>(hi - lo) / n);
  }
  // Budget per impression at the episode's fraction.
  const double per_imp = budget_share / static_cast<double>(train.size()) * price_sum / n;
  int steps = per_imp > 0 ? static_cast<int>(std::floor(config.budget_units / (config.headroom * per_imp))) : 1;
  steps = std::clamp(steps, 1, config.max_steps);
  model.table = RlbTable::build(std::move(values), std::move(probs), std::move(price_count), steps, config.budget_units);
  return model;
}

RlbStrategy::RlbStrategy(const RlbModel& model) : model_(model) {}

void RlbStrategy::begin_episode(const ingest::Episode& episode) {
  if (episode.slot_count() != model_.slot_count) {
    throw ConfigError("slots", "RLB model was built for " + std::to_string(model_.slot_count) + " slots");
  }
  slot_count_ = episode.slot_count();
}

void RlbStrategy::begin_slot(int t, const auction::SlotStats*, std::int64_t) {
  double rest = 0.0;
  for (int s = t; s < slot_count_; ++s) rest += model_.slot_volume[static_cast<std::size_t>(s)];
  remaining_imps_ = std::max(1.0, rest);
}

double RlbStrategy::bid(const ingest::ImpressionRecord& r, const auction::BidContext& c) {
  const auto& table = model_.table;
  const double scaled = static_cast<double>(c.budget_remaining) * table.steps() / remaining_imps_;
  const int b = static_cast<int>(std::min<double>(table.budget_units(), std::floor(scaled)));
  remaining_imps_ = std::max(1.0, remaining_imps_ - 1.0);
  return table.bid(table.steps(), b, r.pctr.value_or(0.0));
}

}  // namespace rtb::strategies
