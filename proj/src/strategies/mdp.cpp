#include "rtb/strategies/mdp.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

#include "rtb/common/error.hpp"
#include "rtb/common/log.hpp"
#include "rtb/common/rounding.hpp"

namespace rtb::strategies {
namespace {

constexpr double kCapCpm = 300.0 * 1000.0;

double clip01(double x) { return std::clamp(x, 0.0, 1.0); }

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

std::string scheme_name(StateScheme s) {
  switch (s) {
    case StateScheme::kState1: return "State_1";
    case StateScheme::kState2: return "State_2";
    case StateScheme::kState3: return "State_3";
    case StateScheme::kState4: return "State_4";
    case StateScheme::kState5: return "State_5";
    case StateScheme::kState6: return "State_6";
    case StateScheme::kFull7: return "Full_7";
  }
  return "?";
}

StateScheme parse_scheme(const std::string& text) {
  auto s = lower(text);
  s.erase(std::remove(s.begin(), s.end(), '_'), s.end());
  if (s == "state1") return StateScheme::kState1;
  if (s == "state2") return StateScheme::kState2;
  if (s == "state3") return StateScheme::kState3;
  if (s == "state4") return StateScheme::kState4;
  if (s == "state5") return StateScheme::kState5;
  if (s == "state6") return StateScheme::kState6;
  if (s == "full7" || s == "full") return StateScheme::kFull7;
  throw ConfigError("state-scheme", "unknown state scheme '" + text + "' (state1..state6, full7)");
}

int scheme_size(StateScheme s) {
  switch (s) {
    case StateScheme::kState1: return 1;
    case StateScheme::kState2: return 2;
    case StateScheme::kState3: return 3;
    case StateScheme::kState4: return 4;
    case StateScheme::kState5: return 5;
    case StateScheme::kState6: return 6;
    case StateScheme::kFull7: return 7;
  }
  throw ConfigError("state-scheme", "unknown state scheme");
}

DrlbObservation observe_drlb(int t, int slot_count, std::int64_t budget, std::int64_t budget_remaining,
                             std::span<const auction::SlotStats> finished, bool cumulative_rates) {
  DrlbObservation o;
  o.t = t;
  o.slot_count = slot_count;
  o.budget = budget;
  o.budget_remaining = budget_remaining;
  o.rol = slot_count - t;
  if (finished.empty()) return o;
  const auto& prev = finished.back();
  o.prev_pctr = prev.pctr_sum;
  if (!cumulative_rates) {
    o.bcr = prev.budget_cost_ratio;
    o.cpm = prev.cpm;
    o.win_rate = prev.win_rate;
    return o;
  }
  std::int64_t seen = 0, won = 0, cost = 0;
  for (const auto& s : finished) {
    seen += s.imps_seen;
    won += s.imps_won;
    cost += s.cost;
  }
  o.bcr = budget > 0 ? static_cast<double>(budget - budget_remaining) / static_cast<double>(budget) : 0.0;
  o.cpm = won > 0 ? static_cast<double>(cost) / static_cast<double>(won) * 1000.0 : 0.0;
  o.win_rate = seen > 0 ? static_cast<double>(won) / static_cast<double>(seen) : 0.0;
  return o;
}

std::vector<double> encode_drlb_state(const DrlbObservation& o, StateScheme scheme, double pctr_scale) {
  const double b = o.budget > 0 ? static_cast<double>(o.budget_remaining) / static_cast<double>(o.budget) : 0.0;
  const double rol = static_cast<double>(o.rol) / std::max(1, o.slot_count);
  const double cpm = o.cpm / kCapCpm;
  const double r = pctr_scale > 0.0 ? o.prev_pctr / pctr_scale : 0.0;
  switch (scheme) {
    case StateScheme::kState1: return {o.bcr};
    case StateScheme::kState2: return {o.bcr, cpm};
    case StateScheme::kState3: return {o.bcr, cpm, o.win_rate};
    case StateScheme::kState4: return {b, o.bcr, cpm, o.win_rate};
    case StateScheme::kState5: return {b, o.bcr, cpm, o.win_rate, r};
    case StateScheme::kState6: return {b, rol, o.bcr, cpm, o.win_rate, r};
    case StateScheme::kFull7:
      return {static_cast<double>(o.t) / std::max(1, o.slot_count), b, rol, o.bcr, cpm, o.win_rate, r};
  }
  throw ConfigError("state-scheme", "unknown state scheme");
}

std::vector<double> encode_fab_state(int t, int slot_count, std::int64_t budget, std::int64_t budget_remaining,
                                     const auction::SlotStats* previous) {
  const int left = std::max(1, slot_count - t);
  const double av = budget > 0 ? static_cast<double>(budget_remaining) / left / static_cast<double>(budget) : 0.0;
  std::vector<double> s{clip01(av), 0.0, 0.0, 0.0};
  if (previous) {
    s[1] = clip01(previous->budget_cost_ratio);
    s[2] = previous->imps_won > 0 ? clip01(static_cast<double>(previous->clicks) / static_cast<double>(previous->imps_won))
                                  : 0.0;
    s[3] = clip01(previous->win_rate);
  }
  return s;
}

double drlb_lambda_step(double lambda_prev, int action_index) {
  if (action_index < 0 || action_index >= static_cast<int>(kDrlbActions.size())) {
    throw std::out_of_range("DRLB action index " + std::to_string(action_index));
  }
  return lambda_prev * (1.0 + kDrlbActions[static_cast<std::size_t>(action_index)]);
}

double drlb_initial_lambda(const LinParams& lin) {
  lin.validate();
  if (lin.base_bid <= 0) throw ConfigError("base-bid", "DRLB needs a positive base bid");
  return lin.avg_pctr / lin.base_bid;
}

double drlb_bid_unclipped(double pctr, double lambda) {
  if (!(lambda > 0.0)) throw NumericalError("DRLB lambda must stay positive");
  return pctr / lambda;
}

int drlb_bid(double pctr, double lambda) { return round_clip_bid(drlb_bid_unclipped(pctr, lambda)); }

double drlb_base_bid(double base_bid, std::span<const int> actions) {
  double product = 1.0;
  for (const int a : actions) {
    if (a < 0 || a >= static_cast<int>(kDrlbActions.size())) throw std::out_of_range("DRLB action index");
    product *= 1.0 + kDrlbActions[static_cast<std::size_t>(a)];
  }
  return base_bid / product;
}

double drlb_closed_form_unclipped(double pctr, const LinParams& lin, std::span<const int> actions) {
  return pctr * drlb_base_bid(lin.base_bid, actions) / lin.avg_pctr;
}

double clip_fab_action(double a) {
  static std::atomic<bool> warned{false};
  if (a > kFabActionBound || a < -kFabActionBound || std::isnan(a)) {
    if (!warned.exchange(true)) log::warn("FAB action outside [-0.99, 0.99] clipped to the bound");
    if (std::isnan(a)) throw NumericalError("FAB action is NaN");
    return std::clamp(a, -kFabActionBound, kFabActionBound);
  }
  return a;
}

double fab_bid_unclipped(double pctr, const LinParams& lin, double a) {
  return lin_bid_unclipped(pctr, lin) * (1.0 / (1.0 + clip_fab_action(a)));
}

int fab_bid(double pctr, const LinParams& lin, double a) { return round_clip_bid(fab_bid_unclipped(pctr, lin, a)); }

double fab_base_bid(double base_bid, double a) { return base_bid / (1.0 + clip_fab_action(a)); }

int fab_closed_form_bid(double pctr, const LinParams& lin, double a) {
  return round_clip_bid(pctr * fab_base_bid(lin.base_bid, a) / lin.avg_pctr);
}

std::string reward_name(RewardVariant v) {
  switch (v) {
    case RewardVariant::kClk: return "CLK";
    case RewardVariant::kPctr: return "PCTR";
    case RewardVariant::kDnn: return "DNN";
    case RewardVariant::kOp: return "OP";
  }
  return "?";
}

RewardVariant parse_reward(const std::string& text) {
  const auto s = lower(text);
  if (s == "clk") return RewardVariant::kClk;
  if (s == "pctr") return RewardVariant::kPctr;
  if (s == "dnn") return RewardVariant::kDnn;
  if (s == "op") return RewardVariant::kOp;
  throw ConfigError("reward", "unknown reward '" + text + "' (clk, pctr, dnn, op)");
}

double reward_op(std::int64_t clicks, std::int64_t cost, std::int64_t lin_clicks, std::int64_t lin_cost) {
  if (clicks >= lin_clicks) return cost < lin_cost ? kOpRewards[0] : kOpRewards[1];
  return cost < lin_cost ? kOpRewards[2] : kOpRewards[3];
}

double environment_reward(RewardVariant variant, const auction::SlotStats& slot,
                          const auction::SlotStats* lin_slot) {
  switch (variant) {
    case RewardVariant::kClk: return static_cast<double>(slot.clicks);
    case RewardVariant::kPctr: return slot.pctr_sum;
    case RewardVariant::kOp:
      if (!lin_slot) throw ConfigError("reward", "OP reward needs a LIN baseline replay of the slot");
      return reward_op(slot.clicks, slot.cost, lin_slot->clicks, lin_slot->cost);
    case RewardVariant::kDnn:
      throw ConfigError("reward", "DNN rewards come from the reward network");
  }
  throw ConfigError("reward", "unknown reward variant");
}

}  // namespace rtb::strategies
