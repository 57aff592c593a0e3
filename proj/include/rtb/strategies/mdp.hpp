#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rtb/auction/replay.hpp"
#include "rtb/strategies/static.hpp"

namespace rtb::strategies {

// ---- DRLB state -----------------------------------------------------------------

// Feature subsets in ablation order; kFull7 adds the slot index t in front of State_6.
enum class StateScheme { kState6, kState5, kState4, kState3, kState2, kState1, kFull7 };

inline constexpr std::array<StateScheme, 6> kAblationSchemes{StateScheme::kState6, StateScheme::kState5,
                                                            StateScheme::kState4, StateScheme::kState3,
                                                            StateScheme::kState2, StateScheme::kState1};

std::string scheme_name(StateScheme scheme);
StateScheme parse_scheme(const std::string& text);
int scheme_size(StateScheme scheme);

// Raw (unnormalized) DRLB observation at the start of slot t.
struct DrlbObservation {
  int t = 0;
  int slot_count = 1;
  std::int64_t budget = 1;            // episode budget B
  std::int64_t budget_remaining = 0;  // B_t
  int rol = 0;                        // T - t
  double bcr = 0.0;                   // (B_{t-1} - B_t) / B_{t-1}
  double cpm = 0.0;                   // cost / wins * 1000 of the previous slot
  double win_rate = 0.0;
  double prev_pctr = 0.0;             // r_{t-1}
};

// Builds the observation from the stats of every finished slot. Per-slot rates use only
// the previous slot; cumulative rates pool all finished slots (BCR against B).
DrlbObservation observe_drlb(int t, int slot_count, std::int64_t budget, std::int64_t budget_remaining,
                             std::span<const auction::SlotStats> finished, bool cumulative_rates);

// Normalized features in the scheme's order: budgets and ROL over their initial values,
// CPM over the cap-price CPM (300 * 1000), r_{t-1} over `pctr_scale` (a running max).
std::vector<double> encode_drlb_state(const DrlbObservation& obs, StateScheme scheme, double pctr_scale);

// ---- FAB state ------------------------------------------------------------------

// [avbudget_ratio, cost_ratio, ctr, win_ratio], each clipped to [0, 1].
// avbudget_ratio = (B_rem / (T - t)) / B; the other three describe slot t-1 and are 0 at t = 0.
std::vector<double> encode_fab_state(int t, int slot_count, std::int64_t budget, std::int64_t budget_remaining,
                                     const auction::SlotStats* previous);

// ---- Actions and bids -------------------------------------------------------------

inline constexpr std::array<double, 7> kDrlbActions{-0.08, -0.03, -0.01, 0.0, 0.01, 0.03, 0.08};
inline constexpr int kNeutralAction = 3;

double drlb_lambda_step(double lambda_prev, int action_index);
// lambda_0 = avg_pctr / base_bid*.
double drlb_initial_lambda(const LinParams& lin);

double drlb_bid_unclipped(double pctr, double lambda);
int drlb_bid(double pctr, double lambda);

// base_bid* / prod(1 + beta) over the action history.
double drlb_base_bid(double base_bid, std::span<const int> actions);
// pctr * drlb_base_bid / avg_pctr.
double drlb_closed_form_unclipped(double pctr, const LinParams& lin, std::span<const int> actions);

inline constexpr double kFabActionBound = 0.99;

// Clips a to the action bound (warning once when clipping happens).
double clip_fab_action(double a);
// lin_bid_unclipped(pctr) * 1 / (1 + a).
double fab_bid_unclipped(double pctr, const LinParams& lin, double a);
int fab_bid(double pctr, const LinParams& lin, double a);
// base_bid* / (1 + a).
double fab_base_bid(double base_bid, double a);
int fab_closed_form_bid(double pctr, const LinParams& lin, double a);

// ---- Rewards ----------------------------------------------------------------------

enum class RewardVariant { kClk, kPctr, kDnn, kOp };

inline constexpr std::array<RewardVariant, 4> kAllRewards{RewardVariant::kClk, RewardVariant::kPctr,
                                                          RewardVariant::kDnn, RewardVariant::kOp};

std::string reward_name(RewardVariant v);
RewardVariant parse_reward(const std::string& text);

inline constexpr std::array<double, 4> kOpRewards{0.005, 0.001, -0.0025, -0.005};

double reward_op(std::int64_t clicks, std::int64_t cost, std::int64_t lin_clicks, std::int64_t lin_cost);

// CLK, PCTR and OP rewards from slot outcomes. OP requires `lin_slot`; DNN rewards are
// produced by the reward network and throw here.
double environment_reward(RewardVariant variant, const auction::SlotStats& slot,
                          const auction::SlotStats* lin_slot);

}  // namespace rtb::strategies
