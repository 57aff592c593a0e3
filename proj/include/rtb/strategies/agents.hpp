#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rtb/auction/replay.hpp"
#include "rtb/rl/agents.hpp"
#include "rtb/strategies/mdp.hpp"
#include "rtb/strategies/static.hpp"

namespace rtb::strategies {

// Regression net for the episode-return reward: maps quantized (state, action) pairs
// (2 decimals per feature) to the best episode return seen with that pair.
class RewardNetwork {
 public:
  RewardNetwork() = default;
  RewardNetwork(int state_size, int width, int hidden_layers, double learning_rate, std::uint64_t seed);

  using Key = std::vector<std::int64_t>;
  static Key quantize(std::span<const double> state, double action);

  // Raises every pair's stored value to at least `episode_return`.
  void record_episode(const std::vector<std::pair<std::vector<double>, double>>& pairs, double episode_return);
  const std::map<Key, double>& table() const { return table_; }

  // `steps` Adam steps of mean squared error on uniformly sampled table entries.
  double fit(int steps, int batch, std::mt19937_64& rng);
  double predict(std::span<const double> state, double action) const;
  const rl::Mlp& net() const { return net_; }

 private:
  rl::Mlp net_;
  rl::Adam opt_;
  std::map<Key, double> table_;
  std::vector<std::pair<std::vector<double>, Key>> inputs_;  // one per table entry
};

struct AgentConfig {
  int slots = 96;
  int epochs = 40;
  std::uint64_t seed = 1;
  int hidden_width = 100;
  int hidden_layers = 2;
  double learning_rate = 1e-3;
  double gamma = 1.0;
  int batch = 32;
  std::size_t buffer = 100000;
  RewardVariant reward = RewardVariant::kDnn;
  // Pick the epoch whose greedy policy earns the most training clicks; epoch 0 is the
  // untrained policy, which bids exactly like LIN.
  bool select_best = true;

  // Discrete agent.
  StateScheme scheme = StateScheme::kState6;
  bool cumulative_rates = false;
  int target_refresh = 100;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.8;  // share of training over which epsilon decays

  // Continuous agent.
  rl::Td3Config td3;
  double exploration_std = 0.1;

  // Episode-return reward network.
  int reward_width = 100;
  int reward_layers = 3;
  double reward_learning_rate = 1e-3;
  int reward_fit_steps = 32;

  static AgentConfig drlb_defaults();
  static AgentConfig fab_defaults();
  std::string describe() const;
};

struct EpochRecord {
  int epoch = 0;  // 0 = untrained policy
  double exploration = 0.0;
  std::int64_t explore_clicks = 0;
  std::int64_t greedy_clicks = 0;
  double greedy_pctr = 0.0;
  double mean_loss = 0.0;
  std::uint64_t updates = 0;
  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct AgentCheckpoint {
  std::string strategy;  // "DRLB" or "FAB"
  std::string provenance;
  std::uint64_t seed = 0;
  std::uint64_t training_steps = 0;
  int selected_epoch = 0;
  LinParams lin;
  int slot_count = 96;
  StateScheme scheme = StateScheme::kState6;
  bool cumulative_rates = false;
  double pctr_scale = 1.0;
  RewardVariant reward = RewardVariant::kDnn;
  rl::Mlp policy;  // Q network (DRLB) or actor (FAB)
  std::vector<EpochRecord> curve;

  void save(const std::filesystem::path& path) const;
  static AgentCheckpoint load(const std::filesystem::path& path);
  friend bool operator==(const AgentCheckpoint&, const AgentCheckpoint&) = default;
};

void write_training_curve_csv(std::ostream& out, const AgentCheckpoint& checkpoint);

// Greedy DRLB policy: slot 0 bids at lambda_0, then one action per slot boundary.
class DrlbPolicy final : public auction::BidStrategy {
 public:
  DrlbPolicy(rl::Mlp q, LinParams lin, StateScheme scheme, bool cumulative_rates, double pctr_scale);
  std::string name() const override { return "DRLB"; }
  void begin_episode(const ingest::Episode& episode) override;
  void begin_slot(int slot, const auction::SlotStats* previous, std::int64_t budget_remaining) override;
  double bid(const ingest::ImpressionRecord& record, const auction::BidContext&) override;

  const std::vector<int>& actions() const { return actions_; }  // actions taken at slots 1..T-1
  double lambda() const { return lambda_; }
  // drlb_base_bid after each slot's action (slot 0 = base_bid*), for the last episode.
  std::vector<double> base_bid_trace() const;

 private:
  rl::Mlp q_;
  LinParams lin_;
  StateScheme scheme_;
  bool cumulative_;
  double pctr_scale_;
  std::int64_t budget_ = 0;
  int slot_count_ = 0;
  double lambda_ = 0.0;
  std::vector<int> actions_;
  std::vector<auction::SlotStats> finished_;
};

// Greedy FAB policy: the actor's bidding factor for every slot.
class FabPolicy final : public auction::BidStrategy {
 public:
  FabPolicy(rl::Mlp actor, LinParams lin);
  std::string name() const override { return "FAB"; }
  void begin_episode(const ingest::Episode& episode) override;
  void begin_slot(int slot, const auction::SlotStats* previous, std::int64_t budget_remaining) override;
  double bid(const ingest::ImpressionRecord& record, const auction::BidContext&) override;

  const std::vector<double>& actions() const { return actions_; }
  std::vector<double> base_bid_trace() const;

 private:
  rl::Mlp actor_;
  LinParams lin_;
  std::int64_t budget_ = 0;
  int slot_count_ = 0;
  double a_ = 0.0;
  std::vector<double> actions_;
};

std::unique_ptr<auction::BidStrategy> make_policy(const AgentCheckpoint& checkpoint);

// Both trainers require scored episodes and a positive LIN base bid. Training is
// single-threaded and deterministic for a fixed config.
AgentCheckpoint train_drlb(std::span<const ingest::Episode> train, const LinParams& lin, const AgentConfig& config,
                           const std::string& provenance = {});
AgentCheckpoint train_fab(std::span<const ingest::Episode> train, const LinParams& lin, const AgentConfig& config,
                          const std::string& provenance = {});

// A FAB checkpoint whose actor always outputs 0 (the LIN-equivalent reference).
AgentCheckpoint frozen_zero_fab(const LinParams& lin, int slot_count);

// Sum of greedy clicks / pctr over the episodes.
auction::Objective evaluate_policy(const AgentCheckpoint& checkpoint, std::span<const ingest::Episode> episodes);

}  // namespace rtb::strategies
