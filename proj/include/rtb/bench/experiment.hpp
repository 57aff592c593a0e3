#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rtb/auction/replay.hpp"
#include "rtb/ctr/fm.hpp"
#include "rtb/ingest/episode.hpp"
#include "rtb/strategies/agents.hpp"
#include "rtb/strategies/rlb.hpp"
#include "rtb/strategies/static.hpp"

namespace rtb::bench {

enum class StrategyKind { kLin, kOrtb, kRlb, kDrlb, kFab };

inline constexpr std::array<StrategyKind, 5> kAllStrategies{StrategyKind::kLin, StrategyKind::kOrtb,
                                                            StrategyKind::kRlb, StrategyKind::kDrlb,
                                                            StrategyKind::kFab};

std::string strategy_name(StrategyKind kind);
// Case-insensitive; throws ConfigError("strategy") on an unknown name.
StrategyKind parse_strategy(std::string_view text);
inline bool is_learned(StrategyKind kind) { return kind == StrategyKind::kDrlb || kind == StrategyKind::kFab; }

// One evaluable unit of the grid. Static strategies carry seed 0 and default agent fields,
// so every cell key is canonical and equal cells from different tables share results.
struct Cell {
  StrategyKind strategy = StrategyKind::kLin;
  ingest::BudgetFraction fraction;
  int slots = 96;
  strategies::StateScheme scheme = strategies::StateScheme::kState6;
  bool cumulative = false;
  strategies::RewardVariant reward = strategies::RewardVariant::kOp;
  std::uint64_t seed = 0;

  std::string label() const;  // e.g. "FAB-1/2-24slots-op-seed1"
  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

struct ExperimentConfig {
  std::string campaign = "synthetic";
  std::vector<StrategyKind> strategies{kAllStrategies.begin(), kAllStrategies.end()};
  std::vector<ingest::BudgetFraction> fractions{ingest::kStandardFractions.begin(),
                                                ingest::kStandardFractions.end()};
  std::vector<int> slot_counts{24, 48, 96};
  std::vector<strategies::StateScheme> schemes{strategies::kAblationSchemes.begin(),
                                               strategies::kAblationSchemes.end()};
  std::vector<strategies::RewardVariant> rewards{strategies::kAllRewards.begin(), strategies::kAllRewards.end()};
  std::vector<ingest::BudgetFraction> reward_fractions{ingest::BudgetFraction{2}, ingest::BudgetFraction{16}};
  ingest::BudgetFraction ablation_fraction{2};
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int static_slots = 96;  // slot granularity of LIN/ORTB/RLB traces
  int trace_test_day = 2;  // index into the test days for the per-slot base-bid trace

  ctr::TrainConfig ctr;
  strategies::OrtbParams ortb;
  strategies::RlbConfig rlb;
  strategies::AgentConfig drlb = strategies::AgentConfig::drlb_defaults();
  strategies::AgentConfig fab = strategies::AgentConfig::fab_defaults();

  std::filesystem::path output_dir;
  std::filesystem::path cache_dir;  // empty: no on-disk cache
  std::filesystem::path ctr_model;  // optional pre-trained model
  unsigned jobs = 1;
  bool auto_build = true;  // train the CTR model and tune LIN when no artifact exists
  std::string provenance;  // resolved run configuration embedded in outputs; describe() if empty

  void validate() const;
  std::string describe() const;
};

// Scored dataset plus the static-strategy artifacts every cell depends on.
struct Artifacts {
  ingest::CampaignDataset dataset;
  std::string data_hash;  // content hash of the scored dataset
  double test_auc = 0.0;  // held-out AUC of the stored pctr
  double train_auc = 0.0;
  bool ctr_trained = false;
  std::map<ingest::BudgetFraction, strategies::TuneResult> lin;  // per grid/reward/ablation fraction
  std::map<ingest::BudgetFraction, strategies::RlbModel> rlb;

  strategies::LinParams lin_params(ingest::BudgetFraction fraction) const;
};

// Content hash over every record of the dataset (pctr included when present).
std::string dataset_hash(const ingest::CampaignDataset& dataset);

// Tuned LIN results stored next to the other cached artifacts (JSON).
std::filesystem::path lin_cache_path(const std::filesystem::path& cache_dir, const std::string& data_hash,
                                     ingest::BudgetFraction fraction);
void save_tune(const std::filesystem::path& path, const strategies::TuneResult& tune);
strategies::TuneResult load_tune(const std::filesystem::path& path);

// Scores the dataset (cached CTR model, explicit model file, or a fresh fit), tunes LIN and
// builds RLB for every fraction the config references. Throws ConfigError("auto_build")
// listing the missing steps when an artifact is absent and auto_build is off.
Artifacts prepare_artifacts(const ingest::CampaignDataset& raw, const ExperimentConfig& config);

struct CellResult {
  Cell cell;
  std::vector<auction::EpisodeResult> days;  // one per test day
  int selected_epoch = -1;                   // learned strategies only
  std::int64_t train_clicks = -1;            // greedy training clicks of the kept epoch
};

// Memoizing cell executor. Learned cells train once; checkpoints are cached on disk
// keyed by the dataset hash, the LIN parameters and the agent configuration.
class Runner {
 public:
  Runner(ExperimentConfig config, Artifacts artifacts);

  const ExperimentConfig& config() const { return config_; }
  const Artifacts& artifacts() const { return artifacts_; }

  // Evaluates every not-yet-known cell, up to config.jobs at a time.
  void run(const std::vector<Cell>& cells);
  const CellResult& result(const Cell& cell);
  const strategies::AgentCheckpoint& checkpoint(const Cell& cell);
  strategies::AgentConfig agent_config(const Cell& cell) const;
  std::filesystem::path checkpoint_path(const Cell& cell) const;

  std::vector<std::pair<Cell, const strategies::AgentCheckpoint*>> checkpoints() const;

 private:
  void run_cell(const Cell& cell);

  ExperimentConfig config_;
  Artifacts artifacts_;
  mutable std::mutex mutex_;
  std::map<Cell, CellResult> results_;
  std::map<Cell, std::unique_ptr<strategies::AgentCheckpoint>> checkpoints_;
};

std::vector<Cell> grid_cells(const ExperimentConfig& config);
std::vector<Cell> state_ablation_cells(const ExperimentConfig& config);
std::vector<Cell> slot_ablation_cells(const ExperimentConfig& config);
std::vector<Cell> reward_ablation_cells(const ExperimentConfig& config);

}  // namespace rtb::bench
