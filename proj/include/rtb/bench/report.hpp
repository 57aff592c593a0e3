#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rtb/bench/experiment.hpp"

namespace rtb::bench {

// Totals of one cell over the test days.
struct ReportRow {
  std::string table;  // "grid", "state", "slots", "reward"
  Cell cell;
  std::int64_t budget = 0;
  std::int64_t imps = 0;
  std::int64_t wins = 0;
  std::int64_t clicks = 0;
  double pctr_sum = 0.0;
  std::int64_t cost = 0;
  std::vector<std::optional<int>> early_stop_slots;  // one per test day
  std::int64_t foregone_clicks = 0;
  int selected_epoch = -1;
  std::int64_t train_clicks = -1;

  // cost / wins * 1000 (0 without wins) and cost / clicks (undefined without clicks).
  double cpm() const;
  std::optional<double> cpc() const;
  int early_stop_days() const;
  std::optional<int> earliest_stop() const;
  friend bool operator==(const ReportRow&, const ReportRow&) = default;
};

// Median over the seeds of one cell; deterministic strategies have a single "seed".
struct AggregateRow {
  std::string table;
  Cell cell;  // seed = 0
  int runs = 0;
  double clicks = 0.0;
  double pctr_sum = 0.0;
  double cost = 0.0;
  double cpm = 0.0;
  std::optional<double> cpc;  // median over the runs where it is defined
  double early_stop_days = 0.0;
  friend bool operator==(const AggregateRow&, const AggregateRow&) = default;
};

struct BenchmarkReport {
  std::vector<ReportRow> rows;  // canonical order: (table, cell)
  std::vector<AggregateRow> aggregates;
};

ReportRow make_row(const std::string& table, const CellResult& result);
double median(std::vector<double> values);
// Groups rows by (table, cell without seed) and takes medians. The output order depends
// only on the row keys, never on the input order.
std::vector<AggregateRow> aggregate(std::vector<ReportRow> rows);
// Concatenates partial reports (duplicate keys keep one copy) and re-aggregates.
BenchmarkReport merge_reports(std::span<const BenchmarkReport> parts);

BenchmarkReport make_report(Runner& runner, const std::string& table, const std::vector<Cell>& cells);
BenchmarkReport run_grid(Runner& runner);
BenchmarkReport ablation_state_designs(Runner& runner);
BenchmarkReport ablation_slot_counts(Runner& runner);
BenchmarkReport ablation_rewards(Runner& runner);

struct BaseBidTraceRow {
  int slot = 0;
  int gt = 0;
  double drlb = 0.0;
  double fab = 0.0;
};

// Per-slot ground-truth optimum against the base bids the two checkpoints use on one
// episode. Both checkpoints must match the episode's slot count; throws ConfigError otherwise.
std::vector<BaseBidTraceRow> base_bid_trace(const ingest::Episode& episode, double avg_pctr,
                                            const strategies::AgentCheckpoint& drlb,
                                            const strategies::AgentCheckpoint& fab);
// The trace on config.trace_test_day at the ablation fraction with 96 slots, using the
// first seed's DRLB and FAB cells at 96 slots.
std::vector<BaseBidTraceRow> base_bid_trace(Runner& runner);
void write_base_bid_trace_csv(std::ostream& out, std::span<const BaseBidTraceRow> rows);

// Writes `# ` prefixed provenance lines.
void write_provenance(std::ostream& out, const std::string& provenance);
void write_rows_csv(std::ostream& out, std::span<const ReportRow> rows);
void write_aggregates_csv(std::ostream& out, std::span<const AggregateRow> rows);

struct BenchOutputs {
  BenchmarkReport grid;
  std::optional<BenchmarkReport> state;
  std::optional<BenchmarkReport> slots;
  std::optional<BenchmarkReport> rewards;
  std::vector<BaseBidTraceRow> trace;
};

// Runs the requested tables. `ablations` adds the state, slot and reward tables and the
// base-bid trace.
BenchOutputs run_bench(Runner& runner, bool ablations);

// Every CSV plus summary.json into config.output_dir. Contains no timestamps, so a rerun
// from cache produces identical bytes.
void write_outputs(const Runner& runner, const BenchOutputs& outputs);

}  // namespace rtb::bench
