#include "rtb/bench/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "rtb/common/error.hpp"
#include "rtb/common/log.hpp"
#include "rtb/ingest/statistics.hpp"

namespace rtb::bench {
namespace {

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(ingest::kUndefinedMarker); }

void cell_columns(std::ostream& out, const Cell& c) {
  const bool drlb = c.strategy == StrategyKind::kDrlb;
  out << strategy_name(c.strategy) << ',' << c.fraction.label() << ',' << c.slots << ','
      << (drlb ? strategies::scheme_name(c.scheme) : "-") << ',' << (drlb ? (c.cumulative ? "cumulative" : "per-slot") : "-")
      << ',' << (is_learned(c.strategy) ? strategies::reward_name(c.reward) : "-");
}

bool row_less(const ReportRow& a, const ReportRow& b) {
  return a.table != b.table ? a.table < b.table : a.cell < b.cell;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

nlohmann::json cell_json(const Cell& c) {
  nlohmann::json j{{"strategy", strategy_name(c.strategy)}, {"fraction", c.fraction.label()}, {"slots", c.slots}};
  if (c.strategy == StrategyKind::kDrlb) {
    j["scheme"] = strategies::scheme_name(c.scheme);
    j["rates"] = c.cumulative ? "cumulative" : "per-slot";
  }
  if (is_learned(c.strategy)) j["reward"] = strategies::reward_name(c.reward);
  return j;
}

nlohmann::json aggregates_json(std::span<const AggregateRow> rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    auto j = cell_json(r.cell);
    j["runs"] = r.runs;
    j["clicks"] = r.clicks;
    j["pctr_sum"] = r.pctr_sum;
    j["cost"] = r.cost;
    j["cpm"] = r.cpm;
    j["cpc"] = r.cpc ? nlohmann::json(*r.cpc) : nlohmann::json(nullptr);
    j["early_stop_days"] = r.early_stop_days;
    out.push_back(j);
  }
  return out;
}

void write_report_pair(const std::filesystem::path& dir, const std::string& stem, const std::string& provenance,
                       const BenchmarkReport& report) {
  auto runs = open_output(dir / (stem + "_runs.csv"));
  write_provenance(runs, provenance);
  write_rows_csv(runs, report.rows);
  auto agg = open_output(dir / (stem + ".csv"));
  write_provenance(agg, provenance);
  write_aggregates_csv(agg, report.aggregates);
}

}  // namespace

double ReportRow::cpm() const { return wins > 0 ? static_cast<double>(cost) / static_cast<double>(wins) * 1000.0 : 0.0; }

std::optional<double> ReportRow::cpc() const {
  if (clicks == 0) return std::nullopt;
  return static_cast<double>(cost) / static_cast<double>(clicks);
}

int ReportRow::early_stop_days() const {
  return static_cast<int>(std::count_if(early_stop_slots.begin(), early_stop_slots.end(),
                                        [](const std::optional<int>& s) { return s.has_value(); }));
}

std::optional<int> ReportRow::earliest_stop() const {
  std::optional<int> best;
  for (const auto& s : early_stop_slots) {
    if (s && (!best || *s < *best)) best = s;
  }
  return best;
}

ReportRow make_row(const std::string& table, const CellResult& result) {
  ReportRow row;
  row.table = table;
  row.cell = result.cell;
  for (const auto& d : result.days) {
    row.budget += d.budget;
    row.imps += d.imps;
    row.wins += d.wins;
    row.clicks += d.clicks;
    row.pctr_sum += d.pctr_sum;
    row.cost += d.cost;
    row.foregone_clicks += d.foregone_clicks;
    row.early_stop_slots.push_back(d.early_stop_slot);
  }
  row.selected_epoch = result.selected_epoch;
  row.train_clicks = result.train_clicks;
  return row;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<AggregateRow> aggregate(std::vector<ReportRow> rows) {
  std::map<std::pair<std::string, Cell>, std::vector<const ReportRow*>> groups;
  for (const auto& r : rows) {
    Cell key = r.cell;
    key.seed = 0;
    groups[{r.table, key}].push_back(&r);
  }
  std::vector<AggregateRow> out;
  for (const auto& [key, members] : groups) {
    AggregateRow a;
    a.table = key.first;
    a.cell = key.second;
    a.runs = static_cast<int>(members.size());
    std::vector<double> clicks, pctr, cost, cpm, cpc, stops;
    for (const auto* r : members) {
      clicks.push_back(static_cast<double>(r->clicks));
      pctr.push_back(r->pctr_sum);
      cost.push_back(static_cast<double>(r->cost));
      cpm.push_back(r->cpm());
      if (auto c = r->cpc()) cpc.push_back(*c);
      stops.push_back(r->early_stop_days());
    }
    a.clicks = median(clicks);
    a.pctr_sum = median(pctr);
    a.cost = median(cost);
    a.cpm = median(cpm);
    if (!cpc.empty()) a.cpc = median(cpc);
    a.early_stop_days = median(stops);
    out.push_back(a);
  }
  return out;
}

BenchmarkReport merge_reports(std::span<const BenchmarkReport> parts) {
  BenchmarkReport out;
  for (const auto& p : parts) out.rows.insert(out.rows.end(), p.rows.begin(), p.rows.end());
  std::stable_sort(out.rows.begin(), out.rows.end(), row_less);
  out.rows.erase(std::unique(out.rows.begin(), out.rows.end(),
                             [](const ReportRow& a, const ReportRow& b) { return !row_less(a, b) && !row_less(b, a); }),
                 out.rows.end());
  out.aggregates = aggregate(out.rows);
  return out;
}

BenchmarkReport make_report(Runner& runner, const std::string& table, const std::vector<Cell>& cells) {
  runner.run(cells);
  BenchmarkReport part;
  for (const auto& c : cells) part.rows.push_back(make_row(table, runner.result(c)));
  return merge_reports(std::span<const BenchmarkReport>(&part, 1));
}

BenchmarkReport run_grid(Runner& runner) { return make_report(runner, "grid", grid_cells(runner.config())); }

BenchmarkReport ablation_state_designs(Runner& runner) {
  return make_report(runner, "state", state_ablation_cells(runner.config()));
}

BenchmarkReport ablation_slot_counts(Runner& runner) {
  return make_report(runner, "slots", slot_ablation_cells(runner.config()));
}

BenchmarkReport ablation_rewards(Runner& runner) {
  return make_report(runner, "reward", reward_ablation_cells(runner.config()));
}

std::vector<BaseBidTraceRow> base_bid_trace(const ingest::Episode& episode, double avg_pctr,
                                            const strategies::AgentCheckpoint& drlb,
                                            const strategies::AgentCheckpoint& fab) {
  if (drlb.strategy != "DRLB") throw ConfigError("drlb-checkpoint", "expected a DRLB checkpoint");
  if (fab.strategy != "FAB") throw ConfigError("fab-checkpoint", "expected a FAB checkpoint");
  const int T = episode.slot_count();
  if (drlb.slot_count != T || fab.slot_count != T) {
    throw ConfigError("slots", "checkpoints must use " + std::to_string(T) + " slots");
  }
  const auto gt = strategies::per_slot_optimal_base_bid(episode, T, avg_pctr);

  strategies::DrlbPolicy d(drlb.policy, drlb.lin, drlb.scheme, drlb.cumulative_rates, drlb.pctr_scale);
  auction::run_episode(d, episode);
  strategies::FabPolicy f(fab.policy, fab.lin);
  auction::run_episode(f, episode);
  const auto dt = d.base_bid_trace();
  const auto ft = f.base_bid_trace();

  std::vector<BaseBidTraceRow> rows;
  for (int t = 0; t < T; ++t) {
    const auto i = static_cast<std::size_t>(t);
    rows.push_back({t, gt.at(i), dt.at(i), ft.at(i)});
  }
  return rows;
}

std::vector<BaseBidTraceRow> base_bid_trace(Runner& runner) {
  const auto& cfg = runner.config();
  const auto& ds = runner.artifacts().dataset;
  if (cfg.trace_test_day >= static_cast<int>(ds.test_days.size())) {
    throw ConfigError("trace_test_day", "only " + std::to_string(ds.test_days.size()) + " test days");
  }
  auto cell = [&](StrategyKind kind, const strategies::AgentConfig& agent) {
    Cell c;
    c.strategy = kind;
    c.fraction = cfg.ablation_fraction;
    c.slots = 96;
    c.reward = agent.reward;
    c.seed = cfg.seeds.front();
    if (kind == StrategyKind::kDrlb) {
      c.scheme = agent.scheme;
      c.cumulative = agent.cumulative_rates;
    }
    return c;
  };
  const Cell d = cell(StrategyKind::kDrlb, cfg.drlb);
  const Cell f = cell(StrategyKind::kFab, cfg.fab);
  runner.run({d, f});
  const auto episode = ds.test_episodes(96, cfg.ablation_fraction).at(static_cast<std::size_t>(cfg.trace_test_day));
  return base_bid_trace(episode, ds.avg_pctr_train, runner.checkpoint(d), runner.checkpoint(f));
}

void write_base_bid_trace_csv(std::ostream& out, std::span<const BaseBidTraceRow> rows) {
  out << "slot,gt,drlb,fab\n";
  for (const auto& r : rows) out << r.slot << ',' << r.gt << ',' << fmt(r.drlb, 4) << ',' << fmt(r.fab, 4) << '\n';
}

void write_provenance(std::ostream& out, const std::string& provenance) {
  std::istringstream in(provenance);
  std::string line;
  while (std::getline(in, line)) out << "# " << line << '\n';
}

void write_rows_csv(std::ostream& out, std::span<const ReportRow> rows) {
  out << "table,strategy,fraction,slots,scheme,rates,reward,seed,budget,imps,wins,clicks,pctr_sum,cost,cpm,cpc,"
         "early_stop_slots,foregone_clicks,selected_epoch,train_clicks\n";
  for (const auto& r : rows) {
    out << r.table << ',';
    cell_columns(out, r.cell);
    out << ',' << r.cell.seed << ',' << r.budget << ',' << r.imps << ',' << r.wins << ',' << r.clicks << ','
        << fmt(r.pctr_sum) << ',' << r.cost << ',' << fmt(r.cpm()) << ',' << opt(r.cpc()) << ',';
    for (std::size_t i = 0; i < r.early_stop_slots.size(); ++i) {
      const auto& s = r.early_stop_slots[i];
      out << (i ? ";" : "") << (s ? std::to_string(*s) : std::string(ingest::kUndefinedMarker));
    }
    out << ',' << r.foregone_clicks << ',' << r.selected_epoch << ',' << r.train_clicks << '\n';
  }
}

void write_aggregates_csv(std::ostream& out, std::span<const AggregateRow> rows) {
  out << "table,strategy,fraction,slots,scheme,rates,reward,runs,clicks,pctr_sum,cost,cpm,cpc,early_stop_days\n";
  for (const auto& r : rows) {
    out << r.table << ',';
    cell_columns(out, r.cell);
    out << ',' << r.runs << ',' << fmt(r.clicks, 1) << ',' << fmt(r.pctr_sum) << ',' << fmt(r.cost, 1) << ','
        << fmt(r.cpm) << ',' << opt(r.cpc) << ',' << fmt(r.early_stop_days, 1) << '\n';
  }
}

BenchOutputs run_bench(Runner& runner, bool ablations) {
  BenchOutputs out;
  if (ablations) {
    // Queue every cell up front so the pool sees the whole workload at once.
    const auto& c = runner.config();
    auto cells = grid_cells(c);
    for (const auto& more : {state_ablation_cells(c), slot_ablation_cells(c), reward_ablation_cells(c)}) {
      cells.insert(cells.end(), more.begin(), more.end());
    }
    runner.run(cells);
  }
  out.grid = run_grid(runner);
  if (ablations) {
    out.state = ablation_state_designs(runner);
    out.slots = ablation_slot_counts(runner);
    out.rewards = ablation_rewards(runner);
    out.trace = base_bid_trace(runner);
  }
  return out;
}

void write_outputs(const Runner& runner, const BenchOutputs& outputs) {
  const auto& cfg = runner.config();
  const auto& art = runner.artifacts();
  const auto& ds = art.dataset;
  if (cfg.output_dir.empty()) throw ConfigError("output-dir", "no output directory given");
  std::filesystem::create_directories(cfg.output_dir);
  const auto& dir = cfg.output_dir;
  const std::string provenance =
      (cfg.provenance.empty() ? cfg.describe() : cfg.provenance) + "data_hash=" + art.data_hash + "\n";

  const auto stats = ingest::dataset_statistics(ds);
  {
    auto out = open_output(dir / "dataset_statistics.csv");
    write_provenance(out, provenance);
    ingest::write_split_statistics_csv(out, stats);
  }
  {
    auto out = open_output(dir / "daily_market.csv");
    write_provenance(out, provenance);
    ingest::write_daily_market_csv(out, stats);
  }
  {
    auto out = open_output(dir / "slot_market_price.csv");
    write_provenance(out, provenance);
    ingest::write_slot_market_price_csv(out, stats);
  }
  {
    auto out = open_output(dir / "ctr.csv");
    write_provenance(out, provenance);
    out << "split,auc\ntrain," << fmt(art.train_auc) << "\ntest," << fmt(art.test_auc) << '\n';
  }

  // LIN: training optimum applied to the test days, and the optima the test days would pick.
  nlohmann::json lin_json = nlohmann::json::array();
  {
    auto res = open_output(dir / "lin_results.csv");
    auto opt_out = open_output(dir / "base_bid_optima.csv");
    auto dev = open_output(dir / "base_bid_deviation.csv");
    for (auto* o : {&res, &opt_out, &dev}) write_provenance(*o, provenance);
    res << "fraction,base_bid,train_clicks,train_pctr_sum,test_clicks,test_pctr_sum,test_cost,test_cpm,test_cpc\n";
    opt_out << "fraction,scope,date,base_bid,clicks,pctr_sum\n";
    dev << "fraction,train_optimum,test_optimum";
    for (const auto& d : ds.test_days) dev << ",day_" << d->date;
    dev << ",deviation\n";
    for (const auto& [f, tune] : art.lin) {
      if (std::find(cfg.fractions.begin(), cfg.fractions.end(), f) == cfg.fractions.end()) continue;
      const auto test = ds.test_episodes(cfg.static_slots, f);
      strategies::LinStrategy lin(art.lin_params(f));
      std::int64_t clicks = 0, cost = 0, wins = 0;
      double pctr = 0.0;
      for (const auto& ep : test) {
        const auto r = auction::run_episode(lin, ep);
        clicks += r.clicks;
        cost += r.cost;
        wins += r.wins;
        pctr += r.pctr_sum;
      }
      res << f.label() << ',' << tune.base_bid << ',' << tune.clicks << ',' << fmt(tune.pctr_sum) << ',' << clicks << ','
          << fmt(pctr) << ',' << cost << ',' << fmt(wins ? 1000.0 * cost / wins : 0.0) << ','
          << (clicks ? fmt(static_cast<double>(cost) / clicks) : std::string(ingest::kUndefinedMarker)) << '\n';

      opt_out << f.label() << ",train,-," << tune.base_bid << ',' << tune.clicks << ',' << fmt(tune.pctr_sum) << '\n';
      const auto test_tune = strategies::tune_base_bid(test, ds.avg_pctr_train, cfg.jobs);
      opt_out << f.label() << ",test,-," << test_tune.base_bid << ',' << test_tune.clicks << ','
              << fmt(test_tune.pctr_sum) << '\n';
      std::vector<double> b{static_cast<double>(test_tune.base_bid)};
      for (const auto& ep : test) {
        const auto day = strategies::tune_base_bid(std::span<const ingest::Episode>(&ep, 1), ds.avg_pctr_train, cfg.jobs);
        opt_out << f.label() << ",day," << ep.date() << ',' << day.base_bid << ',' << day.clicks << ','
                << fmt(day.pctr_sum) << '\n';
        b.push_back(day.base_bid);
      }
      const double deviation = strategies::base_bid_deviation(tune.base_bid, b);
      dev << f.label() << ',' << tune.base_bid;
      for (double v : b) dev << ',' << static_cast<int>(v);
      dev << ',' << fmt(deviation) << '\n';
      lin_json.push_back({{"fraction", f.label()},
                          {"base_bid", tune.base_bid},
                          {"train_clicks", tune.clicks},
                          {"test_clicks", clicks},
                          {"test_pctr_sum", pctr},
                          {"test_optimum", test_tune.base_bid},
                          {"deviation", deviation}});
    }
  }

  write_report_pair(dir, "strategy_comparison", provenance, outputs.grid);
  {
    auto out = open_output(dir / "ortb_results.csv");
    write_provenance(out, provenance);
    std::vector<AggregateRow> ortb;
    for (const auto& a : outputs.grid.aggregates) {
      if (a.cell.strategy == StrategyKind::kOrtb) ortb.push_back(a);
    }
    write_aggregates_csv(out, ortb);
  }
  if (outputs.state) write_report_pair(dir, "state_ablation", provenance, *outputs.state);
  if (outputs.slots) write_report_pair(dir, "slot_ablation", provenance, *outputs.slots);
  if (outputs.rewards) write_report_pair(dir, "reward_ablation", provenance, *outputs.rewards);
  if (!outputs.trace.empty()) {
    auto out = open_output(dir / "base_bid_trace.csv");
    write_provenance(out, provenance);
    write_base_bid_trace_csv(out, outputs.trace);
  }
  {
    auto out = open_output(dir / "training_curves.csv");
    write_provenance(out, provenance);
    out << "cell,epoch,exploration,explore_clicks,greedy_clicks,greedy_pctr,mean_loss,updates,selected\n";
    for (const auto& [cell, ck] : runner.checkpoints()) {
      for (const auto& r : ck->curve) {
        out << cell.label() << ',' << r.epoch << ',' << fmt(r.exploration) << ',' << r.explore_clicks << ','
            << r.greedy_clicks << ',' << fmt(r.greedy_pctr) << ',' << fmt(r.mean_loss, 8) << ',' << r.updates << ','
            << (r.epoch == ck->selected_epoch ? 1 : 0) << '\n';
      }
    }
  }

  nlohmann::json summary;
  summary["provenance"] = provenance;
  summary["campaign"] = cfg.campaign;
  summary["data_hash"] = art.data_hash;
  summary["ctr"] = {{"train_auc", art.train_auc}, {"test_auc", art.test_auc}};
  summary["dataset"] = {{"train_imps", stats.train.imps}, {"train_clicks", stats.train.clicks},
                        {"train_cost", stats.train.cost}, {"test_imps", stats.test.imps},
                        {"test_clicks", stats.test.clicks}, {"test_cost", stats.test.cost},
                        {"avg_pctr_train", ds.avg_pctr_train}};
  summary["lin"] = lin_json;
  summary["grid"] = aggregates_json(outputs.grid.aggregates);
  if (outputs.state) summary["state_ablation"] = aggregates_json(outputs.state->aggregates);
  if (outputs.slots) summary["slot_ablation"] = aggregates_json(outputs.slots->aggregates);
  if (outputs.rewards) summary["reward_ablation"] = aggregates_json(outputs.rewards->aggregates);
  auto out = open_output(dir / "summary.json");
  out << summary.dump(2) << '\n';
  log::info("wrote reports to " + dir.string());
}

}  // namespace rtb::bench
