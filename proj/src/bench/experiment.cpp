#include "rtb/bench/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "rtb/common/error.hpp"
#include "rtb/common/hash.hpp"
#include "rtb/common/log.hpp"
#include "rtb/common/parallel.hpp"

namespace rtb::bench {
namespace {

using strategies::RewardVariant;
using strategies::StateScheme;

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

template <typename T>
void require_unique(const std::vector<T>& v, const std::string& field) {
  if (v.empty()) throw ConfigError(field, "must not be empty");
  std::set<T> seen(v.begin(), v.end());
  if (seen.size() != v.size()) throw ConfigError(field, "contains duplicates");
}

void hash_days(ContentHash& h, const std::vector<ingest::DayPtr>& days) {
  h.value<std::uint64_t>(days.size());
  for (const auto& day : days) {
    h.value(day->date).value<std::uint64_t>(day->records.size());
    for (const auto& r : day->records) {
      h.value(r.second_of_day).value(r.market_price).value(r.click);
      h.value<std::uint8_t>(r.pctr.has_value());
      if (r.pctr) h.value(*r.pctr);
      h.value<std::uint32_t>(static_cast<std::uint32_t>(r.features.size()));
      if (!r.features.empty()) h.bytes(r.features.data(), r.features.size() * sizeof(ingest::TokenId));
    }
  }
}

double pctr_auc(const std::vector<ingest::DayPtr>& days) {
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& d : days) {
    for (const auto& r : d->records) {
      scores.push_back(r.pctr.value_or(0.0));
      labels.push_back(r.click);
    }
  }
  return ctr::auc(scores, labels);
}

nlohmann::json tune_to_json(const strategies::TuneResult& t) {
  nlohmann::json c = nlohmann::json::array();
  for (const auto& o : t.candidates) c.push_back({o.clicks, o.pctr_sum});
  return {{"base_bid", t.base_bid}, {"clicks", t.clicks}, {"pctr_sum", t.pctr_sum}, {"candidates", c}};
}

strategies::TuneResult tune_from_json(const nlohmann::json& j) {
  strategies::TuneResult t;
  t.base_bid = j.at("base_bid").get<int>();
  t.clicks = j.at("clicks").get<std::int64_t>();
  t.pctr_sum = j.at("pctr_sum").get<double>();
  for (const auto& c : j.at("candidates")) t.candidates.push_back({c.at(0).get<std::int64_t>(), c.at(1).get<double>()});
  return t;
}

std::vector<ingest::BudgetFraction> referenced_fractions(const ExperimentConfig& c) {
  std::set<ingest::BudgetFraction> all(c.fractions.begin(), c.fractions.end());
  all.insert(c.reward_fractions.begin(), c.reward_fractions.end());
  all.insert(c.ablation_fraction);
  return {all.begin(), all.end()};
}

Cell learned_cell(StrategyKind kind, const strategies::AgentConfig& a, ingest::BudgetFraction f, std::uint64_t seed) {
  Cell c;
  c.strategy = kind;
  c.fraction = f;
  c.slots = a.slots;
  c.reward = a.reward;
  c.seed = seed;
  if (kind == StrategyKind::kDrlb) {
    c.scheme = a.scheme;
    c.cumulative = a.cumulative_rates;
  }
  return c;
}

}  // namespace

std::string strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::kLin: return "LIN";
    case StrategyKind::kOrtb: return "ORTB";
    case StrategyKind::kRlb: return "RLB";
    case StrategyKind::kDrlb: return "DRLB";
    case StrategyKind::kFab: return "FAB";
  }
  return "?";
}

StrategyKind parse_strategy(std::string_view text) {
  const auto s = lower(text);
  for (auto k : kAllStrategies) {
    if (lower(strategy_name(k)) == s) return k;
  }
  throw ConfigError("strategy", "unknown strategy '" + std::string(text) + "' (lin, ortb, rlb, drlb, fab)");
}

std::string Cell::label() const {
  std::string s = strategy_name(strategy) + "-" + fraction.label() + "-" + std::to_string(slots) + "slots";
  if (strategy == StrategyKind::kDrlb) s += "-" + strategies::scheme_name(scheme) + (cumulative ? "-cumulative" : "");
  if (is_learned(strategy)) s += "-" + lower(strategies::reward_name(reward)) + "-seed" + std::to_string(seed);
  return s;
}

void ExperimentConfig::validate() const {
  if (campaign.empty()) throw ConfigError("campaign", "must not be empty");
  require_unique(strategies, "strategies");
  require_unique(fractions, "fractions");
  require_unique(slot_counts, "slot_counts");
  require_unique(schemes, "schemes");
  require_unique(rewards, "rewards");
  require_unique(reward_fractions, "reward_fractions");
  require_unique(seeds, "seeds");
  for (int s : slot_counts) {
    if (!ingest::is_supported_slot_count(s)) throw ConfigError("slot_counts", "must be 24, 48 or 96");
  }
  if (!ingest::is_supported_slot_count(static_slots)) throw ConfigError("static_slots", "must be 24, 48 or 96");
  if (!ingest::is_supported_slot_count(drlb.slots)) throw ConfigError("drlb.slots", "must be 24, 48 or 96");
  if (!ingest::is_supported_slot_count(fab.slots)) throw ConfigError("fab.slots", "must be 24, 48 or 96");
  if (trace_test_day < 0) throw ConfigError("trace_test_day", "must be >= 0");
  if (jobs < 1) throw ConfigError("jobs", "must be >= 1");
  ctr.validate();
  ortb.validate();
}

std::string ExperimentConfig::describe() const {
  std::ostringstream os;
  os.precision(17);
  auto list = [&](const char* key, const auto& values, auto name) {
    os << key << "=";
    for (std::size_t i = 0; i < values.size(); ++i) os << (i ? "," : "") << name(values[i]);
    os << "\n";
  };
  auto frac = [](ingest::BudgetFraction f) { return f.label(); };
  os << "campaign=" << campaign << "\n";
  list("strategies", strategies, [](StrategyKind k) { return strategy_name(k); });
  list("fractions", fractions, frac);
  list("slot_counts", slot_counts, [](int s) { return std::to_string(s); });
  list("schemes", schemes, [](StateScheme s) { return strategies::scheme_name(s); });
  list("rewards", rewards, [](RewardVariant r) { return strategies::reward_name(r); });
  list("reward_fractions", reward_fractions, frac);
  os << "ablation_fraction=" << ablation_fraction.label() << "\n";
  list("seeds", seeds, [](std::uint64_t s) { return std::to_string(s); });
  os << "static_slots=" << static_slots << "\ntrace_test_day=" << trace_test_day << "\n";
  os << "ctr=" << ctr.describe() << "\n";
  os << "ortb=c:" << ortb.c << " lambda:" << ortb.lambda << "\n";
  os << "rlb=budget_units:" << rlb.budget_units << " pctr_buckets:" << rlb.pctr_buckets
     << " headroom:" << rlb.headroom << " max_steps:" << rlb.max_steps << "\n";
  os << "drlb=" << drlb.describe() << "\nfab=" << fab.describe() << "\n";
  return os.str();
}

strategies::LinParams Artifacts::lin_params(ingest::BudgetFraction fraction) const {
  auto it = lin.find(fraction);
  if (it == lin.end()) throw ConfigError("fractions", "no LIN tuning for " + fraction.label());
  return {it->second.base_bid, dataset.avg_pctr_train};
}

std::string dataset_hash(const ingest::CampaignDataset& dataset) {
  ContentHash h;
  h.text(dataset.campaign_id);
  if (dataset.tokens) {
    h.value<std::uint64_t>(dataset.tokens->size());
    for (const auto& t : dataset.tokens->tokens()) h.text(t);
  }
  hash_days(h, dataset.train_days);
  hash_days(h, dataset.test_days);
  return h.hex();
}

std::filesystem::path lin_cache_path(const std::filesystem::path& cache_dir, const std::string& data_hash,
                                     ingest::BudgetFraction fraction) {
  return cache_dir / ("lin-" + ContentHash().text(data_hash).value(fraction.denominator).hex() + ".json");
}

void save_tune(const std::filesystem::path& path, const strategies::TuneResult& tune) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << tune_to_json(tune).dump() << "\n";
}

strategies::TuneResult load_tune(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return tune_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Artifacts prepare_artifacts(const ingest::CampaignDataset& raw, const ExperimentConfig& config) {
  config.validate();
  Artifacts a;
  std::vector<std::string> missing;
  const bool cached = !config.cache_dir.empty();
  if (cached) std::filesystem::create_directories(config.cache_dir);
  const std::string provenance = config.provenance.empty() ? config.describe() : config.provenance;

  if (raw.scored() && config.ctr_model.empty()) {
    a.dataset = raw;
  } else {
    std::optional<ctr::FmModel> model;
    if (!config.ctr_model.empty()) {
      model = ctr::FmModel::load(config.ctr_model);
    } else {
      const auto key = ContentHash().text(dataset_hash(raw)).text(config.ctr.describe()).hex();
      const auto path = cached ? config.cache_dir / ("ctr-" + key + ".fm") : std::filesystem::path{};
      if (cached && std::filesystem::exists(path)) {
        model = ctr::FmModel::load(path);
        log::info("loaded CTR model " + path.string());
      } else if (config.auto_build) {
        log::info("training CTR model: " + config.ctr.describe());
        model = ctr::fm_train(raw.train_days, *raw.tokens, config.ctr);
        a.ctr_trained = true;
        if (cached) model->save(path, provenance);
      } else {
        missing.push_back("CTR model (run `ctr train` or pass a model file)");
      }
    }
    if (model) a.dataset = ctr::score_dataset(*model, raw);
  }

  const auto fractions = referenced_fractions(config);
  if (!a.dataset.scored()) {
    for (auto f : fractions) missing.push_back("LIN tuning for " + f.label() + " (needs the CTR model)");
  } else {
    a.data_hash = dataset_hash(a.dataset);
    a.test_auc = pctr_auc(a.dataset.test_days);
    a.train_auc = pctr_auc(a.dataset.train_days);
    for (auto f : fractions) {
      const auto path = cached ? lin_cache_path(config.cache_dir, a.data_hash, f) : std::filesystem::path{};
      if (cached && std::filesystem::exists(path)) {
        a.lin[f] = load_tune(path);
      } else if (config.auto_build) {
        const auto train = a.dataset.train_episodes(config.static_slots, f);
        a.lin[f] = strategies::tune_base_bid(train, a.dataset.avg_pctr_train, config.jobs);
        log::info("LIN " + f.label() + ": base bid " + std::to_string(a.lin[f].base_bid));
        if (cached) save_tune(path, a.lin[f]);
      } else {
        missing.push_back("LIN tuning for " + f.label() + " (run `tune-lin`)");
      }
    }
  }
  if (!missing.empty()) {
    std::string msg = "missing artifacts and auto-build is off:";
    for (const auto& m : missing) msg += "\n  - " + m;
    throw ConfigError("auto_build", msg);
  }
  for (auto f : fractions) {
    a.rlb[f] = strategies::rlb_lite_build(a.dataset.train_episodes(config.static_slots, f), config.rlb);
  }
  return a;
}

Runner::Runner(ExperimentConfig config, Artifacts artifacts)
    : config_(std::move(config)), artifacts_(std::move(artifacts)) {
  config_.validate();
}

strategies::AgentConfig Runner::agent_config(const Cell& cell) const {
  strategies::AgentConfig a = cell.strategy == StrategyKind::kDrlb ? config_.drlb : config_.fab;
  a.slots = cell.slots;
  a.scheme = cell.scheme;
  a.cumulative_rates = cell.cumulative;
  a.reward = cell.reward;
  a.seed = cell.seed;
  return a;
}

std::filesystem::path Runner::checkpoint_path(const Cell& cell) const {
  if (config_.cache_dir.empty()) return {};
  const auto lin = artifacts_.lin_params(cell.fraction);
  const auto key = ContentHash()
                       .text(artifacts_.data_hash)
                       .text(strategy_name(cell.strategy))
                       .value(lin.base_bid)
                       .value(lin.avg_pctr)
                       .text(agent_config(cell).describe())
                       .hex();
  return config_.cache_dir / ("agent-" + key + ".ckpt");
}

void Runner::run(const std::vector<Cell>& cells) {
  std::vector<Cell> todo;
  {
    std::lock_guard lock(mutex_);
    std::set<Cell> queued;
    for (const auto& c : cells) {
      if (!results_.count(c) && queued.insert(c).second) todo.push_back(c);
    }
  }
  // Longest cells first keeps the pool busy until the end.
  std::stable_sort(todo.begin(), todo.end(),
                   [](const Cell& a, const Cell& b) { return is_learned(a.strategy) > is_learned(b.strategy); });
  parallel_for(todo.size(), config_.jobs, [&](std::size_t i) { run_cell(todo[i]); });
}

void Runner::run_cell(const Cell& cell) {
  const auto& ds = artifacts_.dataset;
  const auto lin = artifacts_.lin_params(cell.fraction);
  const auto test = ds.test_episodes(cell.slots, cell.fraction);
  CellResult result;
  result.cell = cell;
  std::unique_ptr<strategies::AgentCheckpoint> checkpoint;

  std::unique_ptr<auction::BidStrategy> strategy;
  switch (cell.strategy) {
    case StrategyKind::kLin: strategy = std::make_unique<strategies::LinStrategy>(lin); break;
    case StrategyKind::kOrtb: strategy = std::make_unique<strategies::OrtbStrategy>(config_.ortb); break;
    case StrategyKind::kRlb: strategy = std::make_unique<strategies::RlbStrategy>(artifacts_.rlb.at(cell.fraction)); break;
    case StrategyKind::kDrlb:
    case StrategyKind::kFab: {
      const auto path = checkpoint_path(cell);
      if (!path.empty() && std::filesystem::exists(path)) {
        checkpoint = std::make_unique<strategies::AgentCheckpoint>(strategies::AgentCheckpoint::load(path));
      } else {
        const auto agent = agent_config(cell);
        const auto train = ds.train_episodes(cell.slots, cell.fraction);
        const std::string provenance = "cell=" + cell.label() + "\ndata=" + artifacts_.data_hash + "\nagent=" +
                                       agent.describe() + "\n";
        log::info("training " + cell.label());
        checkpoint = std::make_unique<strategies::AgentCheckpoint>(
            cell.strategy == StrategyKind::kDrlb ? strategies::train_drlb(train, lin, agent, provenance)
                                                 : strategies::train_fab(train, lin, agent, provenance));
        if (!path.empty()) {
          // Write-then-rename so a concurrent reader never sees a partial file.
          auto tmp = path;
          tmp += ".tmp";
          checkpoint->save(tmp);
          std::filesystem::rename(tmp, path);
        }
      }
      result.selected_epoch = checkpoint->selected_epoch;
      if (!checkpoint->curve.empty()) {
        result.train_clicks = checkpoint->curve.at(static_cast<std::size_t>(checkpoint->selected_epoch)).greedy_clicks;
      }
      strategy = strategies::make_policy(*checkpoint);
      break;
    }
  }
  for (const auto& ep : test) result.days.push_back(auction::run_episode(*strategy, ep));

  std::lock_guard lock(mutex_);
  results_.emplace(cell, std::move(result));
  if (checkpoint) checkpoints_.emplace(cell, std::move(checkpoint));
}

const CellResult& Runner::result(const Cell& cell) {
  {
    std::lock_guard lock(mutex_);
    auto it = results_.find(cell);
    if (it != results_.end()) return it->second;
  }
  run({cell});
  std::lock_guard lock(mutex_);
  return results_.at(cell);
}

const strategies::AgentCheckpoint& Runner::checkpoint(const Cell& cell) {
  if (!is_learned(cell.strategy)) throw ConfigError("strategy", strategy_name(cell.strategy) + " has no checkpoint");
  result(cell);
  std::lock_guard lock(mutex_);
  return *checkpoints_.at(cell);
}

std::vector<std::pair<Cell, const strategies::AgentCheckpoint*>> Runner::checkpoints() const {
  std::lock_guard lock(mutex_);
  std::vector<std::pair<Cell, const strategies::AgentCheckpoint*>> out;
  for (const auto& [cell, ck] : checkpoints_) out.emplace_back(cell, ck.get());
  return out;
}

std::vector<Cell> grid_cells(const ExperimentConfig& config) {
  std::vector<Cell> cells;
  for (auto kind : config.strategies) {
    for (auto f : config.fractions) {
      if (kind == StrategyKind::kDrlb || kind == StrategyKind::kFab) {
        const auto& agent = kind == StrategyKind::kDrlb ? config.drlb : config.fab;
        for (auto seed : config.seeds) cells.push_back(learned_cell(kind, agent, f, seed));
      } else {
        Cell c;
        c.strategy = kind;
        c.fraction = f;
        c.slots = config.static_slots;
        cells.push_back(c);
      }
    }
  }
  return cells;
}

std::vector<Cell> state_ablation_cells(const ExperimentConfig& config) {
  std::vector<Cell> cells;
  for (bool cumulative : {false, true}) {
    for (auto scheme : config.schemes) {
      for (auto seed : config.seeds) {
        auto c = learned_cell(StrategyKind::kDrlb, config.drlb, config.ablation_fraction, seed);
        c.scheme = scheme;
        c.cumulative = cumulative;
        cells.push_back(c);
      }
    }
  }
  return cells;
}

std::vector<Cell> slot_ablation_cells(const ExperimentConfig& config) {
  std::vector<Cell> cells;
  for (auto kind : {StrategyKind::kDrlb, StrategyKind::kFab}) {
    const auto& agent = kind == StrategyKind::kDrlb ? config.drlb : config.fab;
    for (int slots : config.slot_counts) {
      for (auto seed : config.seeds) {
        auto c = learned_cell(kind, agent, config.ablation_fraction, seed);
        c.slots = slots;
        cells.push_back(c);
      }
    }
  }
  return cells;
}

std::vector<Cell> reward_ablation_cells(const ExperimentConfig& config) {
  std::vector<Cell> cells;
  for (auto f : config.reward_fractions) {
    for (auto reward : config.rewards) {
      for (auto seed : config.seeds) {
        auto c = learned_cell(StrategyKind::kFab, config.fab, f, seed);
        c.reward = reward;
        cells.push_back(c);
      }
    }
  }
  return cells;
}

}  // namespace rtb::bench
