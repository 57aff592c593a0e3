#include "rtb/cli/dispatch.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rtb/bench/report.hpp"
#include "rtb/common/error.hpp"
#include "rtb/common/log.hpp"
#include "rtb/common/parallel.hpp"
#include "rtb/common/text.hpp"
#include "rtb/ctr/fm.hpp"
#include "rtb/ingest/cache.hpp"
#include "rtb/ingest/log_format.hpp"
#include "rtb/ingest/statistics.hpp"
#include "rtb/ingest/synthetic.hpp"
#include "rtb/strategies/agents.hpp"
#include "rtb/strategies/rlb.hpp"
#include "rtb/strategies/static.hpp"

namespace rtb::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kDataEnv = "RTB_ARENA_DATA";
constexpr const char* kAllFractions = "1/2,1/4,1/8,1/16";

// ---- Knob catalog ---------------------------------------------------------------------

void add(std::vector<Knob>& v, std::vector<Knob> more) { v.insert(v.end(), more.begin(), more.end()); }

std::vector<Knob> common_knobs() {
  return {{"config", "", "key/value settings file ([common] and per-subcommand sections)"},
          {"log-level", "info", "debug, info, warn, error or silent"},
          {"jobs", "", "worker threads (default: available cores)"},
          {"output-dir", "rtb-out", "directory for outputs without an explicit path"}};
}

std::vector<Knob> source_knobs() {
  return {{"data-dir", "", "log root holding <campaign>/train.log.txt and test.log.txt (env RTB_ARENA_DATA)"},
          {"campaign", "1458", "campaign directory under --data-dir"},
          {"schema", "", "column schema file (default: <campaign>/schema.txt if present, else iPinYou)"},
          {"synthetic", "", "generate a campaign instead of reading logs, e.g. seed=1,n=500000 ('default')"},
          {"dataset", "", "dataset cache written by ingest, synth or ctr score"}};
}

std::vector<Knob> ctr_knobs() {
  const ctr::TrainConfig d;
  return {{"ctr-k", std::to_string(d.k), "latent factor dimension"},
          {"ctr-epochs", std::to_string(d.epochs), "passes over the training days"},
          {"ctr-lr", "0.01", "AdaGrad base step"},
          {"ctr-l2", "1e-5", "L2 penalty on linear and latent weights"},
          {"ctr-seed", std::to_string(d.seed), "initialization and shuffling seed"},
          {"ctr-negative-keep", "1", "fraction of non-click examples kept per epoch"}};
}

std::vector<Knob> agent_shape_knobs() {
  return {{"hidden-width", "", "units per hidden layer"},
          {"hidden-layers", "", "hidden layers of the Q network / actor / critics"},
          {"lr", "", "Adam learning rate"},
          {"batch", "", "replay minibatch size"},
          {"buffer", "", "replay buffer capacity"},
          {"gamma", "", "discount factor"},
          {"select-best", "", "keep the epoch with most greedy training clicks", true},
          {"target-refresh", "", "DRLB target network copy interval (updates)"},
          {"exploration-std", "", "FAB Gaussian action noise"},
          {"policy-delay", "", "FAB actor update delay"},
          {"tau", "", "FAB target averaging rate"},
          {"reward-fit-steps", "", "DNN reward fit steps per episode"}};
}

std::vector<Knob> rlb_knobs() {
  const strategies::RlbConfig d;
  return {{"rlb-budget-units", std::to_string(d.budget_units), "RLB table budget grid size"},
          {"rlb-buckets", std::to_string(d.pctr_buckets), "RLB pctr quantile buckets"},
          {"rlb-headroom", "2", "RLB horizon headroom factor"},
          {"rlb-max-steps", std::to_string(d.max_steps), "RLB table horizon cap"}};
}

std::vector<Knob> ortb_knobs() {
  return {{"ortb-c", "34", "ORTB c"}, {"ortb-lambda", "5.2e-7", "ORTB lambda"}};
}

std::map<std::string, std::vector<Knob>> build_catalog() {
  std::map<std::string, std::vector<Knob>> m;
  auto base = [](bool with_source) {
    auto v = common_knobs();
    if (with_source) add(v, source_knobs());
    return v;
  };

  auto ingest = base(false);
  add(ingest, {{"data-dir", "", "log root holding <campaign>/train.log.txt and test.log.txt (env RTB_ARENA_DATA)"},
               {"campaign", "1458", "campaign directory under --data-dir"},
               {"schema", "", "column schema file"},
               {"out", "", "dataset cache path (default <output-dir>/<campaign>.dataset)"}});
  m["ingest"] = ingest;

  auto synth = base(false);
  add(synth, {{"synthetic", "default", "generator settings, e.g. seed=1,n=500000,days=10"},
              {"out", "", "dataset cache path (default <output-dir>/synthetic.dataset)"},
              {"write-logs", "false", "also write TSV logs under --data-dir/--campaign", true},
              {"data-dir", "", "log root for --write-logs (env RTB_ARENA_DATA)"},
              {"campaign", "synthetic", "campaign directory for --write-logs"}});
  m["synth"] = synth;

  auto ctr_train = base(true);
  add(ctr_train, ctr_knobs());
  add(ctr_train, {{"model", "", "model output path (default <output-dir>/ctr.fm)"},
                  {"out", "", "also write the scored dataset here"}});
  m["ctr train"] = ctr_train;

  auto ctr_score = base(true);
  add(ctr_score, {{"model", "", "trained model file"},
                  {"out", "", "scored dataset path (default <output-dir>/scored.dataset)"}});
  m["ctr score"] = ctr_score;

  auto tune = base(true);
  add(tune, {{"budget-frac", kAllFractions, "budget fractions"},
             {"slots", "96", "time slots per day"},
             {"cache-dir", "", "also store results where bench looks for them"},
             {"out", "", "JSON output path (default: stdout only)"}});
  m["tune-lin"] = tune;

  auto train = base(true);
  add(train, {{"strategy", "fab", "drlb, fab or rlb"},
              {"reward", "", "clk, pctr, dnn or op (default: dnn for drlb, op for fab)"},
              {"state-scheme", "", "DRLB state: state1..state6 or full7 (default state6)"},
              {"cumulative-rates", "", "DRLB rates over all finished slots", true},
              {"slots", "", "time slots per day (default: 96 drlb, 24 fab)"},
              {"seed", "1", "agent seed"},
              {"epochs", "", "training epochs (default: 40 drlb, 120 fab)"},
              {"budget-frac", "1/2", "budget fraction"},
              {"base-bid", "", "LIN base bid (default: tuned on the training days)"},
              {"out", "", "checkpoint path (default <output-dir>/<strategy>.ckpt)"},
              {"curve", "", "training curve CSV (default <out>.curve.csv)"}});
  add(train, agent_shape_knobs());
  add(train, rlb_knobs());
  m["train"] = train;

  auto replay = base(true);
  add(replay, {{"strategy", "lin", "lin, ortb, rlb, drlb or fab"},
               {"checkpoint", "", "agent checkpoint (drlb, fab)"},
               {"budget-frac", "1/2", "budget fraction"},
               {"slots", "", "time slots per day (default: 96, or the checkpoint's)"},
               {"split", "test", "train or test days"},
               {"base-bid", "", "LIN base bid (default: tuned on the training days)"},
               {"trace", "", "per-slot trace CSV path"},
               {"out", "", "JSON-lines output path (default: stdout)"}});
  add(replay, ortb_knobs());
  add(replay, rlb_knobs());
  m["replay"] = replay;

  auto bench = base(true);
  add(bench, {{"strategies", "lin,ortb,rlb,drlb,fab", "strategies of the main grid"},
              {"budget-frac", kAllFractions, "budget fractions of the main grid"},
              {"seeds", "1,2,3", "agent seeds"},
              {"ablations", "true", "also run the state, slot and reward tables and the base-bid trace", true},
              {"slot-counts", "24,48,96", "slot ablation counts"},
              {"schemes", "state6,state5,state4,state3,state2,state1", "state ablation schemes"},
              {"rewards", "clk,pctr,dnn,op", "reward ablation variants"},
              {"reward-fractions", "1/2,1/16", "reward ablation fractions"},
              {"ablation-fraction", "1/2", "fraction of the state and slot ablations and the trace"},
              {"trace-day", "2", "test-day index of the base-bid trace"},
              {"static-slots", "96", "slot granularity of LIN, ORTB and RLB"},
              {"drlb-epochs", "", "DRLB epochs (default 40)"},
              {"fab-epochs", "", "FAB epochs (default 120)"},
              {"drlb-slots", "", "DRLB slots (default 96)"},
              {"fab-slots", "", "FAB slots (default 24)"},
              {"drlb-reward", "", "DRLB reward (default dnn)"},
              {"fab-reward", "", "FAB reward (default op)"},
              {"state-scheme", "", "DRLB state scheme of the main grid (default state6)"},
              {"cumulative-rates", "", "DRLB rates over all finished slots in the main grid", true},
              {"cache-dir", "", "artifact and checkpoint cache"},
              {"ctr-model", "", "pre-trained CTR model"},
              {"auto-build", "true", "train the CTR model and tune LIN when not cached", true}});
  add(bench, ctr_knobs());
  add(bench, agent_shape_knobs());
  add(bench, ortb_knobs());
  add(bench, rlb_knobs());
  m["bench"] = bench;

  auto trace = base(true);
  add(trace, {{"drlb-checkpoint", "", "DRLB checkpoint (96 slots)"},
              {"fab-checkpoint", "", "FAB checkpoint (96 slots)"},
              {"day", "2", "test-day index"},
              {"budget-frac", "1/2", "budget fraction"},
              {"out", "", "CSV path (default: stdout)"}});
  m["trace"] = trace;
  return m;
}

const std::map<std::string, std::vector<Knob>>& catalog() {
  static const auto c = build_catalog();
  return c;
}

std::string section_of(const std::string& command) { return command.starts_with("ctr ") ? "ctr" : command; }

// ---- Helpers --------------------------------------------------------------------------

unsigned jobs_of(const RunConfig& c) {
  if (!c.has("jobs")) return default_jobs();
  const auto j = c.get_int("jobs");
  if (j < 1 || j > 1024) throw ConfigError("jobs", "must be in [1, 1024]");
  return static_cast<unsigned>(j);
}

void apply_log_level(const RunConfig& c) {
  const auto& v = c.get("log-level");
  if (v == "debug") log::set_level(log::Level::kDebug);
  else if (v == "info") log::set_level(log::Level::kInfo);
  else if (v == "warn") log::set_level(log::Level::kWarn);
  else if (v == "error") log::set_level(log::Level::kError);
  else if (v == "silent") log::set_level(log::Level::kSilent);
  else throw ConfigError("log-level", "expected debug, info, warn, error or silent");
}

fs::path output_path(const RunConfig& c, const std::string& key, const std::string& default_name) {
  fs::path p = c.has(key) ? fs::path(c.get(key)) : fs::path(c.get("output-dir")) / default_name;
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  return p;
}

std::vector<ingest::BudgetFraction> fractions_of(const RunConfig& c, const std::string& key) {
  std::vector<ingest::BudgetFraction> out;
  for (const auto& s : c.get_list(key)) {
    try {
      out.push_back(ingest::BudgetFraction::parse(s));
    } catch (const ConfigError& e) {
      throw ConfigError(key, e.what());
    }
  }
  if (out.empty()) throw ConfigError(key, "needs at least one fraction");
  return out;
}

ingest::BudgetFraction fraction_of(const RunConfig& c, const std::string& key) {
  const auto all = fractions_of(c, key);
  if (all.size() != 1) throw ConfigError(key, "expects a single fraction");
  return all.front();
}

int slots_of(const RunConfig& c, const std::string& key, int fallback) {
  const int s = c.has(key) ? static_cast<int>(c.get_int(key)) : fallback;
  if (!ingest::is_supported_slot_count(s)) throw ConfigError(key, "must be 24, 48 or 96");
  return s;
}

std::string write_schema_text(const ingest::LogSchema& s) {
  auto join = [](const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
    return out;
  };
  return "columns = " + join(s.columns) + "\nclick = " + s.click_column + "\ntimestamp = " + s.timestamp_column +
         "\nmarket_price = " + s.price_column + "\nfeatures = " + join(s.feature_columns) + "\n";
}

ingest::CampaignDataset synthetic_dataset(const std::string& spec) {
  const auto sc = ingest::SyntheticConfig::parse(spec == "default" ? "" : spec);
  auto log = ingest::gen_synthetic_log(sc);
  auto days = ingest::group_days(std::move(log.records));
  if (static_cast<int>(days.size()) <= sc.test_days) throw DataError("synthetic campaign has too few non-empty days");
  const auto train = days.size() - static_cast<std::size_t>(sc.test_days);
  return ingest::split_campaign("synthetic", std::move(days), log.tokens, train, static_cast<std::size_t>(sc.test_days));
}

ingest::CampaignDataset read_campaign(const RunConfig& c) {
  if (!c.has("data-dir")) throw ConfigError("data-dir", "--data-dir (or RTB_ARENA_DATA) is required");
  const fs::path dir = fs::path(c.get("data-dir")) / c.get("campaign");
  ingest::LogSchema schema = ingest::LogSchema::ipinyou();
  if (c.has("schema")) schema = ingest::LogSchema::load(c.get("schema"));
  else if (fs::exists(dir / "schema.txt")) schema = ingest::LogSchema::load(dir / "schema.txt");

  auto pool = std::make_shared<ingest::TokenPool>();
  auto read = [&](const char* name) {
    const auto path = dir / name;
    if (!fs::exists(path)) throw DataError("missing log file " + path.string());
    auto r = ingest::read_log_file(path, schema, *pool);
    if (r.skipped_lines > 0) {
      log::warn(path.string() + ": skipped " + std::to_string(r.skipped_lines) + " malformed lines");
      for (const auto& e : r.first_errors) log::warn("  " + e);
    }
    return ingest::group_days(std::move(r.records));
  };
  auto train = read("train.log.txt");
  auto test = read("test.log.txt");
  const auto n_train = train.size();
  const auto n_test = test.size();
  train.insert(train.end(), test.begin(), test.end());
  return ingest::split_campaign(c.get("campaign"), std::move(train), pool, n_train, n_test);
}

ingest::CampaignDataset load_source(const RunConfig& c) {
  if (c.has("dataset")) return ingest::load_dataset(c.get("dataset")).dataset;
  if (c.has("synthetic")) return synthetic_dataset(c.get("synthetic"));
  if (c.has("data-dir")) return read_campaign(c);
  throw ConfigError("dataset", "no input: pass --dataset, --synthetic or --data-dir (or set RTB_ARENA_DATA)");
}

void require_scored(const ingest::CampaignDataset& ds) {
  if (!ds.scored()) throw DataError("dataset has no pctr; run `rtb-arena ctr score` first");
}

ctr::TrainConfig ctr_config(const RunConfig& c) {
  ctr::TrainConfig t;
  t.k = static_cast<int>(c.get_int("ctr-k"));
  t.epochs = static_cast<int>(c.get_int("ctr-epochs"));
  t.learning_rate = c.get_double("ctr-lr");
  t.l2_linear = t.l2_latent = c.get_double("ctr-l2");
  t.seed = static_cast<std::uint64_t>(c.get_int("ctr-seed"));
  t.negative_keep_rate = c.get_double("ctr-negative-keep");
  t.validate();
  return t;
}

strategies::RlbConfig rlb_config(const RunConfig& c) {
  strategies::RlbConfig r;
  r.budget_units = static_cast<int>(c.get_int("rlb-budget-units"));
  r.pctr_buckets = static_cast<int>(c.get_int("rlb-buckets"));
  r.headroom = c.get_double("rlb-headroom");
  r.max_steps = static_cast<int>(c.get_int("rlb-max-steps"));
  if (r.budget_units < 1) throw ConfigError("rlb-budget-units", "must be >= 1");
  if (r.pctr_buckets < 1) throw ConfigError("rlb-buckets", "must be >= 1");
  if (!(r.headroom > 0)) throw ConfigError("rlb-headroom", "must be > 0");
  if (r.max_steps < 1) throw ConfigError("rlb-max-steps", "must be >= 1");
  return r;
}

strategies::OrtbParams ortb_params(const RunConfig& c) {
  strategies::OrtbParams p{c.get_double("ortb-c"), c.get_double("ortb-lambda")};
  p.validate();
  return p;
}

void apply_agent_shape(const RunConfig& c, strategies::AgentConfig& a) {
  auto int_knob = [&](const char* key, auto& field, long long min) {
    if (!c.has(key)) return;
    const auto v = c.get_int(key);
    if (v < min) throw ConfigError(key, "must be >= " + std::to_string(min));
    field = static_cast<std::remove_reference_t<decltype(field)>>(v);
  };
  auto positive = [&](const char* key, double& field) {
    if (!c.has(key)) return;
    field = c.get_double(key);
    if (!(field > 0)) throw ConfigError(key, "must be > 0");
  };
  int_knob("hidden-width", a.hidden_width, 1);
  int_knob("hidden-layers", a.hidden_layers, 0);
  positive("lr", a.learning_rate);
  int_knob("batch", a.batch, 1);
  int_knob("buffer", a.buffer, 1);
  if (c.has("gamma")) {
    a.gamma = c.get_double("gamma");
    if (a.gamma < 0 || a.gamma > 1) throw ConfigError("gamma", "must be in [0, 1]");
    a.td3.gamma = a.gamma;
  }
  if (c.has("select-best")) a.select_best = c.get_bool("select-best");
  int_knob("target-refresh", a.target_refresh, 1);
  if (c.has("exploration-std")) {
    a.exploration_std = c.get_double("exploration-std");
    if (a.exploration_std < 0) throw ConfigError("exploration-std", "must be >= 0");
  }
  int_knob("policy-delay", a.td3.policy_delay, 1);
  positive("tau", a.td3.tau);
  int_knob("reward-fit-steps", a.reward_fit_steps, 0);
}

int tuned_base_bid(const RunConfig& c, const ingest::CampaignDataset& ds, ingest::BudgetFraction f, int slots) {
  if (c.has("base-bid")) {
    const auto b = c.get_int("base-bid");
    if (b < 1 || b > 300) throw ConfigError("base-bid", "must be in [1, 300]");
    return static_cast<int>(b);
  }
  const auto train = ds.train_episodes(slots, f);
  return strategies::tune_base_bid(train, ds.avg_pctr_train, jobs_of(c)).base_bid;
}

json objective_json(const auction::Objective& o) { return {{"clicks", o.clicks}, {"pctr_sum", o.pctr_sum}}; }

// ---- Subcommands ----------------------------------------------------------------------

int run_ingest(const RunConfig& c, std::ostream& out) {
  auto ds = read_campaign(c);
  const auto path = output_path(c, "out", c.get("campaign") + ".dataset");
  ingest::save_dataset(path, ds, c.provenance());
  const auto stats = ingest::dataset_statistics(ds);
  out << json{{"dataset", path.string()},
              {"train", {{"days", stats.train.days}, {"imps", stats.train.imps}, {"clicks", stats.train.clicks},
                         {"cost", stats.train.cost}}},
              {"test", {{"days", stats.test.days}, {"imps", stats.test.imps}, {"clicks", stats.test.clicks},
                        {"cost", stats.test.cost}}}}
             .dump()
      << '\n';
  return kExitOk;
}

int run_synth(const RunConfig& c, std::ostream& out) {
  const auto spec = c.get("synthetic");
  const auto sc = ingest::SyntheticConfig::parse(spec == "default" ? "" : spec);
  auto ds = synthetic_dataset(spec);
  const auto path = output_path(c, "out", "synthetic.dataset");
  ingest::save_dataset(path, ds, c.provenance() + "generator=" + sc.describe() + "\n");
  json j{{"dataset", path.string()}, {"generator", sc.describe()}};
  if (c.get_bool("write-logs")) {
    if (!c.has("data-dir")) throw ConfigError("data-dir", "--write-logs needs --data-dir (or RTB_ARENA_DATA)");
    const fs::path dir = fs::path(c.get("data-dir")) / c.get("campaign");
    fs::create_directories(dir);
    const auto schema = ingest::synthetic_schema(sc.n_fields);
    std::ofstream(dir / "schema.txt") << write_schema_text(schema);
    auto write = [&](const char* name, const std::vector<ingest::DayPtr>& days) {
      std::ofstream f(dir / name, std::ios::trunc);
      if (!f) throw DataError("cannot write " + (dir / name).string());
      f << ingest::format_log_header(schema) << '\n';
      for (const auto& d : days) {
        for (const auto& r : d->records) f << ingest::format_log_record(r, schema, *ds.tokens) << '\n';
      }
    };
    write("train.log.txt", ds.train_days);
    write("test.log.txt", ds.test_days);
    j["logs"] = dir.string();
  }
  out << j.dump() << '\n';
  return kExitOk;
}

int run_ctr_train(const RunConfig& c, std::ostream& out) {
  auto ds = load_source(c);
  const auto cfg = ctr_config(c);
  ctr::TrainReport report;
  const auto model = ctr::fm_train(ds.train_days, *ds.tokens, cfg, &report);
  const auto path = output_path(c, "model", "ctr.fm");
  model.save(path, c.provenance());
  std::vector<double> scores;
  std::vector<int> labels;
  ctr::predict_days(model, *ds.tokens, ds.test_days, scores, labels);
  json j{{"model", path.string()}, {"test_auc", ctr::auc(scores, labels)}, {"epoch_loss", report.epoch_loss}};
  if (c.has("out")) {
    const auto scored = ctr::score_dataset(model, ds);
    ingest::save_dataset(output_path(c, "out", ""), scored, c.provenance());
    j["dataset"] = c.get("out");
  }
  out << j.dump() << '\n';
  return kExitOk;
}

int run_ctr_score(const RunConfig& c, std::ostream& out) {
  if (!c.has("model")) throw ConfigError("model", "--model is required");
  const auto model = ctr::FmModel::load(c.get("model"));
  const auto scored = ctr::score_dataset(model, load_source(c));
  const auto path = output_path(c, "out", "scored.dataset");
  ingest::save_dataset(path, scored, c.provenance());
  std::vector<double> scores;
  std::vector<int> labels;
  ctr::predict_days(model, *scored.tokens, scored.test_days, scores, labels);
  out << json{{"dataset", path.string()}, {"test_auc", ctr::auc(scores, labels)}, {"avg_pctr_train", scored.avg_pctr_train}}
             .dump()
      << '\n';
  return kExitOk;
}

int run_tune_lin(const RunConfig& c, std::ostream& out) {
  const auto ds = load_source(c);
  require_scored(ds);
  const int slots = slots_of(c, "slots", 96);
  const auto hash = c.has("cache-dir") ? bench::dataset_hash(ds) : std::string{};
  json results = json::array();
  for (auto f : fractions_of(c, "budget-frac")) {
    const auto train = ds.train_episodes(slots, f);
    const auto t = strategies::tune_base_bid(train, ds.avg_pctr_train, jobs_of(c));
    results.push_back({{"fraction", f.label()}, {"base_bid", t.base_bid}, {"clicks", t.clicks}, {"pctr_sum", t.pctr_sum}});
    if (c.has("cache-dir")) {
      fs::create_directories(c.get("cache-dir"));
      bench::save_tune(bench::lin_cache_path(c.get("cache-dir"), hash, f), t);
    }
  }
  json doc{{"provenance", c.provenance()}, {"results", results}};
  if (c.has("out")) std::ofstream(output_path(c, "out", "")) << doc.dump(2) << '\n';
  out << results.dump() << '\n';
  return kExitOk;
}

int run_train(const RunConfig& c, std::ostream& out) {
  const auto kind = bench::parse_strategy(c.get("strategy"));
  const auto ds = load_source(c);
  require_scored(ds);
  const auto f = fraction_of(c, "budget-frac");
  if (kind == bench::StrategyKind::kRlb) {
    const int slots = slots_of(c, "slots", 96);
    const auto model = strategies::rlb_lite_build(ds.train_episodes(slots, f), rlb_config(c));
    out << json{{"strategy", "RLB"}, {"fraction", f.label()}, {"steps", model.table.steps()}}.dump() << '\n';
    return kExitOk;
  }
  if (!bench::is_learned(kind)) throw ConfigError("strategy", "train supports drlb, fab and rlb");
  const bool drlb = kind == bench::StrategyKind::kDrlb;
  auto agent = drlb ? strategies::AgentConfig::drlb_defaults() : strategies::AgentConfig::fab_defaults();
  agent.slots = slots_of(c, "slots", agent.slots);
  agent.seed = static_cast<std::uint64_t>(c.get_int("seed"));
  if (c.has("epochs")) {
    agent.epochs = static_cast<int>(c.get_int("epochs"));
    if (agent.epochs < 0) throw ConfigError("epochs", "must be >= 0");
  }
  if (c.has("reward")) agent.reward = strategies::parse_reward(c.get("reward"));
  if (c.has("state-scheme")) agent.scheme = strategies::parse_scheme(c.get("state-scheme"));
  if (c.has("cumulative-rates")) agent.cumulative_rates = c.get_bool("cumulative-rates");
  apply_agent_shape(c, agent);

  const strategies::LinParams lin{tuned_base_bid(c, ds, f, agent.slots), ds.avg_pctr_train};
  const auto train = ds.train_episodes(agent.slots, f);
  const auto ck = drlb ? strategies::train_drlb(train, lin, agent, c.provenance())
                       : strategies::train_fab(train, lin, agent, c.provenance());
  const auto path = output_path(c, "out", drlb ? "drlb.ckpt" : "fab.ckpt");
  ck.save(path);
  const fs::path curve = c.has("curve") ? fs::path(c.get("curve")) : fs::path(path.string() + ".curve.csv");
  {
    std::ofstream f_out(curve, std::ios::trunc);
    if (!f_out) throw DataError("cannot write " + curve.string());
    bench::write_provenance(f_out, c.provenance());
    strategies::write_training_curve_csv(f_out, ck);
  }
  const auto test = strategies::evaluate_policy(ck, ds.test_episodes(agent.slots, f));
  out << json{{"checkpoint", path.string()},
              {"curve", curve.string()},
              {"strategy", ck.strategy},
              {"base_bid", lin.base_bid},
              {"selected_epoch", ck.selected_epoch},
              {"training_steps", ck.training_steps},
              {"test", objective_json(test)}}
             .dump()
      << '\n';
  return kExitOk;
}

int run_replay(const RunConfig& c, std::ostream& out) {
  const auto kind = bench::parse_strategy(c.get("strategy"));
  const auto ds = load_source(c);
  require_scored(ds);
  const auto f = fraction_of(c, "budget-frac");
  int slots = slots_of(c, "slots", 96);

  std::unique_ptr<auction::BidStrategy> strategy;
  strategies::RlbModel rlb;
  if (bench::is_learned(kind)) {
    if (!c.has("checkpoint")) throw ConfigError("checkpoint", "--checkpoint is required for " + c.get("strategy"));
    const auto ck = strategies::AgentCheckpoint::load(c.get("checkpoint"));
    if (ck.strategy != bench::strategy_name(kind)) {
      throw ConfigError("checkpoint", "checkpoint holds a " + ck.strategy + " agent");
    }
    if (c.has("slots") && slots != ck.slot_count) {
      throw ConfigError("slots", "checkpoint was trained with " + std::to_string(ck.slot_count) + " slots");
    }
    slots = ck.slot_count;
    strategy = strategies::make_policy(ck);
  } else if (kind == bench::StrategyKind::kLin) {
    strategy = std::make_unique<strategies::LinStrategy>(
        strategies::LinParams{tuned_base_bid(c, ds, f, slots), ds.avg_pctr_train});
  } else if (kind == bench::StrategyKind::kOrtb) {
    strategy = std::make_unique<strategies::OrtbStrategy>(ortb_params(c));
  } else {
    rlb = strategies::rlb_lite_build(ds.train_episodes(slots, f), rlb_config(c));
    strategy = std::make_unique<strategies::RlbStrategy>(rlb);
  }

  const auto& split = c.get("split");
  if (split != "test" && split != "train") throw ConfigError("split", "expected train or test");
  const auto episodes = split == "test" ? ds.test_episodes(slots, f) : ds.train_episodes(slots, f);

  std::ofstream file;
  if (c.has("out")) file.open(output_path(c, "out", ""), std::ios::trunc);
  std::ostream& sink = c.has("out") ? static_cast<std::ostream&>(file) : out;
  std::ofstream trace;
  if (c.has("trace")) {
    trace.open(output_path(c, "trace", ""), std::ios::trunc);
    bench::write_provenance(trace, c.provenance());
    auction::write_slot_trace_header(trace);
  }
  auction::Objective total;
  std::int64_t cost = 0;
  for (const auto& ep : episodes) {
    const auto r = auction::run_episode(*strategy, ep);
    sink << auction::to_json_line(r, strategy->name()) << '\n';
    if (trace.is_open()) auction::write_slot_trace_rows(trace, r, std::to_string(r.date));
    total.clicks += r.clicks;
    total.pctr_sum += r.pctr_sum;
    cost += r.cost;
  }
  sink << json{{"strategy", strategy->name()}, {"split", split}, {"fraction", f.label()},
               {"clicks", total.clicks}, {"pctr_sum", total.pctr_sum}, {"cost", cost}}
              .dump()
       << '\n';
  return kExitOk;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const RunConfig& c, const std::string& key, Parse parse) {
  std::vector<T> out;
  for (const auto& s : c.get_list(key)) {
    try {
      out.push_back(parse(s));
    } catch (const ConfigError& e) {
      throw ConfigError(key, e.what());
    }
  }
  return out;
}

bench::ExperimentConfig experiment_config(const RunConfig& c, const ingest::CampaignDataset& ds) {
  bench::ExperimentConfig e;
  e.campaign = ds.campaign_id;
  e.strategies = parse_list<bench::StrategyKind>(c, "strategies", [](const std::string& s) { return bench::parse_strategy(s); });
  e.fractions = fractions_of(c, "budget-frac");
  e.seeds = parse_list<std::uint64_t>(c, "seeds", [](const std::string& s) {
    const auto v = text::parse_int<std::uint64_t>(s);
    if (!v) throw ConfigError("seeds", "not an integer: '" + s + "'");
    return *v;
  });
  e.slot_counts = parse_list<int>(c, "slot-counts", [](const std::string& s) {
    const auto v = text::parse_int<int>(s);
    if (!v) throw ConfigError("slot-counts", "not an integer: '" + s + "'");
    return *v;
  });
  e.schemes = parse_list<strategies::StateScheme>(c, "schemes", [](const std::string& s) { return strategies::parse_scheme(s); });
  e.rewards = parse_list<strategies::RewardVariant>(c, "rewards", [](const std::string& s) { return strategies::parse_reward(s); });
  e.reward_fractions = fractions_of(c, "reward-fractions");
  e.ablation_fraction = fraction_of(c, "ablation-fraction");
  e.trace_test_day = static_cast<int>(c.get_int("trace-day"));
  e.static_slots = slots_of(c, "static-slots", 96);
  e.ctr = ctr_config(c);
  e.ortb = ortb_params(c);
  e.rlb = rlb_config(c);
  apply_agent_shape(c, e.drlb);
  apply_agent_shape(c, e.fab);
  auto epochs = [&](const char* key, int& field) {
    if (!c.has(key)) return;
    field = static_cast<int>(c.get_int(key));
    if (field < 0) throw ConfigError(key, "must be >= 0");
  };
  epochs("drlb-epochs", e.drlb.epochs);
  epochs("fab-epochs", e.fab.epochs);
  e.drlb.slots = slots_of(c, "drlb-slots", e.drlb.slots);
  e.fab.slots = slots_of(c, "fab-slots", e.fab.slots);
  if (c.has("drlb-reward")) e.drlb.reward = strategies::parse_reward(c.get("drlb-reward"));
  if (c.has("fab-reward")) e.fab.reward = strategies::parse_reward(c.get("fab-reward"));
  if (c.has("state-scheme")) e.drlb.scheme = strategies::parse_scheme(c.get("state-scheme"));
  if (c.has("cumulative-rates")) e.drlb.cumulative_rates = c.get_bool("cumulative-rates");
  e.output_dir = c.get("output-dir");
  if (c.has("cache-dir")) e.cache_dir = c.get("cache-dir");
  if (c.has("ctr-model")) e.ctr_model = c.get("ctr-model");
  e.jobs = jobs_of(c);
  e.auto_build = c.get_bool("auto-build");
  e.provenance = c.provenance();
  e.validate();
  return e;
}

int run_bench(const RunConfig& c, std::ostream& out) {
  const auto raw = load_source(c);
  const auto cfg = experiment_config(c, raw);
  bench::Runner runner(cfg, bench::prepare_artifacts(raw, cfg));
  const auto outputs = bench::run_bench(runner, c.get_bool("ablations"));
  bench::write_outputs(runner, outputs);
  bench::write_aggregates_csv(out, outputs.grid.aggregates);
  return kExitOk;
}

int run_trace(const RunConfig& c, std::ostream& out) {
  if (!c.has("drlb-checkpoint")) throw ConfigError("drlb-checkpoint", "--drlb-checkpoint is required");
  if (!c.has("fab-checkpoint")) throw ConfigError("fab-checkpoint", "--fab-checkpoint is required");
  const auto drlb = strategies::AgentCheckpoint::load(c.get("drlb-checkpoint"));
  const auto fab = strategies::AgentCheckpoint::load(c.get("fab-checkpoint"));
  const auto ds = load_source(c);
  require_scored(ds);
  const auto f = fraction_of(c, "budget-frac");
  const auto day = c.get_int("day");
  const auto test = ds.test_episodes(96, f);
  if (day < 0 || day >= static_cast<std::int64_t>(test.size())) {
    throw ConfigError("day", "must be in [0, " + std::to_string(test.size()) + ")");
  }
  const auto rows = bench::base_bid_trace(test[static_cast<std::size_t>(day)], ds.avg_pctr_train, drlb, fab);
  if (c.has("out")) {
    std::ofstream file(output_path(c, "out", ""), std::ios::trunc);
    bench::write_provenance(file, c.provenance());
    bench::write_base_bid_trace_csv(file, rows);
  } else {
    bench::write_base_bid_trace_csv(out, rows);
  }
  return kExitOk;
}

std::string describe_help(const Knob& k) {
  return k.default_value.empty() ? k.help : k.help + " [default: " + k.default_value + "]";
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"ingest", "synth", "ctr", "tune-lin", "train", "replay", "bench", "trace"};
  return names;
}

std::vector<Knob> knobs_for(const std::string& command) {
  auto it = catalog().find(command);
  if (it == catalog().end()) throw ConfigError("command", "unknown subcommand '" + command + "'");
  return it->second;
}

int execute(const RunConfig& c, std::ostream& out, std::ostream& err) {
  try {
    apply_log_level(c);
    const auto& cmd = c.command();
    if (cmd == "ingest") return run_ingest(c, out);
    if (cmd == "synth") return run_synth(c, out);
    if (cmd == "ctr train") return run_ctr_train(c, out);
    if (cmd == "ctr score") return run_ctr_score(c, out);
    if (cmd == "tune-lin") return run_tune_lin(c, out);
    if (cmd == "train") return run_train(c, out);
    if (cmd == "replay") return run_replay(c, out);
    if (cmd == "bench") return run_bench(c, out);
    if (cmd == "trace") return run_trace(c, out);
    throw ConfigError("command", "unknown subcommand '" + cmd + "'");
  } catch (const ConfigError& e) {
    err << "rtb-arena: config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "rtb-arena: numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DataError& e) {
    err << "rtb-arena: data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "rtb-arena: error: " << e.what() << '\n';
    return kExitData;
  }
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Auction replay simulator and bidding-strategy benchmark", "rtb-arena"};
  app.require_subcommand(1);

  // Raw flag text per command; only flags actually given override lower layers.
  std::map<std::string, std::map<std::string, std::string>> raw;
  std::map<std::string, CLI::App*> apps;
  auto register_knobs = [&](CLI::App* sub, const std::string& command) {
    apps[command] = sub;
    auto& store = raw[command];
    for (const auto& k : knobs_for(command)) {
      auto& slot = store[k.key];
      if (k.flag) {
        sub->add_flag("--" + k.key + "{true},--no-" + k.key + "{false}", slot, describe_help(k));
      } else {
        sub->add_option("--" + k.key, slot, describe_help(k));
      }
    }
  };
  const std::map<std::string, std::string> blurbs{
      {"ingest", "read <campaign> train/test logs into a dataset cache"},
      {"synth", "generate a synthetic campaign"},
      {"ctr", "train or apply the factorization-machine CTR model"},
      {"tune-lin", "grid-search the LIN base bid per budget fraction"},
      {"train", "train a DRLB or FAB agent (or build the RLB table)"},
      {"replay", "replay a strategy over the train or test days"},
      {"bench", "run the experiment grid and ablations, write reports"},
      {"trace", "per-slot base bids of DRLB and FAB against the per-slot optimum"}};
  for (const auto& name : subcommands()) {
    auto* sub = app.add_subcommand(name, blurbs.at(name));
    if (name == "ctr") {
      sub->require_subcommand(1);
      register_knobs(sub->add_subcommand("train", "fit the model on the training days"), "ctr train");
      register_knobs(sub->add_subcommand("score", "fill pctr for every record"), "ctr score");
    } else {
      register_knobs(sub, name);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  std::string command;
  for (const auto& [name, sub] : apps) {
    if (sub->parsed()) command = name;
  }
  try {
    RunConfig config(command, section_of(command));
    for (const auto& k : knobs_for(command)) config.declare(k);
    if (config.declared("data-dir")) {
      if (const char* env = std::getenv(kDataEnv); env && *env) config.set("data-dir", env, Source::kEnv);
    }
    auto* sub = apps.at(command);
    const auto& given = raw.at(command);
    if (sub->count("--config") > 0) {
      std::set<std::string> elsewhere, sections;
      for (const auto& [name, knobs] : catalog()) {
        sections.insert(section_of(name));
        for (const auto& k : knobs) elsewhere.insert(k.key);
      }
      config.apply_file(IniFile::load(given.at("config")), elsewhere, sections);
    }
    for (const auto& [key, value] : given) {
      if (sub->count("--" + key) > 0) config.set(key, value, Source::kFlag);
    }
    return execute(config, out, err);
  } catch (const ConfigError& e) {
    err << "rtb-arena: config error: " << e.what() << '\n';
    return kExitUsage;
  }
}

}  // namespace rtb::cli
