// Acceptance run: one PASS / FAIL / SKIP line per criterion, exit status 1 if any failed.
// Pass criterion numbers as arguments to run a subset, e.g. `acceptance 5 7`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "rtb/auction/replay.hpp"
#include "rtb/bench/experiment.hpp"
#include "rtb/bench/report.hpp"
#include "rtb/cli/dispatch.hpp"
#include "rtb/common/log.hpp"
#include "rtb/ctr/fm.hpp"
#include "rtb/ingest/cache.hpp"
#include "rtb/ingest/synthetic.hpp"
#include "rtb/rl/mlp.hpp"
#include "rtb/strategies/agents.hpp"
#include "rtb/strategies/mdp.hpp"
#include "rtb/strategies/rlb.hpp"
#include "rtb/strategies/static.hpp"

namespace {

using namespace rtb;
using ingest::BudgetFraction;
using ingest::Episode;
using testing::Rng;

struct Verdict {
  enum Kind { kPass, kFail, kSkip } kind = kPass;
  std::string detail;
};

Verdict fail(std::string d) { return {Verdict::kFail, std::move(d)}; }
Verdict judge(bool ok, std::string d) { return {ok ? Verdict::kPass : Verdict::kFail, std::move(d)}; }

std::string fmt(double x, int precision = 4) {
  std::ostringstream os;
  os.precision(precision);
  os << x;
  return os.str();
}

// ---- 1: bid-factor algebra ---------------------------------------------------------------

Verdict algebra() {
  Rng rng(101);
  std::uniform_real_distribution<double> pctr(0.0, 0.05), avg(1e-4, 0.01), act(-0.99, 0.99);
  double worst = 0.0;
  int fab_mismatch = 0;
  for (int c = 0; c < 10000; ++c) {
    const strategies::LinParams lin{1 + static_cast<int>(rng() % 300), avg(rng)};
    std::vector<int> actions(rng() % 97);
    double lambda = strategies::drlb_initial_lambda(lin);
    for (auto& a : actions) {
      a = static_cast<int>(rng() % strategies::kDrlbActions.size());
      lambda = strategies::drlb_lambda_step(lambda, a);
    }
    const double p = pctr(rng);
    const double iterated = strategies::drlb_bid_unclipped(p, lambda);
    const double closed = strategies::drlb_closed_form_unclipped(p, lin, actions);
    if (closed != 0.0 || iterated != 0.0) worst = std::max(worst, std::abs(iterated - closed) / std::abs(closed));
    const double a = act(rng);
    if (strategies::fab_bid(p, lin, a) != strategies::fab_closed_form_bid(p, lin, a)) ++fab_mismatch;
  }
  return judge(worst <= 1e-9 && fab_mismatch == 0,
               "10000 histories, DRLB worst rel err " + fmt(worst) + ", FAB mismatches " + std::to_string(fab_mismatch));
}

// ---- 2: analytic gradients -----------------------------------------------------------------

std::vector<double> gaussian(Rng& rng, std::size_t n, double sd) {
  std::normal_distribution<double> g(0.0, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

Verdict gradients() {
  Rng rng(102);
  double mlp_worst = 0.0, fm_worst = 0.0;
  const std::vector<std::vector<int>> shapes{{3, 1}, {4, 8, 1}, {6, 10, 10, 7}, {5, 12, 3}, {2, 6, 6, 6, 2}};
  for (int c = 0; c < 100; ++c) {
    const auto& sizes = shapes[static_cast<std::size_t>(c) % shapes.size()];
    rl::Mlp net(sizes, c % 2 ? rl::OutputActivation::kTanh : rl::OutputActivation::kLinear, 0.99);
    // Every weight and bias random: with zero biases a fully dead layer puts the next
    // pre-activation exactly on the ReLU kink, where no derivative exists to compare.
    const auto w = gaussian(rng, net.param_count(), 0.5);
    std::copy(w.begin(), w.end(), net.params().begin());
    const auto x = gaussian(rng, static_cast<std::size_t>(sizes.front()), 1.0);
    const auto up = gaussian(rng, static_cast<std::size_t>(sizes.back()), 1.0);
    mlp_worst = std::max(mlp_worst, rl::mlp_gradient_check(net, x, up, 1e-6));
  }
  for (int c = 0; c < 100; ++c) {
    const int k = 1 + c % 6;
    const std::size_t features = 12;
    std::vector<std::string> tokens{""};
    for (std::size_t i = 1; i < features; ++i) tokens.push_back("t" + std::to_string(i));
    ctr::FmModel m(k, tokens);
    std::normal_distribution<double> g(0.0, 0.4);
    m.bias() = g(rng);
    for (auto& w : m.linear()) w = g(rng);
    for (auto& v : m.all_factors()) v = g(rng);
    std::vector<std::uint32_t> idx(features - 1);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::uint32_t>(i + 1);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(1 + static_cast<std::size_t>(c % 7));
    fm_worst = std::max(fm_worst, ctr::gradient_check(m, idx, c % 2, 1e-5));
  }
  return judge(mlp_worst < 1e-4 && fm_worst < 1e-4,
               "100 MLP + 100 FM instances, worst rel err MLP " + fmt(mlp_worst) + " FM " + fmt(fm_worst));
}

// ---- 3: auction laws -----------------------------------------------------------------------

// Bid that depends only on the record, so replays can be compared impression by impression.
double hashed_bid(const ingest::ImpressionRecord& r, std::uint64_t seed) {
  std::uint64_t h = seed * 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint64_t>(r.second_of_day) * 0xff51afd7ed558ccdULL ^
                    static_cast<std::uint64_t>(r.market_price);
  h ^= h >> 33;
  h *= 0xc4ceb9fe1a85ec53ULL;
  h ^= h >> 29;
  return static_cast<double>(h % 4000) / 10.0 - 50.0;
}

class HashedStrategy final : public auction::BidStrategy {
 public:
  explicit HashedStrategy(std::uint64_t seed) : seed_(seed) {}
  std::string name() const override { return "hashed"; }
  double bid(const ingest::ImpressionRecord& r, const auction::BidContext&) override { return hashed_bid(r, seed_); }

 private:
  std::uint64_t seed_;
};

Episode random_episode(Rng& rng) {
  const auto shape = testing::random_shape(rng, 120);
  Episode ep(testing::random_day(rng, shape), ingest::kSupportedSlotCounts[rng() % 3],
             ingest::kStandardFractions[rng() % 4]);
  if (ep.budget() == 0) ep = ep.with_budget(1 + static_cast<std::int64_t>(rng() % 200));
  return ep;
}

Verdict auction_laws() {
  constexpr int kCases = 1000;
  std::map<std::string, int> violations{
      {"conservation", 0}, {"second-price", 0}, {"win-iff", 0}, {"monotonicity", 0}, {"determinism", 0}};
  Rng rng(103);

  for (int c = 0; c < kCases; ++c) {
    const auto ep = random_episode(rng);
    HashedStrategy s(rng());
    const auto r = auction::run_episode(s, ep);
    std::int64_t cost = 0, running = r.budget;
    bool ok = r.cost <= r.budget && r.cost >= 0;
    for (const auto& slot : r.slots) {
      ok = ok && slot.budget_start == running && slot.budget_remaining_at_end == slot.budget_start - slot.cost &&
           slot.budget_remaining_at_end >= 0;
      running = slot.budget_remaining_at_end;
      cost += slot.cost;
    }
    if (!ok || cost != r.cost) ++violations["conservation"];
  }

  for (int c = 0; c < kCases; ++c) {
    const auto day = testing::random_day(rng, testing::random_shape(rng, 100));
    const int bid = static_cast<int>(rng() % 301);
    for (const auto& rec : day->records) {
      const auto o = auction::settle_auction(bid, rec, day->total_cost);
      if (o.won && o.cost != rec.market_price) ++violations["second-price"];
    }
  }

  std::uniform_int_distribution<std::int64_t> bid(-50, 400), budget(0, 400);
  std::uniform_int_distribution<int> price(0, 300);
  for (int c = 0; c < kCases; ++c) {
    const auto rec = testing::make_record(0, price(rng), c % 2, 0.01);
    const auto b = bid(rng);
    const auto rem = budget(rng);
    const bool expected = std::clamp<std::int64_t>(b, 0, 300) >= rec.market_price && rec.market_price <= rem;
    if (auction::settle_auction(b, rec, rem).won != expected) ++violations["win-iff"];
  }

  for (int c = 0; c < kCases; ++c) {
    const auto ep = random_episode(rng);
    HashedStrategy hashed(rng());
    strategies::LinStrategy lin({1 + static_cast<int>(rng() % 300), 0.01});
    strategies::OrtbStrategy ortb({34.0, 5.2e-7});
    for (auction::BidStrategy* s : std::initializer_list<auction::BidStrategy*>{&hashed, &lin, &ortb}) {
      std::int64_t prev_wins = -1, prev_clicks = -1;
      for (int d : {16, 8, 4, 2}) {
        const auto e = ep.with_fraction(BudgetFraction{d});
        if (e.budget() == 0) continue;
        const auto r = auction::run_episode(*s, e);
        if (r.wins < prev_wins || r.clicks < prev_clicks) ++violations["monotonicity"];
        prev_wins = r.wins;
        prev_clicks = r.clicks;
      }
    }
  }

  for (int c = 0; c < kCases; ++c) {
    const auto ep = random_episode(rng);
    const auto seed = rng();
    HashedStrategy a(seed), b(seed);
    const auto first = auction::run_episode(a, ep);
    if (first != auction::run_episode(b, ep) || first != auction::run_episode(a, ep)) ++violations["determinism"];
  }

  int total = 0;
  std::string detail = std::to_string(kCases) + " cases per law, violations:";
  for (const auto& [law, n] : violations) {
    total += n;
    detail += " " + law + "=" + std::to_string(n);
  }
  return judge(total == 0, detail);
}

// ---- 4: oracle equivalence -----------------------------------------------------------------

Verdict oracles() {
  Rng rng(104);
  int tune_bad = 0, slot_bad = 0, rlb_bad = 0;
  for (int c = 0; c < 200; ++c) {
    std::vector<Episode> eps;
    auto shape = testing::random_shape(rng, 100);
    shape.scored = true;
    eps.emplace_back(testing::random_day(rng, shape), 24, ingest::kStandardFractions[rng() % 4]);
    if (eps.back().budget() == 0) eps.back() = eps.back().with_budget(1);
    const double avg = 0.001 + static_cast<double>(rng() % 100) / 1000.0;
    const auto lib = strategies::tune_base_bid(eps, avg);
    const auto oracle = testing::oracle_best_base_bid(eps, avg, 1, 300);
    if (lib.base_bid != oracle.base_bid || lib.clicks != oracle.clicks) ++tune_bad;
  }
  for (int c = 0; c < 200; ++c) {
    auto shape = testing::random_shape(rng, 100);
    shape.scored = true;
    shape.click_rate = 0.2;
    const Episode ep(testing::random_day(rng, shape), 24, BudgetFraction{2});
    const int slots = ingest::kSupportedSlotCounts[rng() % 3];
    const int denom = ingest::kStandardFractions[rng() % 4].denominator;
    const double avg = 0.01 + static_cast<double>(rng() % 50) / 1000.0;
    if (strategies::per_slot_optimal_base_bid(ep, slots, avg, BudgetFraction{denom}) !=
        testing::oracle_per_slot(ep, slots, avg, denom)) {
      ++slot_bad;
    }
  }
  // Dyadic values and probabilities keep every sum exact, so "exactly" is meaningful.
  for (int c = 0; c < 200; ++c) {
    const int k = 1 + static_cast<int>(rng() % 4);
    std::vector<double> values, probs;
    for (int i = 0; i < k; ++i) values.push_back(static_cast<double>(rng() % 9) / 8.0);
    for (int i = 0; i < k; ++i) probs.push_back(k == 3 ? (i == 2 ? 0.5 : 0.25) : 1.0 / k);
    std::vector<double> pmf(1 + rng() % 6, 0.0);
    for (int q = 0; q < 4; ++q) pmf[rng() % pmf.size()] += 0.25;
    const int steps = 1 + static_cast<int>(rng() % 3);
    const int budget = static_cast<int>(rng() % 12);
    const auto t = strategies::RlbTable::build(values, probs, pmf, steps, budget);
    const auto v = testing::oracle_rlb_values(values, probs, pmf, steps, budget);
    bool ok = true;
    for (int n = 0; n <= steps; ++n) {
      for (int b = 0; b <= budget; ++b) {
        ok = ok && t.value(n, b) == v[n][b];
        if (n > 0) {
          for (const double p : values) ok = ok && t.bid(n, b, p) == testing::oracle_rlb_bid(v, n, b, p);
        }
      }
    }
    if (!ok) ++rlb_bad;
  }
  return judge(tune_bad + slot_bad + rlb_bad == 0,
               "200 fixtures each, mismatches: tune " + std::to_string(tune_bad) + ", per-slot " +
                   std::to_string(slot_bad) + ", rlb " + std::to_string(rlb_bad));
}

// ---- 5: formula fixtures ---------------------------------------------------------------------

Verdict formulas() {
  const int ortb = strategies::ortb_bid(1e-3, strategies::OrtbParams{34.0, 5.2e-7});
  const std::vector<double> b{110, 90, 120, 100};
  const double dev = strategies::base_bid_deviation(100, b);
  std::set<double> seen;
  bool op_ok = true;
  for (std::int64_t clicks = 0; clicks <= 4; ++clicks) {
    for (std::int64_t cost = 0; cost <= 40; cost += 5) {
      const double r = strategies::reward_op(clicks, cost, 2, 20);
      const double expected = clicks >= 2 ? (cost < 20 ? 0.005 : 0.001) : (cost < 20 ? -0.0025 : -0.005);
      op_ok = op_ok && r == expected;
      seen.insert(r);
    }
  }
  op_ok = op_ok && seen == std::set<double>(strategies::kOpRewards.begin(), strategies::kOpRewards.end());
  return judge(std::abs(ortb - 224) <= 1 && std::abs(dev - 0.0612) <= 1e-4 && op_ok,
               "ortb_bid=" + std::to_string(ortb) + " deviation=" + fmt(dev, 6) +
                   " op_rewards=" + (op_ok ? "exact" : "wrong"));
}

// ---- 6: directional end-to-end ---------------------------------------------------------------

ingest::CampaignDataset default_synthetic() {
  const ingest::SyntheticConfig sc;
  auto log = ingest::gen_synthetic_log(sc);
  auto days = ingest::group_days(std::move(log.records));
  const auto train = days.size() - static_cast<std::size_t>(sc.test_days);
  return ingest::split_campaign("synthetic", std::move(days), log.tokens, train,
                                static_cast<std::size_t>(sc.test_days));
}

double median_clicks(const bench::BenchmarkReport& report, bench::StrategyKind kind, BudgetFraction f) {
  for (const auto& a : report.aggregates) {
    if (a.cell.strategy == kind && a.cell.fraction == f) return a.clicks;
  }
  return -1.0;
}

Verdict end_to_end() {
  bench::ExperimentConfig cfg;
  cfg.strategies = {bench::StrategyKind::kLin, bench::StrategyKind::kDrlb, bench::StrategyKind::kFab};
  cfg.seeds = {1, 2, 3};
  cfg.jobs = std::max(1u, std::thread::hardware_concurrency());
  bench::Runner runner(cfg, bench::prepare_artifacts(default_synthetic(), cfg));
  const auto grid = bench::run_grid(runner);

  int drlb_ok = 0, fab_ok = 0, op_ok = 0;
  std::string detail;
  for (const auto f : ingest::kStandardFractions) {
    const double lin = median_clicks(grid, bench::StrategyKind::kLin, f);
    const double drlb = median_clicks(grid, bench::StrategyKind::kDrlb, f);
    const double fab = median_clicks(grid, bench::StrategyKind::kFab, f);
    const auto frozen = strategies::evaluate_policy(
        strategies::frozen_zero_fab(runner.artifacts().lin_params(f), cfg.fab.slots),
        runner.artifacts().dataset.test_episodes(cfg.fab.slots, f));
    drlb_ok += drlb >= lin;
    fab_ok += fab >= lin;
    op_ok += fab >= static_cast<double>(frozen.clicks);
    detail += " " + f.label() + ": LIN " + fmt(lin, 6) + " DRLB " + fmt(drlb, 6) + " FAB " + fmt(fab, 6) +
              " frozen " + std::to_string(frozen.clicks) + ";";
  }
  detail = "test AUC " + fmt(runner.artifacts().test_auc, 3) + ";" + detail;
  return judge(drlb_ok >= 3 && fab_ok >= 3 && op_ok == 4, detail);
}

// ---- 7: early spend-out under the pctr reward ------------------------------------------------

// Mornings carry a flood of cheap, low-pctr, never-clicked impressions; clicks only come
// later in the day at higher prices. Buying the morning maximizes summed pctr per unit of
// budget but earns nothing under the click reward.
ingest::DayPtr front_loaded_day(Rng& rng, std::int32_t date) {
  std::vector<ingest::ImpressionRecord> recs;
  std::uniform_int_distribution<int> morning_second(0, 6 * 3600 - 1), day_second(6 * 3600, 86399);
  std::uniform_int_distribution<int> cheap(1, 12), dear(30, 150);
  std::bernoulli_distribution click(0.04);
  for (int i = 0; i < 6000; ++i) recs.push_back(testing::make_record(morning_second(rng), cheap(rng), 0, 0.003, date));
  for (int i = 0; i < 6000; ++i) {
    recs.push_back(testing::make_record(day_second(rng), dear(rng), click(rng) ? 1 : 0, 0.04, date));
  }
  return testing::make_day(std::move(recs));
}

Verdict early_stop() {
  Rng rng(107);
  std::vector<ingest::DayPtr> days;
  for (int d = 0; d < 10; ++d) days.push_back(front_loaded_day(rng, 20130601 + d));
  auto ds = ingest::split_campaign("front-loaded", std::move(days), std::make_shared<ingest::TokenPool>(), 7, 3);
  ds.avg_pctr_train = ingest::mean_pctr(ds.train_days);

  const BudgetFraction f{16};
  auto base = strategies::AgentConfig::fab_defaults();
  const auto train = ds.train_episodes(base.slots, f);
  const auto test = ds.test_episodes(base.slots, f);
  const strategies::LinParams lin{strategies::tune_base_bid(train, ds.avg_pctr_train).base_bid, ds.avg_pctr_train};

  auto mean_stop = [&](strategies::RewardVariant reward, std::string& trace) {
    auto cfg = base;
    cfg.reward = reward;
    cfg.select_best = false;  // picking the epoch by training clicks would hide what the reward taught
    const auto ck = strategies::train_fab(train, lin, cfg);
    double sum = 0.0;
    for (const auto& ep : test) {
      auto policy = strategies::make_policy(ck);
      const auto r = auction::run_episode(*policy, ep);
      const int stop = r.early_stop_slot.value_or(ck.slot_count);
      trace += " " + std::to_string(stop);
      sum += stop;
    }
    return sum / static_cast<double>(test.size());
  };
  std::string pctr_trace, clk_trace;
  const double pctr = mean_stop(strategies::RewardVariant::kPctr, pctr_trace);
  const double clk = mean_stop(strategies::RewardVariant::kClk, clk_trace);
  return judge(pctr < clk, "1/16, LIN base " + std::to_string(lin.base_bid) + "; early_stop_slot per test day (" +
                               std::to_string(base.slots) + " = none): PCTR" + pctr_trace + " (mean " + fmt(pctr) +
                               "), CLK" + clk_trace + " (mean " + fmt(clk) + ")");
}

// ---- 8: campaign 1458, when present -----------------------------------------------------------

Verdict campaign_1458() {
  const char* root = std::getenv("RTB_ARENA_DATA");
  if (!root || !*root || !std::filesystem::exists(std::filesystem::path(root) / "1458" / "train.log.txt")) {
    return {Verdict::kSkip, "RTB_ARENA_DATA/1458 not present"};
  }
  testing::TempDir dir("acceptance-1458");
  const auto dataset = (dir / "1458.dataset").string();
  const std::vector<std::string> args{"rtb-arena", "ingest",   "--data-dir",  root,      "--campaign",
                                      "1458",      "--out",    dataset,       "--log-level", "warn"};
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  if (const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err); code != cli::kExitOk) {
    return fail("ingest exited " + std::to_string(code) + ": " + err.str());
  }
  bench::ExperimentConfig cfg;
  cfg.strategies = {bench::StrategyKind::kLin};
  cfg.fractions = {BudgetFraction{2}};
  cfg.reward_fractions = {BudgetFraction{2}};
  cfg.jobs = std::max(1u, std::thread::hardware_concurrency());
  const auto artifacts = bench::prepare_artifacts(ingest::load_dataset(dataset).dataset, cfg);
  strategies::LinStrategy lin(artifacts.lin_params(BudgetFraction{2}));
  std::int64_t clicks = 0;
  for (const auto& ep : artifacts.dataset.test_episodes(cfg.static_slots, BudgetFraction{2})) {
    clicks += auction::run_episode(lin, ep).clicks;
  }
  const bool auc_ok = std::abs(artifacts.test_auc - 0.8365) <= 0.03;
  const bool lin_ok = std::abs(static_cast<double>(clicks) - 438.0) <= 43.8;
  return judge(auc_ok && lin_ok, "test AUC " + fmt(artifacts.test_auc) + " (0.8365 +- 0.03), LIN 1/2 clicks " +
                                     std::to_string(clicks) + " (438 +- 10%)");
}

struct Criterion {
  int id;
  std::string name;
  std::function<Verdict()> run;
  double budget_seconds;  // runtime bound, 0 = none
};

}  // namespace

int main(int argc, char** argv) {
  rtb::log::set_level(rtb::log::Level::kWarn);
  const std::vector<Criterion> criteria{
      {1, "bid-factor closed forms", algebra, 5.0},
      {2, "MLP and FM gradients vs finite differences", gradients, 30.0},
      {3, "auction laws", auction_laws, 0.0},
      {4, "tuning, per-slot optimum and RLB vs exhaustive oracles", oracles, 0.0},
      {5, "ORTB, deviation and OP reward fixtures", formulas, 0.0},
      {6, "DRLB and FAB vs LIN on the default synthetic campaign", end_to_end, 1800.0},
      {7, "PCTR reward spends out earlier than CLK at 1/16", early_stop, 0.0},
      {8, "campaign 1458 AUC and LIN clicks", campaign_1458, 0.0},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = fail(std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0 && secs >= c.budget_seconds && v.kind == Verdict::kPass) {
      v = fail(v.detail + "; over the " + fmt(c.budget_seconds) + " s limit");
    }
    const char* tag = v.kind == Verdict::kPass ? "PASS" : v.kind == Verdict::kFail ? "FAIL" : "SKIP";
    failed += v.kind == Verdict::kFail;
    std::cout << tag << " [" << c.id << "] " << c.name << " (" << fmt(secs, 3) << " s): " << v.detail << std::endl;
  }
  return failed ? 1 : 0;
}
