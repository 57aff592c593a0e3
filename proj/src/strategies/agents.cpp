#include "rtb/strategies/agents.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "rtb/common/binary_io.hpp"
#include "rtb/common/error.hpp"
#include "rtb/common/log.hpp"

namespace rtb::strategies {
namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<int> sizes(int input, int width, int layers, int output) {
  std::vector<int> s{input};
  for (int i = 0; i < layers; ++i) s.push_back(width);
  s.push_back(output);
  return s;
}

void validate(std::span<const ingest::Episode> train, const LinParams& lin, const AgentConfig& c) {
  if (train.empty()) throw DataError("agent training needs at least one training episode");
  lin.validate();
  if (lin.base_bid <= 0) throw ConfigError("base-bid", "RL agents need a positive tuned base bid");
  require_scored(train);
  if (!ingest::is_supported_slot_count(c.slots)) throw ConfigError("slots", "must be 24, 48 or 96");
  if (c.epochs < 0) throw ConfigError("epochs", "must be >= 0");
  if (c.batch < 1) throw ConfigError("batch", "must be >= 1");
}

// Objective of a greedy policy plus the LIN per-slot baselines of every episode.
struct Baselines {
  std::vector<auction::EpisodeResult> lin;
  double mean_return = 1.0;
  double max_slot_pctr = 0.0;
};

Baselines lin_baselines(std::span<const ingest::Episode> episodes, const LinParams& lin) {
  Baselines b;
  double total = 0.0;
  for (const auto& ep : episodes) {
    LinStrategy s(lin);
    b.lin.push_back(auction::run_episode(s, ep));
    total += b.lin.back().pctr_sum;
    for (const auto& slot : b.lin.back().slots) b.max_slot_pctr = std::max(b.max_slot_pctr, slot.pctr_sum);
  }
  b.mean_return = total > 0 ? total / static_cast<double>(episodes.size()) : 1.0;
  return b;
}

bool exhausted(const auction::SlotStats& s) { return s.imps_lost_to_budget > 0; }

std::vector<ingest::Episode> reslot(std::span<const ingest::Episode> episodes, int slots) {
  std::vector<ingest::Episode> out;
  for (const auto& e : episodes) out.push_back(e.slot_count() == slots ? e : e.with_slots(slots));
  return out;
}

// Shared per-episode bookkeeping for both trainers.
struct EpisodeTrace {
  std::vector<std::pair<std::vector<double>, double>> pairs;  // (state, action value) for the reward net
};

class DrlbTrainer final : public auction::BidStrategy {
 public:
  DrlbTrainer(rl::QNets& nets, rl::ReplayBuffer& buffer, const AgentConfig& config, const LinParams& lin,
              RewardNetwork* reward_net, double return_scale, std::mt19937_64& rng, double& pctr_max)
      : nets_(nets), buffer_(buffer), c_(config), lin_(lin), reward_net_(reward_net),
        return_scale_(return_scale), rng_(rng), pctr_max_(pctr_max) {}

  std::string name() const override { return "DRLB-train"; }

  void start(const auction::EpisodeResult* lin_result, double epsilon) {
    lin_result_ = lin_result;
    epsilon_ = epsilon;
  }

  void begin_episode(const ingest::Episode& episode) override {
    budget_ = episode.budget();
    slot_count_ = episode.slot_count();
    lambda_ = drlb_initial_lambda(lin_);
    finished_.clear();
    pending_ = false;
    active_ = true;
    trace_.pairs.clear();
  }

  void begin_slot(int t, const auction::SlotStats* prev, std::int64_t remaining) override {
    if (prev) {
      finished_.push_back(*prev);
      pctr_max_ = std::max(pctr_max_, prev->pctr_sum);
    }
    if (t == 0 || !active_) return;
    auto state = encode_drlb_state(observe_drlb(t, slot_count_, budget_, remaining, finished_, c_.cumulative_rates),
                                   c_.scheme, pctr_max_);
    if (pending_) {
      const bool terminal = exhausted(*prev);
      complete(*prev, state, terminal);
      if (terminal) {
        active_ = false;
        return;
      }
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int action;
    if (unit(rng_) < epsilon_) {
      action = std::uniform_int_distribution<int>(0, static_cast<int>(kDrlbActions.size()) - 1)(rng_);
    } else {
      action = rl::greedy_action(nets_.online, state, kNeutralAction);
    }
    lambda_ = drlb_lambda_step(lambda_, action);
    pending_state_ = std::move(state);
    pending_action_ = action;
    pending_ = true;
  }

  double bid(const ingest::ImpressionRecord& r, const auction::BidContext&) override {
    return drlb_bid(*r.pctr, lambda_);
  }

  void end_episode(const auction::EpisodeResult& result) override {
    if (pending_ && active_) {
      complete(result.slots.back(), std::vector<double>(pending_state_.size(), 0.0), true);
    }
    if (reward_net_) {
      reward_net_->record_episode(trace_.pairs, result.pctr_sum / return_scale_);
      reward_net_->fit(c_.reward_fit_steps, c_.batch, rng_);
    }
  }

  double loss_sum = 0.0;
  std::uint64_t loss_count = 0;

 private:
  void complete(const auction::SlotStats& slot, std::vector<double> next, bool terminal) {
    rl::Transition tr;
    tr.state = pending_state_;
    tr.action_index = pending_action_;
    tr.action = kDrlbActions[static_cast<std::size_t>(pending_action_)];
    tr.next_state = std::move(next);
    tr.terminal = terminal;
    if (c_.reward == RewardVariant::kDnn) {
      trace_.pairs.emplace_back(tr.state, tr.action);
      tr.reward = 0.0;  // relabelled by the reward net at sampling time
    } else {
      const auto* lin_slot = lin_result_ ? &lin_result_->slots.at(static_cast<std::size_t>(slot.slot)) : nullptr;
      tr.reward = environment_reward(c_.reward, slot, lin_slot);
    }
    buffer_.push(std::move(tr));
    pending_ = false;
    if (buffer_.size() < static_cast<std::size_t>(c_.batch)) return;
    auto batch = buffer_.sample(static_cast<std::size_t>(c_.batch), rng_);
    std::vector<rl::Transition> relabelled;
    std::vector<const rl::Transition*> ptrs;
    if (reward_net_) {
      relabelled.reserve(batch.size());
      for (const auto* b : batch) {
        relabelled.push_back(*b);
        relabelled.back().reward = reward_net_->predict(b->state, b->action);
      }
      for (const auto& r : relabelled) ptrs.push_back(&r);
      batch = ptrs;
    }
    loss_sum += rl::q_update(nets_, batch, c_.gamma);
    ++loss_count;
  }

  rl::QNets& nets_;
  rl::ReplayBuffer& buffer_;
  const AgentConfig& c_;
  LinParams lin_;
  RewardNetwork* reward_net_;
  double return_scale_;
  std::mt19937_64& rng_;
  double& pctr_max_;
  const auction::EpisodeResult* lin_result_ = nullptr;
  double epsilon_ = 0.0;
  std::int64_t budget_ = 0;
  int slot_count_ = 0;
  double lambda_ = 0.0;
  std::vector<auction::SlotStats> finished_;
  bool pending_ = false;
  bool active_ = true;
  std::vector<double> pending_state_;
  int pending_action_ = kNeutralAction;
  EpisodeTrace trace_;
};

class FabTrainer final : public auction::BidStrategy {
 public:
  FabTrainer(rl::Td3Nets& nets, rl::ReplayBuffer& buffer, const AgentConfig& config, const LinParams& lin,
             RewardNetwork* reward_net, double return_scale, std::mt19937_64& rng)
      : nets_(nets), buffer_(buffer), c_(config), lin_(lin), reward_net_(reward_net), return_scale_(return_scale),
        rng_(rng) {}

  std::string name() const override { return "FAB-train"; }

  void start(const auction::EpisodeResult* lin_result, double noise_std) {
    lin_result_ = lin_result;
    noise_std_ = noise_std;
  }

  void begin_episode(const ingest::Episode& episode) override {
    budget_ = episode.budget();
    slot_count_ = episode.slot_count();
    a_ = 0.0;
    pending_ = false;
    active_ = true;
    trace_.pairs.clear();
  }

  void begin_slot(int t, const auction::SlotStats* prev, std::int64_t remaining) override {
    if (!active_) return;
    auto state = encode_fab_state(t, slot_count_, budget_, remaining, prev);
    if (pending_) {
      const bool terminal = exhausted(*prev);
      complete(*prev, state, terminal);
      if (terminal) {
        active_ = false;
        return;
      }
    }
    double a = nets_.actor.forward(state)[0];
    if (noise_std_ > 0) a += std::normal_distribution<double>(0.0, noise_std_)(rng_);
    a_ = std::clamp(a, -c_.td3.action_bound, c_.td3.action_bound);
    pending_state_ = std::move(state);
    pending_ = true;
  }

  double bid(const ingest::ImpressionRecord& r, const auction::BidContext&) override {
    return fab_bid(*r.pctr, lin_, a_);
  }

  void end_episode(const auction::EpisodeResult& result) override {
    if (pending_ && active_) complete(result.slots.back(), std::vector<double>(pending_state_.size(), 0.0), true);
    if (reward_net_) {
      reward_net_->record_episode(trace_.pairs, result.pctr_sum / return_scale_);
      reward_net_->fit(c_.reward_fit_steps, c_.batch, rng_);
    }
  }

  double loss_sum = 0.0;
  std::uint64_t loss_count = 0;

 private:
  void complete(const auction::SlotStats& slot, std::vector<double> next, bool terminal) {
    rl::Transition tr;
    tr.state = pending_state_;
    tr.action = a_;
    tr.next_state = std::move(next);
    tr.terminal = terminal;
    if (c_.reward == RewardVariant::kDnn) {
      trace_.pairs.emplace_back(tr.state, tr.action);
    } else {
      const auto* lin_slot = lin_result_ ? &lin_result_->slots.at(static_cast<std::size_t>(slot.slot)) : nullptr;
      tr.reward = environment_reward(c_.reward, slot, lin_slot);
    }
    buffer_.push(std::move(tr));
    pending_ = false;
    if (buffer_.size() < static_cast<std::size_t>(c_.batch)) return;
    auto batch = buffer_.sample(static_cast<std::size_t>(c_.batch), rng_);
    std::vector<rl::Transition> relabelled;
    std::vector<const rl::Transition*> ptrs;
    if (reward_net_) {
      for (const auto* b : batch) {
        relabelled.push_back(*b);
        relabelled.back().reward = reward_net_->predict(b->state, b->action);
      }
      for (const auto& r : relabelled) ptrs.push_back(&r);
      batch = ptrs;
    }
    loss_sum += rl::twin_critic_update(nets_, batch, c_.td3, rng_).critic;
    ++loss_count;
  }

  rl::Td3Nets& nets_;
  rl::ReplayBuffer& buffer_;
  const AgentConfig& c_;
  LinParams lin_;
  RewardNetwork* reward_net_;
  double return_scale_;
  std::mt19937_64& rng_;
  const auction::EpisodeResult* lin_result_ = nullptr;
  double noise_std_ = 0.0;
  std::int64_t budget_ = 0;
  int slot_count_ = 0;
  double a_ = 0.0;
  bool pending_ = false;
  bool active_ = true;
  std::vector<double> pending_state_;
  EpisodeTrace trace_;
};

template <typename Trainer, typename Setup, typename Snapshot>
void run_epochs(std::span<const ingest::Episode> episodes, const AgentConfig& c, const Baselines& baselines,
                Trainer& trainer, std::mt19937_64& rng, Setup&& exploration_for_step, Snapshot&& snapshot,
                AgentCheckpoint& out) {
  const auto decisions_per_episode = static_cast<std::uint64_t>(std::max(1, c.slots - 1));
  const std::uint64_t total = decisions_per_episode * episodes.size() * static_cast<std::uint64_t>(std::max(1, c.epochs));
  std::uint64_t step = 0;
  std::vector<std::size_t> order(episodes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  auto evaluate = [&](int epoch, double exploration, std::int64_t explore_clicks) {
    AgentCheckpoint snap = snapshot();
    const auto obj = evaluate_policy(snap, episodes);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.exploration = exploration;
    rec.explore_clicks = explore_clicks;
    rec.greedy_clicks = obj.clicks;
    rec.greedy_pctr = obj.pctr_sum;
    rec.mean_loss = trainer.loss_count ? trainer.loss_sum / static_cast<double>(trainer.loss_count) : 0.0;
    rec.updates = trainer.loss_count;
    out.curve.push_back(rec);
    const bool first = epoch == 0;
    const auto& best = out.curve.at(static_cast<std::size_t>(out.selected_epoch));
    const bool improved = auction::better(obj, {best.greedy_clicks, best.greedy_pctr});
    if (first || !c.select_best || improved) {
      out.policy = snap.policy;
      out.pctr_scale = snap.pctr_scale;
      out.selected_epoch = epoch;
    }
  };

  evaluate(0, 0.0, 0);
  for (int epoch = 1; epoch <= c.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    trainer.loss_sum = 0.0;
    trainer.loss_count = 0;
    std::int64_t clicks = 0;
    double exploration = 0.0;
    for (const auto i : order) {
      exploration = exploration_for_step(step, total);
      trainer.start(&baselines.lin[i], exploration);
      clicks += auction::run_episode(trainer, episodes[i]).clicks;
      step += decisions_per_episode;
    }
    evaluate(epoch, exploration, clicks);
  }
  out.training_steps = step;
}

RewardNetwork* maybe_reward_net(std::unique_ptr<RewardNetwork>& holder, const AgentConfig& c, int state_size) {
  if (c.reward != RewardVariant::kDnn) return nullptr;
  holder = std::make_unique<RewardNetwork>(state_size, c.reward_width, c.reward_layers, c.reward_learning_rate,
                                           c.seed ^ 0x9e3779b97f4a7c15ULL);
  return holder.get();
}

}  // namespace

// ---- RewardNetwork ------------------------------------------------------------------

RewardNetwork::RewardNetwork(int state_size, int width, int hidden_layers, double learning_rate,
                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  net_ = rl::Mlp(sizes(state_size + 1, width, hidden_layers, 1));
  net_.init(rng);
  net_.zero_output_layer();
  opt_ = rl::Adam(net_.param_count(), learning_rate);
}

RewardNetwork::Key RewardNetwork::quantize(std::span<const double> state, double action) {
  Key k;
  k.reserve(state.size() + 1);
  for (const double x : state) k.push_back(std::llround(x * 100.0));
  k.push_back(std::llround(action * 100.0));
  return k;
}

void RewardNetwork::record_episode(const std::vector<std::pair<std::vector<double>, double>>& pairs,
                                   double episode_return) {
  for (const auto& [state, action] : pairs) {
    auto key = quantize(state, action);
    const auto [it, inserted] = table_.emplace(key, episode_return);
    if (inserted) {
      std::vector<double> input;
      for (std::size_t i = 0; i + 1 < key.size(); ++i) input.push_back(static_cast<double>(key[i]) / 100.0);
      input.push_back(static_cast<double>(key.back()) / 100.0);
      inputs_.emplace_back(std::move(input), std::move(key));
    } else {
      it->second = std::max(it->second, episode_return);
    }
  }
}

double RewardNetwork::fit(int steps, int batch, std::mt19937_64& rng) {
  if (inputs_.empty() || steps <= 0) return 0.0;
  std::uniform_int_distribution<std::size_t> pick(0, inputs_.size() - 1);
  std::vector<double> grad(net_.param_count());
  rl::Mlp::Tape tape;
  double loss = 0.0;
  for (int s = 0; s < steps; ++s) {
    std::fill(grad.begin(), grad.end(), 0.0);
    loss = 0.0;
    for (int b = 0; b < batch; ++b) {
      const auto& [input, key] = inputs_[pick(rng)];
      net_.forward(input, tape);
      const double d = tape.values.back()[0] - table_.at(key);
      loss += d * d / batch;
      const double up = 2.0 * d / batch;
      net_.backward(tape, std::span<const double>(&up, 1), grad);
    }
    if (!std::isfinite(loss)) throw NumericalError("non-finite reward-network loss");
    opt_.step(net_.params(), grad);
  }
  return loss;
}

double RewardNetwork::predict(std::span<const double> state, double action) const {
  std::vector<double> x(state.begin(), state.end());
  x.push_back(action);
  return net_.forward(x)[0];
}

// ---- Config -------------------------------------------------------------------------

AgentConfig AgentConfig::drlb_defaults() {
  AgentConfig c;
  c.slots = 96;
  c.epochs = 40;
  c.reward = RewardVariant::kDnn;
  return c;
}

AgentConfig AgentConfig::fab_defaults() {
  AgentConfig c;
  c.slots = 24;
  c.epochs = 120;
  c.reward = RewardVariant::kOp;
  c.exploration_std = 0.3;
  return c;
}

std::string AgentConfig::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << "slots=" << slots << " epochs=" << epochs << " seed=" << seed << " hidden_width=" << hidden_width
     << " hidden_layers=" << hidden_layers << " learning_rate=" << learning_rate << " gamma=" << gamma
     << " batch=" << batch << " buffer=" << buffer << " reward=" << reward_name(reward)
     << " select_best=" << select_best << " scheme=" << scheme_name(scheme) << " cumulative_rates=" << cumulative_rates
     << " target_refresh=" << target_refresh << " epsilon=" << epsilon_start << ".." << epsilon_end << "@"
     << epsilon_decay_fraction << " td3.gamma=" << td3.gamma << " td3.noise=" << td3.target_noise_std << "/"
     << td3.target_noise_clip << " td3.delay=" << td3.policy_delay << " td3.tau=" << td3.tau
     << " exploration_std=" << exploration_std << " reward_net=" << reward_layers << "x" << reward_width << "@"
     << reward_learning_rate << " reward_fit_steps=" << reward_fit_steps;
  return os.str();
}

// ---- Checkpoints ----------------------------------------------------------------------

void AgentCheckpoint::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  BinaryWriter w(out);
  w.header({kKindAgentCheckpoint, kCheckpointVersion});
  w.string(provenance);
  w.string(strategy);
  w.pod(seed);
  w.pod(training_steps);
  w.pod<std::int32_t>(selected_epoch);
  w.pod<std::int32_t>(lin.base_bid);
  w.pod(lin.avg_pctr);
  w.pod<std::int32_t>(slot_count);
  w.pod(static_cast<std::int32_t>(scheme));
  w.pod<std::uint8_t>(cumulative_rates ? 1 : 0);
  w.pod(pctr_scale);
  w.pod(static_cast<std::int32_t>(reward));
  policy.write(w);
  w.pod<std::uint64_t>(curve.size());
  for (const auto& r : curve) w.pod(r);
  w.check();
}

AgentCheckpoint AgentCheckpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  BinaryReader r(in);
  r.header(kKindAgentCheckpoint, kCheckpointVersion);
  AgentCheckpoint c;
  c.provenance = r.string();
  c.strategy = r.string();
  c.seed = r.pod<std::uint64_t>();
  c.training_steps = r.pod<std::uint64_t>();
  c.selected_epoch = r.pod<std::int32_t>();
  c.lin.base_bid = r.pod<std::int32_t>();
  c.lin.avg_pctr = r.pod<double>();
  c.slot_count = r.pod<std::int32_t>();
  const auto scheme = r.pod<std::int32_t>();
  if (scheme < 0 || scheme > static_cast<std::int32_t>(StateScheme::kFull7)) throw DataError("corrupt checkpoint: scheme");
  c.scheme = static_cast<StateScheme>(scheme);
  c.cumulative_rates = r.pod<std::uint8_t>() != 0;
  c.pctr_scale = r.pod<double>();
  const auto reward = r.pod<std::int32_t>();
  if (reward < 0 || reward > static_cast<std::int32_t>(RewardVariant::kOp)) throw DataError("corrupt checkpoint: reward");
  c.reward = static_cast<RewardVariant>(reward);
  c.policy = rl::Mlp::read(r);
  const auto n = r.pod<std::uint64_t>();
  if (n > 1'000'000) throw DataError("corrupt checkpoint: curve length");
  for (std::uint64_t i = 0; i < n; ++i) c.curve.push_back(r.pod<EpochRecord>());
  if (c.strategy != "DRLB" && c.strategy != "FAB") throw DataError("checkpoint names unknown strategy " + c.strategy);
  return c;
}

void write_training_curve_csv(std::ostream& out, const AgentCheckpoint& c) {
  out << "epoch,exploration,explore_clicks,greedy_clicks,greedy_pctr,mean_loss,updates,selected\n";
  out.precision(10);
  for (const auto& r : c.curve) {
    out << r.epoch << ',' << r.exploration << ',' << r.explore_clicks << ',' << r.greedy_clicks << ','
        << r.greedy_pctr << ',' << r.mean_loss << ',' << r.updates << ',' << (r.epoch == c.selected_epoch ? 1 : 0)
        << '\n';
  }
}

// ---- Policies ------------------------------------------------------------------------

DrlbPolicy::DrlbPolicy(rl::Mlp q, LinParams lin, StateScheme scheme, bool cumulative_rates, double pctr_scale)
    : q_(std::move(q)), lin_(lin), scheme_(scheme), cumulative_(cumulative_rates), pctr_scale_(pctr_scale) {}

void DrlbPolicy::begin_episode(const ingest::Episode& episode) {
  budget_ = episode.budget();
  slot_count_ = episode.slot_count();
  lambda_ = drlb_initial_lambda(lin_);
  actions_.clear();
  finished_.clear();
}

void DrlbPolicy::begin_slot(int t, const auction::SlotStats* prev, std::int64_t remaining) {
  if (prev) finished_.push_back(*prev);
  if (t == 0) return;
  const auto state =
      encode_drlb_state(observe_drlb(t, slot_count_, budget_, remaining, finished_, cumulative_), scheme_, pctr_scale_);
  const int a = rl::greedy_action(q_, state, kNeutralAction);
  lambda_ = drlb_lambda_step(lambda_, a);
  actions_.push_back(a);
}

double DrlbPolicy::bid(const ingest::ImpressionRecord& r, const auction::BidContext&) {
  return drlb_bid(r.pctr.value_or(0.0), lambda_);
}

std::vector<double> DrlbPolicy::base_bid_trace() const {
  std::vector<double> out{static_cast<double>(lin_.base_bid)};
  for (std::size_t i = 1; i <= actions_.size(); ++i) {
    out.push_back(drlb_base_bid(lin_.base_bid, std::span<const int>(actions_.data(), i)));
  }
  return out;
}

FabPolicy::FabPolicy(rl::Mlp actor, LinParams lin) : actor_(std::move(actor)), lin_(lin) {}

void FabPolicy::begin_episode(const ingest::Episode& episode) {
  budget_ = episode.budget();
  slot_count_ = episode.slot_count();
  actions_.clear();
  a_ = 0.0;
}

void FabPolicy::begin_slot(int t, const auction::SlotStats* prev, std::int64_t remaining) {
  a_ = clip_fab_action(actor_.forward(encode_fab_state(t, slot_count_, budget_, remaining, prev))[0]);
  actions_.push_back(a_);
}

double FabPolicy::bid(const ingest::ImpressionRecord& r, const auction::BidContext&) {
  return fab_bid(r.pctr.value_or(0.0), lin_, a_);
}

std::vector<double> FabPolicy::base_bid_trace() const {
  std::vector<double> out;
  for (const double a : actions_) out.push_back(fab_base_bid(lin_.base_bid, a));
  return out;
}

std::unique_ptr<auction::BidStrategy> make_policy(const AgentCheckpoint& c) {
  if (c.strategy == "DRLB") {
    return std::make_unique<DrlbPolicy>(c.policy, c.lin, c.scheme, c.cumulative_rates, c.pctr_scale);
  }
  if (c.strategy == "FAB") return std::make_unique<FabPolicy>(c.policy, c.lin);
  throw ConfigError("strategy", "checkpoint names unknown strategy " + c.strategy);
}

auction::Objective evaluate_policy(const AgentCheckpoint& c, std::span<const ingest::Episode> episodes) {
  auction::Objective total;
  auto policy = make_policy(c);
  for (const auto& ep : episodes) {
    const auto r = auction::run_episode(*policy, ep.slot_count() == c.slot_count ? ep : ep.with_slots(c.slot_count));
    total.clicks += r.clicks;
    total.pctr_sum += r.pctr_sum;
  }
  return total;
}

AgentCheckpoint frozen_zero_fab(const LinParams& lin, int slot_count) {
  AgentCheckpoint c;
  c.strategy = "FAB";
  c.lin = lin;
  c.slot_count = slot_count;
  c.reward = RewardVariant::kOp;
  c.policy = rl::Mlp(sizes(4, 1, 1, 1), rl::OutputActivation::kTanh, kFabActionBound);
  return c;
}

// ---- Training -------------------------------------------------------------------------

AgentCheckpoint train_drlb(std::span<const ingest::Episode> train_in, const LinParams& lin, const AgentConfig& c,
                           const std::string& provenance) {
  validate(train_in, lin, c);
  const auto train = reslot(train_in, c.slots);
  const auto baselines = lin_baselines(train, lin);
  std::mt19937_64 rng(c.seed);
  const int state_size = scheme_size(c.scheme);
  auto nets = rl::make_q_nets(state_size, static_cast<int>(kDrlbActions.size()), c.hidden_width, c.hidden_layers,
                              c.learning_rate, rng, true);
  nets.target_refresh = static_cast<std::uint64_t>(std::max(1, c.target_refresh));
  rl::ReplayBuffer buffer(c.buffer);
  std::unique_ptr<RewardNetwork> reward_holder;
  auto* reward_net = maybe_reward_net(reward_holder, c, state_size);
  double pctr_max = std::max(baselines.max_slot_pctr, 1e-12);
  DrlbTrainer trainer(nets, buffer, c, lin, reward_net, baselines.mean_return, rng, pctr_max);

  AgentCheckpoint out;
  out.strategy = "DRLB";
  out.provenance = provenance;
  out.seed = c.seed;
  out.lin = lin;
  out.slot_count = c.slots;
  out.scheme = c.scheme;
  out.cumulative_rates = c.cumulative_rates;
  out.reward = c.reward;
  auto epsilon = [&](std::uint64_t step, std::uint64_t total) {
    const double horizon = std::max(1.0, c.epsilon_decay_fraction * static_cast<double>(total));
    const double f = std::min(1.0, static_cast<double>(step) / horizon);
    return c.epsilon_start + (c.epsilon_end - c.epsilon_start) * f;
  };
  auto snapshot = [&]() {
    AgentCheckpoint s = out;
    s.policy = nets.online;
    s.pctr_scale = pctr_max;
    return s;
  };
  run_epochs(train, c, baselines, trainer, rng, epsilon, snapshot, out);
  return out;
}

AgentCheckpoint train_fab(std::span<const ingest::Episode> train_in, const LinParams& lin, const AgentConfig& c,
                          const std::string& provenance) {
  validate(train_in, lin, c);
  const auto train = reslot(train_in, c.slots);
  const auto baselines = lin_baselines(train, lin);
  std::mt19937_64 rng(c.seed);
  auto nets = rl::make_td3_nets(4, c.hidden_width, c.hidden_layers, c.learning_rate, c.td3.action_bound, rng, true);
  rl::ReplayBuffer buffer(c.buffer);
  std::unique_ptr<RewardNetwork> reward_holder;
  auto* reward_net = maybe_reward_net(reward_holder, c, 4);
  FabTrainer trainer(nets, buffer, c, lin, reward_net, baselines.mean_return, rng);

  AgentCheckpoint out;
  out.strategy = "FAB";
  out.provenance = provenance;
  out.seed = c.seed;
  out.lin = lin;
  out.slot_count = c.slots;
  out.reward = c.reward;
  out.pctr_scale = 1.0;
  auto noise = [&](std::uint64_t, std::uint64_t) { return c.exploration_std; };
  auto snapshot = [&]() {
    AgentCheckpoint s = out;
    s.policy = nets.actor;
    return s;
  };
  run_epochs(train, c, baselines, trainer, rng, noise, snapshot, out);
  return out;
}

}  // namespace rtb::strategies
