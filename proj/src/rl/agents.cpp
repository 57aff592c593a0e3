#include "rtb/rl/agents.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rtb/common/error.hpp"

namespace rtb::rl {
namespace {

std::vector<int> layer_sizes(int input, int hidden_width, int hidden_layers, int output) {
  std::vector<int> sizes{input};
  for (int i = 0; i < hidden_layers; ++i) sizes.push_back(hidden_width);
  sizes.push_back(output);
  return sizes;
}

std::vector<double> with_action(std::span<const double> state, double action) {
  std::vector<double> x(state.begin(), state.end());
  x.push_back(action);
  return x;
}

void require_finite(double loss, const char* what) {
  if (!std::isfinite(loss)) throw NumericalError(std::string("non-finite ") + what + " loss");
}

}  // namespace

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("replay buffer capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

const Transition& ReplayBuffer::oldest(std::size_t i) const {
  if (i >= items_.size()) throw std::out_of_range("replay buffer position");
  const std::size_t start = items_.size() < capacity_ ? 0 : next_;
  return items_[(start + i) % items_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, std::mt19937_64& rng) const {
  if (items_.size() < batch || items_.empty()) {
    throw std::length_error("replay buffer holds " + std::to_string(items_.size()) + " transitions, batch needs " +
                            std::to_string(batch));
  }
  std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
  std::vector<std::size_t> out(batch);
  for (auto& i : out) i = pick(rng);
  return out;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch, std::mt19937_64& rng) const {
  std::vector<const Transition*> out;
  for (const auto i : sample_indices(batch, rng)) out.push_back(&items_[i]);
  return out;
}

QNets make_q_nets(int state_size, int actions, int hidden_width, int hidden_layers, double learning_rate,
                  std::mt19937_64& rng, bool zero_output) {
  QNets n;
  n.online = Mlp(layer_sizes(state_size, hidden_width, hidden_layers, actions));
  n.online.init(rng);
  if (zero_output) n.online.zero_output_layer();
  n.target = n.online;
  n.optimizer = Adam(n.online.param_count(), learning_rate);
  return n;
}

double q_target_value(const QNets& nets, const Transition& t, double gamma) {
  if (t.terminal) return t.reward;
  const auto q = nets.target.forward(t.next_state);
  return t.reward + gamma * *std::max_element(q.begin(), q.end());
}

double q_loss(const QNets& nets, std::span<const Transition* const> batch, double gamma) {
  double loss = 0.0;
  for (const auto* t : batch) {
    const double y = q_target_value(nets, *t, gamma);
    const auto q = nets.online.forward(t->state);
    const double d = q.at(static_cast<std::size_t>(t->action_index)) - y;
    loss += d * d;
  }
  return loss / static_cast<double>(batch.size());
}

double q_update(QNets& nets, std::span<const Transition* const> batch, double gamma) {
  if (batch.empty()) throw std::invalid_argument("q_update needs a non-empty batch");
  const int actions = nets.online.output_size();
  std::vector<double> grad(nets.online.param_count(), 0.0);
  std::vector<double> upstream(static_cast<std::size_t>(actions), 0.0);
  Mlp::Tape tape;
  double loss = 0.0;
  const double scale = 2.0 / static_cast<double>(batch.size());
  for (const auto* t : batch) {
    if (t->action_index < 0 || t->action_index >= actions) throw std::invalid_argument("action index out of range");
    const double y = q_target_value(nets, *t, gamma);
    nets.online.forward(t->state, tape);
    const double d = tape.values.back()[static_cast<std::size_t>(t->action_index)] - y;
    loss += d * d;
    std::fill(upstream.begin(), upstream.end(), 0.0);
    upstream[static_cast<std::size_t>(t->action_index)] = scale * d;
    nets.online.backward(tape, upstream, grad);
  }
  loss /= static_cast<double>(batch.size());
  require_finite(loss, "Q");
  nets.optimizer.step(nets.online.params(), grad);
  ++nets.updates;
  if (nets.target_refresh > 0 && nets.updates % nets.target_refresh == 0) nets.target = nets.online;
  return loss;
}

int greedy_action(const Mlp& q, std::span<const double> state, int preferred) {
  const auto values = q.forward(state);
  const double best = *std::max_element(values.begin(), values.end());
  if (preferred >= 0 && preferred < static_cast<int>(values.size()) &&
      values[static_cast<std::size_t>(preferred)] == best) {
    return preferred;
  }
  return static_cast<int>(std::find(values.begin(), values.end(), best) - values.begin());
}

Td3Nets make_td3_nets(int state_size, int hidden_width, int hidden_layers, double learning_rate,
                      double action_bound, std::mt19937_64& rng, bool zero_actor_output) {
  Td3Nets n;
  n.actor = Mlp(layer_sizes(state_size, hidden_width, hidden_layers, 1), OutputActivation::kTanh, action_bound);
  n.actor.init(rng);
  if (zero_actor_output) n.actor.zero_output_layer();
  n.critic1 = Mlp(layer_sizes(state_size + 1, hidden_width, hidden_layers, 1));
  n.critic1.init(rng);
  n.critic2 = Mlp(layer_sizes(state_size + 1, hidden_width, hidden_layers, 1));
  n.critic2.init(rng);
  n.actor_target = n.actor;
  n.critic1_target = n.critic1;
  n.critic2_target = n.critic2;
  n.actor_opt = Adam(n.actor.param_count(), learning_rate);
  n.critic1_opt = Adam(n.critic1.param_count(), learning_rate);
  n.critic2_opt = Adam(n.critic2.param_count(), learning_rate);
  return n;
}

double critic_value(const Mlp& critic, std::span<const double> state, double action) {
  return critic.forward(with_action(state, action))[0];
}

double td3_target_value(const Td3Nets& nets, const Transition& t, const Td3Config& config, double noise) {
  if (t.terminal) return t.reward;
  const double clipped_noise = std::clamp(noise, -config.target_noise_clip, config.target_noise_clip);
  const double a = std::clamp(nets.actor_target.forward(t.next_state)[0] + clipped_noise, -config.action_bound,
                              config.action_bound);
  const double q1 = critic_value(nets.critic1_target, t.next_state, a);
  const double q2 = critic_value(nets.critic2_target, t.next_state, a);
  return t.reward + config.gamma * std::min(q1, q2);
}

Td3Losses twin_critic_update(Td3Nets& nets, std::span<const Transition* const> batch, const Td3Config& config,
                             std::mt19937_64& rng) {
  if (batch.empty()) throw std::invalid_argument("twin_critic_update needs a non-empty batch");
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double n = static_cast<double>(batch.size());
  std::vector<double> g1(nets.critic1.param_count(), 0.0);
  std::vector<double> g2(nets.critic2.param_count(), 0.0);
  Mlp::Tape tape;
  Td3Losses losses;
  for (const auto* t : batch) {
    const double noise = config.target_noise_std > 0 ? config.target_noise_std * gauss(rng) : 0.0;
    const double y = td3_target_value(nets, *t, config, noise);
    const auto x = with_action(t->state, t->action);
    nets.critic1.forward(x, tape);
    const double d1 = tape.values.back()[0] - y;
    const double up1 = 2.0 * d1 / n;
    nets.critic1.backward(tape, std::span<const double>(&up1, 1), g1);
    nets.critic2.forward(x, tape);
    const double d2 = tape.values.back()[0] - y;
    const double up2 = 2.0 * d2 / n;
    nets.critic2.backward(tape, std::span<const double>(&up2, 1), g2);
    losses.critic += (d1 * d1 + d2 * d2) / n;
  }
  require_finite(losses.critic, "critic");
  nets.critic1_opt.step(nets.critic1.params(), g1);
  nets.critic2_opt.step(nets.critic2.params(), g2);
  ++nets.updates;

  const auto delay = static_cast<std::uint64_t>(std::max(1, config.policy_delay));
  if (nets.updates % delay == 0) {
    std::vector<double> ga(nets.actor.param_count(), 0.0);
    std::vector<double> scratch(nets.critic1.param_count(), 0.0);
    std::vector<double> grad_x(static_cast<std::size_t>(nets.critic1.input_size()), 0.0);
    Mlp::Tape actor_tape, critic_tape;
    double actor_loss = 0.0;
    for (const auto* t : batch) {
      nets.actor.forward(t->state, actor_tape);
      const double a = actor_tape.values.back()[0];
      nets.critic1.forward(with_action(t->state, a), critic_tape);
      actor_loss -= critic_tape.values.back()[0] / n;
      // Loss is -mean Q1(s, actor(s)); chain through the critic's action input.
      const double up = -1.0 / n;
      nets.critic1.backward(critic_tape, std::span<const double>(&up, 1), scratch, grad_x);
      const double da = grad_x.back();
      nets.actor.backward(actor_tape, std::span<const double>(&da, 1), ga);
    }
    require_finite(actor_loss, "actor");
    nets.actor_opt.step(nets.actor.params(), ga);
    losses.actor = actor_loss;
    polyak_update(nets.actor, nets.actor_target, config.tau);
    polyak_update(nets.critic1, nets.critic1_target, config.tau);
    polyak_update(nets.critic2, nets.critic2_target, config.tau);
  }
  return losses;
}

}  // namespace rtb::rl
