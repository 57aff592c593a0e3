#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "rtb/rl/mlp.hpp"

namespace rtb::rl {

struct Transition {
  std::vector<double> state;
  int action_index = 0;  // discrete agent
  double action = 0.0;   // continuous agent
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;
};

// Fixed-capacity ring; the oldest transition is overwritten once full.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return items_.at(i); }
  // Position i = 0 is the oldest stored transition.
  const Transition& oldest(std::size_t i) const;

  // Uniform indices with replacement. Throws std::length_error when size < batch.
  std::vector<std::size_t> sample_indices(std::size_t batch, std::mt19937_64& rng) const;
  std::vector<const Transition*> sample(std::size_t batch, std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
};

// Discrete-action value agent: online and target Q networks.
struct QNets {
  Mlp online;
  Mlp target;
  Adam optimizer;
  std::uint64_t updates = 0;
  std::uint64_t target_refresh = 100;  // hard copy every C updates
};

QNets make_q_nets(int state_size, int actions, int hidden_width, int hidden_layers, double learning_rate,
                  std::mt19937_64& rng, bool zero_output = true);

// y = r for terminal transitions, r + gamma * max_a Q_target(s', a) otherwise.
double q_target_value(const QNets& nets, const Transition& t, double gamma);

// One gradient step on the batch mean squared TD error; returns the pre-step loss.
// Throws NumericalError on a non-finite loss.
double q_update(QNets& nets, std::span<const Transition* const> batch, double gamma);

// Batch mean of (Q(s, a) - y)^2 without updating.
double q_loss(const QNets& nets, std::span<const Transition* const> batch, double gamma);

// Greedy action; ties go to `preferred` when it is among the maxima, else the lowest index.
int greedy_action(const Mlp& q, std::span<const double> state, int preferred);

struct Td3Config {
  double gamma = 1.0;
  double target_noise_std = 0.2;
  double target_noise_clip = 0.5;
  int policy_delay = 2;
  double tau = 0.005;
  double action_bound = 0.99;
};

// Continuous-action actor with twin critics; critics take [state..., action].
struct Td3Nets {
  Mlp actor, actor_target;
  Mlp critic1, critic2, critic1_target, critic2_target;
  Adam actor_opt, critic1_opt, critic2_opt;
  std::uint64_t updates = 0;
};

Td3Nets make_td3_nets(int state_size, int hidden_width, int hidden_layers, double learning_rate,
                      double action_bound, std::mt19937_64& rng, bool zero_actor_output = true);

double critic_value(const Mlp& critic, std::span<const double> state, double action);

// r + gamma * min(Q1_t, Q2_t)(s', a') with a' = clip(actor_t(s') + clip(noise), bound).
// `noise` is the already-drawn gaussian sample before clipping.
double td3_target_value(const Td3Nets& nets, const Transition& t, const Td3Config& config, double noise);

struct Td3Losses {
  double critic = 0.0;
  std::optional<double> actor;
};

// Critic regression for both critics; every `policy_delay` updates the actor ascends
// critic 1 and all targets are polyak-averaged. Throws NumericalError on non-finite loss.
Td3Losses twin_critic_update(Td3Nets& nets, std::span<const Transition* const> batch, const Td3Config& config,
                             std::mt19937_64& rng);

}  // namespace rtb::rl
