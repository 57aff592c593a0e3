#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "rtb/common/binary_io.hpp"

namespace rtb::rl {

enum class OutputActivation : std::uint32_t { kLinear = 0, kTanh = 1 };

// Fully connected net with ReLU hidden layers. Parameters live in one flat vector,
// layer by layer: weights (out x in, row-major) then biases. A tanh head is scaled by
// `output_scale`, which bounds actor outputs.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> layer_sizes, OutputActivation head = OutputActivation::kLinear,
      double output_scale = 1.0);

  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& layer_sizes() const { return sizes_; }
  OutputActivation head() const { return head_; }
  double output_scale() const { return output_scale_; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::size_t param_count() const { return params_.size(); }

  // He-normal weights, zero biases.
  void init(std::mt19937_64& rng);
  // Zeroes the last layer so the net outputs exactly 0 (linear or tanh head).
  void zero_output_layer();

  // Activations of every layer (index 0 is the input) for backward().
  struct Tape {
    std::vector<std::vector<double>> values;
  };

  std::vector<double> forward(std::span<const double> input) const;
  void forward(std::span<const double> input, Tape& tape) const;

  // Accumulates d(upstream . output)/d(params) into grad_params; optionally writes the
  // gradient with respect to the input into grad_input.
  void backward(const Tape& tape, std::span<const double> upstream, std::span<double> grad_params,
                std::span<double> grad_input = {}) const;

  void write(BinaryWriter& w) const;
  static Mlp read(BinaryReader& r);

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return offsets_[layer] + static_cast<std::size_t>(sizes_[layer]) * static_cast<std::size_t>(sizes_[layer + 1]);
  }

  std::vector<int> sizes_;
  OutputActivation head_ = OutputActivation::kLinear;
  double output_scale_ = 1.0;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

// Max relative error |a - n| / max(|a|, |n|, 1e-6) between backward() and central
// finite differences of upstream . forward(input), over every parameter.
double mlp_gradient_check(const Mlp& net, std::span<const double> input, std::span<const double> upstream,
                          double epsilon);

class Adam {
 public:
  Adam() = default;
  explicit Adam(std::size_t n, double learning_rate = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);
  void step(std::span<double> params, std::span<const double> grads);
  std::uint64_t steps() const { return t_; }
  double learning_rate() const { return lr_; }

  void write(BinaryWriter& w) const;
  static Adam read(BinaryReader& r);

 private:
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::uint64_t t_ = 0;
  std::vector<double> m_, v_;
};

// target = tau * source + (1 - tau) * target.
void polyak_update(const Mlp& source, Mlp& target, double tau);

}  // namespace rtb::rl
