#include "rtb/rl/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rtb/common/error.hpp"
#include "rtb/simd/kernels.hpp"

namespace rtb::rl {

Mlp::Mlp(std::vector<int> layer_sizes, OutputActivation head, double output_scale)
    : sizes_(std::move(layer_sizes)), head_(head), output_scale_(output_scale) {
  if (sizes_.size() < 2) throw std::invalid_argument("an MLP needs at least input and output sizes");
  for (int s : sizes_) {
    if (s < 1) throw std::invalid_argument("MLP layer sizes must be positive");
  }
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += static_cast<std::size_t>(sizes_[l] + 1) * static_cast<std::size_t>(sizes_[l + 1]);
  }
  params_.assign(total, 0.0);
}

void Mlp::init(std::mt19937_64& rng) {
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / sizes_[l]));
    const auto w = weight_offset(l);
    const auto b = bias_offset(l);
    for (std::size_t i = w; i < b; ++i) params_[i] = dist(rng);
    std::fill(params_.begin() + static_cast<std::ptrdiff_t>(b),
              params_.begin() + static_cast<std::ptrdiff_t>(b + static_cast<std::size_t>(sizes_[l + 1])), 0.0);
  }
}

void Mlp::zero_output_layer() {
  const auto last = sizes_.size() - 2;
  std::fill(params_.begin() + static_cast<std::ptrdiff_t>(weight_offset(last)), params_.end(), 0.0);
}

std::vector<double> Mlp::forward(std::span<const double> input) const {
  Tape tape;
  forward(input, tape);
  return std::move(tape.values.back());
}

void Mlp::forward(std::span<const double> input, Tape& tape) const {
  if (static_cast<int>(input.size()) != sizes_.front()) {
    throw std::invalid_argument("MLP input has " + std::to_string(input.size()) + " features, expected " +
                                std::to_string(sizes_.front()));
  }
  const auto& k = simd::active();
  tape.values.resize(sizes_.size());
  tape.values[0].assign(input.begin(), input.end());
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto in = static_cast<std::size_t>(sizes_[l]);
    const auto out = static_cast<std::size_t>(sizes_[l + 1]);
    const double* w = params_.data() + weight_offset(l);
    const double* b = params_.data() + bias_offset(l);
    const auto& x = tape.values[l];
    auto& y = tape.values[l + 1];
    y.resize(out);
    for (std::size_t j = 0; j < out; ++j) y[j] = b[j] + k.dot(w + j * in, x.data(), in);
    if (l + 1 < layers) {
      k.relu(y.data(), y.data(), out);
    } else if (head_ == OutputActivation::kTanh) {
      for (auto& v : y) v = output_scale_ * std::tanh(v);
    }
  }
}

void Mlp::backward(const Tape& tape, std::span<const double> upstream, std::span<double> grad_params,
                   std::span<double> grad_input) const {
  if (grad_params.size() != params_.size()) throw std::invalid_argument("gradient buffer size mismatch");
  if (static_cast<int>(upstream.size()) != sizes_.back()) throw std::invalid_argument("upstream size mismatch");
  const auto& k = simd::active();
  const std::size_t layers = sizes_.size() - 1;
  std::vector<double> delta(upstream.begin(), upstream.end());
  if (head_ == OutputActivation::kTanh) {
    const auto& y = tape.values.back();
    for (std::size_t j = 0; j < delta.size(); ++j) {
      const double t = y[j] / output_scale_;
      delta[j] *= output_scale_ * (1.0 - t * t);
    }
  }
  std::vector<double> prev;
  for (std::size_t l = layers; l-- > 0;) {
    const auto in = static_cast<std::size_t>(sizes_[l]);
    const auto out = static_cast<std::size_t>(sizes_[l + 1]);
    const double* w = params_.data() + weight_offset(l);
    double* gw = grad_params.data() + weight_offset(l);
    double* gb = grad_params.data() + bias_offset(l);
    const auto& x = tape.values[l];
    const bool need_prev = l > 0 || !grad_input.empty();
    if (need_prev) prev.assign(in, 0.0);
    for (std::size_t j = 0; j < out; ++j) {
      const double d = delta[j];
      if (d == 0.0) continue;
      gb[j] += d;
      k.axpy(d, x.data(), gw + j * in, in);
      if (need_prev) k.axpy(d, w + j * in, prev.data(), in);
    }
    if (l > 0) {
      for (std::size_t i = 0; i < in; ++i) {
        if (x[i] <= 0.0) prev[i] = 0.0;  // ReLU derivative, 0 at the kink
      }
      delta.swap(prev);
    } else if (!grad_input.empty()) {
      std::copy(prev.begin(), prev.end(), grad_input.begin());
    }
  }
}

void Mlp::write(BinaryWriter& w) const {
  w.array<int>(sizes_);
  w.pod(static_cast<std::uint32_t>(head_));
  w.pod(output_scale_);
  w.array<double>(params_);
}

Mlp Mlp::read(BinaryReader& r) {
  auto sizes = r.array<int>(1024);
  const auto head = r.pod<std::uint32_t>();
  const double scale = r.pod<double>();
  if (head > 1) throw DataError("corrupt network: unknown output activation");
  Mlp net(std::move(sizes), static_cast<OutputActivation>(head), scale);
  auto params = r.array<double>();
  if (params.size() != net.params_.size()) throw DataError("corrupt network: parameter count mismatch");
  net.params_ = std::move(params);
  return net;
}

double mlp_gradient_check(const Mlp& net, std::span<const double> input, std::span<const double> upstream,
                          double epsilon) {
  Mlp::Tape tape;
  net.forward(input, tape);
  std::vector<double> analytic(net.param_count(), 0.0);
  net.backward(tape, upstream, analytic);
  Mlp probe = net;
  auto objective = [&]() {
    const auto y = probe.forward(input);
    double s = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) s += upstream[j] * y[j];
    return s;
  };
  double worst = 0.0;
  auto params = probe.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + epsilon;
    const double up = objective();
    params[i] = saved - epsilon;
    const double down = objective();
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    worst = std::max(worst, std::abs(analytic[i] - numeric) /
                                std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6}));
  }
  return worst;
}

Adam::Adam(std::size_t n, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(n, 0.0), v_(n, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) throw std::invalid_argument("Adam size mismatch");
  ++t_;
  const simd::AdamCoefficients c{lr_,
                                 beta1_,
                                 beta2_,
                                 eps_,
                                 1.0 - std::pow(beta1_, static_cast<double>(t_)),
                                 1.0 - std::pow(beta2_, static_cast<double>(t_))};
  simd::active().adam_step(params.data(), grads.data(), m_.data(), v_.data(), m_.size(), c);
}

void Adam::write(BinaryWriter& w) const {
  w.pod(lr_);
  w.pod(beta1_);
  w.pod(beta2_);
  w.pod(eps_);
  w.pod(t_);
  w.array<double>(m_);
  w.array<double>(v_);
}

Adam Adam::read(BinaryReader& r) {
  Adam a;
  a.lr_ = r.pod<double>();
  a.beta1_ = r.pod<double>();
  a.beta2_ = r.pod<double>();
  a.eps_ = r.pod<double>();
  a.t_ = r.pod<std::uint64_t>();
  a.m_ = r.array<double>();
  a.v_ = r.array<double>();
  if (a.m_.size() != a.v_.size()) throw DataError("corrupt optimizer state");
  return a;
}

void polyak_update(const Mlp& source, Mlp& target, double tau) {
  if (source.param_count() != target.param_count()) throw std::invalid_argument("polyak: shape mismatch");
  simd::active().lerp(tau, source.params().data(), target.params().data(), source.param_count());
}

}  // namespace rtb::rl
