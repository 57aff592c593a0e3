#include "rtb/ctr/fm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "rtb/common/binary_io.hpp"
#include "rtb/common/error.hpp"
#include "rtb/common/log.hpp"
#include "rtb/simd/kernels.hpp"

namespace rtb::ctr {
namespace {

constexpr std::uint32_t kModelVersion = 1;
constexpr double kScoreLimit = 35.0;
constexpr double kLossClamp = 1e-6;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::uint32_t checked(const FmModel& m, std::uint32_t index) {
  return index < m.feature_count() ? index : kUnseenIndex;
}

}  // namespace

void TrainConfig::validate() const {
  if (k < 1) throw ConfigError("ctr.k", "must be >= 1");
  if (!(learning_rate > 0)) throw ConfigError("ctr.learning-rate", "must be > 0");
  if (epochs < 1) throw ConfigError("ctr.epochs", "must be >= 1");
  if (l2_bias < 0 || l2_linear < 0 || l2_latent < 0) throw ConfigError("ctr.l2", "must be >= 0");
  if (!(negative_keep_rate > 0 && negative_keep_rate <= 1)) {
    throw ConfigError("ctr.negative-keep-rate", "must be in (0, 1]");
  }
}

std::string TrainConfig::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << "k=" << k << " learning_rate=" << learning_rate << " l2_bias=" << l2_bias
     << " l2_linear=" << l2_linear << " l2_latent=" << l2_latent << " epochs=" << epochs
     << " seed=" << seed << " init_std=" << init_std << " negative_keep_rate=" << negative_keep_rate;
  return os.str();
}

FmModel::FmModel(int k, std::vector<std::string> feature_tokens) : k_(k), tokens_(std::move(feature_tokens)) {
  if (k < 1) throw ConfigError("ctr.k", "must be >= 1");
  if (tokens_.empty() || !tokens_.front().empty()) tokens_.insert(tokens_.begin(), std::string());
  linear_.assign(tokens_.size(), 0.0);
  factors_.assign(tokens_.size() * static_cast<std::size_t>(k_), 0.0);
  for (std::uint32_t i = 1; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
}

std::uint32_t FmModel::index_of(const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? kUnseenIndex : it->second;
}

std::vector<std::uint32_t> FmModel::map_pool(const ingest::TokenPool& pool) const {
  std::vector<std::uint32_t> out(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) out[i] = index_of(pool.token(static_cast<ingest::TokenId>(i)));
  return out;
}

void FmModel::save(const std::filesystem::path& path, const std::string& provenance) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  BinaryWriter w(out);
  w.header({kKindFmModel, kModelVersion});
  w.string(provenance);
  w.pod<std::int32_t>(k_);
  w.pod(bias_);
  w.pod(calibration_rate_);
  w.array<double>(linear_);
  w.array<double>(factors_);
  w.pod<std::uint64_t>(tokens_.size());
  for (const auto& t : tokens_) w.string(t);
  w.check();
}

FmModel FmModel::load(const std::filesystem::path& path, std::string* provenance) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  BinaryReader r(in);
  r.header(kKindFmModel, kModelVersion);
  auto text = r.string();
  if (provenance) *provenance = std::move(text);
  const int k = r.pod<std::int32_t>();
  const double bias = r.pod<double>();
  const double calibration = r.pod<double>();
  auto linear = r.array<double>();
  auto factors = r.array<double>();
  const auto n = r.pod<std::uint64_t>();
  std::vector<std::string> tokens;
  for (std::uint64_t i = 0; i < n; ++i) tokens.push_back(r.string());
  if (k < 1 || tokens.empty() || linear.size() != tokens.size() ||
      factors.size() != tokens.size() * static_cast<std::size_t>(k)) {
    throw DataError("corrupt FM model: inconsistent shapes");
  }
  FmModel m(k, std::move(tokens));
  m.bias_ = bias;
  m.calibration_rate_ = calibration;
  m.linear_ = std::move(linear);
  m.factors_ = std::move(factors);
  return m;
}

double fm_score(const FmModel& model, std::span<const std::uint32_t> indices) {
  const auto k = static_cast<std::size_t>(model.k());
  double score = model.bias();
  double sum_buf[64];
  std::vector<double> heap;
  double* sum = sum_buf;
  if (k > 64) {
    heap.assign(k, 0.0);
    sum = heap.data();
  } else {
    std::fill(sum, sum + k, 0.0);
  }
  const auto& kern = simd::active();
  double squares = 0.0;
  for (const auto raw : indices) {
    const auto i = checked(model, raw);
    score += model.linear()[i];
    const auto v = model.factors(i);
    kern.axpy(1.0, v.data(), sum, k);
    squares += kern.sum_squares(v.data(), k);
  }
  return score + 0.5 * (kern.sum_squares(sum, k) - squares);
}

double fm_predict(const FmModel& model, std::span<const std::uint32_t> indices) {
  const double p = sigmoid(std::clamp(fm_score(model, indices), -kScoreLimit, kScoreLimit));
  const double r = model.calibration_rate();
  if (r == 1.0) return p;
  return p / (p + (1.0 - p) / r);
}

double log_loss(double probability, int label) {
  const double p = std::clamp(probability, kLossClamp, 1.0 - kLossClamp);
  return label ? -std::log(p) : -std::log(1.0 - p);
}

std::vector<double> loss_gradient(const FmModel& model, std::span<const std::uint32_t> indices,
                                  int label) {
  const auto k = static_cast<std::size_t>(model.k());
  const std::size_t n = model.feature_count();
  std::vector<double> grad(1 + n + n * k, 0.0);
  const double g = sigmoid(fm_score(model, indices)) - label;
  grad[0] = g;
  std::vector<double> sum(k, 0.0);
  for (const auto raw : indices) {
    const auto v = model.factors(checked(model, raw));
    for (std::size_t f = 0; f < k; ++f) sum[f] += v[f];
  }
  for (const auto raw : indices) {
    const auto i = checked(model, raw);
    grad[1 + i] += g;
    const auto v = model.factors(i);
    for (std::size_t f = 0; f < k; ++f) grad[1 + n + i * k + f] += g * (sum[f] - v[f]);
  }
  return grad;
}

double gradient_check(const FmModel& model, std::span<const std::uint32_t> indices, int label,
                      double epsilon) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) throw ConfigError("epsilon", "must be in [1e-7, 1e-3]");
  const auto analytic = loss_gradient(model, indices, label);
  const auto k = static_cast<std::size_t>(model.k());
  const std::size_t n = model.feature_count();
  FmModel probe = model;
  auto loss = [&]() { return log_loss(sigmoid(fm_score(probe, indices)), label); };
  auto compare = [&](double& param, double a) {
    const double saved = param;
    param = saved + epsilon;
    const double up = loss();
    param = saved - epsilon;
    const double down = loss();
    param = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    return std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
  };
  double worst = compare(probe.bias(), analytic[0]);
  std::vector<std::uint32_t> touched;
  for (const auto raw : indices) touched.push_back(checked(model, raw));
  std::sort(touched.begin(), touched.end());
  touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
  for (const auto i : touched) {
    worst = std::max(worst, compare(probe.linear()[i], analytic[1 + i]));
    for (std::size_t f = 0; f < k; ++f) {
      worst = std::max(worst, compare(probe.factors(i)[f], analytic[1 + n + i * k + f]));
    }
  }
  return worst;
}

FmModel fm_train_examples(const std::vector<Example>& examples, std::vector<std::string> feature_tokens,
                          const TrainConfig& config, TrainReport* report) {
  config.validate();
  const auto positives = std::count_if(examples.begin(), examples.end(), [](const Example& e) { return e.label == 1; });
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(examples.size())) {
    throw DataError("CTR training needs both clicked and non-clicked impressions");
  }
  FmModel model(config.k, std::move(feature_tokens));
  const auto k = static_cast<std::size_t>(config.k);
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> init(0.0, config.init_std);
  for (auto& v : model.all_factors()) v = init(rng);

  constexpr double kAdagradEps = 1e-8;
  double acc_bias = 0.0;
  std::vector<double> acc_linear(model.feature_count(), 0.0);
  std::vector<double> acc_factors(model.all_factors().size(), 0.0);
  std::vector<double> sum(k);
  std::vector<double> grad_v(k);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto step = [&](double& param, double& acc, double g) {
    acc += g * g;
    param -= config.learning_rate * g / (std::sqrt(acc) + kAdagradEps);
  };

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (const auto idx : order) {
      const auto& ex = examples[idx];
      if (ex.label == 0 && config.negative_keep_rate < 1.0 && unit(rng) >= config.negative_keep_rate) continue;
      std::fill(sum.begin(), sum.end(), 0.0);
      for (const auto raw : ex.indices) {
        const auto v = model.factors(checked(model, raw));
        for (std::size_t f = 0; f < k; ++f) sum[f] += v[f];
      }
      const double g = sigmoid(fm_score(model, ex.indices)) - ex.label;
      step(model.bias(), acc_bias, g + config.l2_bias * model.bias());
      for (const auto raw : ex.indices) {
        const auto i = checked(model, raw);
        auto v = model.factors(i);
        for (std::size_t f = 0; f < k; ++f) grad_v[f] = g * (sum[f] - v[f]) + config.l2_latent * v[f];
        step(model.linear()[i], acc_linear[i], g + config.l2_linear * model.linear()[i]);
        for (std::size_t f = 0; f < k; ++f) step(v[f], acc_factors[i * k + f], grad_v[f]);
      }
    }
    if (report) {
      double total = 0.0;
      for (const auto& ex : examples) total += log_loss(sigmoid(fm_score(model, ex.indices)), ex.label);
      report->epoch_loss.push_back(total / static_cast<double>(examples.size()));
    }
  }
  model.set_calibration_rate(config.negative_keep_rate);
  return model;
}

FmModel fm_train(const std::vector<ingest::DayPtr>& days, const ingest::TokenPool& pool,
                 const TrainConfig& config, TrainReport* report) {
  // Feature map: every pool token that appears in the training days, in token-id order.
  std::vector<std::uint32_t> remap(pool.size(), kUnseenIndex);
  for (const auto& d : days) {
    for (const auto& r : d->records) {
      for (const auto id : r.features) {
        if (id >= pool.size()) throw DataError("record token id outside the token pool");
        remap[id] = 1;
      }
    }
  }
  std::vector<std::string> tokens{std::string()};
  for (std::size_t id = 0; id < pool.size(); ++id) {
    if (remap[id]) {
      remap[id] = static_cast<std::uint32_t>(tokens.size());
      tokens.push_back(pool.token(static_cast<ingest::TokenId>(id)));
    }
  }
  std::vector<Example> examples;
  for (const auto& d : days) {
    for (const auto& r : d->records) {
      Example e;
      e.label = r.click;
      e.indices.reserve(r.features.size());
      for (const auto id : r.features) e.indices.push_back(remap[id]);
      examples.push_back(std::move(e));
    }
  }
  return fm_train_examples(examples, std::move(tokens), config, report);
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DataError("auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  std::size_t positives = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
    for (std::size_t m = i; m < j; ++m) {
      if (labels[order[m]]) {
        positive_rank_sum += mid_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) throw DataError("auc needs both positive and negative labels");
  const double p = static_cast<double>(positives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

void predict_days(const FmModel& model, const ingest::TokenPool& pool,
                  const std::vector<ingest::DayPtr>& days, std::vector<double>& scores,
                  std::vector<int>& labels) {
  const auto remap = model.map_pool(pool);
  std::vector<std::uint32_t> idx;
  for (const auto& d : days) {
    for (const auto& r : d->records) {
      idx.clear();
      for (const auto id : r.features) idx.push_back(id < remap.size() ? remap[id] : kUnseenIndex);
      scores.push_back(fm_predict(model, idx));
      labels.push_back(r.click);
    }
  }
}

ingest::CampaignDataset score_dataset(const FmModel& model, const ingest::CampaignDataset& dataset) {
  if (!dataset.tokens) throw DataError("dataset has no token pool");
  const auto remap = model.map_pool(*dataset.tokens);
  std::vector<std::uint32_t> idx;
  auto score_days = [&](const std::vector<ingest::DayPtr>& days) {
    std::vector<ingest::DayPtr> out;
    for (const auto& d : days) {
      auto copy = std::make_shared<ingest::DayLog>(*d);
      for (auto& r : copy->records) {
        idx.clear();
        for (const auto id : r.features) idx.push_back(id < remap.size() ? remap[id] : kUnseenIndex);
        r.pctr = fm_predict(model, idx);
      }
      out.push_back(std::move(copy));
    }
    return out;
  };
  ingest::CampaignDataset scored = dataset;
  scored.train_days = score_days(dataset.train_days);
  scored.test_days = score_days(dataset.test_days);
  scored.avg_pctr_train = ingest::mean_pctr(scored.train_days);
  return scored;
}

}  // namespace rtb::ctr
