#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rtb/ingest/episode.hpp"
#include "rtb/ingest/record.hpp"

namespace rtb::ctr {

// Index 0 of every model is the reserved "unseen" feature.
inline constexpr std::uint32_t kUnseenIndex = 0;

struct TrainConfig {
  int k = 10;
  double learning_rate = 1e-2;
  double l2_bias = 0.0;
  double l2_linear = 1e-5;
  double l2_latent = 1e-5;
  int epochs = 5;
  std::uint64_t seed = 1;
  double init_std = 0.01;
  // Fraction of negatives kept per epoch; predictions are re-calibrated for it.
  double negative_keep_rate = 1.0;

  void validate() const;
  std::string describe() const;
};

// Factorization machine: sigma(w0 + sum_i w_i + sum_{i<j} <v_i, v_j>) over active indices.
class FmModel {
 public:
  FmModel() = default;
  FmModel(int k, std::vector<std::string> feature_tokens);

  int k() const { return k_; }
  std::size_t feature_count() const { return linear_.size(); }

  double& bias() { return bias_; }
  double bias() const { return bias_; }
  std::span<double> linear() { return linear_; }
  std::span<const double> linear() const { return linear_; }
  std::span<double> factors(std::uint32_t index) {
    return std::span<double>(factors_).subspan(index * static_cast<std::size_t>(k_), static_cast<std::size_t>(k_));
  }
  std::span<const double> factors(std::uint32_t index) const {
    return std::span<const double>(factors_).subspan(index * static_cast<std::size_t>(k_), static_cast<std::size_t>(k_));
  }
  std::span<double> all_factors() { return factors_; }
  std::span<const double> all_factors() const { return factors_; }

  double calibration_rate() const { return calibration_rate_; }
  void set_calibration_rate(double rate) { calibration_rate_ = rate; }

  // Token string for an index; "" for the unseen index.
  const std::string& token(std::uint32_t index) const { return tokens_.at(index); }
  std::uint32_t index_of(const std::string& token) const;

  // Model index for every id of `pool` (unknown tokens map to the unseen index).
  std::vector<std::uint32_t> map_pool(const ingest::TokenPool& pool) const;

  void save(const std::filesystem::path& path, const std::string& provenance) const;
  static FmModel load(const std::filesystem::path& path, std::string* provenance = nullptr);

  friend bool operator==(const FmModel&, const FmModel&) = default;

 private:
  int k_ = 1;
  double bias_ = 0.0;
  double calibration_rate_ = 1.0;
  std::vector<double> linear_;
  std::vector<double> factors_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

// Raw score before the sigmoid. Indices out of range are treated as unseen.
double fm_score(const FmModel& model, std::span<const std::uint32_t> indices);

// sigma(score), kept strictly inside (0, 1) and re-calibrated for negative downsampling.
double fm_predict(const FmModel& model, std::span<const std::uint32_t> indices);

// Log-loss with the probability clamped to [1e-6, 1 - 1e-6].
double log_loss(double probability, int label);

// Gradient of the unclamped log-loss with respect to every parameter, laid out as
// [bias, linear..., factors...]. Only entries for active indices are non-zero.
std::vector<double> loss_gradient(const FmModel& model, std::span<const std::uint32_t> indices,
                                  int label);

// Maximum relative error between loss_gradient and central finite differences over the
// parameters touched by the example (bias, active linear weights and factors). Relative
// error is |a - n| / max(|a|, |n|, 1e-6).
double gradient_check(const FmModel& model, std::span<const std::uint32_t> indices, int label,
                      double epsilon);

struct Example {
  std::vector<std::uint32_t> indices;
  int label = 0;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean training log-loss after each epoch
};

// Builds the feature map from tokens present in `examples`' source pool and trains with
// per-parameter adaptive (AdaGrad) steps. Throws DataError on single-class labels.
FmModel fm_train(const std::vector<ingest::DayPtr>& days, const ingest::TokenPool& pool,
                 const TrainConfig& config, TrainReport* report = nullptr);

// Lower-level entry point on pre-indexed examples (index 0 unseen, 1..n-1 features).
FmModel fm_train_examples(const std::vector<Example>& examples, std::vector<std::string> feature_tokens,
                          const TrainConfig& config, TrainReport* report = nullptr);

// Mann-Whitney AUC with tie averaging. Throws DataError on length mismatch or single class.
double auc(std::span<const double> scores, std::span<const int> labels);

// Copies the dataset with every record's pctr filled by the model; recomputes avg_pctr_train.
ingest::CampaignDataset score_dataset(const FmModel& model, const ingest::CampaignDataset& dataset);

// Predictions and labels of every record in `days`.
void predict_days(const FmModel& model, const ingest::TokenPool& pool,
                  const std::vector<ingest::DayPtr>& days, std::vector<double>& scores,
                  std::vector<int>& labels);

}  // namespace rtb::ctr
