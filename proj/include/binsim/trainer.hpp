#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "binsim/dataset.hpp"
#include "binsim/metrics.hpp"
#include "binsim/model.hpp"

namespace binsim {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  // Global gradient-norm clip; 0 disables.
  double grad_clip = 5.0;
  // Epochs without dev-AUC improvement before stopping; 0 disables.
  std::size_t patience = 10;
  std::uint64_t seed = 1;
  std::size_t workers = 1;

  bool operator==(const TrainConfig&) const = default;
};

class Adam {
 public:
  Adam(std::vector<ag::Parameter*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void step();
  void zero_grad();
  // Scales gradients so their global norm is at most `max_norm`. Returns the
  // norm before clipping.
  double clip_grad_norm(double max_norm);

 private:
  std::vector<ag::Parameter*> params_;
  std::vector<ag::Matrix> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> dev_auc;
  double seconds = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;  // 0 == initial parameters
  std::optional<double> best_dev_auc;
  double seconds_per_epoch = 0.0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Trains on `train` and keeps the parameters with the best development AUC
// (or the final ones when `dev` is empty).
TrainResult train(const PreparedDataset& train, const PreparedDataset& dev,
                  const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  std::size_t token_vocab, std::size_t char_vocab,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

// Scores every prepared pair with the frozen model.
std::vector<double> score_pairs(const Model& model, const PreparedDataset& data,
                                std::size_t workers = 1);

}  // namespace binsim
