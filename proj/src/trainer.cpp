#include "binsim/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

#include "binsim/error.hpp"

namespace binsim {

Adam::Adam(std::vector<ag::Parameter*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto* p : params_) {
    m_.push_back(ag::Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(ag::Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

double Adam::clip_grad_norm(double max_norm) {
  double sq = 0.0;
  for (const auto* p : params_) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto* p : params_) p->grad *= factor;
  }
  return norm;
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ag::Parameter& p = *params_[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseAbs2();
    p.value.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

namespace {

std::vector<ag::Matrix> snapshot(const Model& model) {
  std::vector<ag::Matrix> out;
  for (const auto* p : model.params().all()) out.push_back(p->value);
  return out;
}

void restore(Model& model, const std::vector<ag::Matrix>& values) {
  auto params = model.params().all();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
}

bool has_both_labels(const PreparedDataset& data) {
  bool pos = false;
  bool neg = false;
  for (const auto& p : data) (p.label == 1 ? pos : neg) = true;
  return pos && neg;
}

std::vector<int> labels_of(const PreparedDataset& data) {
  std::vector<int> out;
  out.reserve(data.size());
  for (const auto& p : data) out.push_back(p.label);
  return out;
}

}  // namespace

std::vector<double> score_pairs(const Model& model, const PreparedDataset& data,
                                std::size_t workers) {
  std::vector<double> scores(data.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < data.size(); i = next++) {
      scores[i] = forward_pair(model, data[i].a, data[i].b, data[i].relations).probability;
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, data.size()));
  std::vector<std::thread> threads;
  for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();
  return scores;
}

TrainResult train(const PreparedDataset& train_set, const PreparedDataset& dev,
                  const ModelConfig& model_cfg, const TrainConfig& cfg, std::size_t token_vocab,
                  std::size_t char_vocab, const std::function<void(const EpochLog&)>& on_epoch) {
  if (train_set.empty()) throw InputError("train: empty training set");
  if (cfg.batch_size == 0) throw InputError("train: batch size must be positive");
  TrainResult result{Model(model_cfg, token_vocab, char_vocab, cfg.seed), {}, 0, std::nullopt, 0.0};
  Model& model = result.model;
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  Adam adam(model.params().all(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.adam_eps);
  adam.zero_grad();

  const bool use_dev = has_both_labels(dev);
  const std::vector<int> dev_labels = labels_of(dev);
  std::vector<ag::Matrix> best = snapshot(model);
  if (use_dev) result.best_dev_auc = auc(score_pairs(model, dev, cfg.workers), dev_labels);

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t stale = 0;
  double total_seconds = 0.0;
  std::mt19937_64* dropout_rng = model_cfg.dropout > 0.0 ? &rng : nullptr;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;

    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      ag::Tape tape;
      ForwardPass pass(model, tape, dropout_rng);
      std::vector<ag::Var> losses;
      losses.reserve(end - begin);
      for (std::size_t k = begin; k < end; ++k) {
        const PreparedPair& pp = train_set[order[k]];
        ag::Var logits = pass.logits(pp.a, pp.b, pp.relations);
        const bool predicted_similar = logits.value()(1, 0) > logits.value()(0, 0);
        correct += predicted_similar == (pp.label == 1) ? 1 : 0;
        losses.push_back(ag::softmax_xent(logits, pp.label));
      }
      ag::Var batch_loss =
          ag::scale(ag::sum(losses), 1.0 / static_cast<double>(losses.size()));
      const double value = batch_loss.value()(0, 0);
      if (!std::isfinite(value)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(begin / cfg.batch_size));
      }
      loss_sum += value * static_cast<double>(losses.size());
      tape.backward(batch_loss);
      adam.clip_grad_norm(cfg.grad_clip);
      adam.step();
      adam.zero_grad();
      for (const auto* p : model.params().all()) {
        if (!p->all_finite()) {
          throw TrainingError("parameter '" + p->name + "' became non-finite at epoch " +
                              std::to_string(epoch));
        }
      }
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = loss_sum / static_cast<double>(train_set.size());
    entry.train_accuracy = static_cast<double>(correct) / static_cast<double>(train_set.size());
    entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    total_seconds += entry.seconds;
    if (use_dev) {
      entry.dev_auc = auc(score_pairs(model, dev, cfg.workers), dev_labels);
      if (*entry.dev_auc > *result.best_dev_auc) {
        result.best_dev_auc = entry.dev_auc;
        result.best_epoch = epoch;
        best = snapshot(model);
        stale = 0;
      } else {
        ++stale;
      }
    } else {
      result.best_epoch = epoch;
    }
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
    if (use_dev && cfg.patience > 0 && stale >= cfg.patience) break;
  }

  if (use_dev) restore(model, best);
  result.seconds_per_epoch =
      result.log.empty() ? 0.0 : total_seconds / static_cast<double>(result.log.size());
  return result;
}

}  // namespace binsim
