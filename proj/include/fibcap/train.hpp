#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fibcap/image.hpp"
#include "fibcap/segresnet.hpp"
#include "fibcap/tensor.hpp"

namespace fibcap {

struct TrainConfig {
  double lr = 1e-5;
  double adam_eps = 1e-9;
  double weight_decay = 1e-6;
  double l2_reg = 1e-6;
  int max_epochs = 600;
  int batch_size = 64;
  int patience = 10;
  double beta1 = 0.9;
  double beta2 = 0.999;
  uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::string stop_reason;  // "patience" or "max_epochs"
  int epochs_to_best = 0;
  double best_val_loss = 0.0;
};

// loss = 1 - (2*sum(p*t) + smooth) / (sum(p) + sum(t) + smooth);
// grad_out receives dloss/dpred when non-null.
template <typename T>
double dice_loss(const Tensor<T>& pred, const Tensor<T>& target,
                 Tensor<T>* grad_out = nullptr, double smooth = 1e-5) {
  if (!pred.same_shape(target))
    throw std::invalid_argument("dice_loss: shape mismatch");
  double inter = 0.0, sum_p = 0.0, sum_t = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    inter += static_cast<double>(pred.v[i]) * target.v[i];
    sum_p += pred.v[i];
    sum_t += target.v[i];
  }
  const double num = 2.0 * inter + smooth;
  const double den = sum_p + sum_t + smooth;
  if (grad_out) {
    *grad_out = Tensor<T>(pred.n, pred.c, pred.h, pred.w);
    for (size_t i = 0; i < pred.size(); ++i)
      grad_out->v[i] =
          static_cast<T>(-(2.0 * target.v[i] * den - num) / (den * den));
  }
  return 1.0 - num / den;
}

// Adam with decoupled weight decay. One state per parameter tensor.
template <typename T>
struct AdamWState {
  std::vector<T> m, v;
  long step = 0;
};

template <typename T>
void adamw_step(std::vector<T>& param, const std::vector<T>& grad,
                AdamWState<T>& state, const TrainConfig& cfg) {
  if (state.m.empty()) {
    state.m.assign(param.size(), T{});
    state.v.assign(param.size(), T{});
  }
  if (param.size() != grad.size() || param.size() != state.m.size())
    throw std::invalid_argument("adamw_step: size mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, state.step);
  const double bc2 = 1.0 - std::pow(cfg.beta2, state.step);
  for (size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    if (!std::isfinite(g)) throw std::runtime_error("adamw_step: non-finite gradient");
    const double m = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    const double v = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    state.m[i] = static_cast<T>(m);
    state.v[i] = static_cast<T>(v);
    const double mhat = m / bc1, vhat = v / bc2;
    param[i] = static_cast<T>(param[i] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.adam_eps)
                              - cfg.lr * cfg.weight_decay * param[i]);
  }
}

// Patience-based stopping on validation loss; tracks the best epoch.
class EarlyStopping {
 public:
  EarlyStopping(int patience, int max_epochs)
      : patience_(patience), max_epochs_(max_epochs) {}

  // Returns true when training should stop after this epoch.
  bool observe(int epoch, double val_loss) {
    if (!best_ || val_loss < *best_) {
      best_ = val_loss;
      best_epoch_ = epoch;
      since_best_ = 0;
    } else {
      ++since_best_;
    }
    if (since_best_ >= patience_) {
      reason_ = "patience";
      return true;
    }
    if (epoch + 1 >= max_epochs_) {
      reason_ = "max_epochs";
      return true;
    }
    return false;
  }

  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_ ? *best_ : 0.0; }
  const std::string& reason() const { return reason_; }

 private:
  int patience_, max_epochs_;
  std::optional<double> best_;
  int best_epoch_ = 0;
  int since_best_ = 0;
  std::string reason_;
};

// One training example: single-channel image plus binary target, both
// already in network-input coordinates.
struct TrainExample {
  ImageF image;
  Mask target;
  std::string pullback_id;
};

using FloatModel = SegResNet<float>;

// Mini-batch training with AdamW, Dice loss, conv-kernel L2 penalty and
// early stopping; returns the best-validation snapshot.
std::pair<FloatModel, TrainLog> fit(FloatModel model,
                                    const std::vector<TrainExample>& train_set,
                                    const std::vector<TrainExample>& val_set,
                                    const TrainConfig& cfg,
                                    bool verbose = false);

double evaluate_dice_loss(FloatModel& model,
                          const std::vector<TrainExample>& examples,
                          int threads = 1);

ImageF predict(FloatModel& model, const ImageF& image);

// Copies all name+shape-matching layers from a pretrained weights file;
// errors when nothing matches (wrong architecture).
WeightsLoadReport transfer_init(FloatModel& model,
                                const std::filesystem::path& pretrained);

struct FoldPlan {
  struct Fold {
    std::vector<std::string> train, val, test;
  };
  std::vector<Fold> folds;
};

FoldPlan make_folds(std::vector<std::string> pullback_ids, int k = 5,
                    uint64_t seed = 0);

Mask plurality_vote(const std::vector<Mask>& predictions);

}  // namespace fibcap
