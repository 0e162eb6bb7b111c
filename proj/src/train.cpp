#include "fibcap/train.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

namespace fibcap {
namespace {

Tensor<float> to_tensor(const ImageF& img) {
  Tensor<float> t(1, 1, img.rows(), img.cols());
  std::copy(img.raw().begin(), img.raw().end(), t.v.begin());
  return t;
}

Tensor<float> to_tensor(const Mask& m) {
  Tensor<float> t(1, 1, m.rows(), m.cols());
  for (size_t i = 0; i < m.data.size(); ++i)
    t.v[i] = static_cast<float>(m.data.raw()[i]);
  return t;
}

uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c) {
  uint64_t h = a * 0x9e3779b97f4a7c15ULL + b;
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h += c;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  return h ^ (h >> 31);
}

// Run fn(i) over [0, n) on `threads` workers with contiguous chunks.
template <typename Fn>
void parallel_chunks(int n, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const int chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    const int lo = t * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

void TrainConfig::validate() const {
  if (lr <= 0 || adam_eps <= 0 || weight_decay < 0 || l2_reg < 0 ||
      max_epochs <= 0 || batch_size <= 0 || patience <= 0 || threads <= 0 ||
      beta1 <= 0 || beta2 <= 0 || beta1 >= 1 || beta2 >= 1)
    throw std::invalid_argument("TrainConfig: invalid hyperparameter");
  if (patience >= max_epochs)
    throw std::invalid_argument("TrainConfig: patience must be < max_epochs");
}

double evaluate_dice_loss(FloatModel& model,
                          const std::vector<TrainExample>& examples,
                          int threads) {
  if (examples.empty())
    throw std::invalid_argument("evaluate_dice_loss: empty set");
  const int n = static_cast<int>(examples.size());
  threads = std::max(1, std::min(threads, n));
  std::vector<double> losses(n, 0.0);
  std::vector<FloatModel> replicas(threads, model);
  const int chunk = (n + threads - 1) / threads;
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    const int lo = t * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&, t, lo, hi] {
      for (int i = lo; i < hi; ++i) {
        auto pred = replicas[t].forward(to_tensor(examples[i].image), false);
        losses[i] = dice_loss(pred, to_tensor(examples[i].target));
      }
    });
  }
  for (auto& th : pool) th.join();
  return std::accumulate(losses.begin(), losses.end(), 0.0) / n;
}

ImageF predict(FloatModel& model, const ImageF& image) {
  auto y = model.forward(to_tensor(image), false);
  ImageF out(image.rows(), image.cols());
  std::copy(y.v.begin(), y.v.end(), out.raw().begin());
  return out;
}

std::pair<FloatModel, TrainLog> fit(FloatModel model,
                                    const std::vector<TrainExample>& train_set,
                                    const std::vector<TrainExample>& val_set,
                                    const TrainConfig& cfg, bool verbose) {
  cfg.validate();
  if (train_set.empty() || val_set.empty())
    throw std::invalid_argument("fit: empty train or validation set");

  auto master_params = model.params();
  std::vector<AdamWState<float>> states(master_params.size());
  std::mt19937_64 shuffle_rng(cfg.seed);
  EarlyStopping stopper(cfg.patience, cfg.max_epochs);
  TrainLog log;
  FloatModel best = model;

  const int n = static_cast<int>(train_set.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double train_loss_sum = 0.0;

    for (int b0 = 0; b0 < n; b0 += cfg.batch_size) {
      const int bsz = std::min(cfg.batch_size, n - b0);
      const int threads = std::max(1, std::min(cfg.threads, bsz));
      std::vector<FloatModel> replicas(threads, model);
      for (auto& r : replicas) r.zero_grad();
      std::vector<double> losses(bsz, 0.0);

      const int chunk = (bsz + threads - 1) / threads;
      std::vector<std::thread> pool;
      for (int t = 0; t < threads; ++t) {
        const int lo = t * chunk, hi = std::min(bsz, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, t, lo, hi] {
          for (int i = lo; i < hi; ++i) {
            const auto& ex = train_set[order[b0 + i]];
            // per-example dropout stream, independent of thread layout
            replicas[t].rng().seed(mix_seed(cfg.seed, epoch, b0 + i));
            auto pred = replicas[t].forward(to_tensor(ex.image), true);
            Tensor<float> grad;
            losses[i] = dice_loss(pred, to_tensor(ex.target), &grad);
            for (auto& g : grad.v) g /= static_cast<float>(bsz);
            replicas[t].backward(grad);
          }
        });
      }
      for (auto& th : pool) th.join();
      train_loss_sum += std::accumulate(losses.begin(), losses.end(), 0.0);

      // reduce replica gradients into the master model and step
      std::vector<std::vector<ParamRef<float>>> rparams;
      for (auto& r : replicas) rparams.push_back(r.params());
      for (size_t pi = 0; pi < master_params.size(); ++pi) {
        auto& p = master_params[pi];
        std::fill(p.grad->begin(), p.grad->end(), 0.0f);
        for (auto& rp : rparams)
          for (size_t i = 0; i < p.grad->size(); ++i)
            (*p.grad)[i] += (*rp[pi].grad)[i];
        if (cfg.l2_reg > 0 && model.is_conv_kernel(p.name))
          for (size_t i = 0; i < p.grad->size(); ++i)
            (*p.grad)[i] += static_cast<float>(2.0 * cfg.l2_reg * (*p.value)[i]);
        adamw_step(*p.value, *p.grad, states[pi], cfg);
      }
    }

    const double val_loss = evaluate_dice_loss(model, val_set, cfg.threads);
    const auto t1 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_loss_sum / n;
    rec.val_loss = val_loss;
    rec.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    log.epochs.push_back(rec);
    if (verbose)
      std::fprintf(stderr, "epoch %d train %.4f val %.4f (%.1fs)\n", epoch,
                   rec.train_loss, rec.val_loss, rec.wall_seconds);

    const bool stop = stopper.observe(epoch, val_loss);
    if (stopper.best_epoch() == epoch) best = model;
    if (stop) {
      log.stop_reason = stopper.reason();
      break;
    }
  }
  log.epochs_to_best = stopper.best_epoch() + 1;
  log.best_val_loss = stopper.best_loss();
  return {std::move(best), std::move(log)};
}

WeightsLoadReport transfer_init(FloatModel& model,
                                const std::filesystem::path& pretrained) {
  auto report = load_weights(model, pretrained);
  if (report.matched.empty())
    throw std::runtime_error("transfer_init: no matching layers (wrong architecture?)");
  return report;
}

FoldPlan make_folds(std::vector<std::string> pullback_ids, int k,
                    uint64_t seed) {
  if (k < 2) throw std::invalid_argument("make_folds: k must be >= 2");
  if (static_cast<int>(pullback_ids.size()) < k)
    throw std::invalid_argument("make_folds: fewer pullbacks than folds");
  std::sort(pullback_ids.begin(), pullback_ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(pullback_ids.begin(), pullback_ids.end(), rng);

  // k groups, each assigned to the test set exactly once.
  std::vector<std::vector<std::string>> groups(k);
  for (size_t i = 0; i < pullback_ids.size(); ++i)
    groups[i % k].push_back(pullback_ids[i]);

  FoldPlan plan;
  for (int f = 0; f < k; ++f) {
    FoldPlan::Fold fold;
    fold.test = groups[f];
    fold.val = groups[(f + 1) % k];
    for (int g = 0; g < k; ++g)
      if (g != f && g != (f + 1) % k)
        fold.train.insert(fold.train.end(), groups[g].begin(), groups[g].end());
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

Mask plurality_vote(const std::vector<Mask>& predictions) {
  if (predictions.empty())
    throw std::invalid_argument("plurality_vote: no predictions");
  const int nr = predictions.front().rows(), nt = predictions.front().cols();
  for (const auto& m : predictions)
    if (m.rows() != nr || m.cols() != nt)
      throw std::invalid_argument("plurality_vote: shape mismatch");
  const size_t k = predictions.size();
  Mask out(nr, nt, predictions.front().class_tag);
  for (size_t i = 0; i < out.data.size(); ++i) {
    size_t votes = 0;
    for (const auto& m : predictions) votes += m.data.raw()[i];
    out.data.raw()[i] = 2 * votes > k ? 1 : 0;  // even-k ties go background
  }
  return out;
}

}  // namespace fibcap
