#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "gnssfl/errors.hpp"
#include "gnssfl/features.hpp"
#include "gnssfl/lstm.hpp"

namespace gnssfl {

struct TrainConfig {
  std::size_t batch_size = 72;
  double base_learning_rate = 1e-3;
  double lr_scale = 1.0;  // per-client multiplier, see lr_scale_rule
  std::size_t max_epochs = 100;
  std::size_t early_stop_patience = 20;
  double min_delta = 1e-6;
  double validation_fraction = 0.2;
  std::uint64_t rng_seed = 1;
  double clip_norm = 5.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
    if (early_stop_patience < 1) throw ConfigError("train config: patience must be >= 1");
    if (max_epochs < 1) throw ConfigError("train config: max_epochs must be >= 1");
    if (!(base_learning_rate > 0.0) || !(lr_scale > 0.0)) throw ConfigError("train config: learning rate must be > 0");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
      throw ConfigError("train config: validation_fraction must lie in (0, 1)");
  }
};

// Learning-rate multiplier for a client holding n_local windows when the
// federation's mean is n_mean: n_local / n_mean clamped to [0.5, 2].
inline double lr_scale_rule(double n_local, double n_mean) {
  if (!(n_mean > 0.0)) return 1.0;
  return std::clamp(n_local / n_mean, 0.5, 2.0);
}

struct TrainReport {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;  // 1-based; 0 if no epoch improved
  double best_validation_loss = std::numeric_limits<double>::infinity();
  std::vector<double> loss_curve;   // validation MSE per epoch
  std::vector<double> train_curve;  // mean training MSE per epoch
};

// Stops once the monitored loss has not decreased by at least min_delta for
// `patience` consecutive epochs.
class EarlyStopping {
 public:
  EarlyStopping(std::size_t patience, double min_delta) : patience_(patience), min_delta_(min_delta) {}

  // Returns true when the loss is a new best.
  bool observe(double loss) {
    if (loss < best_ - min_delta_) {
      best_ = loss;
      since_best_ = 0;
      return true;
    }
    ++since_best_;
    return false;
  }

  bool should_stop() const { return since_best_ >= patience_; }
  double best() const { return best_; }

 private:
  std::size_t patience_;
  double min_delta_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t since_best_ = 0;
};

class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t n, double lr, double beta1, double beta2, double eps)
      : m_(n, 0.0f), v_(n, 0.0f), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::span<float> params, std::span<const float> grad) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const auto lr_t = static_cast<float>(lr_ * std::sqrt(bc2) / bc1);
    const auto b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
    const auto eps = static_cast<float>(eps_ * std::sqrt(bc2));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const float g = grad[i];
      m_[i] = b1 * m_[i] + (1.0f - b1) * g;
      v_[i] = b2 * v_[i] + (1.0f - b2) * g * g;
      params[i] -= lr_t * m_[i] / (std::sqrt(v_[i]) + eps);
    }
  }

 private:
  std::vector<float> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
};

// Scales the gradient so its global L2 norm is at most max_norm.
inline double clip_global_norm(std::span<float> grad, double max_norm) {
  double sq = 0.0;
  for (float g : grad) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const auto k = static_cast<float>(max_norm / norm);
    for (float& g : grad) g *= k;
  }
  return norm;
}

// Stacks the selected windows time-major into a (length * n) x 36 matrix.
inline RowMatrix<float> gather_batch(const WindowSet& windows, std::span<const std::size_t> idx) {
  const auto steps = static_cast<Eigen::Index>(windows.length);
  const auto batch = static_cast<Eigen::Index>(idx.size());
  RowMatrix<float> x(steps * batch, static_cast<Eigen::Index>(kFeatureDim));
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto seq = windows.sequence(idx[static_cast<std::size_t>(b)]);
    for (Eigen::Index t = 0; t < steps; ++t)
      std::copy_n(seq.data() + t * static_cast<Eigen::Index>(kFeatureDim), kFeatureDim, x.row(t * batch + b).data());
  }
  return x;
}

// Model scores for every window.
inline std::vector<double> predict(const LstmModelParams& params, const WindowSet& windows,
                                   std::size_t chunk = 512) {
  std::vector<double> out(windows.size());
  ForwardCache<float> cache;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < windows.size(); start += chunk) {
    const std::size_t end = std::min(windows.size(), start + chunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto x = gather_batch(windows, idx);
    const auto& y = forward_batch(params, x, static_cast<Eigen::Index>(windows.length), cache);
    for (std::size_t i = start; i < end; ++i) out[i] = static_cast<double>(y(static_cast<Eigen::Index>(i - start)));
  }
  return out;
}

inline double mean_squared_error(const LstmModelParams& params, const WindowSet& windows) {
  require(!windows.empty(), "mean_squared_error: empty window set");
  const auto pred = predict(params, windows);
  double sq = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - static_cast<double>(windows.targets[i]);
    sq += e * e;
  }
  return sq / static_cast<double>(pred.size());
}

struct TrainValSplit {
  WindowSet train;
  WindowSet validation;
};

// Holds out the last `fraction` of each trace's windows (by time) for
// validation. Windows of one trace must be contiguous and time ordered.
inline TrainValSplit split_validation(const WindowSet& windows, double fraction) {
  std::vector<std::size_t> train_idx, val_idx;
  std::size_t start = 0;
  while (start < windows.size()) {
    std::size_t end = start;
    while (end < windows.size() && windows.trace_ids[end] == windows.trace_ids[start]) ++end;
    const std::size_t n = end - start;
    const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
    for (std::size_t i = start; i < end; ++i) (i < end - n_val ? train_idx : val_idx).push_back(i);
    start = end;
  }
  if (train_idx.empty() || val_idx.empty())
    throw DataError("dataset of " + std::to_string(windows.size()) +
                    " windows is smaller than the validation split minimum");
  return {windows.subset(train_idx), windows.subset(val_idx)};
}

struct TrainHooks {
  // Replaces the measured validation MSE of an epoch (1-based); fault
  // injection for tests.
  std::function<double(std::size_t epoch, double measured)> validation_override;
};

struct TrainResult {
  LstmModelParams params;
  TrainReport report;
};

inline TrainResult train_local(const LstmModelParams& initial, const TrainValSplit& data, const TrainConfig& cfg,
                               const TrainHooks& hooks = {}) {
  cfg.validate();
  if (data.train.empty() || data.validation.empty()) throw DataError("train_local: empty train or validation set");
  require(initial.layout.input == kFeatureDim, "train_local: model input width must be 36");

  LstmModelParams params = initial;
  TrainResult result{initial, {}};
  AdamOptimizer adam(params.size(), cfg.base_learning_rate * cfg.lr_scale, cfg.beta1, cfg.beta2, cfg.epsilon);
  EarlyStopping stopper(cfg.early_stop_patience, cfg.min_delta);
  std::mt19937_64 rng(cfg.rng_seed);
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);
  ForwardCache<float> cache;
  const auto steps = static_cast<Eigen::Index>(data.train.length);
  std::vector<float> targets;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      const auto x = gather_batch(data.train, idx);
      targets.resize(idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) targets[k] = data.train.targets[idx[k]];
      auto g = backward<float>(params, x, steps, targets, cache);
      loss_sum += g.mse * static_cast<double>(idx.size());
      clip_global_norm(g.gradient, cfg.clip_norm);
      adam.step(params.values, g.gradient);
    }
    if (!std::all_of(params.values.begin(), params.values.end(), [](float v) { return std::isfinite(v); }))
      throw std::runtime_error("train_local: non-finite parameter after epoch " + std::to_string(epoch));

    double val = mean_squared_error(params, data.validation);
    if (hooks.validation_override) val = hooks.validation_override(epoch, val);
    result.report.train_curve.push_back(loss_sum / static_cast<double>(order.size()));
    result.report.loss_curve.push_back(val);
    result.report.epochs_run = epoch;
    if (stopper.observe(val)) {
      result.params = params;
      result.report.best_epoch = epoch;
      result.report.best_validation_loss = val;
    }
    if (stopper.should_stop()) break;
  }
  result.report.best_validation_loss =
      *std::min_element(result.report.loss_curve.begin(), result.report.loss_curve.end());
  return result;
}

inline TrainResult train_local(const LstmModelParams& initial, const WindowSet& dataset, const TrainConfig& cfg,
                               const TrainHooks& hooks = {}) {
  if (dataset.empty()) throw DataError("train_local: empty dataset");
  return train_local(initial, split_validation(dataset, cfg.validation_fraction), cfg, hooks);
}

}  // namespace gnssfl
