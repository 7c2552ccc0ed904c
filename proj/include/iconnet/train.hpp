#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "iconnet/common.hpp"
#include "iconnet/metrics.hpp"
#include "iconnet/nn.hpp"
#include "iconnet/optim.hpp"
#include "iconnet/random.hpp"

namespace iconnet {

struct TrainConfig {
  int max_epochs = 60;
  int early_stop_patience = 10;
  int batch_size = 32;
  std::uint64_t seed = 0;
  double max_lr = 1e-3;
  double pct_start = 0.3;
  double div_factor = 25.0;
  double final_div_factor = 1e4;
  double weight_decay = 0.0;
  bool class_weighted = false;
};

/// Waveforms already at the model's sample rate.
template <typename Scalar>
struct TrainData {
  std::vector<Vector<Scalar>> waveforms;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double val_ua = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_ua = 0.0;
};

/// Inverse-frequency weights normalized to mean 1 over present classes.
inline std::vector<double> inverse_frequency_weights(std::span<const int> labels, int num_classes) {
  std::vector<double> counts(static_cast<std::size_t>(num_classes), 0.0);
  for (int l : labels) counts[static_cast<std::size_t>(l)] += 1.0;
  std::vector<double> weights(counts.size(), 0.0);
  double total = 0.0;
  int present = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0.0) continue;
    weights[c] = 1.0 / counts[c];
    total += weights[c];
    ++present;
  }
  for (double& w : weights) w *= present / total;
  return weights;
}

template <typename Scalar>
std::vector<int> predict_all(const Model<Scalar>& model, const std::vector<Vector<Scalar>>& waveforms) {
  std::vector<int> out;
  out.reserve(waveforms.size());
  for (const auto& w : waveforms) {
    out.push_back(model.predict(std::span<const Scalar>(w.data(), static_cast<std::size_t>(w.size()))));
  }
  return out;
}

/// Mini-batch RAdam with a OneCycle schedule over max_epochs. After every
/// epoch the validation UA is measured; training stops once it has not
/// improved for early_stop_patience epochs, and the model is restored to the
/// best epoch. A frozen front end is evaluated once and cached.
template <typename Scalar>
TrainResult train(Model<Scalar>& model, const TrainData<Scalar>& train_set, const TrainData<Scalar>& val_set,
                  const TrainConfig& config, const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  require(train_set.size() > 0, "training split is empty");
  require(val_set.size() > 0, "validation split is empty");
  require(train_set.waveforms.size() == train_set.size() && val_set.waveforms.size() == val_set.size(),
          "waveform and label counts differ");
  require(config.max_epochs >= 1, "max_epochs must be >= 1");
  require(config.batch_size >= 1, "batch_size must be >= 1");
  require(config.early_stop_patience >= 1, "early_stop_patience must be >= 1");

  const int num_classes = model.config().classifier.num_classes;
  for (int l : train_set.labels) require(l >= 0 && l < num_classes, "training label out of range");
  for (int l : val_set.labels) require(l >= 0 && l < num_classes, "validation label out of range");

  std::vector<Scalar> class_weights;
  if (config.class_weighted) {
    for (double w : inverse_frequency_weights(train_set.labels, num_classes)) {
      class_weights.push_back(static_cast<Scalar>(w));
    }
  }

  const auto n = static_cast<long>(train_set.size());
  const long batches = (n + config.batch_size - 1) / config.batch_size;
  ScheduleConfig schedule;
  schedule.max_lr = config.max_lr;
  schedule.total_steps = std::max(2L, batches * config.max_epochs);
  schedule.pct_start = config.pct_start;
  schedule.div_factor = config.div_factor;
  schedule.final_div_factor = config.final_div_factor;

  RadamOptions options;
  options.weight_decay = config.weight_decay;
  Radam<Scalar> optimizer(options);

  const bool cached = !model.frontend_learnable();
  std::vector<Vector<Scalar>> train_pooled;
  std::vector<Vector<Scalar>> val_pooled;
  if (cached) {
    const auto pool_all = [&](const std::vector<Vector<Scalar>>& waves, std::vector<Vector<Scalar>>& out) {
      out.reserve(waves.size());
      for (const auto& w : waves) {
        out.push_back(model.pooled_features(std::span<const Scalar>(w.data(), static_cast<std::size_t>(w.size()))));
      }
    };
    pool_all(train_set.waveforms, train_pooled);
    pool_all(val_set.waveforms, val_pooled);
  }

  const auto validate = [&]() {
    std::vector<int> predictions;
    if (cached) {
      for (const auto& p : val_pooled) {
        Eigen::Index best = 0;
        model.head().forward_pooled(p).maxCoeff(&best);
        predictions.push_back(static_cast<int>(best));
      }
    } else {
      predictions = predict_all(model, val_set.waveforms);
    }
    return compute_metrics(predictions, val_set.labels, num_classes).ua;
  };

  Rng rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  Model<Scalar> best = model;
  double best_ua = -1.0;
  int stale = 0;
  long step = 0;
  auto params = model.parameters();

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    double lr = 0.0;
    for (long b = 0; b < batches; ++b) {
      const std::size_t begin = static_cast<std::size_t>(b * config.batch_size);
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      Scalar loss;
      if (cached) {
        std::vector<const Vector<Scalar>*> pooled;
        std::vector<int> labels;
        for (std::size_t i = begin; i < end; ++i) {
          pooled.push_back(&train_pooled[order[i]]);
          labels.push_back(train_set.labels[order[i]]);
        }
        loss = model.compute_head_gradients(pooled, labels, class_weights);
      } else {
        std::vector<Example<Scalar>> batch;
        for (std::size_t i = begin; i < end; ++i) {
          const auto& w = train_set.waveforms[order[i]];
          batch.push_back({std::span<const Scalar>(w.data(), static_cast<std::size_t>(w.size())),
                           train_set.labels[order[i]]});
        }
        loss = model.compute_gradients(batch, class_weights);
      }
      lr = onecycle_lr(schedule, step++);
      optimizer.step(params, lr);
      if (!cached) model.refresh();
      loss_sum += static_cast<double>(loss) * static_cast<double>(end - begin);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.loss = loss_sum / static_cast<double>(n);
    record.val_ua = validate();
    record.lr = lr;
    if (!std::isfinite(record.loss)) throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);

    if (record.val_ua > best_ua) {
      best_ua = record.val_ua;
      best = model;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= config.early_stop_patience) {
      break;
    }
  }
  model = std::move(best);
  result.best_val_ua = best_ua;
  return result;
}

}  // namespace iconnet
