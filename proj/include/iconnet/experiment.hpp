#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "iconnet/checkpoint.hpp"
#include "iconnet/config.hpp"
#include "iconnet/dataset.hpp"
#include "iconnet/metrics.hpp"
#include "iconnet/resample.hpp"
#include "iconnet/train.hpp"

namespace iconnet {

/// CSV with header "path,label"; paths resolve against the manifest folder.
/// Class order is first appearance unless class_names is given.
LabeledDataset load_manifest(const std::filesystem::path& manifest,
                             const std::vector<std::string>& class_names = {});

LabeledDataset load_dataset(const DatasetSource& source);

/// Items of data at the given indices, resampled to sample_rate when needed.
template <typename Scalar>
TrainData<Scalar> prepare_data(const LabeledDataset& data, const std::vector<std::size_t>& indices,
                               double sample_rate) {
  TrainData<Scalar> out;
  for (std::size_t i : indices) {
    const LabeledItem& item = data.items.at(i);
    std::vector<double> wave = item.waveform;
    if (item.sample_rate != sample_rate) {
      wave = resample(wave, static_cast<int>(std::lround(item.sample_rate)), static_cast<int>(std::lround(sample_rate)));
    }
    Vector<Scalar> v(static_cast<Eigen::Index>(wave.size()));
    for (std::size_t k = 0; k < wave.size(); ++k) v(static_cast<Eigen::Index>(k)) = static_cast<Scalar>(wave[k]);
    out.waveforms.push_back(std::move(v));
    out.labels.push_back(item.label);
  }
  return out;
}

struct FoldResult {
  int fold = 0;
  std::size_t train_items = 0;
  std::size_t validation_items = 0;
  std::size_t test_items = 0;
  TrainResult training;
  MetricsReport metrics;
};

struct ExperimentReport {
  std::vector<FoldResult> folds;
  MeanStd ua;
  MeanStd uf1;
  MeanStd f1_weighted;
  long parameter_count = 0;
};

Json to_json(const MetricsReport& metrics);
Json to_json(const TrainResult& result);
Json to_json(const ExperimentReport& report, const ExperimentConfig& config);

/// Stratified k-fold CV. Each fold trains on the other folds minus a
/// stratified validation slice used for early stopping. threads caps how many
/// folds run at once; results do not depend on it.
ExperimentReport run_experiment(const ExperimentConfig& config, const LabeledDataset& data, int threads = 1);

/// Single training run on the whole dataset with a stratified validation slice.
struct TrainOutcome {
  Checkpoint checkpoint;
  TrainResult training;
  long parameter_count = 0;
  std::size_t train_items = 0;
  std::size_t validation_items = 0;
};

TrainOutcome train_model(const ExperimentConfig& config, const LabeledDataset& data);

struct KernelSummary {
  int block = 0;
  int kernel = 0;
  double sample_rate = 0.0;  // block input rate
  double f0_hz = 0.0;
  double f_delta_hz = 0.0;
  double center_hz = 0.0;
  double peak_db = 0.0;
  double peak_freq_hz = 0.0;
};

/// Band edges and response peak of every kernel, evaluated on num_points
/// frequencies in [0, Nyquist].
template <typename Scalar>
std::vector<KernelSummary> summarize_kernels(const Model<Scalar>& model, int num_points = 512) {
  std::vector<KernelSummary> out;
  const std::vector<double> rates = model.block_rates();
  for (std::size_t b = 0; b < model.blocks().size(); ++b) {
    const auto& block = model.blocks()[b];
    for (Eigen::Index c = 0; c < block.num_kernels(); ++c) {
      KernelSummary s;
      s.block = static_cast<int>(b);
      s.kernel = static_cast<int>(c);
      s.sample_rate = rates[b];
      s.f0_hz = static_cast<double>(block.bands()(c, 0)) * rates[b];
      s.f_delta_hz = static_cast<double>(block.bands()(c, 1)) * rates[b];
      s.center_hz = s.f0_hz + 0.5 * s.f_delta_hz;
      const FrequencyResponse r = frequency_response(block.kernels()[static_cast<std::size_t>(c)].taps, num_points);
      const auto peak = std::max_element(r.magnitude_db.begin(), r.magnitude_db.end()) - r.magnitude_db.begin();
      s.peak_db = r.magnitude_db[static_cast<std::size_t>(peak)];
      s.peak_freq_hz = r.freqs[static_cast<std::size_t>(peak)] * rates[b];
      out.push_back(s);
    }
  }
  return out;
}

/// Predicts every item with a checkpointed model.
MetricsReport evaluate_checkpoint(const Checkpoint& checkpoint, const LabeledDataset& data);

}  // namespace iconnet
