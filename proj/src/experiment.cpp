#include "iconnet/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

namespace iconnet {

namespace {

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        fields.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back();
    } else if (ch != '\r') {
      fields.back() += ch;
    }
  }
  if (quoted) throw FormatError("manifest line " + std::to_string(line_no) + ": unterminated quote");
  return fields;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = i;
  return out;
}


template <typename Scalar>
FoldResult run_fold(const ExperimentConfig& config, const ModelConfig& model_config, const LabeledDataset& data,
                    const FoldSplit& split, int fold) {
  const std::vector<int> labels = data.labels();
  const std::vector<std::size_t> pool = split.indices_not_in(fold);
  const std::vector<std::size_t> test = split.indices_in(fold);
  auto [train_idx, val_idx] =
      stratified_holdout(labels, pool, config.cv.validation_fraction, config.seed + 1000003ULL * (fold + 1));
  // Too few items for a separate slice: early stopping watches the training split.
  if (val_idx.empty()) val_idx = train_idx;

  FoldResult result;
  result.fold = fold;
  result.train_items = train_idx.size();
  result.validation_items = val_idx.size();
  result.test_items = test.size();

  const TrainData<Scalar> train_set = prepare_data<Scalar>(data, train_idx, model_config.sample_rate);
  const TrainData<Scalar> val_set = prepare_data<Scalar>(data, val_idx, model_config.sample_rate);
  const TrainData<Scalar> test_set = prepare_data<Scalar>(data, test, model_config.sample_rate);

  Model<Scalar> model = Model<Scalar>::create(model_config, config.seed + static_cast<std::uint64_t>(fold));
  TrainConfig training = config.training;
  training.seed = config.seed + static_cast<std::uint64_t>(fold);
  result.training = train(model, train_set, val_set, training);
  result.metrics = compute_metrics(predict_all(model, test_set.waveforms), test_set.labels, data.num_classes());
  return result;
}

template <typename Scalar>
TrainOutcome train_model_as(const ExperimentConfig& config, const LabeledDataset& data) {
  const ModelConfig model_config = config.model(data.num_classes());
  const std::vector<int> labels = data.labels();
  auto [train_idx, val_idx] =
      stratified_holdout(labels, all_indices(data.size()), config.cv.validation_fraction, config.seed);
  if (val_idx.empty()) val_idx = train_idx;
  const TrainData<Scalar> train_set = prepare_data<Scalar>(data, train_idx, model_config.sample_rate);
  const TrainData<Scalar> val_set = prepare_data<Scalar>(data, val_idx, model_config.sample_rate);
  Model<Scalar> model = Model<Scalar>::create(model_config, config.seed);
  TrainOutcome outcome;
  outcome.training = train(model, train_set, val_set, config.training);
  outcome.parameter_count = static_cast<long>(model.parameter_count());
  outcome.train_items = train_idx.size();
  outcome.validation_items = val_idx.size();
  outcome.checkpoint = make_checkpoint(model, data.class_names, config.precision);
  return outcome;
}

template <typename Scalar>
MetricsReport evaluate_as(const Checkpoint& ck, const LabeledDataset& data) {
  std::map<std::string, int> index;
  for (std::size_t c = 0; c < ck.class_names.size(); ++c) index[ck.class_names[c]] = static_cast<int>(c);
  LabeledDataset mapped = data;
  for (auto& item : mapped.items) {
    const std::string& name = data.class_names.at(static_cast<std::size_t>(item.label));
    const auto it = index.find(name);
    require(it != index.end(), "class '" + name + "' is unknown to the checkpoint");
    item.label = it->second;
  }
  mapped.class_names = ck.class_names;
  const Model<Scalar> model = model_from_checkpoint<Scalar>(ck);
  const TrainData<Scalar> set = prepare_data<Scalar>(mapped, all_indices(mapped.size()), ck.model.sample_rate);
  return compute_metrics(predict_all(model, set.waveforms), set.labels, static_cast<int>(ck.class_names.size()));
}

}  // namespace

LabeledDataset load_manifest(const std::filesystem::path& manifest, const std::vector<std::string>& class_names) {
  std::ifstream in(manifest);
  if (!in) throw FormatError("cannot open manifest " + manifest.string());
  LabeledDataset data;
  data.class_names = class_names;
  std::map<std::string, int> index;
  for (std::size_t c = 0; c < class_names.size(); ++c) index[class_names[c]] = static_cast<int>(c);

  std::string line;
  std::size_t line_no = 0;
  const std::filesystem::path base = manifest.parent_path();
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line, line_no);
    if (line_no == 1 && fields.size() == 2 && fields[0] == "path" && fields[1] == "label") continue;
    if (fields.size() != 2) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": expected 2 fields (path,label)");
    }
    auto it = index.find(fields[1]);
    if (it == index.end()) {
      if (!class_names.empty()) {
        throw FormatError("manifest line " + std::to_string(line_no) + ": unknown class '" + fields[1] + "'");
      }
      it = index.emplace(fields[1], static_cast<int>(data.class_names.size())).first;
      data.class_names.push_back(fields[1]);
    }
    std::filesystem::path path = fields[0];
    if (path.is_relative()) path = base / path;
    WavData wav = read_wav(path);
    LabeledItem item;
    item.waveform = std::move(wav.samples);
    item.sample_rate = wav.sample_rate;
    item.label = it->second;
    data.items.push_back(std::move(item));
  }
  if (data.items.empty()) throw FormatError("manifest " + manifest.string() + " lists no items");
  return data;
}

LabeledDataset load_dataset(const DatasetSource& source) {
  if (source.synth) return synth_dataset(*source.synth, source.synth_seed);
  require(source.manifest.has_value(), "dataset source names neither a manifest nor a synthetic spec");
  return load_manifest(*source.manifest);
}

Json to_json(const MetricsReport& m) {
  Json confusion = Json::array();
  for (Eigen::Index r = 0; r < m.confusion.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.confusion.cols(); ++c) row.push_back(m.confusion(r, c));
    confusion.push_back(row);
  }
  return Json{{"ua", m.ua}, {"uf1", m.uf1}, {"f1_weighted", m.f1_weighted}, {"confusion", confusion}};
}

Json to_json(const TrainResult& result) {
  Json history = Json::array();
  for (const auto& e : result.history) {
    history.push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"val_ua", e.val_ua}, {"lr", e.lr}});
  }
  return Json{{"history", history}, {"best_epoch", result.best_epoch}, {"best_val_ua", result.best_val_ua}};
}

Json to_json(const ExperimentReport& report, const ExperimentConfig& config) {
  Json folds = Json::array();
  for (const auto& f : report.folds) {
    folds.push_back({{"fold", f.fold},
                     {"train_items", f.train_items},
                     {"validation_items", f.validation_items},
                     {"test_items", f.test_items},
                     {"metrics", to_json(f.metrics)},
                     {"training", to_json(f.training)}});
  }
  const auto agg = [](const MeanStd& s) { return Json{{"mean", s.mean}, {"std", s.std}}; };
  return Json{{"config", to_json(config)},
              {"parameter_count", report.parameter_count},
              {"folds", folds},
              {"summary", {{"ua", agg(report.ua)}, {"uf1", agg(report.uf1)}, {"f1_weighted", agg(report.f1_weighted)}}}};
}

ExperimentReport run_experiment(const ExperimentConfig& config, const LabeledDataset& data, int threads) {
  data.validate();
  require(data.num_classes() >= 2, "dataset needs at least two classes");
  const ModelConfig model_config = config.model(data.num_classes());
  const FoldSplit split = stratified_kfold(data.labels(), config.cv.folds, config.seed);

  ExperimentReport report;
  report.folds.resize(static_cast<std::size_t>(config.cv.folds));
  {
    // Parameter count only; cheap relative to training.
    const Model<double> probe = Model<double>::create(model_config, config.seed);
    report.parameter_count = static_cast<long>(probe.parameter_count());
  }

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto worker = [&]() {
    for (int fold = next++; fold < config.cv.folds; fold = next++) {
      try {
        report.folds[static_cast<std::size_t>(fold)] =
            config.precision == Precision::kFloat32
                ? run_fold<float>(config, model_config, data, split, fold)
                : run_fold<double>(config, model_config, data, split, fold);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = config.cv.folds;
      }
    }
  };
  const int workers = std::clamp(threads, 1, config.cv.folds);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<double> ua, uf1, f1;
  for (const auto& f : report.folds) {
    ua.push_back(f.metrics.ua);
    uf1.push_back(f.metrics.uf1);
    f1.push_back(f.metrics.f1_weighted);
  }
  report.ua = mean_std(ua);
  report.uf1 = mean_std(uf1);
  report.f1_weighted = mean_std(f1);
  return report;
}

TrainOutcome train_model(const ExperimentConfig& config, const LabeledDataset& data) {
  data.validate();
  require(data.num_classes() >= 2, "dataset needs at least two classes");
  return config.precision == Precision::kFloat32 ? train_model_as<float>(config, data)
                                                 : train_model_as<double>(config, data);
}

MetricsReport evaluate_checkpoint(const Checkpoint& checkpoint, const LabeledDataset& data) {
  return checkpoint.precision == Precision::kFloat32 ? evaluate_as<float>(checkpoint, data)
                                                     : evaluate_as<double>(checkpoint, data);
}

}  // namespace iconnet
