#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "iconnet/allocator.hpp"
#include "iconnet/checkpoint.hpp"
#include "iconnet/config.hpp"
#include "iconnet/dataset.hpp"
#include "iconnet/experiment.hpp"

namespace fs = std::filesystem;
using namespace iconnet;

namespace {

enum ExitCode { kOk = 0, kUsage = 2, kData = 3, kNumeric = 4 };

/// Writes to a sibling temp file, then renames over the target.
void write_atomic(const fs::path& path, const std::string& contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_atomic(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  write_atomic(path, std::string(bytes.begin(), bytes.end()));
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("--out", "cannot create directory " + dir.string());
}

void ensure_parent(const fs::path& file, const std::string& flag) {
  const fs::path parent = file.parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw ConfigError(flag, "directory " + parent.string() + " does not exist");
  }
}

int thread_cap() {
  const char* env = std::getenv("ICONNET_THREADS");
  if (!env || !*env) return 1;
  try {
    return std::max(1, std::stoi(env));
  } catch (const std::exception&) {
    throw ConfigError("ICONNET_THREADS", "expected a positive integer");
  }
}

ExperimentConfig load_experiment(const fs::path& path) {
  ExperimentConfig config = experiment_config_from_json(read_json_file(path), path.parent_path());
  if (config.dataset.manifest && !fs::is_regular_file(*config.dataset.manifest)) {
    throw ConfigError("$.dataset.manifest", "file not found: " + config.dataset.manifest->string());
  }
  return config;
}

std::string dump(const Json& json) { return json.dump(2) + "\n"; }

int cmd_synth(const std::string& spec_path, const fs::path& out_dir, std::uint64_t seed) {
  const SynthSpec spec = spec_path.empty() ? default_synth_spec() : synth_spec_from_json(read_json_file(spec_path));
  ensure_dir(out_dir);
  const LabeledDataset data = synth_dataset(spec, seed);
  std::vector<int> counters(static_cast<std::size_t>(data.num_classes()), 0);
  std::ostringstream manifest;
  manifest << "path,label\n";
  for (const auto& item : data.items) {
    const std::string& name = data.class_names[static_cast<std::size_t>(item.label)];
    std::ostringstream file;
    file << name << '_' << std::setw(5) << std::setfill('0') << counters[static_cast<std::size_t>(item.label)]++
         << ".wav";
    write_atomic(out_dir / file.str(), encode_wav(item.waveform, static_cast<int>(item.sample_rate)));
    manifest << file.str() << ',' << name << '\n';
  }
  write_atomic(out_dir / "manifest.csv", manifest.str());
  std::cout << "wrote " << data.size() << " items to " << (out_dir / "manifest.csv").string() << "\n";
  return kOk;
}

int cmd_train(const fs::path& config_path, const fs::path& out, const fs::path& report_path) {
  const ExperimentConfig config = load_experiment(config_path);
  ensure_parent(out, "--out");
  if (!report_path.empty()) ensure_parent(report_path, "--report");
  const LabeledDataset data = load_dataset(config.dataset);
  const TrainOutcome outcome = train_model(config, data);
  write_atomic(out, encode_checkpoint(outcome.checkpoint));
  Json report{{"config", to_json(config)},
              {"parameter_count", outcome.parameter_count},
              {"train_items", outcome.train_items},
              {"validation_items", outcome.validation_items},
              {"class_names", data.class_names},
              {"training", to_json(outcome.training)}};
  if (!report_path.empty()) write_atomic(report_path, dump(report));
  std::cout << "best epoch " << outcome.training.best_epoch << ", validation UA " << outcome.training.best_val_ua
            << "%\n";
  return kOk;
}

int cmd_eval(const fs::path& checkpoint_path, const fs::path& manifest, const fs::path& report_path) {
  if (!report_path.empty()) ensure_parent(report_path, "--report");
  const Checkpoint ck = read_checkpoint(checkpoint_path);
  const MetricsReport metrics = evaluate_checkpoint(ck, load_manifest(manifest));
  const Json report = to_json(metrics);
  if (!report_path.empty()) write_atomic(report_path, dump(report));
  std::cout << dump(report);
  return kOk;
}

int cmd_kfold(const fs::path& config_path, const fs::path& report_path) {
  const ExperimentConfig config = load_experiment(config_path);
  ensure_parent(report_path, "--report");
  const LabeledDataset data = load_dataset(config.dataset);
  const ExperimentReport report = run_experiment(config, data, thread_cap());
  write_atomic(report_path, dump(to_json(report, config)));
  std::cout << std::fixed << std::setprecision(2) << "UA " << report.ua.mean << " +- " << report.ua.std << ", UF1 "
            << report.uf1.mean << " +- " << report.uf1.std << ", F1 " << report.f1_weighted.mean << " +- "
            << report.f1_weighted.std << "\n";
  return kOk;
}

int cmd_inspect(const fs::path& checkpoint_path) {
  const Checkpoint ck = read_checkpoint(checkpoint_path);
  const Model<double> model = model_from_checkpoint<double>(ck);
  std::cout << "classes:";
  for (const auto& name : ck.class_names) std::cout << ' ' << name;
  std::cout << "\nprecision: " << to_string(ck.precision) << "\nparameters: " << model.parameter_count() << "\n";
  std::cout << "block,kernel,grid,f0_hz,f_delta_hz,peak_db,phi\n";
  std::cout << std::setprecision(6);
  const auto summaries = summarize_kernels(model);
  for (const auto& s : summaries) {
    const auto& block = model.blocks()[static_cast<std::size_t>(s.block)];
    std::cout << s.block << ',' << s.kernel << ',' << block.grid()[static_cast<std::size_t>(s.kernel)] << ','
              << s.f0_hz << ',' << s.f_delta_hz << ',' << s.peak_db << ',';
    for (Eigen::Index i = 0; i < block.phi().cols(); ++i) {
      std::cout << (i ? " " : "") << block.phi()(s.kernel, i);
    }
    std::cout << "\n";
  }
  return kOk;
}

int cmd_export(const fs::path& checkpoint_path, const fs::path& out_dir, int points) {
  if (points < 2) throw ConfigError("--points", "must be >= 2");
  const Checkpoint ck = read_checkpoint(checkpoint_path);
  const Model<double> model = model_from_checkpoint<double>(ck);
  ensure_dir(out_dir);
  const std::vector<double> rates = model.block_rates();
  std::ostringstream summary;
  summary << "kernel,block,f0_hz,f_delta_hz,center_hz,peak_db,peak_freq_hz\n" << std::setprecision(9);
  for (const auto& s : summarize_kernels(model, points)) {
    const auto& block = model.blocks()[static_cast<std::size_t>(s.block)];
    std::ostringstream csv;
    write_response_csv(csv, frequency_response(block.kernels()[static_cast<std::size_t>(s.kernel)].taps, points),
                       rates[static_cast<std::size_t>(s.block)]);
    std::ostringstream name;
    name << "block" << s.block << "_kernel" << std::setw(4) << std::setfill('0') << s.kernel << ".csv";
    write_atomic(out_dir / name.str(), csv.str());
    summary << s.kernel << ',' << s.block << ',' << s.f0_hz << ',' << s.f_delta_hz << ',' << s.center_hz << ','
            << s.peak_db << ',' << s.peak_freq_hz << '\n';
  }
  write_atomic(out_dir / "summary.csv", summary.str());
  std::cout << "wrote responses to " << out_dir.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"Interpretable FIR front-end: training, evaluation and filter export"};
  app.require_subcommand(1);

  std::string spec_path;
  std::string out_path;
  std::string config_path;
  std::string report_path;
  std::string checkpoint_path;
  std::string manifest_path;
  std::uint64_t seed = 0;
  int points = 512;

  auto* synth = app.add_subcommand("synth", "Write a synthetic WAV dataset and manifest");
  synth->add_option("--spec", spec_path, "Synthetic spec JSON (default: built-in 3-class spec)")
      ->check(CLI::ExistingFile);
  synth->add_option("--out", out_path, "Output directory")->required();
  synth->add_option("--seed", seed, "Random seed");

  auto* train_cmd = app.add_subcommand("train", "Train one model and write a checkpoint");
  train_cmd->add_option("--config", config_path, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", out_path, "Checkpoint path")->required();
  train_cmd->add_option("--report", report_path, "Training report JSON");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest");
  eval->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--manifest", manifest_path, "Manifest CSV (path,label)")->required()->check(CLI::ExistingFile);
  eval->add_option("--report", report_path, "Metrics report JSON");

  auto* inspect = app.add_subcommand("inspect", "Print learned band edges, peaks and window coefficients");
  inspect->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required()->check(CLI::ExistingFile);

  auto* export_cmd = app.add_subcommand("export-response", "Write per-kernel frequency responses and a summary");
  export_cmd->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--out", out_path, "Output directory")->required();
  export_cmd->add_option("--points", points, "Frequency grid size over [0, Nyquist]");

  auto* kfold = app.add_subcommand("kfold", "Stratified k-fold cross-validation");
  kfold->add_option("--config", config_path, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  kfold->add_option("--report", report_path, "Report JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) return cmd_synth(spec_path, out_path, seed);
    if (*train_cmd) return cmd_train(config_path, out_path, report_path);
    if (*eval) return cmd_eval(checkpoint_path, manifest_path, report_path);
    if (*inspect) return cmd_inspect(checkpoint_path);
    if (*export_cmd) return cmd_export(checkpoint_path, out_path, points);
    if (*kfold) return cmd_kfold(config_path, report_path);
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
