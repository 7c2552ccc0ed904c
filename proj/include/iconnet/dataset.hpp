#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace iconnet {

struct LabeledItem {
  std::vector<double> waveform;
  double sample_rate = 16000.0;
  int label = 0;
};

struct LabeledDataset {
  std::vector<LabeledItem> items;
  std::vector<std::string> class_names;

  std::size_t size() const { return items.size(); }
  int num_classes() const { return static_cast<int>(class_names.size()); }
  std::vector<int> labels() const;
  /// Throws InvalidArgument when a label or waveform breaks the invariants.
  void validate() const;
  LabeledDataset subset(const std::vector<std::size_t>& indices) const;
};

// ---------------------------------------------------------------------------
// WAV I/O
// ---------------------------------------------------------------------------

struct WavData {
  std::vector<double> samples;  // mono, [-1, 1]
  int sample_rate = 0;
};

/// RIFF/WAVE PCM 16-bit, mono or stereo (averaged). Throws FormatError
/// naming the offending chunk.
WavData read_wav(const std::filesystem::path& path);
WavData parse_wav(const std::vector<std::uint8_t>& bytes);

/// Mono PCM 16-bit; samples are clipped to [-1, 1) and scaled by 32768.
std::vector<std::uint8_t> encode_wav(const std::vector<double>& samples, int sample_rate);

// ---------------------------------------------------------------------------
// Synthetic band-recipe datasets
// ---------------------------------------------------------------------------

struct ToneBand {
  double lo_hz = 0.0;
  double hi_hz = 0.0;
  double amplitude = 1.0;
};

struct ClassRecipe {
  std::string name;
  std::vector<ToneBand> bands;
};

struct SynthSpec {
  std::vector<ClassRecipe> classes;
  int n_per_class = 300;
  double duration_s = 1.0;
  int sample_rate = 16000;
  std::optional<double> noise_db = -20.0;  // nullopt: no noise
  int tones_per_item = 3;
};

/// Three classes with energy in 200-400, 800-1200 and 2400-3200 Hz.
SynthSpec default_synth_spec();

/// Each item is a sum of random-phase tones drawn from its class bands plus
/// white noise at noise_db relative to the tone RMS. Deterministic per seed.
LabeledDataset synth_dataset(const SynthSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

struct FoldSplit {
  int k = 0;
  std::vector<int> fold_assignments;

  std::vector<std::size_t> indices_in(int fold) const;
  std::vector<std::size_t> indices_not_in(int fold) const;
};

/// Within each class, items are shuffled by seed and dealt round-robin.
FoldSplit stratified_kfold(const std::vector<int>& labels, int k, std::uint64_t seed);

/// Stratified holdout: about `fraction` of each class (at least one item when
/// the class has two or more) goes to the second list.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(
    const std::vector<int>& labels, const std::vector<std::size_t>& pool, double fraction, std::uint64_t seed);

}  // namespace iconnet
