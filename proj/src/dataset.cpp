#include "iconnet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "iconnet/common.hpp"
#include "iconnet/random.hpp"

namespace iconnet {

std::vector<int> LabeledDataset::labels() const {
  std::vector<int> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(item.label);
  return out;
}

void LabeledDataset::validate() const {
  require(!class_names.empty(), "dataset has no classes");
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    require(item.label >= 0 && item.label < num_classes(),
            "item " + std::to_string(i) + " has label " + std::to_string(item.label) + " outside [0, " +
                std::to_string(num_classes()) + ")");
    require(!item.waveform.empty(), "item " + std::to_string(i) + " has an empty waveform");
    require(item.sample_rate > 0.0, "item " + std::to_string(i) + " has a non-positive sample rate");
  }
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
  LabeledDataset out;
  out.class_names = class_names;
  out.items.reserve(indices.size());
  for (std::size_t i : indices) out.items.push_back(items.at(i));
  return out;
}

SynthSpec default_synth_spec() {
  SynthSpec spec;
  spec.classes = {{"low", {{200.0, 400.0, 1.0}}},
                  {"mid", {{800.0, 1200.0, 1.0}}},
                  {"high", {{2400.0, 3200.0, 1.0}}}};
  return spec;
}

LabeledDataset synth_dataset(const SynthSpec& spec, std::uint64_t seed) {
  require(spec.classes.size() >= 2, "synthetic spec needs at least two classes");
  require(spec.n_per_class >= 1, "n_per_class must be >= 1");
  require(spec.duration_s > 0.0, "duration_s must be positive");
  require(spec.sample_rate > 0, "sample_rate must be positive");
  require(spec.tones_per_item >= 1, "tones_per_item must be >= 1");
  const double nyquist = 0.5 * spec.sample_rate;
  for (std::size_t c = 0; c < spec.classes.size(); ++c) {
    const auto& recipe = spec.classes[c];
    const std::string where = "class " + std::to_string(c) + " (" + recipe.name + ")";
    require(!recipe.bands.empty(), where + " has no bands");
    for (const auto& band : recipe.bands) {
      require(band.lo_hz >= 0.0 && band.lo_hz <= band.hi_hz && band.hi_hz <= nyquist,
              where + " has a band outside [0, Nyquist] or with lo > hi");
      require(band.amplitude >= 0.0, where + " has a negative amplitude");
    }
  }

  const auto length = static_cast<std::size_t>(std::lround(spec.duration_s * spec.sample_rate));
  require(length >= 1, "duration is shorter than one sample");
  Rng rng(seed);
  LabeledDataset data;
  for (const auto& recipe : spec.classes) data.class_names.push_back(recipe.name);

  for (int n = 0; n < spec.n_per_class; ++n) {
    for (std::size_t c = 0; c < spec.classes.size(); ++c) {
      const auto& bands = spec.classes[c].bands;
      LabeledItem item;
      item.label = static_cast<int>(c);
      item.sample_rate = spec.sample_rate;
      item.waveform.assign(length, 0.0);
      for (int t = 0; t < spec.tones_per_item; ++t) {
        const ToneBand& band = bands[rng.below(bands.size())];
        const double freq = rng.uniform(band.lo_hz, band.hi_hz);
        const double phase = rng.uniform(0.0, 2.0 * kPi<double>);
        const double step = 2.0 * kPi<double> * freq / spec.sample_rate;
        for (std::size_t i = 0; i < length; ++i) {
          item.waveform[i] += band.amplitude * std::sin(step * static_cast<double>(i) + phase);
        }
      }
      if (spec.noise_db) {
        double energy = 0.0;
        for (double v : item.waveform) energy += v * v;
        const double rms = std::sqrt(energy / static_cast<double>(length));
        const double noise_rms = rms * std::pow(10.0, *spec.noise_db / 20.0);
        for (double& v : item.waveform) v += noise_rms * rng.normal();
      }
      data.items.push_back(std::move(item));
    }
  }
  return data;
}

std::vector<std::size_t> FoldSplit::indices_in(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_assignments.size(); ++i) {
    if (fold_assignments[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldSplit::indices_not_in(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_assignments.size(); ++i) {
    if (fold_assignments[i] != fold) out.push_back(i);
  }
  return out;
}

namespace {

std::vector<std::vector<std::size_t>> group_by_class(const std::vector<int>& labels,
                                                     const std::vector<std::size_t>& pool) {
  int classes = 0;
  for (std::size_t i : pool) {
    require(labels[i] >= 0, "labels must be non-negative");
    classes = std::max(classes, labels[i] + 1);
  }
  std::vector<std::vector<std::size_t>> groups(static_cast<std::size_t>(classes));
  for (std::size_t i : pool) groups[static_cast<std::size_t>(labels[i])].push_back(i);
  return groups;
}

}  // namespace

FoldSplit stratified_kfold(const std::vector<int>& labels, int k, std::uint64_t seed) {
  require(k >= 2, "k must be >= 2");
  std::vector<std::size_t> all(labels.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto groups = group_by_class(labels, all);
  for (std::size_t c = 0; c < groups.size(); ++c) {
    if (groups[c].empty()) continue;
    require(static_cast<int>(groups[c].size()) >= k,
            "class " + std::to_string(c) + " has " + std::to_string(groups[c].size()) +
                " items, fewer than k = " + std::to_string(k));
  }

  FoldSplit split;
  split.k = k;
  split.fold_assignments.assign(labels.size(), 0);
  Rng rng(seed);
  for (auto& group : groups) {
    rng.shuffle(group);
    for (std::size_t j = 0; j < group.size(); ++j) {
      split.fold_assignments[group[j]] = static_cast<int>(j % static_cast<std::size_t>(k));
    }
  }
  return split;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_holdout(
    const std::vector<int>& labels, const std::vector<std::size_t>& pool, double fraction, std::uint64_t seed) {
  require(fraction > 0.0 && fraction < 1.0, "holdout fraction must lie in (0, 1)");
  auto groups = group_by_class(labels, pool);
  Rng rng(seed);
  std::vector<std::size_t> keep;
  std::vector<std::size_t> held;
  for (auto& group : groups) {
    rng.shuffle(group);
    std::size_t count = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(group.size())));
    if (group.size() >= 2) count = std::clamp<std::size_t>(count, 1, group.size() - 1);
    else count = 0;
    held.insert(held.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(count));
    keep.insert(keep.end(), group.begin() + static_cast<std::ptrdiff_t>(count), group.end());
  }
  std::sort(keep.begin(), keep.end());
  std::sort(held.begin(), held.end());
  return {keep, held};
}

}  // namespace iconnet
