#include "iconnet/windows.hpp"

#include <algorithm>

namespace iconnet {

WindowPreset parse_window_preset(std::string_view name) {
  if (name == "rectangular") return WindowPreset::kRectangular;
  if (name == "hann") return WindowPreset::kHann;
  if (name == "hamming") return WindowPreset::kHamming;
  if (name == "blackman") return WindowPreset::kBlackman;
  throw InvalidArgument("unknown window preset '" + std::string(name) + "'");
}

std::string_view to_string(WindowPreset preset) {
  switch (preset) {
    case WindowPreset::kRectangular: return "rectangular";
    case WindowPreset::kHann: return "hann";
    case WindowPreset::kHamming: return "hamming";
    case WindowPreset::kBlackman: return "blackman";
  }
  return "unknown";
}

namespace {

void append_grid(std::vector<BandInit>& out, int count, double lo_hz, double hi_hz,
                 double sample_rate, int grid) {
  if (count == 0) return;
  const double mel_lo = hz_to_mel(lo_hz);
  const double mel_hi = hz_to_mel(hi_hz);
  const int points = count + 2;
  std::vector<double> edges(points);
  for (int j = 0; j < points; ++j) {
    const double mel = mel_lo + (mel_hi - mel_lo) * static_cast<double>(j) / (points - 1);
    edges[j] = mel_to_hz(mel);
  }
  edges.front() = lo_hz;
  edges.back() = hi_hz;
  const double nyquist = 0.5 * sample_rate;
  for (int i = 0; i < count; ++i) {
    const double lower = std::clamp(edges[i], 0.0, nyquist);
    const double upper = std::clamp(edges[i + 2], lower, nyquist);
    BandInit band;
    band.f0 = lower / sample_rate;
    band.f_delta = (upper - lower) / sample_rate;
    band.grid = grid;
    out.push_back(band);
  }
}

}  // namespace

std::vector<BandInit> mel_band_init(int num_kernels, double sample_rate, double f_min, double f_max,
                                    double low_extra_fraction) {
  require(num_kernels >= 1, "num_kernels must be >= 1");
  require(sample_rate > 0.0, "sample_rate must be positive");
  require(f_min >= 0.0 && f_min < f_max && f_max <= 0.5 * sample_rate,
          "mel range must satisfy 0 <= f_min < f_max <= sample_rate / 2");
  require(low_extra_fraction >= 0.0 && low_extra_fraction < 1.0,
          "low_extra_fraction must lie in [0, 1)");

  const int low_count = static_cast<int>(std::floor(num_kernels * low_extra_fraction));
  const int main_count = num_kernels - low_count;
  require(low_count == 0 || f_min < 0.25 * f_max,
          "low-frequency grid [f_min, f_max / 4] is empty");

  std::vector<BandInit> bands;
  bands.reserve(num_kernels);
  append_grid(bands, main_count, f_min, f_max, sample_rate, 0);
  append_grid(bands, low_count, f_min, 0.25 * f_max, sample_rate, 1);
  return bands;
}

}  // namespace iconnet
