#include "iconnet/resample.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "iconnet/common.hpp"

namespace iconnet {

namespace {

constexpr int kZeroCrossings = 64;

double windowed_sinc(double tau, double cutoff, double half_width) {
  if (std::abs(tau) >= half_width) return 0.0;
  const double u = cutoff * tau;
  const double sinc = u == 0.0 ? 1.0 : std::sin(kPi<double> * u) / (kPi<double> * u);
  const double hann = 0.5 * (1.0 + std::cos(kPi<double> * tau / half_width));
  return cutoff * sinc * hann;
}

}  // namespace

std::vector<double> resample(std::span<const double> waveform, int from_rate, int to_rate) {
  require(from_rate > 0 && to_rate > 0, "sample rates must be positive");
  if (from_rate == to_rate) return {waveform.begin(), waveform.end()};

  const int common = std::gcd(from_rate, to_rate);
  const std::int64_t up = to_rate / common;
  const std::int64_t down = from_rate / common;
  const double cutoff = std::min(1.0, static_cast<double>(to_rate) / from_rate);
  const double half_width = kZeroCrossings / cutoff;  // in input samples
  const auto reach = static_cast<std::int64_t>(std::ceil(half_width));

  // Phase table: output time t = q + phase / up; tap o multiplies x[q + o].
  const std::int64_t span = 2 * reach;
  std::vector<double> table(static_cast<std::size_t>(up * span));
  for (std::int64_t phase = 0; phase < up; ++phase) {
    const double frac = static_cast<double>(phase) / static_cast<double>(up);
    for (std::int64_t i = 0; i < span; ++i) {
      const std::int64_t offset = i - reach + 1;
      table[static_cast<std::size_t>(phase * span + i)] =
          windowed_sinc(frac - static_cast<double>(offset), cutoff, half_width);
    }
  }

  const auto n_in = static_cast<std::int64_t>(waveform.size());
  const std::int64_t n_out = (n_in * up + down - 1) / down;
  std::vector<double> out(static_cast<std::size_t>(n_out), 0.0);
  for (std::int64_t j = 0; j < n_out; ++j) {
    const std::int64_t position = j * down;
    const std::int64_t q = position / up;
    const std::int64_t phase = position % up;
    const double* taps = table.data() + phase * span;
    const std::int64_t first = q - reach + 1;
    const std::int64_t lo = std::max<std::int64_t>(0, -first);
    const std::int64_t hi = std::min<std::int64_t>(span, n_in - first);
    double acc = 0.0;
    for (std::int64_t i = lo; i < hi; ++i) acc += taps[i] * waveform[static_cast<std::size_t>(first + i)];
    out[static_cast<std::size_t>(j)] = acc;
  }
  return out;
}

}  // namespace iconnet
