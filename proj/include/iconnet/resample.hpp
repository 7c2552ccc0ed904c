#pragma once

#include <span>
#include <vector>

namespace iconnet {

/// Polyphase windowed-sinc resampler (Hann window, 64 zero crossings per
/// side). Output length is ceil(N * to_rate / from_rate). Equal rates return
/// the input unchanged.
std::vector<double> resample(std::span<const double> waveform, int from_rate, int to_rate);

}  // namespace iconnet
