#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iconnet/common.hpp"
#include "iconnet/windows.hpp"

namespace iconnet {

/// Normalized band (cycles/sample): passband [f0, f0 + f_delta].
template <typename Scalar>
struct BandParams {
  Scalar f0 = Scalar(0);
  Scalar f_delta = Scalar(0.5);
  bool learnable = false;
};

template <typename Scalar>
struct FirKernel {
  Vector<Scalar> taps;       // h = prototype .* window
  Vector<Scalar> prototype;  // sinc band-pass T
  Vector<Scalar> window;     // generalized cosine window w
  BandParams<Scalar> band;
  WindowCoefficients<Scalar> coeffs;

  Eigen::Index size() const { return taps.size(); }
};

template <typename Scalar>
struct KernelGradients {
  Matrix<Scalar> dphi;    // K x (p + 1)
  Vector<Scalar> df0;     // K
  Vector<Scalar> dfdelta; // K
};

namespace detail {

// sin(pi x) and cos(pi x) with the argument reduced exactly, so integer and
// half-integer arguments give exact zeros.
template <typename Scalar>
Scalar sin_pi(Scalar x) {
  Scalar r = std::fmod(x, Scalar(2));  // (-2, 2), exact
  if (r > Scalar(1)) r -= Scalar(2);
  if (r < Scalar(-1)) r += Scalar(2);
  if (r == Scalar(1) || r == Scalar(-1) || r == Scalar(0)) return Scalar(0);
  if (r > Scalar(0.5)) r = Scalar(1) - r;
  if (r < Scalar(-0.5)) r = Scalar(-1) - r;
  return std::sin(kPi<Scalar> * r);
}

template <typename Scalar>
Scalar cos_pi(Scalar x) {
  return sin_pi(x + Scalar(0.5));
}

inline void check_odd_taps(Eigen::Index taps) {
  require(taps >= 3 && taps % 2 == 1,
          "kernel tap count must be odd and >= 3, got " + std::to_string(taps));
}

template <typename Scalar>
void check_band(const BandParams<Scalar>& band) {
  require(std::isfinite(band.f0) && std::isfinite(band.f_delta), "band parameters must be finite");
  require(band.f0 >= Scalar(0) && band.f_delta > Scalar(0) && band.f0 + band.f_delta <= Scalar(0.5),
          "band must satisfy 0 <= f0, f_delta > 0, f0 + f_delta <= 0.5");
}

}  // namespace detail

/// Band-pass prototype T_n = 2 f1 sinc(2 pi n f1) - 2 f0 sinc(2 pi n f0) on the
/// centered index n = k - (K - 1) / 2, with f1 = f0 + f_delta.
template <typename Scalar>
Vector<Scalar> sinc_bandpass(const BandParams<Scalar>& band, Eigen::Index taps) {
  detail::check_odd_taps(taps);
  detail::check_band(band);
  const Eigen::Index center = (taps - 1) / 2;
  const Scalar f1 = band.f0 + band.f_delta;
  Vector<Scalar> proto(taps);
  proto(center) = Scalar(2) * band.f_delta;
  for (Eigen::Index n = 1; n <= center; ++n) {
    const Scalar sn = static_cast<Scalar>(n);
    const Scalar value =
        (detail::sin_pi(Scalar(2) * sn * f1) - detail::sin_pi(Scalar(2) * sn * band.f0)) /
        (kPi<Scalar> * sn);
    proto(center + n) = value;
    proto(center - n) = value;
  }
  return proto;
}

template <typename Scalar>
FirKernel<Scalar> assemble_kernel(const BandParams<Scalar>& band,
                                  const WindowCoefficients<Scalar>& coeffs, Eigen::Index taps) {
  FirKernel<Scalar> kernel;
  kernel.prototype = sinc_bandpass(band, taps);
  kernel.window = evaluate_window(coeffs, taps);
  kernel.taps = kernel.prototype.cwiseProduct(kernel.window);
  kernel.band = band;
  kernel.coeffs = coeffs;
  return kernel;
}

/// Partial derivatives of every tap with respect to phi, f0 and f_delta.
template <typename Scalar>
KernelGradients<Scalar> kernel_param_gradients(const FirKernel<Scalar>& kernel) {
  const Eigen::Index taps = kernel.size();
  detail::check_odd_taps(taps);
  const Eigen::Index center = (taps - 1) / 2;
  const Scalar f0 = kernel.band.f0;
  const Scalar f1 = kernel.band.f0 + kernel.band.f_delta;

  KernelGradients<Scalar> grads;
  grads.dphi = window_jacobian(kernel.coeffs, taps);
  for (Eigen::Index i = 0; i < grads.dphi.cols(); ++i) {
    grads.dphi.col(i) = grads.dphi.col(i).cwiseProduct(kernel.prototype);
  }

  Vector<Scalar> dproto_df0(taps);
  Vector<Scalar> dproto_df1(taps);
  dproto_df0(center) = Scalar(0);
  dproto_df1(center) = Scalar(2);
  for (Eigen::Index n = 1; n <= center; ++n) {
    const Scalar sn = static_cast<Scalar>(n);
    const Scalar c1 = Scalar(2) * detail::cos_pi(Scalar(2) * sn * f1);
    const Scalar c0 = Scalar(2) * detail::cos_pi(Scalar(2) * sn * f0);
    dproto_df0(center + n) = dproto_df0(center - n) = c1 - c0;
    dproto_df1(center + n) = dproto_df1(center - n) = c1;
  }
  grads.df0 = dproto_df0.cwiseProduct(kernel.window);
  grads.dfdelta = dproto_df1.cwiseProduct(kernel.window);
  return grads;
}

/// Unconstrained storage for a learnable band:
///   f0      = (0.5 - eps) * sigmoid(a)
///   f_delta = eps + (0.5 - f0 - eps) * sigmoid(b),   eps = 1 / K
/// so every (a, b) maps to a valid band.
template <typename Scalar>
struct BandReparam {
  Scalar eps;

  explicit BandReparam(Eigen::Index taps) : eps(Scalar(1) / static_cast<Scalar>(taps)) {}

  static Scalar sigmoid(Scalar x) { return Scalar(1) / (Scalar(1) + std::exp(-x)); }

  BandParams<Scalar> to_band(Scalar a, Scalar b) const {
    BandParams<Scalar> band;
    band.f0 = (Scalar(0.5) - eps) * sigmoid(a);
    band.f_delta = eps + (Scalar(0.5) - band.f0 - eps) * sigmoid(b);
    band.f_delta = std::min(band.f_delta, Scalar(0.5) - band.f0);
    return band;
  }

  /// Inverse map; bands outside the reachable set are clamped onto it.
  std::pair<Scalar, Scalar> from_band(Scalar f0, Scalar f_delta) const {
    const Scalar lo = Scalar(1e-6);
    const auto logit = [lo](Scalar p) {
      p = std::clamp(p, lo, Scalar(1) - lo);
      return std::log(p / (Scalar(1) - p));
    };
    const Scalar a = logit(f0 / (Scalar(0.5) - eps));
    const Scalar f0_mapped = (Scalar(0.5) - eps) * sigmoid(a);
    const Scalar span = Scalar(0.5) - f0_mapped - eps;
    const Scalar b = logit((f_delta - eps) / span);
    return {a, b};
  }

  /// Chain rule: (dL/df0, dL/dfdelta) -> (dL/da, dL/db).
  std::pair<Scalar, Scalar> backward(Scalar a, Scalar b, Scalar grad_f0, Scalar grad_fdelta) const {
    const Scalar sa = sigmoid(a);
    const Scalar sb = sigmoid(b);
    const Scalar df0_da = (Scalar(0.5) - eps) * sa * (Scalar(1) - sa);
    const Scalar f0 = (Scalar(0.5) - eps) * sa;
    const Scalar dfd_db = (Scalar(0.5) - f0 - eps) * sb * (Scalar(1) - sb);
    const Scalar dfd_da = -sb * df0_da;
    return {grad_f0 * df0_da + grad_fdelta * dfd_da, grad_fdelta * dfd_db};
  }
};

// ---------------------------------------------------------------------------
// Strided "same" cross-correlation.
//
// y(c, m) = sum_{k=0}^{K-1} h(c, k) * x(s m + k - (K - 1) / 2), zero padded,
// m = 0 .. ceil(N / s) - 1. Each output is one accumulation chain in ascending
// k, computed by the same code path for every (c, m), so results do not depend
// on stride, channel count or blocking.
// ---------------------------------------------------------------------------

namespace detail {

// One 512-bit lane of Scalar. GCC/Clang vector extensions lower this to the
// widest registers available. UnalignedLane is the same type usable through
// any Scalar pointer.
template <typename Scalar>
struct Lane;
template <>
struct Lane<double> {
  typedef double type __attribute__((vector_size(64)));
  typedef double unaligned __attribute__((vector_size(64), aligned(8), may_alias));
};
template <>
struct Lane<float> {
  typedef float type __attribute__((vector_size(64)));
  typedef float unaligned __attribute__((vector_size(64), aligned(4), may_alias));
};
template <typename Scalar>
using LaneT = typename Lane<Scalar>::type;
template <typename Scalar>
inline constexpr int kLaneWidth = 64 / static_cast<int>(sizeof(Scalar));

template <typename Scalar>
inline LaneT<Scalar> load_lane(const Scalar* p) {
  return *reinterpret_cast<const typename Lane<Scalar>::unaligned*>(p);
}

template <typename Scalar>
inline void store_lane(Scalar* p, LaneT<Scalar> v) {
  *reinterpret_cast<typename Lane<Scalar>::unaligned*>(p) = v;
}

// The tile kernels are kept out of line so their register allocation does not
// depend on the caller.

// out[r][c] = sum_k x[stride r + k] * taps_t[k][c] for kRows outputs and
// kLanes lanes of channels; taps_t and out share the leading dimension ld.
// The accumulator tile is indexed through a pack expansion so every index is
// a compile-time constant and the tile stays in registers.
template <typename Scalar, int kLanes, int kRows>
__attribute__((noinline)) void forward_tile(const Scalar* x, Eigen::Index stride, Eigen::Index width,
                                            const Scalar* taps_t, Eigen::Index ld, Scalar* out) {
  using LaneV = LaneT<Scalar>;
  constexpr int kWidth = kLaneWidth<Scalar>;
  [&]<std::size_t... I>(std::index_sequence<I...>) {
    LaneV acc[kRows * kLanes] = {};
    for (Eigen::Index k = 0; k < width; ++k) {
      const Scalar* h = taps_t + k * ld;
      ((acc[I] += x[stride * static_cast<Eigen::Index>(I / kLanes) + k] *
                  load_lane(h + (I % kLanes) * kWidth)),
       ...);
    }
    (store_lane(out + static_cast<Eigen::Index>(I / kLanes) * ld + (I % kLanes) * kWidth, acc[I]),
     ...);
  }(std::make_index_sequence<kRows * kLanes>{});
}

// out[r][j] = sum_m grad[m][r] * x[stride m + j] for kRows channels and
// kLanes lanes of taps, accumulated in ascending m.
template <typename Scalar, int kLanes, int kRows>
__attribute__((noinline)) void backward_tile(const Scalar* x, Eigen::Index stride, Eigen::Index outputs,
                                             const Scalar* grad, Eigen::Index ld_grad, Scalar* out,
                                             Eigen::Index ld_out) {
  using LaneV = LaneT<Scalar>;
  constexpr int kWidth = kLaneWidth<Scalar>;
  [&]<std::size_t... I>(std::index_sequence<I...>) {
    LaneV acc[kRows * kLanes] = {};
    for (Eigen::Index m = 0; m < outputs; ++m) {
      const Scalar* xs = x + stride * m;
      const Scalar* gm = grad + m * ld_grad;
      ((acc[I] += gm[I / kLanes] * load_lane(xs + (I % kLanes) * kWidth)), ...);
    }
    (store_lane(out + static_cast<Eigen::Index>(I / kLanes) * ld_out + (I % kLanes) * kWidth,
                acc[I]),
     ...);
  }(std::make_index_sequence<kRows * kLanes>{});
}

inline Eigen::Index round_up(Eigen::Index value, Eigen::Index multiple) {
  return (value + multiple - 1) / multiple * multiple;
}

template <typename Scalar>
std::vector<Scalar> padded_signal(std::span<const Scalar> signal, Eigen::Index taps,
                                  Eigen::Index stride, Eigen::Index outputs_padded,
                                  Eigen::Index taps_padded) {
  const Eigen::Index half = (taps - 1) / 2;
  const Eigen::Index length = stride * (outputs_padded - 1) + taps_padded;
  std::vector<Scalar> padded(static_cast<std::size_t>(std::max<Eigen::Index>(
                                 length, half + static_cast<Eigen::Index>(signal.size()))),
                             Scalar(0));
  std::copy(signal.begin(), signal.end(), padded.begin() + half);
  return padded;
}

}  // namespace detail

inline Eigen::Index strided_length(Eigen::Index samples, Eigen::Index stride) {
  return (samples + stride - 1) / stride;
}

/// taps: C x K matrix, one kernel per row.
template <typename Scalar>
ChannelMatrix<Scalar> convolve_taps(std::span<const Scalar> signal, const Matrix<Scalar>& taps,
                                    Eigen::Index stride) {
  const Eigen::Index num_samples = static_cast<Eigen::Index>(signal.size());
  const Eigen::Index channels = taps.rows();
  const Eigen::Index width = taps.cols();
  detail::check_odd_taps(width);
  require(stride >= 1, "stride must be >= 1");
  if (num_samples < width) {
    throw SignalTooShort("signal of " + std::to_string(num_samples) +
                         " samples is shorter than kernel width " + std::to_string(width));
  }

  // Register tile: kLanes lanes of channels x kRows output samples.
  constexpr int kLanes = 2;
  constexpr int kRows = 12;
  constexpr int kWidth = detail::kLaneWidth<Scalar>;
  constexpr int kChannels = kLanes * kWidth;

  const Eigen::Index outputs = strided_length(num_samples, stride);
  const Eigen::Index channels_padded = detail::round_up(channels, kChannels);
  const Eigen::Index outputs_padded = detail::round_up(outputs, kRows);
  const std::vector<Scalar> x =
      detail::padded_signal(signal, width, stride, outputs_padded, width);

  // Tap-major copy: row k holds tap k of every kernel, contiguous in channel.
  std::vector<Scalar> taps_t(static_cast<std::size_t>(width * channels_padded), Scalar(0));
  for (Eigen::Index k = 0; k < width; ++k) {
    for (Eigen::Index c = 0; c < channels; ++c) taps_t[k * channels_padded + c] = taps(c, k);
  }

  Matrix<Scalar> out_padded(channels_padded, outputs_padded);
  for (Eigen::Index cb = 0; cb < channels_padded; cb += kChannels) {
    for (Eigen::Index mb = 0; mb < outputs_padded; mb += kRows) {
      detail::forward_tile<Scalar, kLanes, kRows>(x.data() + stride * mb, stride, width,
                                                  taps_t.data() + cb, channels_padded,
                                                  out_padded.data() + mb * channels_padded + cb);
    }
  }
  return out_padded.topLeftCorner(channels, outputs);
}

/// Gradient of sum(grad .* convolve_taps(signal, taps, stride)) with respect to taps.
/// Accumulates over output samples in ascending order.
template <typename Scalar>
Matrix<Scalar> convolve_taps_backward(std::span<const Scalar> signal, const ChannelMatrix<Scalar>& grad,
                                      Eigen::Index width, Eigen::Index stride) {
  constexpr int kLanes = 2;
  constexpr int kRows = 6;
  constexpr int kWidth = detail::kLaneWidth<Scalar>;
  constexpr int kTaps = kLanes * kWidth;

  const Eigen::Index channels = grad.rows();
  const Eigen::Index outputs = grad.cols();
  const Eigen::Index width_padded = detail::round_up(width, kTaps);
  const Eigen::Index channels_padded = detail::round_up(channels, kRows);
  const std::vector<Scalar> x = detail::padded_signal(signal, width, stride, outputs, width_padded);

  Matrix<Scalar> g = Matrix<Scalar>::Zero(channels_padded, outputs);
  g.topRows(channels) = grad;
  Matrix<Scalar> result_padded(width_padded, channels_padded);
  for (Eigen::Index cb = 0; cb < channels_padded; cb += kRows) {
    for (Eigen::Index kb = 0; kb < width_padded; kb += kTaps) {
      detail::backward_tile<Scalar, kLanes, kRows>(x.data() + kb, stride, outputs,
                                                   g.data() + cb, channels_padded,
                                                   result_padded.data() + cb * width_padded + kb,
                                                   width_padded);
    }
  }
  return result_padded.topLeftCorner(width, channels).transpose();
}

/// Gradient of sum(grad .* convolve_taps(signal, taps, stride)) with respect to the signal.
template <typename Scalar>
Vector<Scalar> convolve_input_backward(const Matrix<Scalar>& taps, const ChannelMatrix<Scalar>& grad,
                                       Eigen::Index num_samples, Eigen::Index stride) {
  const Eigen::Index width = taps.cols();
  const Eigen::Index half = (width - 1) / 2;
  const Matrix<Scalar> per_output = grad.transpose() * taps;  // M x K
  Vector<Scalar> result = Vector<Scalar>::Zero(num_samples);
  for (Eigen::Index m = 0; m < per_output.rows(); ++m) {
    for (Eigen::Index k = 0; k < width; ++k) {
      const Eigen::Index n = stride * m + k - half;
      if (n >= 0 && n < num_samples) result(n) += per_output(m, k);
    }
  }
  return result;
}

template <typename Scalar>
Matrix<Scalar> stack_taps(const std::vector<FirKernel<Scalar>>& kernels) {
  require(!kernels.empty(), "kernel list is empty");
  const Eigen::Index width = kernels.front().size();
  Matrix<Scalar> taps(static_cast<Eigen::Index>(kernels.size()), width);
  for (std::size_t c = 0; c < kernels.size(); ++c) {
    require(kernels[c].size() == width, "all kernels must share the same tap count");
    taps.row(static_cast<Eigen::Index>(c)) = kernels[c].taps.transpose();
  }
  return taps;
}

template <typename Scalar>
ChannelMatrix<Scalar> convolve(std::span<const Scalar> signal,
                               const std::vector<FirKernel<Scalar>>& kernels, Eigen::Index stride) {
  return convolve_taps(signal, stack_taps(kernels), stride);
}

// ---------------------------------------------------------------------------
// Frequency response
// ---------------------------------------------------------------------------

inline constexpr double kResponseFloorDb = -120.0;

struct FrequencyResponse {
  std::vector<double> freqs;         // normalized, [0, 0.5]
  std::vector<double> magnitude_db;  // floored at kResponseFloorDb
};

template <typename Scalar>
FrequencyResponse frequency_response(const Vector<Scalar>& taps, int num_points) {
  require(num_points >= 2, "frequency response needs at least 2 points");
  FrequencyResponse response;
  response.freqs.resize(num_points);
  response.magnitude_db.resize(num_points);
  for (int j = 0; j < num_points; ++j) {
    const double f = 0.5 * static_cast<double>(j) / (num_points - 1);
    std::complex<double> sum = 0.0;
    for (Eigen::Index k = 0; k < taps.size(); ++k) {
      const double phase = -2.0 * f * static_cast<double>(k);
      sum += static_cast<double>(taps(k)) *
             std::complex<double>(detail::cos_pi(phase), detail::sin_pi(phase));
    }
    const double magnitude = std::abs(sum);
    const double db = magnitude > 0.0 ? 20.0 * std::log10(magnitude) : kResponseFloorDb;
    response.freqs[j] = f;
    response.magnitude_db[j] = std::max(db, kResponseFloorDb);
  }
  return response;
}

/// CSV with header freq_normalized,freq_hz,magnitude_db and 9 significant digits.
void write_response_csv(std::ostream& out, const FrequencyResponse& response, double sample_rate);

}  // namespace iconnet
