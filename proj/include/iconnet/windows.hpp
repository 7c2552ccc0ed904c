#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "iconnet/common.hpp"

namespace iconnet {

/// Coefficients of a generalized cosine window
///   w_k = sum_i (-1)^i phi_i cos(2 pi i k / (K - 1)).
/// phi has p + 1 entries; p = 0 is the rectangular window.
template <typename Scalar>
struct WindowCoefficients {
  Vector<Scalar> phi;
  bool learnable = true;

  Eigen::Index order() const { return phi.size() - 1; }
};

/// Normalized band edges (cycles/sample) used to seed one kernel.
struct BandInit {
  double f0 = 0.0;
  double f_delta = 0.5;
  int grid = 0;  // 0: main mel grid, 1: low-frequency grid
};

enum class WindowPreset { kRectangular, kHann, kHamming, kBlackman };

WindowPreset parse_window_preset(std::string_view name);
std::string_view to_string(WindowPreset preset);

template <typename Scalar = double>
WindowCoefficients<Scalar> preset_window(WindowPreset preset) {
  WindowCoefficients<Scalar> w;
  switch (preset) {
    case WindowPreset::kRectangular:
      w.phi = Vector<Scalar>::Constant(1, Scalar(1));
      break;
    case WindowPreset::kHann:
      w.phi = Vector<Scalar>(2);
      w.phi << Scalar(0.5), Scalar(0.5);
      break;
    case WindowPreset::kHamming:
      w.phi = Vector<Scalar>(2);
      w.phi << Scalar(0.54), Scalar(0.46);
      break;
    case WindowPreset::kBlackman:
      w.phi = Vector<Scalar>(3);
      w.phi << Scalar(0.42), Scalar(0.5), Scalar(0.08);
      break;
  }
  return w;
}

template <typename Scalar = double>
WindowCoefficients<Scalar> preset_window(std::string_view name) {
  return preset_window<Scalar>(parse_window_preset(name));
}

namespace detail {

inline void check_window_args(Eigen::Index phi_size, Eigen::Index taps) {
  require(taps >= 2, "window needs at least 2 taps, got " + std::to_string(taps));
  require(phi_size >= 1, "window coefficient vector is empty");
}

}  // namespace detail

/// Basis matrix J with J(k, i) = (-1)^i cos(2 pi i k / (K - 1)). It is the
/// Jacobian dw/dphi and does not depend on phi. Rows are mirrored so that
/// J(k, :) == J(K - 1 - k, :) holds exactly.
template <typename Scalar>
Matrix<Scalar> window_basis(Eigen::Index num_coeffs, Eigen::Index taps) {
  detail::check_window_args(num_coeffs, taps);
  Matrix<Scalar> basis(taps, num_coeffs);
  const Scalar denom = static_cast<Scalar>(taps - 1);
  const Eigen::Index half = (taps + 1) / 2;
  for (Eigen::Index k = 0; k < half; ++k) {
    for (Eigen::Index i = 0; i < num_coeffs; ++i) {
      const Scalar sign = (i % 2 == 0) ? Scalar(1) : Scalar(-1);
      basis(k, i) = sign * std::cos(Scalar(2) * kPi<Scalar> * static_cast<Scalar>(i * k) / denom);
    }
  }
  for (Eigen::Index k = half; k < taps; ++k) basis.row(k) = basis.row(taps - 1 - k);
  return basis;
}

template <typename Scalar>
Matrix<Scalar> window_jacobian(const WindowCoefficients<Scalar>& window, Eigen::Index taps) {
  return window_basis<Scalar>(window.phi.size(), taps);
}

template <typename Scalar>
Vector<Scalar> evaluate_window(const WindowCoefficients<Scalar>& window, Eigen::Index taps) {
  detail::check_window_args(window.phi.size(), taps);
  require(window.phi.allFinite(), "window coefficients must be finite");
  // Accumulate term by term in index order; the mirrored basis keeps the
  // result exactly symmetric.
  const Matrix<Scalar> basis = window_basis<Scalar>(window.phi.size(), taps);
  Vector<Scalar> w = Vector<Scalar>::Zero(taps);
  for (Eigen::Index i = 0; i < window.phi.size(); ++i) w += window.phi(i) * basis.col(i);
  return w;
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Band initialization from overlapping mel-spaced triangles: band i spans
/// mel points i..i+2. A fraction low_extra_fraction of the kernels forms a
/// second, denser grid over [f_min, f_max / 4]. Main grid first, then low grid.
std::vector<BandInit> mel_band_init(int num_kernels, double sample_rate, double f_min, double f_max,
                                    double low_extra_fraction = 0.25);

}  // namespace iconnet
