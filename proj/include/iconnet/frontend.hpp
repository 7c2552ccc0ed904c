#pragma once

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "iconnet/common.hpp"
#include "iconnet/firconv.hpp"
#include "iconnet/windows.hpp"

namespace iconnet {

/// Which front-end parameters receive gradient updates.
enum class Variant { kB, kW, kBW, kFixed };

Variant parse_variant(std::string_view name);
std::string_view to_string(Variant variant);

inline bool bands_learnable(Variant v) { return v == Variant::kB || v == Variant::kBW; }
inline bool window_learnable(Variant v) { return v == Variant::kW || v == Variant::kBW; }

struct LrnParams {
  int size = 5;
  double alpha = 1e-4;
  double beta = 0.75;
  double bias = 2.0;
};

struct FrontendBlockConfig {
  int num_kernels = 256;
  int kernel_taps = 511;
  Variant variant = Variant::kW;
  WindowPreset window_preset = WindowPreset::kHamming;
  int downsample_factor = 8;
  LrnParams lrn;
  double nlrelu_beta = 1.0;
  // Band initialization: mel grid over [mel_f_min, mel_f_max] Hz at the
  // block's input rate; mel_f_max <= 0 means Nyquist.
  double mel_f_min = 0.0;
  double mel_f_max = 0.0;
  double low_extra_fraction = 0.25;
};

// ---------------------------------------------------------------------------
// Element-wise stages
// ---------------------------------------------------------------------------

template <typename Scalar>
Scalar nlrelu(Scalar x, Scalar beta = Scalar(1)) {
  return std::log1p(beta * std::max(x, Scalar(0)));
}

template <typename Scalar>
ChannelMatrix<Scalar> nlrelu(const ChannelMatrix<Scalar>& x, Scalar beta = Scalar(1)) {
  return (beta * x.array().max(Scalar(0))).log1p().matrix();
}

/// d nlrelu / dx evaluated at the pre-activation x.
template <typename Scalar>
ChannelMatrix<Scalar> nlrelu_derivative(const ChannelMatrix<Scalar>& x, Scalar beta) {
  return (x.array() > Scalar(0))
      .select(beta / (Scalar(1) + beta * x.array()), Scalar(0))
      .matrix();
}

namespace detail {

// Channel c is normalized over rows [c - size/2, c + (size-1)/2], clipped.
inline int lrn_before(int size) { return size / 2; }
inline int lrn_after(int size) { return (size - 1) / 2; }

// out.row(c) = sum over rows r in [c - before, c + after] of in.row(r).
template <typename Scalar>
ChannelMatrix<Scalar> band_row_sum(const ChannelMatrix<Scalar>& in, int before, int after) {
  ChannelMatrix<Scalar> out = ChannelMatrix<Scalar>::Zero(in.rows(), in.cols());
  const Eigen::Index rows = in.rows();
  for (int offset = -before; offset <= after; ++offset) {
    const Eigen::Index dst_begin = std::max<Eigen::Index>(0, -offset);
    const Eigen::Index dst_end = std::min<Eigen::Index>(rows, rows - offset);
    if (dst_end <= dst_begin) continue;
    out.middleRows(dst_begin, dst_end - dst_begin) +=
        in.middleRows(dst_begin + offset, dst_end - dst_begin);
  }
  return out;
}

}  // namespace detail

/// Denominator base d = bias + alpha * sum_{c' in N(c)} a_{c'}^2.
template <typename Scalar>
ChannelMatrix<Scalar> lrn_denominator(const ChannelMatrix<Scalar>& a, const LrnParams& params) {
  const ChannelMatrix<Scalar> squares = a.array().square().matrix();
  const ChannelMatrix<Scalar> sums =
      detail::band_row_sum(squares, detail::lrn_before(params.size), detail::lrn_after(params.size));
  return (Scalar(params.bias) + Scalar(params.alpha) * sums.array()).matrix();
}

/// b = a / (bias + alpha * sum a^2)^beta across neighbouring channels.
template <typename Scalar>
ChannelMatrix<Scalar> lrn(const ChannelMatrix<Scalar>& a, const LrnParams& params) {
  require(a.rows() >= 1, "lrn needs at least one channel");
  const ChannelMatrix<Scalar> d = lrn_denominator(a, params);
  return (a.array() * (-Scalar(params.beta) * d.array().log()).exp()).matrix();
}

/// Gradient through lrn given its input a, denominator base d and the
/// forward scale d^-beta.
template <typename Scalar>
ChannelMatrix<Scalar> lrn_backward(const ChannelMatrix<Scalar>& a, const ChannelMatrix<Scalar>& d,
                                   const ChannelMatrix<Scalar>& scale, const ChannelMatrix<Scalar>& grad,
                                   const LrnParams& params) {
  const Scalar beta = Scalar(params.beta);
  const ChannelMatrix<Scalar> q = (grad.array() * a.array() * scale.array() / d.array()).matrix();  // g a d^(-beta-1)
  // Transposed neighbourhood: row j collects rows c with j in N(c).
  const ChannelMatrix<Scalar> spread =
      detail::band_row_sum(q, detail::lrn_after(params.size), detail::lrn_before(params.size));
  return (grad.array() * scale.array() -
          Scalar(2) * Scalar(params.alpha) * beta * a.array() * spread.array())
      .matrix();
}

template <typename Scalar>
ChannelMatrix<Scalar> lrn_backward(const ChannelMatrix<Scalar>& a, const ChannelMatrix<Scalar>& d,
                                   const ChannelMatrix<Scalar>& grad, const LrnParams& params) {
  const ChannelMatrix<Scalar> scale = (-Scalar(params.beta) * d.array().log()).exp().matrix();
  return lrn_backward(a, d, scale, grad, params);
}

/// Keeps every factor-th time step starting at 0.
template <typename Scalar>
ChannelMatrix<Scalar> downsample(const ChannelMatrix<Scalar>& x, Eigen::Index factor) {
  require(factor >= 1, "downsample factor must be >= 1");
  const Eigen::Index cols = strided_length(x.cols(), factor);
  using Strided = Eigen::Map<const Matrix<Scalar>, 0, Eigen::OuterStride<>>;
  return Strided(x.data(), x.rows(), cols, Eigen::OuterStride<>(x.rows() * factor));
}

// ---------------------------------------------------------------------------
// Front-end block
// ---------------------------------------------------------------------------

/// Intermediate values of one block's forward pass, kept for backprop.
template <typename Scalar>
struct BlockTrace {
  Vector<Scalar> input;          // 1-D signal fed to the kernel bank
  ChannelMatrix<Scalar> pre;     // decimated convolution output
  ChannelMatrix<Scalar> act;     // nlrelu(pre)
  ChannelMatrix<Scalar> denom;   // lrn denominator base
  ChannelMatrix<Scalar> scale;   // denom^-beta
  ChannelMatrix<Scalar> out;     // lrn(act)
};

template <typename Scalar>
class FrontendBlock {
 public:
  FrontendBlock() = default;

  /// Mel-initialized bands and preset window; input_rate is the sample rate
  /// of the signal this block sees.
  static FrontendBlock initialize(const FrontendBlockConfig& config, double input_rate) {
    require(config.num_kernels >= 1, "num_kernels must be >= 1");
    const double f_max = config.mel_f_max > 0.0 ? config.mel_f_max : 0.5 * input_rate;
    const std::vector<BandInit> inits = mel_band_init(config.num_kernels, input_rate,
                                                      config.mel_f_min, f_max,
                                                      config.low_extra_fraction);
    std::vector<BandParams<Scalar>> bands;
    std::vector<int> grid;
    for (const BandInit& init : inits) {
      bands.push_back({static_cast<Scalar>(init.f0), static_cast<Scalar>(init.f_delta), false});
      grid.push_back(init.grid);
    }
    return FrontendBlock(config, bands, preset_window<Scalar>(config.window_preset), grid);
  }

  /// Explicit bands sharing one initial window.
  FrontendBlock(const FrontendBlockConfig& config, const std::vector<BandParams<Scalar>>& bands,
                const WindowCoefficients<Scalar>& window, std::vector<int> grid = {})
      : config_(config), grid_(std::move(grid)) {
    const auto count = static_cast<Eigen::Index>(bands.size());
    require(count >= 1, "front-end block needs at least one kernel");
    require(config.downsample_factor >= 1, "downsample_factor must be >= 1");
    require(config.nlrelu_beta > 0.0, "nlrelu_beta must be positive");
    require(config.lrn.size >= 1, "lrn size must be >= 1");
    detail::check_odd_taps(config.kernel_taps);
    config_.num_kernels = static_cast<int>(count);
    if (grid_.empty()) grid_.assign(bands.size(), 0);
    require(grid_.size() == bands.size(), "grid labels must match kernel count");

    phi_ = window.phi.transpose().replicate(count, 1);
    bands_.resize(count, 2);
    for (Eigen::Index c = 0; c < count; ++c) {
      detail::check_band(bands[c]);
      bands_(c, 0) = bands[c].f0;
      bands_(c, 1) = bands[c].f_delta;
    }
    band_raw_ = Matrix<Scalar>::Zero(count, 2);
    if (bands_learnable(config_.variant)) {
      const BandReparam<Scalar> reparam(config_.kernel_taps);
      for (Eigen::Index c = 0; c < count; ++c) {
        const auto [a, b] = reparam.from_band(bands_(c, 0), bands_(c, 1));
        band_raw_(c, 0) = a;
        band_raw_(c, 1) = b;
      }
    }
    zero_grad();
    refresh();
  }

  const FrontendBlockConfig& config() const { return config_; }
  Eigen::Index num_kernels() const { return phi_.rows(); }
  Eigen::Index taps() const { return config_.kernel_taps; }
  Eigen::Index factor() const { return config_.downsample_factor; }
  const std::vector<int>& grid() const { return grid_; }
  void set_grid(std::vector<int> grid) {
    require(grid.size() == static_cast<std::size_t>(num_kernels()), "grid labels must match kernel count");
    grid_ = std::move(grid);
  }

  Matrix<Scalar>& phi() { return phi_; }
  const Matrix<Scalar>& phi() const { return phi_; }
  Matrix<Scalar>& band_raw() { return band_raw_; }
  const Matrix<Scalar>& band_raw() const { return band_raw_; }
  /// Current (f0, f_delta) per kernel, normalized to the block input rate.
  const Matrix<Scalar>& bands() const { return bands_; }
  Matrix<Scalar>& grad_phi() { return grad_phi_; }
  Matrix<Scalar>& grad_band_raw() { return grad_band_raw_; }
  const Matrix<Scalar>& grad_phi() const { return grad_phi_; }
  const Matrix<Scalar>& grad_band_raw() const { return grad_band_raw_; }

  /// Overwrites frozen bands (checkpoint restore). Learnable bands come from band_raw.
  void set_bands(const Matrix<Scalar>& bands) {
    require(bands.rows() == num_kernels() && bands.cols() == 2, "band matrix shape mismatch");
    bands_ = bands;
  }

  Eigen::Index parameter_count() const {
    Eigen::Index per_kernel = 0;
    if (window_learnable(config_.variant)) per_kernel += phi_.cols();
    if (bands_learnable(config_.variant)) per_kernel += 2;
    return num_kernels() * per_kernel;
  }

  const std::vector<FirKernel<Scalar>>& kernels() const { return kernels_; }
  const Matrix<Scalar>& tap_matrix() const { return taps_; }

  /// Rebuilds kernels from the current parameters. Call after every update.
  void refresh() {
    const Eigen::Index count = num_kernels();
    if (bands_learnable(config_.variant)) {
      const BandReparam<Scalar> reparam(config_.kernel_taps);
      for (Eigen::Index c = 0; c < count; ++c) {
        const BandParams<Scalar> band = reparam.to_band(band_raw_(c, 0), band_raw_(c, 1));
        bands_(c, 0) = band.f0;
        bands_(c, 1) = band.f_delta;
      }
    }
    kernels_.clear();
    kernels_.reserve(static_cast<std::size_t>(count));
    WindowCoefficients<Scalar> window;
    window.learnable = window_learnable(config_.variant);
    for (Eigen::Index c = 0; c < count; ++c) {
      BandParams<Scalar> band{bands_(c, 0), bands_(c, 1), bands_learnable(config_.variant)};
      window.phi = phi_.row(c).transpose();
      kernels_.push_back(assemble_kernel(band, window, config_.kernel_taps));
    }
    taps_ = stack_taps(kernels_);
  }

  void zero_grad() {
    grad_phi_ = Matrix<Scalar>::Zero(phi_.rows(), phi_.cols());
    grad_band_raw_ = Matrix<Scalar>::Zero(band_raw_.rows(), 2);
  }

  /// FIRconv (strided) -> NLReLU -> LRN on a 1-D signal.
  ChannelMatrix<Scalar> forward(std::span<const Scalar> signal, BlockTrace<Scalar>* trace = nullptr) const {
    BlockTrace<Scalar> local;
    BlockTrace<Scalar>& t = trace ? *trace : local;
    t.input = Eigen::Map<const Vector<Scalar>>(signal.data(), static_cast<Eigen::Index>(signal.size()));
    t.pre = convolve_taps(signal, taps_, factor());
    t.act = nlrelu(t.pre, Scalar(config_.nlrelu_beta));
    t.denom = lrn_denominator(t.act, config_.lrn);
    t.scale = (-Scalar(config_.lrn.beta) * t.denom.array().log()).exp().matrix();
    t.out = (t.act.array() * t.scale.array()).matrix();
    return t.out;
  }

  /// Backpropagates grad_out through the block, accumulating the tap gradient
  /// into tap_grad (C x K). Returns the gradient w.r.t. the input signal when
  /// need_input_grad is set, otherwise an empty vector.
  Vector<Scalar> backward(const BlockTrace<Scalar>& trace, const ChannelMatrix<Scalar>& grad_out,
                          Matrix<Scalar>& tap_grad, bool need_input_grad) const {
    const ChannelMatrix<Scalar> grad_act = lrn_backward(trace.act, trace.denom, trace.scale, grad_out, config_.lrn);
    const ChannelMatrix<Scalar> grad_pre =
        (grad_act.array() * nlrelu_derivative(trace.pre, Scalar(config_.nlrelu_beta)).array()).matrix();
    const std::span<const Scalar> input(trace.input.data(), static_cast<std::size_t>(trace.input.size()));
    if (window_learnable(config_.variant) || bands_learnable(config_.variant)) {
      tap_grad += convolve_taps_backward(input, grad_pre, taps(), factor());
    }
    if (!need_input_grad) return {};
    return convolve_input_backward(taps_, grad_pre, trace.input.size(), factor());
  }

  /// Maps an accumulated tap gradient onto grad_phi / grad_band_raw (added).
  void accumulate_parameter_grads(const Matrix<Scalar>& tap_grad) {
    const bool learn_window = window_learnable(config_.variant);
    const bool learn_bands = bands_learnable(config_.variant);
    if (!learn_window && !learn_bands) return;
    const BandReparam<Scalar> reparam(config_.kernel_taps);
    for (Eigen::Index c = 0; c < num_kernels(); ++c) {
      const KernelGradients<Scalar> g = kernel_param_gradients(kernels_[static_cast<std::size_t>(c)]);
      const Vector<Scalar> dtaps = tap_grad.row(c).transpose();
      if (learn_window) grad_phi_.row(c) += (g.dphi.transpose() * dtaps).transpose();
      if (learn_bands) {
        const auto [da, db] =
            reparam.backward(band_raw_(c, 0), band_raw_(c, 1), g.df0.dot(dtaps), g.dfdelta.dot(dtaps));
        grad_band_raw_(c, 0) += da;
        grad_band_raw_(c, 1) += db;
      }
    }
  }

 private:
  FrontendBlockConfig config_;
  std::vector<int> grid_;
  Matrix<Scalar> phi_;       // C x (p + 1)
  Matrix<Scalar> band_raw_;  // C x 2, unconstrained (learnable bands only)
  Matrix<Scalar> bands_;     // C x 2, (f0, f_delta)
  Matrix<Scalar> grad_phi_;
  Matrix<Scalar> grad_band_raw_;
  std::vector<FirKernel<Scalar>> kernels_;
  Matrix<Scalar> taps_;
};

template <typename Scalar>
ChannelMatrix<Scalar> frontend_forward(const FrontendBlock<Scalar>& block, std::span<const Scalar> waveform) {
  return block.forward(waveform);
}

/// Input of a stacked block: the channel mean of the previous block's output.
template <typename Scalar>
Vector<Scalar> channel_mean(const ChannelMatrix<Scalar>& x) {
  return x.colwise().mean().transpose();
}

template <typename Scalar>
ChannelMatrix<Scalar> stack_forward(const std::vector<FrontendBlock<Scalar>>& blocks,
                                    std::span<const Scalar> waveform,
                                    std::vector<BlockTrace<Scalar>>* traces = nullptr) {
  require(!blocks.empty(), "stack needs at least one block");
  if (traces) traces->assign(blocks.size(), {});
  ChannelMatrix<Scalar> out;
  Vector<Scalar> signal;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    BlockTrace<Scalar>* trace = traces ? &(*traces)[b] : nullptr;
    if (b == 0) {
      out = blocks[b].forward(waveform, trace);
    } else {
      signal = channel_mean(out);
      out = blocks[b].forward(std::span<const Scalar>(signal.data(), static_cast<std::size_t>(signal.size())),
                              trace);
    }
  }
  return out;
}

/// Time length after a stack of blocks with the given decimation factors.
inline Eigen::Index stacked_length(Eigen::Index samples, const std::vector<int>& factors) {
  for (int f : factors) samples = strided_length(samples, f);
  return samples;
}

/// Concatenates channel maps after bringing them to the lowest rate. Integer
/// rate ratios decimate; other ratios go through the windowed-sinc resampler.
ChannelMatrix<double> combine_outputs(const std::vector<ChannelMatrix<double>>& outputs,
                                      const std::vector<double>& rates);

}  // namespace iconnet
