#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "iconnet/common.hpp"
#include "iconnet/frontend.hpp"
#include "iconnet/random.hpp"

namespace iconnet {

enum class PoolKind { kMax, kMean };

PoolKind parse_pool(std::string_view name);
std::string_view to_string(PoolKind pool);

struct ClassifierConfig {
  PoolKind pool = PoolKind::kMean;
  int hidden_nodes = 512;
  int num_classes = 2;
  double leaky_slope = 0.01;
};

struct ModelConfig {
  double sample_rate = 16000.0;
  std::vector<FrontendBlockConfig> blocks;
  ClassifierConfig classifier;
};

inline constexpr double kLayerNormEps = 1e-5;

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

/// -log softmax(logits)[label], evaluated with max subtraction.
template <typename Scalar>
Scalar cross_entropy(const Vector<Scalar>& logits, int label) {
  require(label >= 0 && label < logits.size(), "label " + std::to_string(label) + " out of range");
  const Scalar peak = logits.maxCoeff();
  const Scalar log_sum = std::log((logits.array() - peak).exp().sum()) + peak;
  return std::max(Scalar(0), log_sum - logits(label));
}

/// d cross_entropy / d logits = softmax - onehot.
template <typename Scalar>
Vector<Scalar> cross_entropy_grad(const Vector<Scalar>& logits, int label) {
  require(label >= 0 && label < logits.size(), "label " + std::to_string(label) + " out of range");
  Vector<Scalar> p = (logits.array() - logits.maxCoeff()).exp().matrix();
  p /= p.sum();
  p(label) -= Scalar(1);
  return p;
}

// ---------------------------------------------------------------------------
// Classifier head: pool -> dense -> layer norm -> leaky ReLU -> dense
// ---------------------------------------------------------------------------

template <typename Scalar>
struct ClassifierTrace {
  Eigen::Index time_steps = 0;
  std::vector<Eigen::Index> argmax;  // max pooling only
  Vector<Scalar> pooled;
  Vector<Scalar> normalized;  // layer-norm output before scale/shift
  Scalar inv_std = Scalar(0);
  Vector<Scalar> affine;      // gamma * normalized + beta
  Vector<Scalar> activated;
};

template <typename Scalar>
class Classifier {
 public:
  Classifier() = default;

  Classifier(const ClassifierConfig& config, Eigen::Index in_channels, Rng& rng) : config_(config) {
    require(config.hidden_nodes >= 1, "hidden_nodes must be >= 1");
    require(config.num_classes >= 2, "num_classes must be >= 2");
    require(in_channels >= 1, "classifier needs at least one input channel");
    const Eigen::Index hidden = config.hidden_nodes;
    const Eigen::Index classes = config.num_classes;
    w1_ = uniform_init(hidden, in_channels, in_channels, rng);
    b1_ = uniform_init(hidden, 1, in_channels, rng);
    gamma_ = Matrix<Scalar>::Ones(hidden, 1);
    beta_ = Matrix<Scalar>::Zero(hidden, 1);
    w2_ = uniform_init(classes, hidden, hidden, rng);
    b2_ = uniform_init(classes, 1, hidden, rng);
    zero_grad();
  }

  const ClassifierConfig& config() const { return config_; }
  Eigen::Index in_channels() const { return w1_.cols(); }

  Vector<Scalar> pool(const ChannelMatrix<Scalar>& features, ClassifierTrace<Scalar>* trace) const {
    require(features.rows() == in_channels(), "classifier expects " + std::to_string(in_channels()) +
                                                  " channels, got " + std::to_string(features.rows()));
    require(features.cols() >= 1, "classifier input has no time steps");
    Vector<Scalar> pooled(features.rows());
    if (config_.pool == PoolKind::kMean) {
      pooled = features.rowwise().mean();
    } else {
      std::vector<Eigen::Index> argmax(static_cast<std::size_t>(features.rows()));
      for (Eigen::Index c = 0; c < features.rows(); ++c) {
        pooled(c) = features.row(c).maxCoeff(&argmax[static_cast<std::size_t>(c)]);
      }
      if (trace) trace->argmax = std::move(argmax);
    }
    if (trace) trace->time_steps = features.cols();
    return pooled;
  }

  /// Head applied to an already pooled feature vector.
  Vector<Scalar> forward_pooled(const Vector<Scalar>& pooled, ClassifierTrace<Scalar>* trace = nullptr) const {
    require(pooled.size() == in_channels(), "pooled feature size mismatch");
    const Vector<Scalar> hidden = w1_ * pooled + b1_.col(0);
    const Scalar mean = hidden.mean();
    const Scalar var = (hidden.array() - mean).square().mean();
    const Scalar inv_std = Scalar(1) / std::sqrt(var + Scalar(kLayerNormEps));
    const Vector<Scalar> normalized = ((hidden.array() - mean) * inv_std).matrix();
    const Vector<Scalar> affine = normalized.cwiseProduct(gamma_.col(0)) + beta_.col(0);
    const Scalar slope = Scalar(config_.leaky_slope);
    const Vector<Scalar> activated = (affine.array() > Scalar(0)).select(affine, slope * affine.array()).matrix();
    if (trace) {
      trace->pooled = pooled;
      trace->normalized = normalized;
      trace->inv_std = inv_std;
      trace->affine = affine;
      trace->activated = activated;
    }
    return w2_ * activated + b2_.col(0);
  }

  Vector<Scalar> forward(const ChannelMatrix<Scalar>& features, ClassifierTrace<Scalar>* trace = nullptr) const {
    return forward_pooled(pool(features, trace), trace);
  }

  /// Accumulates parameter gradients; returns d loss / d pooled.
  Vector<Scalar> backward_pooled(const ClassifierTrace<Scalar>& trace, const Vector<Scalar>& grad_logits) {
    gw2_.noalias() += grad_logits * trace.activated.transpose();
    gb2_.col(0) += grad_logits;
    const Vector<Scalar> grad_act = w2_.transpose() * grad_logits;
    const Scalar slope = Scalar(config_.leaky_slope);
    const Vector<Scalar> grad_affine =
        (trace.affine.array() > Scalar(0)).select(grad_act, slope * grad_act.array()).matrix();
    ggamma_.col(0) += grad_affine.cwiseProduct(trace.normalized);
    gbeta_.col(0) += grad_affine;
    const Vector<Scalar> grad_norm = grad_affine.cwiseProduct(gamma_.col(0));
    const Scalar mean_g = grad_norm.mean();
    const Scalar mean_gn = grad_norm.dot(trace.normalized) / static_cast<Scalar>(grad_norm.size());
    const Vector<Scalar> grad_hidden =
        (trace.inv_std * (grad_norm.array() - mean_g - trace.normalized.array() * mean_gn)).matrix();
    gw1_.noalias() += grad_hidden * trace.pooled.transpose();
    gb1_.col(0) += grad_hidden;
    return w1_.transpose() * grad_hidden;
  }

  /// d loss / d features from d loss / d pooled.
  ChannelMatrix<Scalar> unpool(const ClassifierTrace<Scalar>& trace, const Vector<Scalar>& grad_pooled) const {
    const Eigen::Index steps = trace.time_steps;
    if (config_.pool == PoolKind::kMean) {
      return (grad_pooled / static_cast<Scalar>(steps)).replicate(1, steps);
    }
    ChannelMatrix<Scalar> grad = ChannelMatrix<Scalar>::Zero(grad_pooled.size(), steps);
    for (Eigen::Index c = 0; c < grad_pooled.size(); ++c) {
      grad(c, trace.argmax[static_cast<std::size_t>(c)]) = grad_pooled(c);
    }
    return grad;
  }

  void zero_grad() {
    gw1_ = Matrix<Scalar>::Zero(w1_.rows(), w1_.cols());
    gb1_ = Matrix<Scalar>::Zero(b1_.rows(), 1);
    ggamma_ = Matrix<Scalar>::Zero(gamma_.rows(), 1);
    gbeta_ = Matrix<Scalar>::Zero(beta_.rows(), 1);
    gw2_ = Matrix<Scalar>::Zero(w2_.rows(), w2_.cols());
    gb2_ = Matrix<Scalar>::Zero(b2_.rows(), 1);
  }

  struct Ref {
    std::string name;
    Matrix<Scalar>* value;
    Matrix<Scalar>* grad;
  };

  std::vector<Ref> refs() {
    return {{"classifier.dense1.weight", &w1_, &gw1_}, {"classifier.dense1.bias", &b1_, &gb1_},
            {"classifier.norm.weight", &gamma_, &ggamma_}, {"classifier.norm.bias", &beta_, &gbeta_},
            {"classifier.dense2.weight", &w2_, &gw2_}, {"classifier.dense2.bias", &b2_, &gb2_}};
  }

  std::vector<std::pair<std::string, const Matrix<Scalar>*>> named_tensors() const {
    return {{"classifier.dense1.weight", &w1_}, {"classifier.dense1.bias", &b1_},
            {"classifier.norm.weight", &gamma_},  {"classifier.norm.bias", &beta_},
            {"classifier.dense2.weight", &w2_}, {"classifier.dense2.bias", &b2_}};
  }

  Eigen::Index parameter_count() const {
    return w1_.size() + b1_.size() + gamma_.size() + beta_.size() + w2_.size() + b2_.size();
  }

 private:
  static Matrix<Scalar> uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Matrix<Scalar> m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = static_cast<Scalar>(rng.uniform(-bound, bound));
    }
    return m;
  }

  ClassifierConfig config_;
  Matrix<Scalar> w1_, b1_, gamma_, beta_, w2_, b2_;
  Matrix<Scalar> gw1_, gb1_, ggamma_, gbeta_, gw2_, gb2_;
};

// ---------------------------------------------------------------------------
// Full model
// ---------------------------------------------------------------------------

template <typename Scalar>
struct ParamRef {
  std::string name;
  Matrix<Scalar>* value;
  Matrix<Scalar>* grad;
  bool learnable;
};

template <typename Scalar>
struct ModelTrace {
  std::vector<BlockTrace<Scalar>> blocks;
  ClassifierTrace<Scalar> head;
};

/// One training example as seen by the model.
template <typename Scalar>
struct Example {
  std::span<const Scalar> waveform;
  int label = 0;
};

template <typename Scalar>
class Model {
 public:
  Model() = default;

  /// Mel-initialized front end and uniformly initialized head.
  static Model create(const ModelConfig& config, std::uint64_t seed) {
    require(!config.blocks.empty(), "model needs at least one front-end block");
    require(config.sample_rate > 0.0, "sample_rate must be positive");
    std::vector<FrontendBlock<Scalar>> blocks;
    double rate = config.sample_rate;
    for (const FrontendBlockConfig& block : config.blocks) {
      blocks.push_back(FrontendBlock<Scalar>::initialize(block, rate));
      rate /= block.downsample_factor;
    }
    return Model(config, std::move(blocks), seed);
  }

  Model(const ModelConfig& config, std::vector<FrontendBlock<Scalar>> blocks, std::uint64_t seed)
      : config_(config), blocks_(std::move(blocks)) {
    require(!blocks_.empty(), "model needs at least one front-end block");
    Rng rng(seed);
    head_ = Classifier<Scalar>(config.classifier, blocks_.back().num_kernels(), rng);
  }

  const ModelConfig& config() const { return config_; }
  std::vector<FrontendBlock<Scalar>>& blocks() { return blocks_; }
  const std::vector<FrontendBlock<Scalar>>& blocks() const { return blocks_; }
  Classifier<Scalar>& head() { return head_; }
  const Classifier<Scalar>& head() const { return head_; }

  bool frontend_learnable() const {
    for (const auto& b : blocks_) {
      if (b.parameter_count() > 0) return true;
    }
    return false;
  }

  /// Sample rate of each block's input.
  std::vector<double> block_rates() const {
    std::vector<double> rates;
    double rate = config_.sample_rate;
    for (const auto& b : blocks_) {
      rates.push_back(rate);
      rate /= static_cast<double>(b.factor());
    }
    return rates;
  }

  ChannelMatrix<Scalar> features(std::span<const Scalar> waveform, ModelTrace<Scalar>* trace = nullptr) const {
    return stack_forward(blocks_, waveform, trace ? &trace->blocks : nullptr);
  }

  Vector<Scalar> pooled_features(std::span<const Scalar> waveform) const {
    return head_.pool(features(waveform), nullptr);
  }

  Vector<Scalar> logits(std::span<const Scalar> waveform, ModelTrace<Scalar>* trace = nullptr) const {
    ModelTrace<Scalar> local;
    ModelTrace<Scalar>& t = trace ? *trace : local;
    return head_.forward(features(waveform, &t), &t.head);
  }

  int predict(std::span<const Scalar> waveform) const {
    Eigen::Index best = 0;
    logits(waveform).maxCoeff(&best);
    return static_cast<int>(best);
  }

  void zero_grad() {
    for (auto& b : blocks_) b.zero_grad();
    head_.zero_grad();
  }

  /// Rebuilds front-end kernels after parameters changed.
  void refresh() {
    for (auto& b : blocks_) b.refresh();
  }

  /// Zeroes, then fills, every gradient with d(weighted mean loss)/d(param)
  /// over the batch. weights may be empty (uniform). Items are processed in
  /// order; returns the weighted mean loss.
  Scalar compute_gradients(std::span<const Example<Scalar>> batch, std::span<const Scalar> class_weights = {}) {
    require(!batch.empty(), "batch is empty");
    zero_grad();
    Scalar weight_total = 0;
    for (const auto& ex : batch) weight_total += class_weight(class_weights, ex.label);

    std::vector<Matrix<Scalar>> tap_grads;
    for (const auto& b : blocks_) tap_grads.push_back(Matrix<Scalar>::Zero(b.num_kernels(), b.taps()));

    Scalar loss = 0;
    for (const auto& ex : batch) {
      const Scalar scale = class_weight(class_weights, ex.label) / weight_total;
      ModelTrace<Scalar> trace;
      const Vector<Scalar> out = logits(ex.waveform, &trace);
      const Scalar item_loss = cross_entropy(out, ex.label);
      if (!std::isfinite(static_cast<double>(item_loss))) throw NumericError("non-finite loss");
      loss += scale * item_loss;
      const Vector<Scalar> grad_logits = scale * cross_entropy_grad(out, ex.label);
      const Vector<Scalar> grad_pooled = head_.backward_pooled(trace.head, grad_logits);
      backward_frontend(trace, head_.unpool(trace.head, grad_pooled), tap_grads);
    }
    for (std::size_t b = 0; b < blocks_.size(); ++b) blocks_[b].accumulate_parameter_grads(tap_grads[b]);
    return loss;
  }

  /// Same as compute_gradients for a frozen front end, from cached pooled features.
  Scalar compute_head_gradients(std::span<const Vector<Scalar>* const> pooled, std::span<const int> labels,
                                std::span<const Scalar> class_weights = {}) {
    require(!pooled.empty() && pooled.size() == labels.size(), "batch is empty or mismatched");
    zero_grad();
    Scalar weight_total = 0;
    for (int label : labels) weight_total += class_weight(class_weights, label);
    Scalar loss = 0;
    for (std::size_t i = 0; i < pooled.size(); ++i) {
      const Scalar scale = class_weight(class_weights, labels[i]) / weight_total;
      ClassifierTrace<Scalar> trace;
      const Vector<Scalar> out = head_.forward_pooled(*pooled[i], &trace);
      const Scalar item_loss = cross_entropy(out, labels[i]);
      if (!std::isfinite(static_cast<double>(item_loss))) throw NumericError("non-finite loss");
      loss += scale * item_loss;
      head_.backward_pooled(trace, scale * cross_entropy_grad(out, labels[i]));
    }
    return loss;
  }

  std::vector<ParamRef<Scalar>> parameters() {
    std::vector<ParamRef<Scalar>> params;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      auto& block = blocks_[b];
      const std::string prefix = "frontend." + std::to_string(b) + ".";
      params.push_back({prefix + "phi", &block.phi(), &block.grad_phi(), window_learnable(block.config().variant)});
      params.push_back({prefix + "band_raw", &block.band_raw(), &block.grad_band_raw(),
                        bands_learnable(block.config().variant)});
    }
    for (auto& ref : head_.refs()) params.push_back({ref.name, ref.value, ref.grad, true});
    return params;
  }

  /// Number of trainable scalars under the configured variants.
  Eigen::Index parameter_count() const {
    Eigen::Index total = head_.parameter_count();
    for (const auto& b : blocks_) total += b.parameter_count();
    return total;
  }

 private:
  static Scalar class_weight(std::span<const Scalar> weights, int label) {
    return weights.empty() ? Scalar(1) : weights[static_cast<std::size_t>(label)];
  }

  void backward_frontend(const ModelTrace<Scalar>& trace, ChannelMatrix<Scalar> grad,
                         std::vector<Matrix<Scalar>>& tap_grads) const {
    // Walk blocks from last to first; a block needs its input gradient only
    // when something before it is learnable.
    std::vector<bool> learnable_before(blocks_.size(), false);
    for (std::size_t b = 1; b < blocks_.size(); ++b) {
      learnable_before[b] = learnable_before[b - 1] || blocks_[b - 1].parameter_count() > 0;
    }
    for (std::size_t i = blocks_.size(); i-- > 0;) {
      const bool need_input = learnable_before[i];
      if (blocks_[i].parameter_count() == 0 && !need_input) break;
      const Vector<Scalar> grad_input = blocks_[i].backward(trace.blocks[i], grad, tap_grads[i], need_input);
      if (!need_input) break;
      // Input was the channel mean of the previous output.
      const Eigen::Index channels = trace.blocks[i - 1].out.rows();
      grad = (grad_input.transpose() / static_cast<Scalar>(channels)).replicate(channels, 1);
    }
  }

  ModelConfig config_;
  std::vector<FrontendBlock<Scalar>> blocks_;
  Classifier<Scalar> head_;
};

}  // namespace iconnet
