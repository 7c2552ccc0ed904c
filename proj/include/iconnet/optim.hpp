#pragma once

#include <cmath>
#include <vector>

#include "iconnet/common.hpp"
#include "iconnet/nn.hpp"

namespace iconnet {

struct RadamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled: p -= lr * wd * p
};

/// Length of the approximated simple moving average, rho_infinity.
inline double radam_rho_inf(double beta2) { return 2.0 / (1.0 - beta2) - 1.0; }

/// rho_t = rho_inf - 2 t beta2^t / (1 - beta2^t), t >= 1.
inline double radam_rho(double beta2, long step) {
  const double b2t = std::pow(beta2, static_cast<double>(step));
  return radam_rho_inf(beta2) - 2.0 * static_cast<double>(step) * b2t / (1.0 - b2t);
}

/// Rectified Adam over a list of parameter tensors. Moments are kept in
/// float64 whatever the parameter scalar type.
template <typename Scalar>
class Radam {
 public:
  explicit Radam(RadamOptions options = {}) : options_(options) {}

  const RadamOptions& options() const { return options_; }
  long step_count() const { return step_; }

  /// One update of every learnable parameter in params using its grad.
  void step(const std::vector<ParamRef<Scalar>>& params, double lr) {
    if (first_.empty()) {
      for (const auto& p : params) {
        first_.push_back(Matrix<double>::Zero(p.value->rows(), p.value->cols()));
        second_.push_back(Matrix<double>::Zero(p.value->rows(), p.value->cols()));
      }
    }
    require(first_.size() == params.size(), "parameter list changed between optimizer steps");
    ++step_;
    const double b1 = options_.beta1;
    const double b2 = options_.beta2;
    const double bias1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    const double bias2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    const double rho_inf = radam_rho_inf(b2);
    const double rho = radam_rho(b2, step_);
    const bool rectify = rho > 4.0;
    const double rect =
        rectify ? std::sqrt((rho - 4.0) * (rho - 2.0) * rho_inf / ((rho_inf - 4.0) * (rho_inf - 2.0) * rho)) : 0.0;

    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& p = params[i];
      if (!p.learnable) continue;
      require(p.grad->rows() == first_[i].rows() && p.grad->cols() == first_[i].cols(),
              "gradient shape mismatch for " + p.name);
      const Matrix<double> g = p.grad->template cast<double>();
      first_[i] = b1 * first_[i] + (1.0 - b1) * g;
      second_[i] = b2 * second_[i] + (1.0 - b2) * g.cwiseAbs2();
      Matrix<double> value = p.value->template cast<double>();
      if (options_.weight_decay != 0.0) value *= 1.0 - lr * options_.weight_decay;
      const Matrix<double> m_hat = first_[i] / bias1;
      if (rectify) {
        const Matrix<double> denom = ((second_[i] / bias2).array().sqrt() + options_.epsilon).matrix();
        value -= (lr * rect * m_hat.array() / denom.array()).matrix();
      } else {
        value -= lr * m_hat;
      }
      *p.value = value.template cast<Scalar>();
    }
  }

 private:
  RadamOptions options_;
  long step_ = 0;
  std::vector<Matrix<double>> first_;
  std::vector<Matrix<double>> second_;
};

struct ScheduleConfig {
  double max_lr = 1e-3;
  long total_steps = 100;
  double pct_start = 0.3;
  double div_factor = 25.0;
  double final_div_factor = 1e4;
};

/// Cosine warm-up from max_lr / div_factor to max_lr at step
/// round(pct_start * total_steps), then cosine decay to
/// max_lr / final_div_factor at the last step.
double onecycle_lr(const ScheduleConfig& schedule, long step);

}  // namespace iconnet
