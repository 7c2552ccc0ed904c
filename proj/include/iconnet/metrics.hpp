#pragma once

#include <span>
#include <vector>

#include "iconnet/common.hpp"

namespace iconnet {

/// Classification scores in percent. confusion(true, predicted) holds counts.
struct MetricsReport {
  double ua = 0.0;
  double uf1 = 0.0;
  double f1_weighted = 0.0;
  Eigen::MatrixXi confusion;
};

/// UA and UF1 average over classes with non-zero support; weighted F1 uses
/// support as weights. F1 is 0 when precision + recall is 0.
MetricsReport compute_metrics(std::span<const int> predictions, std::span<const int> labels, int num_classes);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
};

MeanStd mean_std(std::span<const double> values);

}  // namespace iconnet
