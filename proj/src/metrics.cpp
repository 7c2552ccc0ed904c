#include "iconnet/metrics.hpp"

#include <cmath>
#include <string>

namespace iconnet {

MetricsReport compute_metrics(std::span<const int> predictions, std::span<const int> labels, int num_classes) {
  require(predictions.size() == labels.size(),
          "predictions (" + std::to_string(predictions.size()) + ") and labels (" +
              std::to_string(labels.size()) + ") differ in length");
  require(num_classes >= 1, "num_classes must be >= 1");
  MetricsReport report;
  report.confusion = Eigen::MatrixXi::Zero(num_classes, num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < num_classes, "label out of range at index " + std::to_string(i));
    require(predictions[i] >= 0 && predictions[i] < num_classes,
            "prediction out of range at index " + std::to_string(i));
    ++report.confusion(labels[i], predictions[i]);
  }

  double recall_sum = 0.0;
  double f1_sum = 0.0;
  double f1_weighted = 0.0;
  int supported = 0;
  for (int c = 0; c < num_classes; ++c) {
    const int support = report.confusion.row(c).sum();
    if (support == 0) continue;
    const int predicted = report.confusion.col(c).sum();
    const int hits = report.confusion(c, c);
    const double recall = static_cast<double>(hits) / support;
    const double precision = predicted > 0 ? static_cast<double>(hits) / predicted : 0.0;
    const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    recall_sum += recall;
    f1_sum += f1;
    f1_weighted += f1 * support;
    ++supported;
  }
  if (supported > 0) {
    report.ua = 100.0 * recall_sum / supported;
    report.uf1 = 100.0 * f1_sum / supported;
    report.f1_weighted = 100.0 * f1_weighted / static_cast<double>(labels.size());
  }
  return report;
}

MeanStd mean_std(std::span<const double> values) {
  require(!values.empty(), "cannot aggregate an empty list");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

}  // namespace iconnet
