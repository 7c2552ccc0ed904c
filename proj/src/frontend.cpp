#include "iconnet/frontend.hpp"

#include <algorithm>
#include <cmath>

#include "iconnet/resample.hpp"

namespace iconnet {

Variant parse_variant(std::string_view name) {
  if (name == "B") return Variant::kB;
  if (name == "W") return Variant::kW;
  if (name == "BW") return Variant::kBW;
  if (name == "FIXED") return Variant::kFixed;
  throw InvalidArgument("unknown variant '" + std::string(name) + "' (expected B, W, BW or FIXED)");
}

std::string_view to_string(Variant variant) {
  switch (variant) {
    case Variant::kB: return "B";
    case Variant::kW: return "W";
    case Variant::kBW: return "BW";
    case Variant::kFixed: return "FIXED";
  }
  return "unknown";
}

ChannelMatrix<double> combine_outputs(const std::vector<ChannelMatrix<double>>& outputs,
                                      const std::vector<double>& rates) {
  require(!outputs.empty(), "nothing to combine");
  require(outputs.size() == rates.size(), "one rate per output is required");
  const double target = *std::min_element(rates.begin(), rates.end());
  require(target > 0.0, "rates must be positive");

  std::vector<ChannelMatrix<double>> aligned;
  aligned.reserve(outputs.size());
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    const double ratio = rates[i] / target;
    const double whole = std::round(ratio);
    if (std::abs(ratio - whole) < 1e-9) {
      aligned.push_back(downsample(outputs[i], static_cast<Eigen::Index>(whole)));
      continue;
    }
    const ChannelMatrix<double>& x = outputs[i];
    const auto from = static_cast<int>(std::lround(rates[i]));
    const auto to = static_cast<int>(std::lround(target));
    ChannelMatrix<double> y;
    for (Eigen::Index c = 0; c < x.rows(); ++c) {
      const Vector<double> row = x.row(c).transpose();
      const std::vector<double> r =
          resample(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), from, to);
      if (c == 0) y.resize(x.rows(), static_cast<Eigen::Index>(r.size()));
      y.row(c) = Eigen::Map<const Eigen::RowVectorXd>(r.data(), static_cast<Eigen::Index>(r.size()));
    }
    aligned.push_back(std::move(y));
  }

  Eigen::Index shortest = aligned.front().cols();
  Eigen::Index longest = shortest;
  Eigen::Index channels = 0;
  for (const auto& a : aligned) {
    shortest = std::min(shortest, a.cols());
    longest = std::max(longest, a.cols());
    channels += a.rows();
  }
  require(longest - shortest <= 1, "combined outputs differ by more than one sample after resampling");

  ChannelMatrix<double> combined(channels, shortest);
  Eigen::Index row = 0;
  for (const auto& a : aligned) {
    combined.middleRows(row, a.rows()) = a.leftCols(shortest);
    row += a.rows();
  }
  return combined;
}

}  // namespace iconnet
