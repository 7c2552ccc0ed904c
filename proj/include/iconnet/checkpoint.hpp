#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "iconnet/config.hpp"
#include "iconnet/nn.hpp"

namespace iconnet {

// Layout (all integers little-endian):
//   "ICON" | u32 version | u32 n | n bytes JSON metadata
//   u32 tensor count, then per tensor:
//   u32 name length | name | u32 ndim | ndim x u64 dims | float64 data, row-major

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<double> data;  // row-major
};

struct Checkpoint {
  ModelConfig model;
  std::vector<std::string> class_names;
  Precision precision = Precision::kFloat64;
  std::map<std::string, Tensor> tensors;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
/// Throws FormatError on bad magic, unknown version or truncated content.
Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes);
Checkpoint read_checkpoint(const std::filesystem::path& path);

template <typename Scalar>
Tensor to_tensor(const Matrix<Scalar>& m) {
  Tensor t;
  t.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  t.data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) t.data.push_back(static_cast<double>(m(r, c)));
  }
  return t;
}

template <typename Scalar>
Matrix<Scalar> from_tensor(const Tensor& t, const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  if (t.dims.size() != 2 || t.dims[0] != static_cast<std::uint64_t>(rows) ||
      t.dims[1] != static_cast<std::uint64_t>(cols)) {
    throw FormatError("tensor " + name + " has shape incompatible with " + std::to_string(rows) + "x" +
                      std::to_string(cols));
  }
  Matrix<Scalar> m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = static_cast<Scalar>(t.data[static_cast<std::size_t>(r * cols + c)]);
  }
  return m;
}

template <typename Scalar>
Checkpoint make_checkpoint(const Model<Scalar>& model, std::vector<std::string> class_names, Precision precision) {
  Checkpoint ck;
  ck.model = model.config();
  ck.class_names = std::move(class_names);
  ck.precision = precision;
  for (std::size_t b = 0; b < model.blocks().size(); ++b) {
    const auto& block = model.blocks()[b];
    const std::string prefix = "frontend." + std::to_string(b) + ".";
    ck.tensors[prefix + "phi"] = to_tensor(block.phi());
    ck.tensors[prefix + "band_raw"] = to_tensor(block.band_raw());
    ck.tensors[prefix + "band"] = to_tensor(block.bands());
    Matrix<double> grid(block.num_kernels(), 1);
    for (Eigen::Index c = 0; c < block.num_kernels(); ++c) grid(c, 0) = block.grid()[static_cast<std::size_t>(c)];
    ck.tensors[prefix + "grid"] = to_tensor(grid);
  }
  for (const auto& [name, value] : model.head().named_tensors()) ck.tensors[name] = to_tensor(*value);
  return ck;
}

template <typename Scalar>
Model<Scalar> model_from_checkpoint(const Checkpoint& ck) {
  const auto tensor = [&](const std::string& name) -> const Tensor& {
    const auto it = ck.tensors.find(name);
    if (it == ck.tensors.end()) throw FormatError("checkpoint is missing tensor " + name);
    return it->second;
  };
  Model<Scalar> model = Model<Scalar>::create(ck.model, 0);
  for (std::size_t b = 0; b < model.blocks().size(); ++b) {
    auto& block = model.blocks()[b];
    const std::string prefix = "frontend." + std::to_string(b) + ".";
    const Eigen::Index count = block.num_kernels();
    const Tensor& phi = tensor(prefix + "phi");
    if (phi.dims.size() != 2) throw FormatError("tensor " + prefix + "phi must be 2-D");
    block.phi() = from_tensor<Scalar>(phi, prefix + "phi", count, static_cast<Eigen::Index>(phi.dims[1]));
    block.band_raw() = from_tensor<Scalar>(tensor(prefix + "band_raw"), prefix + "band_raw", count, 2);
    block.set_bands(from_tensor<Scalar>(tensor(prefix + "band"), prefix + "band", count, 2));
    const Matrix<double> grid = from_tensor<double>(tensor(prefix + "grid"), prefix + "grid", count, 1);
    std::vector<int> labels;
    for (Eigen::Index c = 0; c < count; ++c) labels.push_back(static_cast<int>(grid(c, 0)));
    block.set_grid(std::move(labels));
    block.zero_grad();
  }
  for (auto& ref : model.head().refs()) {
    *ref.value = from_tensor<Scalar>(tensor(ref.name), ref.name, ref.value->rows(), ref.value->cols());
  }
  model.refresh();
  return model;
}

}  // namespace iconnet
