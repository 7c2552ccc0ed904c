#include "iconnet/nn.hpp"

namespace iconnet {

PoolKind parse_pool(std::string_view name) {
  if (name == "max") return PoolKind::kMax;
  if (name == "mean") return PoolKind::kMean;
  throw InvalidArgument("unknown pooling '" + std::string(name) + "' (expected max or mean)");
}

std::string_view to_string(PoolKind pool) { return pool == PoolKind::kMax ? "max" : "mean"; }

}  // namespace iconnet
