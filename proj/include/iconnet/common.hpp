#pragma once

#include <Eigen/Dense>

#include <numbers>
#include <stdexcept>
#include <string>

namespace iconnet {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Channel-by-time feature map: row c is channel c, column m is time step m.
template <typename Scalar>
using ChannelMatrix = Matrix<Scalar>;

template <typename Scalar>
inline constexpr Scalar kPi = std::numbers::pi_v<Scalar>;

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SignalTooShort : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed file contents (WAV, checkpoint, manifest).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite value encountered during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace iconnet
