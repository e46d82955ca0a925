#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace edd {

/** Scalar type */
using scalar_t = double;

/** Dynamic column vector */
template <typename Scalar = scalar_t>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/** Dynamic matrix */
template <typename Scalar = scalar_t>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using vector_t = Vector<>;
using matrix_t = Matrix<>;

using seed_t = std::uint64_t;

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values or a diverged optimisation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed input, configuration or file.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Derives an independent stream seed from a base seed and a stream index
/// (splitmix64 finaliser).
constexpr seed_t derive_seed(seed_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace edd
