#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgdlm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;
using IndexList = std::vector<std::size_t>;

// Error taxonomy. Every module reports failures through one of these so the
// driver can map them to a structured message and a nonzero exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

class StructuralError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "structural"; }
};

class NumericalError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "numerical"; }
};

class DegeneracyError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "degeneracy"; }
};

class DimensionError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "dimension"; }
};

class IngestionError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "ingestion"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "config"; }
};

/// Execution policy for the data-parallel kernels. `serial` is the reference
/// path; `parallel` must produce bitwise-identical output.
enum class Exec { serial, parallel };

}  // namespace sgdlm
