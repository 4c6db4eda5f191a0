#pragma once

#include <stdexcept>
#include <string>

namespace dublid {

/// Malformed arguments or violated preconditions.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// File-system or format failures. Carries the offending path.
class IoError : public std::runtime_error {
 public:
  IoError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Non-finite values, singular systems and other numerical breakdowns.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Kernel estimate vanished entirely after thresholding.
class DegenerateKernel : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Reconstruction system has a zero denominator at some frequency bin.
class IllPosedReconstruction : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace dublid
