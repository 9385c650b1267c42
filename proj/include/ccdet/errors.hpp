#pragma once

#include <stdexcept>
#include <string>

namespace ccdet {

// Malformed or inconsistent input files / arguments. The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CorruptRleError : public InputError {
 public:
  using InputError::InputError;
};

class DimensionMismatchError : public InputError {
 public:
  using InputError::InputError;
};

class EmptyMaskError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A cluster for which one or more criteria are undefined.
class DegenerateClusterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingletonClusterError : public DegenerateClusterError {
 public:
  using DegenerateClusterError::DegenerateClusterError;
};

class MaskDegenerateError : public DegenerateClusterError {
 public:
  using DegenerateClusterError::DegenerateClusterError;
};

}  // namespace ccdet
