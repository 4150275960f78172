#pragma once

#include <stdexcept>
#include <string>

namespace hypersage {

// Malformed structural input: bad node ids, empty edges, invalid permutations
// or split plans, shape mismatches.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A computation produced NaN/Inf. Carries enough context to locate it.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing or malformed dataset files.
class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hypersage
