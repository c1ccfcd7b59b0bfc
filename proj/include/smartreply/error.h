#ifndef SMARTREPLY_ERROR_H_
#define SMARTREPLY_ERROR_H_

#include <stdexcept>
#include <string>

namespace smartreply {

// Violated precondition of a public operation (bad shapes, bad config
// values, misuse). The CLI maps these to exit code 1.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Tensor shape mismatch; the message names both shapes.
class DimensionError : public ContractError {
 public:
  using ContractError::ContractError;
};

// NaN/Inf produced where finite values are required (divergent training,
// bad gradient-check evaluation).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File system / serialization failure. The CLI maps these to exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace smartreply

#endif  // SMARTREPLY_ERROR_H_
