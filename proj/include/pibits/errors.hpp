#pragma once

#include <stdexcept>

namespace pibits {

// Caller broke a documented precondition (precision mismatch, zero modulus, ...).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Checkpoint directory could not be read or written.
class StorageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Stored checkpoint state belongs to a different request or plan.
class CheckpointMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A run stopped before every job finished; completed jobs are persisted.
class Interrupted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pibits
