#pragma once

#include <stdexcept>
#include <string>

namespace vtt {

// Malformed arguments to a library call (duplicates, out-of-range values).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A state whose answers no valid image can produce.
class InconsistentState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition (e.g. querying a strategy on a
// terminal state, or a strategy returning an asked question).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Every question has already been asked.
class Exhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Annotation or checkpoint files that violate their schema.
class SchemaViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vtt
