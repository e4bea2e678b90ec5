#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace annih {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Requested truncation bound cannot even host the reaction stoichiometry.
struct InvalidTruncationError : Error {
  using Error::Error;
};

// Probability leaked past n_max beyond the distribution's declared tail
// tolerance; carries a suggestion for a bound that should suffice.
struct TruncationOverflowError : Error {
  TruncationOverflowError(const std::string& msg, int required)
      : Error(msg), required_n_max(required) {}
  int required_n_max;
};

struct DomainError : Error {
  using Error::Error;
};

struct StepSizeError : Error {
  using Error::Error;
};

struct EmptyEnsembleError : Error {
  using Error::Error;
};

struct InsufficientEnsembleError : Error {
  using Error::Error;
};

struct ProximityError : Error {
  using Error::Error;
};

struct ResolutionError : Error {
  using Error::Error;
};

struct RangeError : Error {
  using Error::Error;
};

struct AlignmentError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  ConfigError(const std::string& msg, std::string pointer_)
      : Error(msg + " (at " + pointer_ + ")"), pointer(std::move(pointer_)) {}
  std::string pointer;  // JSON pointer to the offending field
};

struct EngineError : Error {
  EngineError(const std::string& msg, std::string engine_)
      : Error("engine '" + engine_ + "': " + msg), engine(std::move(engine_)) {}
  std::string engine;
};

}  // namespace annih
