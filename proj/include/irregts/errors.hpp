#pragma once

#include <stdexcept>
#include <string>

namespace irregts {

// Every failure the library raises carries one of these kinds so callers
// (and tests) can tell a shape bug from a bad file from a diverged solve.
enum class ErrorKind {
  Dimension,   // shapes do not conform
  Config,      // invalid configuration value / unknown key
  State,       // operation invoked in the wrong state (missing tape, missing c, ...)
  Numeric,     // non-finite value or divergence
  Ordering,    // timestamps out of order
  Label,       // class index out of range
  Parse,       // malformed input file
  Validation,  // well-formed input violating an invariant
  Empty,       // empty input or empty result
  Diverged,    // training loss became non-finite
  Input,       // mismatched argument lists
  Io,          // filesystem failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }

}  // namespace irregts
