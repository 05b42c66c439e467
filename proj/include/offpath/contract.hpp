#pragma once

#include <stdexcept>

namespace offpath {

// Thrown when a caller breaks an operation's precondition. A simulation run
// that hits one is aborted and reported as an engine error.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void expects(bool condition, const char* what) {
  if (!condition) throw ContractViolation(what);
}

}  // namespace offpath
