#ifndef TCTIP_ERRORS_HPP
#define TCTIP_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace tctip {

// Invalid parameters or configuration. CLI exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Solver failure: non-finite state, bracketing failure, missing equilibria.
// CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iterative method stopped before meeting its tolerance. CLI exit code 4.
class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, double last_value)
      : std::runtime_error(what), last_value_(last_value) {}
  double last_value() const { return last_value_; }

 private:
  double last_value_;
};

}  // namespace tctip

#endif  // TCTIP_ERRORS_HPP
