#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace rmtlab {

using Complex = std::complex<double>;

/// Bad arguments or a violated precondition. The CLI maps this to exit code 1.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative numerical procedure did not reach its tolerance. Exit code 2.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : std::runtime_error(what), last_residual_(last_residual) {}

  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw UsageError(message);
}

inline void require_off_axis(Complex z, const char* who) {
  if (z.imag() == 0.0) throw UsageError(std::string(who) + ": Im z must be nonzero");
}

}  // namespace rmtlab
