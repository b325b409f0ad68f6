#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace pancakes {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Raised when an evaluator produces a non-finite intermediate. The CLI maps
/// this to exit code 2, as opposed to precondition violations
/// (std::domain_error), which map to exit code 1.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const char* msg) {
  if (!cond) throw std::domain_error(msg);
}

inline void require_finite(double x, const char* name) {
  if (!std::isfinite(x))
    throw std::domain_error(std::string(name) + " must be finite");
}

inline void check_finite(double x, const char* where) {
  if (!std::isfinite(x))
    throw numeric_error(std::string("non-finite value in ") + where);
}

inline double sq(double x) { return x * x; }

}  // namespace pancakes
