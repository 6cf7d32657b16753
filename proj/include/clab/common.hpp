#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace clab {

// Raised when a computation produces values that make the result meaningless
// (non-finite intermediates, overflow in strict rounding, singular solves).
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline void require_finite(double x, const char* where) {
  if (!std::isfinite(x)) throw numerical_error(std::string("non-finite value in ") + where);
}

}  // namespace clab
