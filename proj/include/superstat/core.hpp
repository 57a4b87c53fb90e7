#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

namespace superstat {

/// Invalid input data or violated precondition.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative solver or quadrature failed to reach its tolerance.
/// `trace()` carries the iterate history for diagnosis.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::string trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}

  [[nodiscard]] const std::string& trace() const noexcept { return trace_; }

 private:
  std::string trace_;
};

namespace detail {

inline constexpr double kSqrt2Pi = 2.5066282746310005024;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / kSqrt2Pi; }

}  // namespace detail

}  // namespace superstat
