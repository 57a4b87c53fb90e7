#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "superstat/timeseries.hpp"

namespace testutil {

// Consecutive in-session minutes starting at the open of day `day0`.
inline std::vector<std::int64_t> minutes(std::size_t n, const superstat::Calendar& cal = {}, std::int64_t day0 = 12418) {
  std::vector<std::int64_t> ts;
  ts.reserve(n);
  const auto len = static_cast<std::size_t>(cal.session_length());
  for (std::size_t i = 0; i < n; ++i)
    ts.push_back((day0 + static_cast<std::int64_t>(i / len)) * superstat::kMinutesPerDay + cal.session_open +
                 static_cast<std::int64_t>(i % len));
  return ts;
}

inline superstat::Series series(std::vector<double> v, const superstat::Calendar& cal = {}) {
  auto ts = minutes(v.size(), cal);
  return superstat::Series(std::move(ts), std::move(v), cal);
}

inline std::vector<double> normals(std::size_t n, double mean, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> N(mean, sd);
  std::vector<double> out(n);
  for (auto& x : out) x = N(rng);
  return out;
}

}  // namespace testutil
