#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "superstat/core.hpp"

namespace superstat {

inline constexpr std::int64_t kMinutesPerDay = 1440;

/// Daily trading session in minutes of day, half-open [open, close).
struct Calendar {
  int session_open = 570;   // 09:30
  int session_close = 960;  // 16:00

  void validate() const {
    if (session_open < 0 || session_close > kMinutesPerDay || session_open >= session_close)
      throw InputError("calendar: session must satisfy 0 <= open < close <= 1440");
  }

  [[nodiscard]] int session_length() const { return session_close - session_open; }

  [[nodiscard]] static std::int64_t day_of(std::int64_t minute) {
    auto d = minute / kMinutesPerDay;
    return (minute % kMinutesPerDay < 0) ? d - 1 : d;
  }

  [[nodiscard]] static int minute_of_day(std::int64_t minute) {
    return static_cast<int>(minute - day_of(minute) * kMinutesPerDay);
  }

  [[nodiscard]] bool contains(std::int64_t minute) const {
    const int m = minute_of_day(minute);
    return m >= session_open && m < session_close;
  }

  /// Offset from the session open; only meaningful when `contains(minute)`.
  [[nodiscard]] int minute_of_session(std::int64_t minute) const {
    return minute_of_day(minute) - session_open;
  }

  friend bool operator==(const Calendar&, const Calendar&) = default;
};

/// Index range [begin, end) into a series.
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  [[nodiscard]] std::size_t size() const { return end - begin; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// Minute-stamped real sequence. Timestamps are minutes since the Unix epoch,
/// strictly increasing, and all inside a session of `calendar`.
/// Gaps between timestamps are allowed; indices stay contiguous.
class Series {
 public:
  Series() = default;

  Series(std::vector<std::int64_t> timestamps, std::vector<double> values, Calendar calendar = {})
      : timestamps_(std::move(timestamps)), values_(std::move(values)), calendar_(calendar) {
    calendar_.validate();
    if (timestamps_.size() != values_.size())
      throw InputError("series: timestamps and values differ in length");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i]))
        throw InputError("series: non-finite value at index " + std::to_string(i));
      if (!calendar_.contains(timestamps_[i]))
        throw InputError("series: timestamp at index " + std::to_string(i) + " is outside the session");
      if (i > 0 && timestamps_[i] <= timestamps_[i - 1])
        throw InputError("series: timestamps not strictly increasing at index " + std::to_string(i));
    }
  }

  [[nodiscard]] std::span<const std::int64_t> timestamps() const { return timestamps_; }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] const Calendar& calendar() const { return calendar_; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] bool empty() const { return values_.empty(); }

  /// Contiguous index ranges that share a trading day.
  [[nodiscard]] std::vector<IndexRange> sessions() const {
    std::vector<IndexRange> out;
    std::size_t begin = 0;
    for (std::size_t i = 1; i <= timestamps_.size(); ++i) {
      if (i == timestamps_.size() ||
          Calendar::day_of(timestamps_[i]) != Calendar::day_of(timestamps_[i - 1])) {
        if (i > begin) out.push_back({begin, i});
        begin = i;
      }
    }
    return out;
  }

  /// Same timestamps and calendar, new values.
  [[nodiscard]] Series with_values(std::vector<double> values) const {
    return Series(timestamps_, std::move(values), calendar_);
  }

 private:
  std::vector<std::int64_t> timestamps_;
  std::vector<double> values_;
  Calendar calendar_;
};

/// Volume divided by its series mean; `mean_volume()` keeps the divisor.
class NormalizedVolumeSeries {
 public:
  NormalizedVolumeSeries(Series normalized, double mean_volume)
      : series_(std::move(normalized)), mean_volume_(mean_volume) {}

  [[nodiscard]] const Series& series() const { return series_; }
  [[nodiscard]] std::span<const double> values() const { return series_.values(); }
  [[nodiscard]] double mean_volume() const { return mean_volume_; }

 private:
  Series series_;
  double mean_volume_;
};

/// Price differences r(t) = S(t) - S(t-1), stamped with the later minute.
class ReturnSeries {
 public:
  ReturnSeries() = default;
  explicit ReturnSeries(Series returns) : series_(std::move(returns)) {}

  [[nodiscard]] const Series& series() const { return series_; }
  [[nodiscard]] std::span<const double> values() const { return series_.values(); }
  [[nodiscard]] std::span<const std::int64_t> timestamps() const { return series_.timestamps(); }
  [[nodiscard]] std::size_t size() const { return series_.size(); }

 private:
  Series series_;
};

inline NormalizedVolumeSeries normalize_volume(const Series& raw) {
  if (raw.empty()) throw InputError("normalize_volume: empty series");
  const auto v = raw.values();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] < 0.0) throw InputError("normalize_volume: negative volume at index " + std::to_string(i));
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (!(mean > 0.0)) throw InputError("normalize_volume: zero mean volume");
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [mean](double x) { return x / mean; });
  return {raw.with_values(std::move(out)), mean};
}

/// Differences within each session. With `cross_session` the difference
/// spanning consecutive sessions is kept as well.
inline ReturnSeries price_to_returns(const Series& prices, bool cross_session = false) {
  std::vector<std::int64_t> ts;
  std::vector<double> r;
  const auto p = prices.values();
  const auto t = prices.timestamps();
  ts.reserve(p.size());
  r.reserve(p.size());
  for (const auto& s : prices.sessions()) {
    std::size_t first = s.begin + 1;
    if (cross_session && s.begin > 0) first = s.begin;
    for (std::size_t i = first; i < s.end; ++i) {
      ts.push_back(t[i]);
      r.push_back(p[i] - p[i - 1]);
    }
  }
  return ReturnSeries(Series(std::move(ts), std::move(r), prices.calendar()));
}

inline Series magnitude(const ReturnSeries& returns) {
  const auto r = returns.values();
  std::vector<double> out(r.size());
  std::transform(r.begin(), r.end(), out.begin(), [](double x) { return std::abs(x); });
  return returns.series().with_values(std::move(out));
}

// ---------------------------------------------------------------------------
// CSV ingestion: header `timestamp,price,volume`.

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_int(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

inline bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

}  // namespace detail

/// Integer minutes since epoch, or ISO-8601 `YYYY-MM-DD[T ]HH:MM[:00][Z]`.
/// Returns false when the text is not a minute-resolution timestamp.
inline bool parse_timestamp(std::string_view s, std::int64_t& minutes) {
  s = detail::trim(s);
  if (detail::parse_int(s, minutes)) return true;
  if (!s.empty() && s.back() == 'Z') s.remove_suffix(1);
  if (s.size() != 16 && s.size() != 19) return false;
  if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':') return false;
  std::int64_t y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  if (!detail::parse_int(s.substr(0, 4), y) || !detail::parse_int(s.substr(5, 2), mo) ||
      !detail::parse_int(s.substr(8, 2), d) || !detail::parse_int(s.substr(11, 2), h) ||
      !detail::parse_int(s.substr(14, 2), mi))
    return false;
  if (s.size() == 19) {
    if (s[16] != ':' || !detail::parse_int(s.substr(17, 2), sec) || sec != 0) return false;
  }
  using namespace std::chrono;
  const year_month_day ymd{year{static_cast<int>(y)}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59) return false;
  minutes = sys_days{ymd}.time_since_epoch().count() * kMinutesPerDay + h * 60 + mi;
  return true;
}

struct MarketData {
  Series price;
  Series volume;
};

struct CsvOptions {
  bool drop_zero_volume = false;
};

/// Parses the ingestion CSV. Errors carry the 1-based line number.
inline MarketData read_market_csv(std::istream& in, const Calendar& calendar, const CsvOptions& opts = {}) {
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) -> InputError {
    return InputError("line " + std::to_string(line_no) + ": " + msg);
  };
  if (!std::getline(in, line)) throw InputError("csv: empty input");
  ++line_no;
  {
    std::string header;
    for (char c : detail::trim(line))
      if (c != ' ') header.push_back(c);
    if (header != "timestamp,price,volume") throw fail("expected header 'timestamp,price,volume'");
  }
  std::vector<std::int64_t> ts;
  std::vector<double> price, volume;
  while (std::getline(in, line)) {
    ++line_no;
    const auto row = detail::trim(line);
    if (row.empty()) continue;
    const auto c1 = row.find(',');
    const auto c2 = c1 == std::string_view::npos ? c1 : row.find(',', c1 + 1);
    if (c2 == std::string_view::npos || row.find(',', c2 + 1) != std::string_view::npos)
      throw fail("expected 3 fields");
    std::int64_t t = 0;
    double p = 0.0, v = 0.0;
    if (!parse_timestamp(row.substr(0, c1), t)) throw fail("bad timestamp");
    if (!detail::parse_double(detail::trim(row.substr(c1 + 1, c2 - c1 - 1)), p) || !std::isfinite(p))
      throw fail("bad price");
    if (!detail::parse_double(detail::trim(row.substr(c2 + 1)), v) || !std::isfinite(v))
      throw fail("bad volume");
    if (v < 0.0) throw fail("negative volume");
    if (!calendar.contains(t)) throw fail("timestamp outside trading session");
    if (!ts.empty() && t <= ts.back()) throw fail("timestamps not strictly increasing");
    if (opts.drop_zero_volume && v == 0.0) continue;
    ts.push_back(t);
    price.push_back(p);
    volume.push_back(v);
  }
  if (ts.empty()) throw InputError("csv: no data rows");
  Series price_series(ts, std::move(price), calendar);
  Series volume_series(std::move(ts), std::move(volume), calendar);
  return {std::move(price_series), std::move(volume_series)};
}

inline MarketData read_market_csv(const std::string& path, const Calendar& calendar,
                                  const CsvOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open input file: " + path);
  return read_market_csv(in, calendar, opts);
}

}  // namespace superstat
