#pragma once

#include <atomic>
#include <chrono>
#include <optional>
#include <string>
#include <string_view>

namespace mtocs {

/// UTC instant with second resolution.
using Timestamp = std::chrono::sys_seconds;
/// Calendar date without time zone.
using Date = std::chrono::year_month_day;

/// "2018-06-02T14:03:11Z"
std::string format_timestamp(Timestamp t);
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// "2018-06-02"
std::string format_date(Date d);
std::optional<Date> parse_date(std::string_view text);

Date date_of(Timestamp t);

/// Completed years between a birth date and a later date.
int age_on(Date birth, Date on);

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
 public:
  Timestamp now() const override {
    return std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now());
  }
};

/// Deterministic clock for tests; advances only when told to.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(Timestamp start) : now_(start.time_since_epoch().count()) {}

  Timestamp now() const override { return Timestamp{std::chrono::seconds{now_.load()}}; }
  void advance(std::chrono::seconds by) { now_ += by.count(); }
  void set(Timestamp t) { now_ = t.time_since_epoch().count(); }

 private:
  std::atomic<long long> now_;
};

}  // namespace mtocs
