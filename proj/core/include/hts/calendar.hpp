#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace hts {

// Seconds since 1970-01-01T00:00:00 UTC.
using Timestamp = std::int64_t;

// Accepts "YYYY-MM-DD", "YYYY-MM-DDTHH:MM[:SS]" and "YYYY-MM-DD HH:MM[:SS]".
// A bare integer is taken as a step index and mapped to that many days after
// the epoch, which keeps calendar features defined for synthetic indices.
Timestamp parse_timestamp(std::string_view text);

// Date-only form when the time of day is midnight, ISO date-time otherwise.
std::string format_timestamp(Timestamp ts);

// 0 = Monday ... 6 = Sunday.
int day_of_week(Timestamp ts);
// 1..12
int month_of(Timestamp ts);
// 0..23
int hour_of(Timestamp ts);

struct CalendarSpec {
    bool day_of_week = true;
    bool month = true;
    bool hour = false;

    // One-hot widths with the first category dropped: 6, 11 and 23.
    std::size_t width() const;
    bool empty() const { return width() == 0; }
};

// Parses a comma list such as "dow,month" or "dow,hour"; "none" or "" is empty.
CalendarSpec parse_calendar_spec(std::string_view list);
std::string to_string(const CalendarSpec &spec);

// Dummies in the order day-of-week, month, hour; the first category of each
// block (Monday, January, midnight) is the all-zero reference.
std::vector<double> calendar_features(const CalendarSpec &spec, Timestamp ts);
void append_calendar_features(const CalendarSpec &spec, Timestamp ts, std::vector<double> &out);

} // namespace hts
