#include "hts/calendar.hpp"

#include "hts/error.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>

namespace hts {

namespace {

using namespace std::chrono;

constexpr std::int64_t kSecondsPerDay = 86400;

int parse_int(std::string_view text, std::string_view whole) {
    int value = 0;
    const auto *first = text.data();
    const auto *last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw DataError("malformed timestamp '" + std::string(whole) + "'");
    }
    return value;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) {
        --q;
    }
    return q;
}

year_month_day civil(Timestamp ts) {
    return year_month_day{sys_days{days{floor_div(ts, kSecondsPerDay)}}};
}

} // namespace

Timestamp parse_timestamp(std::string_view text) {
    if (text.empty()) {
        throw DataError("empty timestamp");
    }
    const bool is_index = text.find('-') == std::string_view::npos || text.front() == '-';
    if (is_index && text.find(':') == std::string_view::npos) {
        std::int64_t idx = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), idx);
        if (ec != std::errc{} || ptr != text.data() + text.size()) {
            throw DataError("malformed timestamp '" + std::string(text) + "'");
        }
        return idx * kSecondsPerDay;
    }
    if (text.size() < 10 || text[4] != '-' || text[7] != '-') {
        throw DataError("malformed timestamp '" + std::string(text) + "'");
    }
    const int y = parse_int(text.substr(0, 4), text);
    const int mo = parse_int(text.substr(5, 2), text);
    const int d = parse_int(text.substr(8, 2), text);
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) {
        throw DataError("invalid date '" + std::string(text) + "'");
    }
    std::int64_t secs = 0;
    if (text.size() > 10) {
        if ((text[10] != 'T' && text[10] != ' ') || text.size() < 16 || text[13] != ':') {
            throw DataError("malformed timestamp '" + std::string(text) + "'");
        }
        const int hh = parse_int(text.substr(11, 2), text);
        const int mm = parse_int(text.substr(14, 2), text);
        int ss = 0;
        if (text.size() > 16) {
            if (text.size() != 19 || text[16] != ':') {
                throw DataError("malformed timestamp '" + std::string(text) + "'");
            }
            ss = parse_int(text.substr(17, 2), text);
        }
        if (hh > 23 || mm > 59 || ss > 59 || hh < 0 || mm < 0 || ss < 0) {
            throw DataError("invalid time of day '" + std::string(text) + "'");
        }
        secs = hh * 3600 + mm * 60 + ss;
    }
    return static_cast<std::int64_t>(sys_days{ymd}.time_since_epoch().count()) * kSecondsPerDay + secs;
}

std::string format_timestamp(Timestamp ts) {
    const auto ymd = civil(ts);
    const std::int64_t secs = ts - floor_div(ts, kSecondsPerDay) * kSecondsPerDay;
    char buf[32];
    if (secs == 0) {
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    } else {
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                      static_cast<int>(secs / 3600), static_cast<int>((secs / 60) % 60),
                      static_cast<int>(secs % 60));
    }
    return buf;
}

int day_of_week(Timestamp ts) {
    const weekday wd{sys_days{days{floor_div(ts, kSecondsPerDay)}}};
    return static_cast<int>(wd.iso_encoding()) - 1;
}

int month_of(Timestamp ts) {
    return static_cast<int>(static_cast<unsigned>(civil(ts).month()));
}

int hour_of(Timestamp ts) {
    const std::int64_t secs = ts - floor_div(ts, kSecondsPerDay) * kSecondsPerDay;
    return static_cast<int>(secs / 3600);
}

std::size_t CalendarSpec::width() const {
    return (day_of_week ? 6 : 0) + (month ? 11 : 0) + (hour ? 23 : 0);
}

CalendarSpec parse_calendar_spec(std::string_view list) {
    CalendarSpec spec{false, false, false};
    if (list.empty() || list == "none") {
        return spec;
    }
    std::size_t start = 0;
    while (start <= list.size()) {
        const auto comma = list.find(',', start);
        const auto item = list.substr(start, comma == std::string_view::npos ? list.size() - start : comma - start);
        if (item == "dow" || item == "day_of_week") {
            spec.day_of_week = true;
        } else if (item == "month") {
            spec.month = true;
        } else if (item == "hour") {
            spec.hour = true;
        } else if (!item.empty()) {
            throw ConfigError("unknown calendar feature '" + std::string(item) + "'");
        }
        if (comma == std::string_view::npos) {
            break;
        }
        start = comma + 1;
    }
    return spec;
}

std::string to_string(const CalendarSpec &spec) {
    std::string out;
    auto add = [&out](const char *name) {
        if (!out.empty()) {
            out += ',';
        }
        out += name;
    };
    if (spec.day_of_week) add("dow");
    if (spec.month) add("month");
    if (spec.hour) add("hour");
    return out.empty() ? "none" : out;
}

void append_calendar_features(const CalendarSpec &spec, Timestamp ts, std::vector<double> &out) {
    auto one_hot = [&out](int category, int count) {
        for (int c = 1; c < count; ++c) {
            out.push_back(category == c ? 1.0 : 0.0);
        }
    };
    if (spec.day_of_week) one_hot(day_of_week(ts), 7);
    if (spec.month) one_hot(month_of(ts) - 1, 12);
    if (spec.hour) one_hot(hour_of(ts), 24);
}

std::vector<double> calendar_features(const CalendarSpec &spec, Timestamp ts) {
    std::vector<double> out;
    out.reserve(spec.width());
    append_calendar_features(spec, ts, out);
    return out;
}

} // namespace hts
