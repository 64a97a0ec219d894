#pragma once

#include <charconv>
#include <chrono>
#include <cstdio>
#include <string>
#include <string_view>

#include "lightweather/errors.hpp"

namespace lightweather {

using Timestamp = std::chrono::sys_seconds;

/// Calendar indices used to address the hour/day/month embedding tables.
struct TimeFeature {
    int hour = 0;         // [0, 24)
    int day_index = 0;    // day of month - 1, [0, 31)
    int month_index = 0;  // month - 1, [0, 12)

    friend bool operator==(const TimeFeature&, const TimeFeature&) = default;
};

inline void validate(const TimeFeature& tf) {
    if (tf.hour < 0 || tf.hour >= 24 || tf.day_index < 0 || tf.day_index >= 31 || tf.month_index < 0 ||
        tf.month_index >= 12) {
        throw ValidationError("time feature out of range: hour=" + std::to_string(tf.hour) +
                              " day_index=" + std::to_string(tf.day_index) +
                              " month_index=" + std::to_string(tf.month_index));
    }
}

inline TimeFeature time_feature(Timestamp ts) {
    using namespace std::chrono;
    const auto day = floor<days>(ts);
    const year_month_day ymd{day};
    const hh_mm_ss hms{ts - day};
    return TimeFeature{static_cast<int>(hms.hours().count()), static_cast<int>(unsigned(ymd.day())) - 1,
                       static_cast<int>(unsigned(ymd.month())) - 1};
}

/// 1-based ordinal day within the year (Jan 1 is 1).
inline int day_of_year(Timestamp ts) {
    using namespace std::chrono;
    const auto day = floor<days>(ts);
    const year_month_day ymd{day};
    const sys_days jan1{ymd.year() / January / 1};
    return static_cast<int>((day - jan1).count()) + 1;
}

/// Fractional hour of day in [0, 24).
inline double hour_of_day(Timestamp ts) {
    using namespace std::chrono;
    const auto since_midnight = ts - floor<days>(ts);
    return static_cast<double>(since_midnight.count()) / 3600.0;
}

namespace detail {

inline bool parse_fixed(std::string_view s, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    const char* first = s.data() + pos;
    const char* last = first + len;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc{} && ptr == last;
}

}  // namespace detail

/// Parses `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM`, `YYYY-MM-DDTHH:MM:SS` (a space may
/// replace `T`; a trailing `Z` is accepted). Times are taken as UTC.
inline Timestamp parse_timestamp(std::string_view text) {
    using namespace std::chrono;
    std::string_view s = text;
    if (!s.empty() && (s.back() == 'Z' || s.back() == 'z')) s.remove_suffix(1);
    auto fail = [&]() -> Timestamp {
        throw ValidationError("unparsable timestamp '" + std::string(text) + "'");
    };
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
    if (s.size() < 10 || s[4] != '-' || s[7] != '-') return fail();
    if (!detail::parse_fixed(s, 0, 4, y) || !detail::parse_fixed(s, 5, 2, mo) || !detail::parse_fixed(s, 8, 2, d)) {
        return fail();
    }
    if (s.size() > 10) {
        if ((s[10] != 'T' && s[10] != ' ') || s.size() < 16 || s[13] != ':') return fail();
        if (!detail::parse_fixed(s, 11, 2, h) || !detail::parse_fixed(s, 14, 2, mi)) return fail();
        if (s.size() > 16) {
            if (s.size() != 19 || s[16] != ':' || !detail::parse_fixed(s, 17, 2, sec)) return fail();
        }
    }
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || sec > 59 || h < 0 || mi < 0 || sec < 0) return fail();
    return sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec};
}

inline std::string format_timestamp(Timestamp ts) {
    using namespace std::chrono;
    const auto day = floor<days>(ts);
    const year_month_day ymd{day};
    const hh_mm_ss hms{ts - day};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                  unsigned(ymd.month()), unsigned(ymd.day()), static_cast<int>(hms.hours().count()),
                  static_cast<int>(hms.minutes().count()), static_cast<int>(hms.seconds().count()));
    return buf;
}

}  // namespace lightweather
