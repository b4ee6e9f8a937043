#pragma once

#include "hefs/core.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace hefs {

/// Generated feature columns; rows before `valid_from` hold NaN and are trimmed downstream.
struct FeatureBlock {
    Matrix values;
    std::vector<std::string> names;
    std::size_t valid_from = 0;
};

namespace detail {
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

// ---------------------------------------------------------------------------
// Lags and rolling windows
// ---------------------------------------------------------------------------

/// Column j holds y shifted forward by orders[j].
inline FeatureBlock make_lags(std::span<const double> y, std::span<const int> orders) {
    FeatureBlock out{Matrix(y.size(), orders.size(), detail::kNaN), {}, 0};
    for (std::size_t j = 0; j < orders.size(); ++j) {
        const int k = orders[j];
        if (k < 1) throw Error(ErrorKind::InvalidArgument, "lag orders must be >= 1");
        if (static_cast<std::size_t>(k) >= y.size())
            throw Error(ErrorKind::LagTooLarge, "lag " + std::to_string(k) + " needs more than " + std::to_string(y.size()) + " samples");
        const auto lag = static_cast<std::size_t>(k);
        for (std::size_t t = lag; t < y.size(); ++t) out.values(t, j) = y[t - lag];
        out.names.push_back("lag_" + std::to_string(k));
        out.valid_from = std::max(out.valid_from, lag);
    }
    return out;
}

struct RollingStats {
    std::vector<double> means;
    std::vector<double> stds;  // population standard deviation
    std::size_t valid_from = 0;
};

/// Trailing statistics over y[t-lag-window+1 .. t-lag]; lag 1 is the window ending just before t.
inline RollingStats rolling_stats_at_lag(std::span<const double> y, int window, int lag) {
    if (window < 2) throw Error(ErrorKind::InvalidArgument, "rolling window must be >= 2");
    if (lag < 1) throw Error(ErrorKind::InvalidArgument, "rolling lag must be >= 1");
    const auto w = static_cast<std::size_t>(window);
    const auto k = static_cast<std::size_t>(lag);
    if (w > y.size()) throw Error(ErrorKind::WindowTooLarge, "window " + std::to_string(window) + " exceeds series length " + std::to_string(y.size()));
    RollingStats out{std::vector<double>(y.size(), detail::kNaN), std::vector<double>(y.size(), detail::kNaN), k + w - 1};
    for (std::size_t t = out.valid_from; t < y.size(); ++t) {
        const std::size_t last = t - k;
        const std::size_t first = last + 1 - w;
        double mean = 0.0;
        for (std::size_t i = first; i <= last; ++i) mean += y[i];
        mean /= static_cast<double>(w);
        double var = 0.0;
        for (std::size_t i = first; i <= last; ++i) var += (y[i] - mean) * (y[i] - mean);
        out.means[t] = mean;
        out.stds[t] = std::sqrt(var / static_cast<double>(w));
    }
    return out;
}

/// Trailing mean and population std over the `window` values strictly before t.
inline RollingStats rolling_stats(std::span<const double> y, int window) { return rolling_stats_at_lag(y, window, 1); }

// ---------------------------------------------------------------------------
// Calendar encodings
// ---------------------------------------------------------------------------

enum class CalendarPart { Hour, DayOfMonth, DayOfWeek, Month, Quarter, WeekOfYear };

inline constexpr CalendarPart kAllCalendarParts[] = {CalendarPart::Hour,  CalendarPart::DayOfMonth, CalendarPart::DayOfWeek,
                                                     CalendarPart::Month, CalendarPart::Quarter,    CalendarPart::WeekOfYear};

inline const char* to_string(CalendarPart part) {
    switch (part) {
        case CalendarPart::Hour: return "hour";
        case CalendarPart::DayOfMonth: return "day_of_month";
        case CalendarPart::DayOfWeek: return "day_of_week";
        case CalendarPart::Month: return "month";
        case CalendarPart::Quarter: return "quarter";
        case CalendarPart::WeekOfYear: return "week_of_year";
    }
    return "?";
}

inline CalendarPart parse_calendar_part(const std::string& name) {
    for (CalendarPart p : kAllCalendarParts)
        if (name == to_string(p)) return p;
    throw Error(ErrorKind::ConfigError, "unknown calendar part '" + name + "'");
}

namespace detail {

/// ISO-8601 week number (1-based) and the number of ISO weeks in that ISO year.
inline std::pair<int, int> iso_week(std::chrono::sys_days day) {
    using namespace std::chrono;
    auto weeks_in = [](int iso_year) {
        // A year has 53 ISO weeks when Dec 28 falls in week 53, i.e. Jan 1 is a Thursday, or a leap-year Wednesday.
        const weekday jan1{sys_days{year{iso_year} / January / 1}};
        const bool leap = year{iso_year}.is_leap();
        return (jan1 == Thursday || (leap && jan1 == Wednesday)) ? 53 : 52;
    };
    auto week1_monday = [](int iso_year) {
        const sys_days jan4{year{iso_year} / January / 4};
        return jan4 - (weekday{jan4} - Monday);
    };
    int y = static_cast<int>(year_month_day{day}.year());
    sys_days start = week1_monday(y + 1);
    if (day >= start) {
        y += 1;
    } else {
        start = week1_monday(y);
        if (day < start) {
            y -= 1;
            start = week1_monday(y);
        }
    }
    const int week = static_cast<int>((day - start).count() / 7) + 1;
    return {week, weeks_in(y)};
}

}  // namespace detail

/// Ordinal value and period of one calendar part at a timestamp; ordinals are zero-based.
inline std::pair<int, int> calendar_ordinal(Timestamp ts, CalendarPart part) {
    using namespace std::chrono;
    const sys_days day = floor<days>(ts);
    const year_month_day ymd{day};
    switch (part) {
        case CalendarPart::Hour:
            return {static_cast<int>(duration_cast<hours>(ts - day).count()), 24};
        case CalendarPart::DayOfMonth: {
            const auto last = year_month_day_last{ymd.year(), month_day_last{ymd.month()}}.day();
            return {static_cast<int>(static_cast<unsigned>(ymd.day())) - 1, static_cast<int>(static_cast<unsigned>(last))};
        }
        case CalendarPart::DayOfWeek:
            return {static_cast<int>(weekday{day}.iso_encoding()) - 1, 7};
        case CalendarPart::Month:
            return {static_cast<int>(static_cast<unsigned>(ymd.month())) - 1, 12};
        case CalendarPart::Quarter:
            return {(static_cast<int>(static_cast<unsigned>(ymd.month())) - 1) / 3, 4};
        case CalendarPart::WeekOfYear: {
            const auto [week, weeks] = detail::iso_week(day);
            return {week - 1, weeks};
        }
    }
    return {0, 1};
}

/// Two columns (sin, cos) of 2*pi*v/P per requested part, in canonical part order.
inline FeatureBlock calendar_features(std::span<const Timestamp> timestamps, const std::set<CalendarPart>& parts) {
    FeatureBlock out{Matrix(timestamps.size(), 2 * parts.size()), {}, 0};
    std::size_t col = 0;
    for (CalendarPart part : kAllCalendarParts) {
        if (!parts.contains(part)) continue;
        for (std::size_t t = 0; t < timestamps.size(); ++t) {
            const auto [v, period] = calendar_ordinal(timestamps[t], part);
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(v) / static_cast<double>(period);
            out.values(t, col) = std::sin(angle);
            out.values(t, col + 1) = std::cos(angle);
        }
        out.names.push_back(std::string(to_string(part)) + "_sin");
        out.names.push_back(std::string(to_string(part)) + "_cos");
        col += 2;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Min-max scaling
// ---------------------------------------------------------------------------

struct ScalerParams {
    double min = 0.0;
    double max = 1.0;

    bool degenerate() const noexcept { return !(max > min); }
};

inline ScalerParams minmax_fit(std::span<const double> train) {
    if (train.empty()) throw Error(ErrorKind::EmptyInput, "minmax_fit on empty window");
    const auto [lo, hi] = std::minmax_element(train.begin(), train.end());
    if (!std::isfinite(*lo) || !std::isfinite(*hi)) throw Error(ErrorKind::InvalidArgument, "minmax_fit on non-finite values");
    return {*lo, *hi};
}

/// Linear map min->0, max->1 without clipping. A degenerate range maps everything to 0.5.
inline std::vector<double> minmax_apply(const ScalerParams& p, std::span<const double> x) {
    std::vector<double> out(x.size());
    if (p.degenerate()) {
        warn(std::string(to_string(ErrorKind::DegenerateRange)) + ": min-max scaler fitted on a constant window");
        std::fill(out.begin(), out.end(), 0.5);
        return out;
    }
    const double span = p.max - p.min;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - p.min) / span;
    return out;
}

inline std::vector<double> minmax_invert(const ScalerParams& p, std::span<const double> x) {
    std::vector<double> out(x.size());
    const double span = p.degenerate() ? 0.0 : p.max - p.min;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = p.min + x[i] * span;
    return out;
}

// ---------------------------------------------------------------------------
// Recipes
// ---------------------------------------------------------------------------

struct FeatureRecipe {
    std::vector<int> lag_orders{1, 2, 3, 4};
    std::vector<int> rolling_windows{4, 8};
    std::vector<int> rolling_lag_orders{1};  // lag series the rolling windows are anchored on
    std::set<CalendarPart> calendar_parts;

    void validate() const {
        for (int k : lag_orders)
            if (k < 1) throw Error(ErrorKind::InvalidArgument, "lag orders must be >= 1");
        for (int w : rolling_windows)
            if (w < 2) throw Error(ErrorKind::InvalidArgument, "rolling windows must be >= 2");
        for (int k : rolling_lag_orders)
            if (k < 1) throw Error(ErrorKind::InvalidArgument, "rolling lag orders must be >= 1");
    }
};

/// Lags followed by rolling mean/std for every (anchor lag, window) pair.
inline FeatureBlock make_history_features(std::span<const double> y, const FeatureRecipe& recipe) {
    recipe.validate();
    FeatureBlock lags = make_lags(y, recipe.lag_orders);
    std::vector<RollingStats> rolls;
    std::vector<std::string> roll_names;
    std::size_t valid_from = lags.valid_from;
    for (int k : recipe.rolling_lag_orders) {
        for (int w : recipe.rolling_windows) {
            rolls.push_back(rolling_stats_at_lag(y, w, k));
            valid_from = std::max(valid_from, rolls.back().valid_from);
            const std::string suffix = "_w" + std::to_string(w) + (k == 1 ? "" : "_l" + std::to_string(k));
            roll_names.push_back("roll_mean" + suffix);
            roll_names.push_back("roll_std" + suffix);
        }
    }
    FeatureBlock out{Matrix(y.size(), lags.values.cols() + 2 * rolls.size()), lags.names, valid_from};
    for (std::size_t t = 0; t < y.size(); ++t) {
        for (std::size_t j = 0; j < lags.values.cols(); ++j) out.values(t, j) = lags.values(t, j);
        for (std::size_t r = 0; r < rolls.size(); ++r) {
            out.values(t, lags.values.cols() + 2 * r) = rolls[r].means[t];
            out.values(t, lags.values.cols() + 2 * r + 1) = rolls[r].stds[t];
        }
    }
    out.names.insert(out.names.end(), roll_names.begin(), roll_names.end());
    if (valid_from >= y.size()) throw Error(ErrorKind::WindowTooLarge, "history features leave no valid rows");
    return out;
}

/// Hourly timestamps starting at the Unix epoch.
inline std::vector<Timestamp> synthetic_hourly_timestamps(std::size_t n) {
    std::vector<Timestamp> ts(n);
    for (std::size_t i = 0; i < n; ++i) ts[i] = Timestamp{std::chrono::hours{static_cast<long long>(i)}};
    return ts;
}

}  // namespace hefs
