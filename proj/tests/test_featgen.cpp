#include "hefs/featgen.hpp"

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>

using namespace hefs;

namespace {
Timestamp at(int y, unsigned m, unsigned d, int h = 0) {
    using namespace std::chrono;
    return Timestamp{sys_days{year{y} / month{m} / day{d}}} + hours{h};
}
}  // namespace

TEST(Lags, ShiftByOne) {
    const std::vector<double> y{1, 2, 3, 4};
    const std::vector<int> orders{1};
    const FeatureBlock b = make_lags(y, orders);
    EXPECT_TRUE(std::isnan(b.values(0, 0)));
    EXPECT_EQ(b.values(1, 0), 1);
    EXPECT_EQ(b.values(3, 0), 3);
    EXPECT_EQ(b.names[0], "lag_1");
    EXPECT_EQ(b.valid_from, 1u);
}

TEST(Lags, OrderEqualToLengthIsTooLarge) {
    const std::vector<double> y{1, 2, 3, 4};
    const std::vector<int> orders{2, 4};
    try {
        make_lags(y, orders);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::LagTooLarge);
    }
}

TEST(Lags, TwoOrders) {
    const std::vector<double> y{1, 2, 3, 4, 5};
    const std::vector<int> orders{2, 4};
    const FeatureBlock b = make_lags(y, orders);
    EXPECT_EQ(b.values(2, 0), 1);
    EXPECT_EQ(b.values(4, 0), 3);
    EXPECT_TRUE(std::isnan(b.values(3, 1)));
    EXPECT_EQ(b.values(4, 1), 1);
    EXPECT_EQ(b.valid_from, 4u);
}

TEST(Rolling, ConstantSeries) {
    const std::vector<double> y(5, 1.0);
    const RollingStats r = rolling_stats(y, 2);
    EXPECT_EQ(r.valid_from, 2u);
    for (std::size_t t = 2; t < 5; ++t) {
        EXPECT_EQ(r.means[t], 1.0);
        EXPECT_EQ(r.stds[t], 0.0);
    }
}

TEST(Rolling, HandComputed) {
    const std::vector<double> y{0, 2, 4, 6};
    const RollingStats r = rolling_stats(y, 2);
    EXPECT_EQ(r.means[2], 1.0);
    EXPECT_EQ(r.stds[2], 1.0);
}

TEST(Rolling, WindowTooLarge) {
    const std::vector<double> y{0, 2, 4, 6};
    try {
        rolling_stats(y, 10);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::WindowTooLarge);
    }
}

TEST(Rolling, AnchoredOnLaggedWindow) {
    const std::vector<double> y{0, 1, 2, 3, 4, 5, 6};
    const RollingStats r = rolling_stats_at_lag(y, 2, 3);
    EXPECT_EQ(r.valid_from, 4u);
    EXPECT_EQ(r.means[4], 0.5);  // y[0], y[1]
    EXPECT_EQ(r.means[6], 2.5);
}

TEST(Calendar, HourZeroAndSix) {
    const std::vector<Timestamp> ts{at(2021, 3, 1, 0), at(2021, 3, 1, 6)};
    const FeatureBlock b = calendar_features(ts, {CalendarPart::Hour});
    EXPECT_EQ(b.values(0, 0), 0.0);
    EXPECT_EQ(b.values(0, 1), 1.0);
    EXPECT_NEAR(b.values(1, 0), 1.0, 1e-12);
    EXPECT_NEAR(b.values(1, 1), 0.0, 1e-12);
    EXPECT_EQ(b.names, (std::vector<std::string>{"hour_sin", "hour_cos"}));
}

TEST(Calendar, FullSetHasTwelveColumns) {
    const std::vector<Timestamp> ts = synthetic_hourly_timestamps(30);
    const std::set<CalendarPart> parts(std::begin(kAllCalendarParts), std::end(kAllCalendarParts));
    const FeatureBlock b = calendar_features(ts, parts);
    EXPECT_EQ(b.values.cols(), 12u);
    EXPECT_EQ(b.names.size(), 12u);
}

TEST(Calendar, IsoWeekEdges) {
    using namespace std::chrono;
    // 2021-01-03 is a Sunday in ISO week 53 of 2020; 2021-01-04 starts week 1.
    EXPECT_EQ(detail::iso_week(sys_days{2021y / January / 3}).first, 53);
    EXPECT_EQ(detail::iso_week(sys_days{2021y / January / 4}).first, 1);
    EXPECT_EQ(calendar_ordinal(at(2021, 1, 4), CalendarPart::DayOfWeek).first, 0);
}

TEST(MinMax, MapsTrainRange) {
    const std::vector<double> train{0, 10};
    const std::vector<double> x{5};
    EXPECT_EQ(minmax_apply(minmax_fit(train), x)[0], 0.5);
}

TEST(MinMax, RoundTrip) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-50, 50);
    std::vector<double> x(200);
    for (double& v : x) v = u(rng);
    const ScalerParams p = minmax_fit(std::span<const double>(x).first(100));
    const std::vector<double> back = minmax_invert(p, minmax_apply(p, x));
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(back[i], x[i], 1e-12);
}

TEST(MinMax, ConstantTrainWarnsAndCentres) {
    int warnings = 0;
    const auto previous = set_warning_sink([&](const std::string&) { ++warnings; });
    const std::vector<double> train{3, 3, 3};
    const std::vector<double> out = minmax_apply(minmax_fit(train), std::vector<double>{1, 3, 9});
    set_warning_sink(previous);
    EXPECT_EQ(warnings, 1);
    for (double v : out) EXPECT_EQ(v, 0.5);
}

TEST(History, NoLeakageFromCurrentTarget) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> z(0, 1);
    std::vector<double> y(60);
    for (double& v : y) v = z(rng);
    const FeatureRecipe recipe{{1, 2, 3}, {2, 4}, {1, 2}, {}};
    const FeatureBlock before = make_history_features(y, recipe);
    for (std::size_t t = before.valid_from; t < y.size(); ++t) {
        std::vector<double> changed = y;
        changed[t] += 100.0;
        const FeatureBlock after = make_history_features(changed, recipe);
        for (std::size_t c = 0; c < before.values.cols(); ++c) EXPECT_EQ(before.values(t, c), after.values(t, c));
    }
}

TEST(History, NamesFollowRecipe) {
    const std::vector<double> y(20, 1.0);
    const FeatureBlock b = make_history_features(y, FeatureRecipe{{1}, {4}, {1, 2}, {}});
    EXPECT_EQ(b.names, (std::vector<std::string>{"lag_1", "roll_mean_w4", "roll_std_w4", "roll_mean_w4_l2", "roll_std_w4_l2"}));
    EXPECT_EQ(b.valid_from, 5u);
}
