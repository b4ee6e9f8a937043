#include "hefs/eval.hpp"
#include "hefs/synthetic.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace hefs;

TEST(Mse, PerStepContributions) {
    const std::vector<double> y{1, 2}, zero{0, 0};
    EXPECT_EQ(mse_per_step(y, zero, 2), (std::vector<double>{0.5, 2.0}));
    for (double v : mse_per_step(y, y, 2)) EXPECT_EQ(v, 0.0);
}

TEST(Mse, MatchesDirectFormula) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z(0, 1);
    std::vector<double> a(40), b(40);
    for (std::size_t i = 0; i < 40; ++i) {
        a[i] = z(rng);
        b[i] = z(rng);
    }
    const std::vector<double> got = mse_per_step(a, b, 40);
    for (std::size_t i = 0; i < 40; ++i) EXPECT_DOUBLE_EQ(got[i], (a[i] - b[i]) * (a[i] - b[i]) / 40.0);
}

TEST(Curves, AverageAndCumulative) {
    EXPECT_EQ(average_over_trials({{1, 2}, {3, 6}}), (std::vector<double>{2, 4}));
    EXPECT_EQ(cumulative_average(std::vector<double>{2, 4, 6}), (std::vector<double>{2, 3, 4}));
}

TEST(StudentT, CentreAndReferenceValues) {
    for (double nu : {1.0, 2.5, 10.0, 200.0}) EXPECT_EQ(student_t_cdf(0.0, nu), 0.5);
    // scipy.stats.t.cdf
    EXPECT_NEAR(student_t_cdf(1.5, 3.0), 0.8847080673775886, 1e-12);
    EXPECT_NEAR(student_t_cdf(-2.2, 7.5), 0.030599732953058022, 1e-12);
}

TEST(StudentT, Monotone) {
    for (double nu : {1.0, 4.0, 30.0}) {
        double prev = 0.0;
        for (double t = -20.0; t <= 20.0; t += 0.25) {
            const double c = student_t_cdf(t, nu);
            EXPECT_GE(c, prev);
            prev = c;
        }
    }
}

TEST(TTest, PinnedReference) {
    // scipy.stats.ttest_1samp([1, 2, 0.5, 1.5], 0, alternative="greater")
    const std::vector<double> compared{1.0, 2.0, 0.5, 1.5}, proposed{0, 0, 0, 0};
    const TTestReport r = paired_t_test_one_sided(compared, proposed);
    EXPECT_NEAR(r.t_stat, 3.872983346207417, 1e-6);
    EXPECT_NEAR(r.p_value, 0.015233145831085489, 1e-6);
    EXPECT_EQ(r.dof, 3);
}

TEST(TTest, IdenticalSamples) {
    const std::vector<double> x{0.3, 0.1, 0.7};
    const TTestReport r = paired_t_test_one_sided(x, x);
    EXPECT_EQ(r.t_stat, 0.0);
    EXPECT_EQ(r.p_value, 0.5);
    EXPECT_TRUE(r.zero_variance);
}

TEST(TTest, ConstantShift) {
    const std::vector<double> proposed{0.3, 0.1, 0.7};
    const std::vector<double> compared{1.3, 1.1, 1.7};
    const TTestReport r = paired_t_test_one_sided(compared, proposed);
    EXPECT_TRUE(r.zero_variance);
    EXPECT_EQ(r.p_value, 0.0);
}

TEST(LeastSquares, RecoversExactLine) {
    Matrix x(6, 2);
    std::vector<double> y(6);
    for (std::size_t i = 0; i < 6; ++i) {
        x(i, 0) = 1.0;
        x(i, 1) = static_cast<double>(i);
        y[i] = 2.0 - 0.5 * static_cast<double>(i);
    }
    const LeastSquaresFit f = least_squares(x, y);
    EXPECT_NEAR(f.coefficients[0], 2.0, 1e-12);
    EXPECT_NEAR(f.coefficients[1], -0.5, 1e-12);
}

TEST(LeastSquares, CollinearIsSingular) {
    Matrix x(5, 2, 1.0);
    const std::vector<double> y{1, 2, 3, 4, 5};
    try {
        least_squares(x, y);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SingularRegression);
    }
}

TEST(Adf, MatchesPinnedReference) {
    // statsmodels adfuller(y, maxlag=4, autolag=None, regression="c")
    std::vector<double> y(60);
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double t = static_cast<double>(i);
        y[i] = std::sin(0.7 * t) + 0.05 * t + 0.3 * std::cos(std::fmod(1.9 * t * t, 7.0));
    }
    const AdfResult r = adf_test(y, 4);
    EXPECT_NEAR(r.statistic, -1.343885900677034, 1e-9);
    EXPECT_NEAR(r.p_value, 0.6088631259548611, 1e-6);
    EXPECT_EQ(r.nobs, 55u);
}

TEST(Adf, RandomWalkRarelyRejects) {
    int non_reject = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> z(0, 1);
        std::vector<double> y(500);
        double acc = 0.0;
        for (double& v : y) v = acc += z(rng);
        non_reject += adf_test(y).p_value > 0.05;
    }
    EXPECT_GE(non_reject, 90);
}

TEST(Adf, WhiteNoiseRejects) {
    int reject = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> z(0, 1);
        std::vector<double> y(500);
        for (double& v : y) v = z(rng);
        reject += adf_test(y).p_value < 0.05;
    }
    EXPECT_GE(reject, 90);
}
