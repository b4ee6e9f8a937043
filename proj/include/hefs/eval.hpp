#pragma once

#include "hefs/core.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

namespace hefs {

// ---------------------------------------------------------------------------
// Error curves
// ---------------------------------------------------------------------------

/// (y_t - y_hat_t)^2 / n for every step of a test window of length n.
inline std::vector<double> mse_per_step(std::span<const double> y, std::span<const double> y_hat, std::size_t n) {
    if (y.size() != y_hat.size())
        throw Error(ErrorKind::LengthMismatch, "mse_per_step: " + std::to_string(y.size()) + " vs " + std::to_string(y_hat.size()));
    if (n == 0) throw Error(ErrorKind::InvalidArgument, "mse_per_step: n must be positive");
    std::vector<double> out(y.size());
    for (std::size_t t = 0; t < y.size(); ++t) out[t] = (y[t] - y_hat[t]) * (y[t] - y_hat[t]) / static_cast<double>(n);
    return out;
}

inline std::vector<double> average_over_trials(const std::vector<std::vector<double>>& trials) {
    if (trials.empty()) throw Error(ErrorKind::EmptyInput, "average_over_trials needs at least one trial");
    const std::size_t len = trials.front().size();
    std::vector<double> out(len, 0.0);
    for (const auto& trial : trials) {
        if (trial.size() != len) throw Error(ErrorKind::LengthMismatch, "trials have different lengths");
        for (std::size_t t = 0; t < len; ++t) out[t] += trial[t];
    }
    for (double& v : out) v /= static_cast<double>(trials.size());
    return out;
}

/// Running mean: out[t] = (series[0] + ... + series[t]) / (t + 1).
inline std::vector<double> cumulative_average(std::span<const double> series) {
    if (series.empty()) throw Error(ErrorKind::EmptyInput, "cumulative_average on empty series");
    std::vector<double> out(series.size());
    double acc = 0.0;
    for (std::size_t t = 0; t < series.size(); ++t) {
        acc += series[t];
        out[t] = acc / static_cast<double>(t + 1);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Student-t distribution
// ---------------------------------------------------------------------------

namespace detail {

/// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
    constexpr int kMaxIter = 1000;
    constexpr double kEps = 1e-15;
    constexpr double kTiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorKind::InvalidArgument, "incomplete beta needs a, b > 0");
    if (!(x >= 0.0 && x <= 1.0)) throw Error(ErrorKind::InvalidArgument, "incomplete beta needs x in [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// CDF of Student's t with nu degrees of freedom.
inline double student_t_cdf(double t, double nu) {
    if (!(nu > 0.0)) throw Error(ErrorKind::InvalidArgument, "degrees of freedom must be positive");
    if (std::isnan(t)) return t;
    if (t == std::numeric_limits<double>::infinity()) return 1.0;
    if (t == -std::numeric_limits<double>::infinity()) return 0.0;
    const double x = nu / (nu + t * t);
    const double tail = 0.5 * regularized_incomplete_beta(nu / 2.0, 0.5, x);
    return t >= 0.0 ? 1.0 - tail : tail;
}

// ---------------------------------------------------------------------------
// Paired t-test
// ---------------------------------------------------------------------------

struct TTestReport {
    double t_stat = 0.0;
    double p_value = 0.5;
    int dof = 0;
    bool zero_variance = false;  // every paired difference was identical
};

/// One-sided paired test of H0: mean(compared) <= mean(proposed) against H1: mean(compared) > mean(proposed).
inline TTestReport paired_t_test_one_sided(std::span<const double> compared, std::span<const double> proposed) {
    if (compared.size() != proposed.size()) throw Error(ErrorKind::LengthMismatch, "paired t-test samples differ in length");
    const std::size_t n = compared.size();
    if (n < 2) throw Error(ErrorKind::InvalidArgument, "paired t-test needs at least two pairs");
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = compared[i] - proposed[i];
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : d) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));

    TTestReport report;
    report.dof = static_cast<int>(n - 1);
    if (std::all_of(d.begin(), d.end(), [&](double v) { return v == d.front(); })) {
        report.zero_variance = true;
        if (d.front() > 0.0) {
            report.t_stat = std::numeric_limits<double>::infinity();
            report.p_value = 0.0;
        } else if (d.front() < 0.0) {
            report.t_stat = -std::numeric_limits<double>::infinity();
            report.p_value = 1.0;
        } else {
            report.t_stat = 0.0;
            report.p_value = 0.5;
        }
        return report;
    }
    report.t_stat = mean / (sd / std::sqrt(static_cast<double>(n)));
    report.p_value = std::clamp(1.0 - student_t_cdf(report.t_stat, static_cast<double>(report.dof)), 0.0, 1.0);
    return report;
}

// ---------------------------------------------------------------------------
// Least squares and the augmented Dickey-Fuller test
// ---------------------------------------------------------------------------

struct LeastSquaresFit {
    std::vector<double> coefficients;
    std::vector<double> std_errors;
    std::vector<double> residuals;
    double sigma2 = 0.0;  // residual variance, RSS / (n - k)
};

/// Ordinary least squares via column-pivoted Householder QR.
inline LeastSquaresFit least_squares(const Matrix& design, std::span<const double> y) {
    const auto n = static_cast<Eigen::Index>(design.rows());
    const auto k = static_cast<Eigen::Index>(design.cols());
    if (design.rows() != y.size()) throw Error(ErrorKind::LengthMismatch, "least_squares: rows(X) != len(y)");
    if (n <= k) throw Error(ErrorKind::SingularRegression, "least_squares needs more rows than columns");
    Eigen::MatrixXd x(n, k);
    for (Eigen::Index r = 0; r < n; ++r)
        for (Eigen::Index c = 0; c < k; ++c) x(r, c) = design(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    const Eigen::Map<const Eigen::VectorXd> target(y.data(), n);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
    qr.setThreshold(1e-10);
    if (qr.rank() < k) throw Error(ErrorKind::SingularRegression, "design matrix is rank deficient");
    const Eigen::VectorXd beta = qr.solve(target);
    const Eigen::VectorXd resid = target - x * beta;

    // (X'X)^-1 = P R^-1 R^-T P'
    const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
    const Eigen::MatrixXd r_inv = r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
    const Eigen::MatrixXd cov_unpermuted = r_inv * r_inv.transpose();
    const Eigen::MatrixXd cov = qr.colsPermutation() * cov_unpermuted * qr.colsPermutation().transpose();

    LeastSquaresFit fit;
    fit.sigma2 = resid.squaredNorm() / static_cast<double>(n - k);
    fit.coefficients.assign(beta.data(), beta.data() + k);
    fit.residuals.assign(resid.data(), resid.data() + n);
    for (Eigen::Index c = 0; c < k; ++c) fit.std_errors.push_back(std::sqrt(fit.sigma2 * cov(c, c)));
    return fit;
}

namespace detail {
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
}  // namespace detail

/// MacKinnon (1994) approximate p-value for the constant-only Dickey-Fuller tau statistic.
inline double mackinnon_pvalue_constant(double stat) {
    constexpr double kTauMax = 2.74;
    constexpr double kTauMin = -18.83;
    constexpr double kTauStar = -1.61;
    constexpr double kSmall[] = {2.1659, 1.4412, 0.038269};
    constexpr double kLarge[] = {1.7339, 0.93202, -0.12745, -0.010368};
    if (stat > kTauMax) return 1.0;
    if (stat < kTauMin) return 0.0;
    double z = 0.0;
    if (stat <= kTauStar) {
        for (int i = 2; i >= 0; --i) z = z * stat + kSmall[i];
    } else {
        for (int i = 3; i >= 0; --i) z = z * stat + kLarge[i];
    }
    return detail::normal_cdf(z);
}

struct AdfResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t lags = 0;
    std::size_t nobs = 0;
};

/// Regresses dy_t on [1, y_{t-1}, dy_{t-1}, ..., dy_{t-max_lag}] and reports the tau statistic of y_{t-1}.
inline AdfResult adf_test(std::span<const double> y, std::size_t max_lag = 4) {
    if (y.size() <= max_lag + 10)
        throw Error(ErrorKind::InvalidArgument, "ADF needs more than max_lag + 10 observations");
    const std::size_t n = y.size();
    std::vector<double> dy(n - 1);
    for (std::size_t t = 1; t < n; ++t) dy[t - 1] = y[t] - y[t - 1];

    // dy index i corresponds to y_{i+1} - y_i; the first usable row needs max_lag earlier differences.
    const std::size_t first = max_lag;
    const std::size_t rows = dy.size() - first;
    Matrix design(rows, 2 + max_lag);
    std::vector<double> target(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t i = first + r;
        target[r] = dy[i];
        design(r, 0) = 1.0;
        design(r, 1) = y[i];
        for (std::size_t j = 1; j <= max_lag; ++j) design(r, 1 + j) = dy[i - j];
    }
    const LeastSquaresFit fit = least_squares(design, target);
    AdfResult out;
    out.statistic = fit.coefficients[1] / fit.std_errors[1];
    out.p_value = std::clamp(mackinnon_pvalue_constant(out.statistic), 0.001, 0.999);
    out.lags = max_lag;
    out.nobs = rows;
    return out;
}

// ---------------------------------------------------------------------------
// Timing
// ---------------------------------------------------------------------------

/// Wall-clock seconds spent in `task`, measured with a monotonic clock.
template <class Task>
double time_method(Task&& task) {
    const auto start = std::chrono::steady_clock::now();
    std::forward<Task>(task)();
    const auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(stop - start).count();
}

}  // namespace hefs
