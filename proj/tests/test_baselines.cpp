#include "hefs/baselines.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace hefs;

namespace {

const BoostConfig kSmallBoost{20, 0.3, TreeConfig{2, 3, 4}, 1.0};

Dataset noisy_copy_dataset(std::size_t m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    const std::size_t n = 100;
    Matrix x(n, m);
    std::vector<double> y(n);
    std::vector<std::string> names;
    for (std::size_t c = 0; c < m; ++c) names.push_back("f" + std::to_string(c));
    for (std::size_t r = 0; r < n; ++r) {
        y[r] = z(rng);
        for (std::size_t c = 0; c < m; ++c) x(r, c) = z(rng);
        x(r, 0) = y[r];
    }
    return Dataset(std::move(y), std::move(x), std::move(names));
}

}  // namespace

TEST(Wrapper, DropsNoiseBeforeTarget) {
    const Dataset d = noisy_copy_dataset(2, 1);
    const ChronoSplit s = chronological_split(d.size(), 0.6, 0.2);
    const std::vector<std::size_t> features{0, 1};
    const WrapperResult w = fit_wrapper_backward(d, s, features, kSmallBoost);
    ASSERT_EQ(w.trace.size(), 1u);
    EXPECT_EQ(w.trace[0].dropped, 1u);
    EXPECT_EQ(w.selected, (std::vector<std::size_t>{0}));
}

TEST(Wrapper, SingleFeatureHasNoStages) {
    const Dataset d = noisy_copy_dataset(2, 2);
    const ChronoSplit s = chronological_split(d.size(), 0.6, 0.2);
    const std::vector<std::size_t> features{1};
    const WrapperResult w = fit_wrapper_backward(d, s, features, kSmallBoost);
    EXPECT_TRUE(w.trace.empty());
    EXPECT_EQ(w.selected, features);
    EXPECT_EQ(w.n_fits, 0u);
}

TEST(Wrapper, FitCountIsTriangular) {
    for (std::size_t m : {3u, 5u, 6u}) {
        const Dataset d = noisy_copy_dataset(m, m);
        const ChronoSplit s = chronological_split(d.size(), 0.6, 0.2);
        std::vector<std::size_t> features(m);
        std::iota(features.begin(), features.end(), 0u);
        const WrapperResult w = fit_wrapper_backward(d, s, features, kSmallBoost);
        EXPECT_EQ(w.n_fits, m * (m + 1) / 2 - 1);
        std::size_t traced = 0;
        for (const auto& st : w.trace) traced += st.removal_losses.size();
        EXPECT_EQ(traced, w.n_fits);
    }
}

TEST(Wrapper, NeedsValidationWindow) {
    const Dataset d = noisy_copy_dataset(3, 3);
    const std::vector<std::size_t> features{0, 1};
    EXPECT_THROW(fit_wrapper_backward(d, ChronoSplit{60, 60, 60, 60, 100}, features, kSmallBoost), Error);
}

TEST(Embedded, EqualsFullWhenOneGroup) {
    const Dataset d = noisy_copy_dataset(4, 4);
    const FeatureGroups g{{{0, 1, 2, 3}}};
    EXPECT_EQ(fit_embedded(d, g, kSmallBoost).model, fit_full_baseline(d, g, kSmallBoost).model);
}

TEST(Embedded, IgnoresOtherGroups) {
    const Dataset d = noisy_copy_dataset(4, 5);
    const FeatureGroups g{{{0, 1}, {2, 3}}};
    const ColumnModel m = fit_embedded(d, g, kSmallBoost);
    Matrix changed = d.x();
    for (std::size_t r = 0; r < changed.rows(); ++r) changed(r, 2) = changed(r, 3) = 99.0;
    EXPECT_EQ(m.predict(d.x()), m.predict(changed));
}

TEST(Embedded, DeterministicPerSeed) {
    const Dataset d = noisy_copy_dataset(4, 6);
    const FeatureGroups g{{{0, 1}, {2, 3}}};
    const BoostConfig sub{20, 0.3, TreeConfig{2, 3, 4}, 0.5};
    EXPECT_EQ(fit_embedded(d, g, sub, 3).model, fit_embedded(d, g, sub, 3).model);
}

TEST(Ensemble, PerfectFirstModelGivesUnitWeights) {
    const std::vector<double> y{1, 2, 3}, q{0, 0, 0};
    const std::vector<double> grid = linear_grid(0.0, 1.0, 11);
    for (double a : optimize_mixing(y, y, q, grid, l1_loss())) EXPECT_EQ(a, 1.0);
}

TEST(Ensemble, IdenticalModelsTieToZero) {
    const std::vector<double> y{1, 2, 3}, p{0.5, 0.5, 4};
    const std::vector<double> grid = linear_grid(0.0, 1.0, 11);
    for (double a : optimize_mixing(y, p, p, grid, l2_loss())) EXPECT_EQ(a, 0.0);
    EXPECT_EQ(optimize_constant_mixing(y, p, p, grid, l2_loss()), 0.0);
}

TEST(Ensemble, AlphaStarMatchesBruteForce) {
    const Dataset d = noisy_copy_dataset(4, 7);
    const ChronoSplit s = chronological_split(d.size(), 0.6, 0.2);
    const FeatureGroups g{{{1, 2}, {0, 3}}};
    const FlatEnsemble e = fit_flat_ensemble(d, s, g, kSmallBoost, 21, l2_loss());
    const Dataset val = d.rows(s.val_start, s.val_end);
    const auto p = e.first.predict(val.x());
    const auto q = e.second.predict(val.x());
    double best = 0.0, best_loss = 1e300;
    for (double a : e.grid) {
        double l = 0.0;
        for (std::size_t t = 0; t < p.size(); ++t) l += std::pow(val.y()[t] - (a * p[t] + (1 - a) * q[t]), 2);
        if (l < best_loss) {
            best_loss = l;
            best = a;
        }
    }
    EXPECT_EQ(e.alpha_star, best);
    EXPECT_LT(e.alpha_star, 0.5);  // the second model holds the target copy
}

TEST(Ensemble, RequiresTwoGroups) {
    const Dataset d = noisy_copy_dataset(3, 8);
    const ChronoSplit s = chronological_split(d.size(), 0.6, 0.2);
    try {
        fit_flat_ensemble(d, s, FeatureGroups{{{0}, {1}, {2}}}, kSmallBoost, 11);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::GroupCountMismatch);
    }
}

TEST(Pearson, SignAndScale) {
    const std::vector<double> y{1, 3, 2, 5, 4};
    std::vector<double> neg(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) neg[i] = -2.0 * y[i] + 1.0;
    EXPECT_DOUBLE_EQ(pearson(y, y), 1.0);
    EXPECT_DOUBLE_EQ(pearson(neg, y), -1.0);
    EXPECT_EQ(pearson(std::vector<double>(5, 1.0), y), 0.0);
}

TEST(Filter, HandComputedRanking) {
    const std::vector<double> y{1, 2, 3, 4, 5};
    const Matrix x = Matrix::from_rows({{1, 5, 2}, {3, 4, 2}, {2, 3, 1}, {5, 2, 1}, {4, 1, 9}});
    // Column 0: sxy = 8, sxx = 10, syy = 10 -> 0.8. Column 1: -1. Column 2: sxy = 13, sxx = 46 -> 13/sqrt(460).
    const Dataset d(y, x, {"a", "b", "c"});
    const ChronoSplit s{5, 5, 5, 5, 6};
    const std::vector<std::size_t> cand{0, 1, 2};
    const FilterResult f = fit_filter(d, s, cand, 2, kSmallBoost);
    EXPECT_NEAR(f.scores[0], 0.8, 1e-12);
    EXPECT_NEAR(f.scores[1], -1.0, 1e-12);
    EXPECT_NEAR(f.scores[2], 13.0 / std::sqrt(460.0), 1e-12);
    EXPECT_EQ(f.selected, (std::vector<std::size_t>{1, 0}));
}

TEST(Filter, ConstantColumnWarns) {
    int warnings = 0;
    const auto previous = set_warning_sink([&](const std::string&) { ++warnings; });
    const Dataset d({1, 2, 3, 4}, Matrix::from_rows({{1, 7}, {2, 7}, {3, 7}, {4, 7}}), {"a", "k"});
    const std::vector<std::size_t> cand{0, 1};
    const FilterResult f = fit_filter(d, ChronoSplit{4, 4, 4, 4, 5}, cand, 1, kSmallBoost);
    set_warning_sink(previous);
    EXPECT_EQ(warnings, 1);
    EXPECT_EQ(f.selected, (std::vector<std::size_t>{0}));
}
