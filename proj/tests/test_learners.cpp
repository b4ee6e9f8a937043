#include "hefs/learners.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace hefs;

namespace {

const Matrix kStepX = Matrix::from_rows({{0}, {1}, {2}, {3}});
const std::vector<double> kStepY{0, 0, 10, 10};

std::pair<Matrix, std::vector<double>> noisy_linear(std::uint64_t seed, std::size_t n = 60, std::size_t m = 4) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix x(n, m);
    std::vector<double> y(n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < m; ++c) x(r, c) = z(rng);
        y[r] = x(r, 0) * 2.0 - x(r, 1) + 0.3 * z(rng);
    }
    return {x, y};
}

}  // namespace

TEST(Tree, ConstantTargetGivesSingleLeaf) {
    const RegressionTree t = fit_tree(kStepX, std::vector<double>{3, 3, 3, 3});
    ASSERT_EQ(t.nodes.size(), 1u);
    EXPECT_EQ(t.nodes[0].value, 3.0);
}

TEST(Tree, StepSplitsBetweenOneAndTwo) {
    const RegressionTree t = fit_tree(kStepX, kStepY, TreeConfig{1, 1, 31});
    ASSERT_EQ(t.nodes.size(), 3u);
    EXPECT_EQ(t.nodes[0].feature, 0);
    EXPECT_GT(t.nodes[0].threshold, 1.0);
    EXPECT_LT(t.nodes[0].threshold, 2.0);
    EXPECT_EQ(t.nodes[1].value, 0.0);
    EXPECT_EQ(t.nodes[2].value, 10.0);
    EXPECT_DOUBLE_EQ(t.nodes[0].gain, 100.0);  // SSE 100 -> 0
}

TEST(Tree, RoutesStepRowsByHand) {
    const RegressionTree t = fit_tree(kStepX, kStepY, TreeConfig{1, 1, 31});
    const std::vector<double> lo{0}, hi{3};
    EXPECT_EQ(t.predict(lo), 0.0);
    EXPECT_EQ(t.predict(hi), 10.0);
}

TEST(Tree, ZeroRowsThrow) {
    try {
        fit_tree(Matrix(0, 1), std::vector<double>{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyInput);
    }
}

TEST(Tree, ShortRowThrows) {
    const RegressionTree t = fit_tree(Matrix::from_rows({{0, 0}, {0, 1}, {0, 2}, {0, 3}}), kStepY, TreeConfig{1, 1, 31});
    const std::vector<double> short_row{1.0};
    try {
        t.predict(short_row);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::FeatureIndexOutOfRange);
    }
}

TEST(Tree, SingleLeafPredictsItsValue) {
    const RegressionTree t{{TreeNode{TreeNode::kLeaf, 0.0, -1, -1, 5.0, 0.0}}};
    const std::vector<double> row{42.0, -1.0};
    EXPECT_EQ(t.predict(row), 5.0);
}

TEST(Tree, RespectsMinLeafAndMaxLeaves) {
    const auto [x, y] = noisy_linear(3, 80);
    const RegressionTree t = fit_tree(x, y, TreeConfig{6, 7, 9});
    EXPECT_LE(t.leaf_count(), 9u);
    std::vector<std::size_t> counts(t.nodes.size(), 0);
    for (std::size_t r = 0; r < x.rows(); ++r) ++counts[t.leaf_index(x.row(r))];
    for (std::size_t i = 0; i < t.nodes.size(); ++i)
        if (t.nodes[i].is_leaf()) {
            EXPECT_GE(counts[i], 7u);
        }
}

TEST(Tree, LeafValuesAreMeansOfTheirRows) {
    const auto [x, y] = noisy_linear(11, 70);
    const RegressionTree t = fit_tree(x, y);
    std::vector<double> sum(t.nodes.size(), 0.0);
    std::vector<double> cnt(t.nodes.size(), 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const std::size_t leaf = t.leaf_index(x.row(r));
        sum[leaf] += y[r];
        cnt[leaf] += 1.0;
    }
    for (std::size_t i = 0; i < t.nodes.size(); ++i)
        if (t.nodes[i].is_leaf() && cnt[i] > 0) {
            EXPECT_NEAR(t.nodes[i].value, sum[i] / cnt[i], 1e-12);
        }
}

TEST(Boost, ConstantTargetIsExact) {
    const BoostedModel m = fit_boosted(kStepX, std::vector<double>{0.7, 0.7, 0.7, 0.7});
    for (double p : predict_boosted(m, kStepX)) EXPECT_EQ(p, 0.7);
    for (double g : m.importances) EXPECT_EQ(g, 0.0);
}

TEST(Boost, StepConvergesGeometrically) {
    const BoostedModel m = fit_boosted(kStepX, kStepY, BoostConfig{50, 0.5, TreeConfig{1, 1, 31}, 1.0});
    EXPECT_LT(m.train_mse.back(), 1e-6);
    const std::vector<double> p = predict_boosted(m, Matrix::from_rows({{0}, {3}}));
    EXPECT_NEAR(p[0], 0.0, 1e-3);
    EXPECT_NEAR(p[1], 10.0, 1e-3);
}

TEST(Boost, OnlyInformativeFeatureGetsImportance) {
    const Matrix x = Matrix::from_rows({{0, 5}, {1, 5}, {2, 5}, {3, 5}});
    const BoostedModel m = fit_boosted(x, kStepY, BoostConfig{50, 0.5, TreeConfig{1, 1, 31}, 1.0});
    EXPECT_GT(m.importances[0], 0.0);
    EXPECT_EQ(m.importances[1], 0.0);
}

TEST(Boost, EmptyModelPredictsBaseScore) {
    const BoostedModel m{2.5, 0.1, {}, {0.0}, {}};
    for (double p : predict_boosted(m, kStepX)) EXPECT_EQ(p, 2.5);
}

TEST(Boost, OneTreeIsAdditive) {
    const RegressionTree t = fit_tree(kStepX, kStepY, TreeConfig{1, 1, 31});
    const BoostedModel m{1.0, 1.0, {t}, {0.0}, {}};
    const std::vector<double> p = predict_boosted(m, kStepX);
    EXPECT_EQ(p[0], 1.0);
    EXPECT_EQ(p[3], 11.0);
}

TEST(Boost, TrainingMseNeverIncreases) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto [x, y] = noisy_linear(seed);
        const BoostedModel m = fit_boosted(x, y, BoostConfig{40, 0.3, TreeConfig{3, 3, 8}, 0.5}, seed);
        for (std::size_t i = 1; i < m.train_mse.size(); ++i) EXPECT_LE(m.train_mse[i], m.train_mse[i - 1] * (1 + 1e-12));
    }
}

TEST(Boost, DeterministicPerSeed) {
    const auto [x, y] = noisy_linear(9);
    const BoostConfig cfg{30, 0.1, {}, 0.5};
    EXPECT_EQ(fit_boosted(x, y, cfg, 4), fit_boosted(x, y, cfg, 4));
}

TEST(Boost, RejectsBadConfig) {
    EXPECT_THROW(fit_boosted(kStepX, kStepY, BoostConfig{0, 0.1, {}, 1.0}), Error);
    EXPECT_THROW(fit_boosted(kStepX, kStepY, BoostConfig{10, 0.0, {}, 1.0}), Error);
    EXPECT_THROW(fit_boosted(kStepX, std::vector<double>{1, 2}), Error);
}

TEST(Importance, CopyOfTargetRanksAboveNoise) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z(0.0, 1.0);
    Matrix x(100, 2);
    std::vector<double> y(100);
    for (std::size_t r = 0; r < 100; ++r) {
        x(r, 0) = z(rng);
        x(r, 1) = z(rng);
        y[r] = x(r, 0) + 0.05 * z(rng);
    }
    const auto ranked = feature_importance(fit_boosted(x, y));
    EXPECT_EQ(ranked[0].first, 0u);
}

TEST(Importance, TiesGoToLowerIndex) {
    const Matrix x = Matrix::from_rows({{0, 0}, {1, 1}, {2, 2}, {3, 3}});
    const auto ranked = feature_importance(fit_boosted(x, kStepY, BoostConfig{5, 0.5, TreeConfig{1, 1, 31}, 1.0}));
    EXPECT_EQ(ranked[0].first, 0u);
    EXPECT_EQ(ranked[1].second, 0.0);  // the twin column never wins a split
}
