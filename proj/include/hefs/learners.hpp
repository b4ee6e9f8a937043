#pragma once

#include "hefs/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace hefs {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct TreeConfig {
    int max_depth = 4;
    int min_samples_leaf = 5;
    int max_leaves = 31;

    void validate() const {
        if (max_depth < 1 || min_samples_leaf < 1 || max_leaves < 2)
            throw Error(ErrorKind::InvalidArgument, "TreeConfig requires max_depth>=1, min_samples_leaf>=1, max_leaves>=2");
    }
};

struct BoostConfig {
    int n_rounds = 100;
    double learning_rate = 0.1;
    TreeConfig tree{};
    double subsample_features = 1.0;

    void validate() const {
        tree.validate();
        if (n_rounds < 1) throw Error(ErrorKind::InvalidArgument, "n_rounds must be >= 1");
        if (!(learning_rate > 0.0 && learning_rate <= 1.0))
            throw Error(ErrorKind::InvalidArgument, "learning_rate must be in (0,1]");
        if (!(subsample_features > 0.0 && subsample_features <= 1.0))
            throw Error(ErrorKind::InvalidArgument, "subsample_features must be in (0,1]");
    }
};

// ---------------------------------------------------------------------------
// Regression tree
// ---------------------------------------------------------------------------

struct TreeNode {
    static constexpr std::int32_t kLeaf = -1;

    std::int32_t feature = kLeaf;  // kLeaf marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;  // mean of the samples that reached this node
    double gain = 0.0;   // SSE reduction of the split, 0 for leaves

    bool is_leaf() const noexcept { return feature == kLeaf; }
    bool operator==(const TreeNode&) const = default;
};

/// Binary regression tree; node 0 is the root.
struct RegressionTree {
    std::vector<TreeNode> nodes;

    std::size_t leaf_count() const {
        return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
    }

    /// Index of the leaf a row is routed to.
    std::size_t leaf_index(std::span<const double> row) const {
        std::size_t at = 0;
        while (!nodes[at].is_leaf()) {
            const auto f = static_cast<std::size_t>(nodes[at].feature);
            if (f >= row.size())
                throw Error(ErrorKind::FeatureIndexOutOfRange,
                            "tree splits on feature " + std::to_string(f) + " but row has " + std::to_string(row.size()));
            at = static_cast<std::size_t>(row[f] <= nodes[at].threshold ? nodes[at].left : nodes[at].right);
        }
        return at;
    }

    double predict(std::span<const double> row) const { return nodes[leaf_index(row)].value; }

    bool operator==(const RegressionTree&) const = default;
};

namespace detail {

/// Column-major copy of a matrix with per-feature ascending row order, shared by all trees of one fit.
struct SortedColumns {
    std::size_t rows = 0;
    std::vector<std::vector<double>> values;
    std::vector<std::vector<std::uint32_t>> order;
    std::vector<std::vector<double>> sorted;  // values[f] permuted by order[f]

    explicit SortedColumns(const Matrix& x) : rows(x.rows()), values(x.cols()), order(x.cols()), sorted(x.cols()) {
        for (std::size_t f = 0; f < x.cols(); ++f) {
            values[f] = x.column(f);
            auto& idx = order[f];
            idx.resize(rows);
            std::iota(idx.begin(), idx.end(), 0u);
            const auto& v = values[f];
            std::stable_sort(idx.begin(), idx.end(), [&v](std::uint32_t a, std::uint32_t b) { return v[a] < v[b]; });
            sorted[f].resize(rows);
            for (std::size_t k = 0; k < rows; ++k) sorted[f][k] = v[idx[k]];
        }
    }
};

inline double midpoint_threshold(double lo, double hi) {
    const double mid = lo + (hi - lo) / 2.0;
    return mid < hi ? mid : lo;
}

struct SplitCandidate {
    double gain = 0.0;
    std::int32_t feature = TreeNode::kLeaf;
    double threshold = 0.0;
};

/// Level-wise exact greedy CART on presorted columns.
inline RegressionTree grow_tree(const SortedColumns& cols, std::span<const double> target,
                                std::span<const std::size_t> features, const TreeConfig& config) {
    const std::size_t n = cols.rows;
    const auto min_leaf = static_cast<std::size_t>(config.min_samples_leaf);

    RegressionTree tree;
    // node id of every row; -1 once the row sits in a finalized leaf
    std::vector<std::int32_t> node_of(n, 0);
    struct Stats {
        std::size_t count = 0;
        double sum = 0.0;
        double sumsq = 0.0;
    };

    double total = 0.0;
    double total_sq = 0.0;
    for (double v : target) {
        total += v;
        total_sq += v * v;
    }
    tree.nodes.push_back(TreeNode{TreeNode::kLeaf, 0.0, -1, -1, total / static_cast<double>(n), 0.0});

    std::vector<double> inv(n + 1, 0.0);
    for (std::size_t c = 1; c <= n; ++c) inv[c] = 1.0 / static_cast<double>(c);

    std::vector<std::int32_t> frontier{0};
    std::vector<Stats> stats(1, Stats{n, total, total_sq});
    std::size_t leaves = 1;

    for (int depth = 0; depth < config.max_depth && !frontier.empty(); ++depth) {
        const std::size_t node_count = tree.nodes.size();
        // map node id -> slot in frontier
        std::vector<std::int32_t> slot(node_count, -1);
        for (std::size_t s = 0; s < frontier.size(); ++s) slot[static_cast<std::size_t>(frontier[s])] = static_cast<std::int32_t>(s);

        std::vector<SplitCandidate> best(frontier.size());
        std::vector<Stats> left(frontier.size());
        std::vector<double> last_value(frontier.size());

        // frontier slot of every row, -1 when the row is not in an open node
        std::vector<std::int32_t> row_slot(n, -1);
        for (std::size_t r = 0; r < n; ++r)
            if (node_of[r] >= 0) row_slot[r] = slot[static_cast<std::size_t>(node_of[r])];

        std::vector<double> parent_term(frontier.size());
        for (std::size_t s = 0; s < frontier.size(); ++s)
            parent_term[s] = stats[s].sum * stats[s].sum / static_cast<double>(stats[s].count);

        for (std::size_t f : features) {
            std::fill(left.begin(), left.end(), Stats{});
            const auto& order = cols.order[f];
            const auto& sorted = cols.sorted[f];
            for (std::size_t k = 0; k < n; ++k) {
                const std::uint32_t r = order[k];
                const std::int32_t s = row_slot[r];
                if (s < 0) continue;
                const auto si = static_cast<std::size_t>(s);
                const double v = sorted[k];
                Stats& l = left[si];
                const Stats& p = stats[si];
                if (l.count >= min_leaf && p.count - l.count >= min_leaf && v > last_value[si]) {
                    const double right_sum = p.sum - l.sum;
                    const double gain = l.sum * l.sum * inv[l.count] + right_sum * right_sum * inv[p.count - l.count] -
                                        parent_term[si];
                    if (gain > best[si].gain)
                        best[si] = SplitCandidate{gain, static_cast<std::int32_t>(f), midpoint_threshold(last_value[si], v)};
                }
                l.count += 1;
                l.sum += target[r];
                last_value[si] = v;
            }
        }

        // Reject numerically-zero gains relative to the node's scale.
        std::vector<std::size_t> splittable;
        for (std::size_t s = 0; s < frontier.size(); ++s) {
            const double scale = stats[s].sumsq;
            if (best[s].feature != TreeNode::kLeaf && best[s].gain > 1e-12 * scale) splittable.push_back(s);
        }
        std::stable_sort(splittable.begin(), splittable.end(),
                         [&best](std::size_t a, std::size_t b) { return best[a].gain > best[b].gain; });

        std::vector<std::int32_t> next_frontier;
        std::vector<Stats> next_stats;
        std::vector<std::int32_t> left_child(frontier.size(), -1);
        for (std::size_t s : splittable) {
            if (leaves >= static_cast<std::size_t>(config.max_leaves)) break;
            const auto id = static_cast<std::size_t>(frontier[s]);
            tree.nodes[id].feature = best[s].feature;
            tree.nodes[id].threshold = best[s].threshold;
            tree.nodes[id].gain = best[s].gain;
            const auto l_id = static_cast<std::int32_t>(tree.nodes.size());
            tree.nodes[id].left = l_id;
            tree.nodes[id].right = l_id + 1;
            tree.nodes.push_back(TreeNode{});
            tree.nodes.push_back(TreeNode{});
            left_child[s] = l_id;
            ++leaves;
        }

        // Route rows to children and gather child statistics.
        std::vector<Stats> child(tree.nodes.size());
        for (std::size_t r = 0; r < n; ++r) {
            const std::int32_t node = node_of[r];
            if (node < 0) continue;
            const std::int32_t s = slot[static_cast<std::size_t>(node)];
            const std::int32_t l_id = left_child[static_cast<std::size_t>(s)];
            if (l_id < 0) {
                node_of[r] = -1;
                continue;
            }
            const TreeNode& parent = tree.nodes[static_cast<std::size_t>(node)];
            const bool go_left = cols.values[static_cast<std::size_t>(parent.feature)][r] <= parent.threshold;
            const std::int32_t c = go_left ? l_id : l_id + 1;
            node_of[r] = c;
            Stats& cs = child[static_cast<std::size_t>(c)];
            cs.count += 1;
            cs.sum += target[r];
            cs.sumsq += target[r] * target[r];
        }
        for (std::size_t s = 0; s < frontier.size(); ++s) {
            const std::int32_t l_id = left_child[s];
            if (l_id < 0) continue;
            for (std::int32_t c : {l_id, l_id + 1}) {
                const Stats& cs = child[static_cast<std::size_t>(c)];
                tree.nodes[static_cast<std::size_t>(c)].value = cs.sum / static_cast<double>(cs.count);
                next_frontier.push_back(c);
                next_stats.push_back(cs);
            }
        }
        frontier = std::move(next_frontier);
        stats = std::move(next_stats);
    }
    return tree;
}

}  // namespace detail

/// Greedy least-squares regression tree over all columns of `x`.
inline RegressionTree fit_tree(const Matrix& x, std::span<const double> y, const TreeConfig& config = {}) {
    config.validate();
    if (x.rows() == 0 || y.empty()) throw Error(ErrorKind::EmptyInput, "fit_tree on zero rows");
    if (x.rows() != y.size()) throw Error(ErrorKind::LengthMismatch, "fit_tree: rows(X) != len(y)");
    detail::SortedColumns cols(x);
    std::vector<std::size_t> features(x.cols());
    std::iota(features.begin(), features.end(), std::size_t{0});
    return detail::grow_tree(cols, y, features, config);
}

inline std::vector<double> predict_tree(const RegressionTree& tree, const Matrix& x) {
    std::vector<double> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) out[r] = tree.predict(x.row(r));
    return out;
}

// ---------------------------------------------------------------------------
// Gradient boosting (L2)
// ---------------------------------------------------------------------------

struct BoostedModel {
    double base_score = 0.0;
    double learning_rate = 1.0;
    std::vector<RegressionTree> trees;
    std::vector<double> importances;  // cumulative split gain per training column
    std::vector<double> train_mse;    // training MSE after each round

    std::size_t n_features() const noexcept { return importances.size(); }

    double predict(std::span<const double> row) const {
        double acc = 0.0;
        for (const auto& t : trees) acc += t.predict(row);
        return base_score + learning_rate * acc;
    }

    bool operator==(const BoostedModel&) const = default;
};

inline std::vector<double> predict_boosted(const BoostedModel& model, const Matrix& x) {
    std::vector<double> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) out[r] = model.predict(x.row(r));
    return out;
}

/// L2 gradient boosting: every round fits a tree to the current residuals.
inline BoostedModel fit_boosted(const Matrix& x, std::span<const double> y, const BoostConfig& config = {},
                                std::uint64_t seed = 0) {
    config.validate();
    if (x.rows() == 0 || y.empty()) throw Error(ErrorKind::EmptyInput, "fit_boosted on zero rows");
    if (x.rows() != y.size()) throw Error(ErrorKind::LengthMismatch, "fit_boosted: rows(X) != len(y)");

    const std::size_t n = y.size();
    BoostedModel model;
    model.learning_rate = config.learning_rate;
    model.base_score = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) model.base_score = y[0];
    model.importances.assign(x.cols(), 0.0);
    if (x.cols() == 0) return model;

    detail::SortedColumns cols(x);
    std::vector<double> pred(n, model.base_score);
    std::vector<double> residual(n);
    std::vector<std::size_t> all_features(x.cols());
    std::iota(all_features.begin(), all_features.end(), std::size_t{0});
    const auto n_sub = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(config.subsample_features * static_cast<double>(x.cols()))));
    std::mt19937_64 rng(seed);

    auto mse = [&] {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += (y[i] - pred[i]) * (y[i] - pred[i]);
        return acc / static_cast<double>(n);
    };
    double previous = mse();

    for (int round = 0; round < config.n_rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - pred[i];
        std::vector<std::size_t> features = all_features;
        if (n_sub < features.size()) {
            std::shuffle(features.begin(), features.end(), rng);
            features.resize(n_sub);
            std::sort(features.begin(), features.end());
        }
        RegressionTree tree = detail::grow_tree(cols, residual, features, config.tree);
        if (tree.nodes.size() == 1 && std::abs(tree.nodes[0].value) == 0.0) break;  // residuals are exactly zero

        for (std::size_t i = 0; i < n; ++i) {
            std::size_t at = 0;
            while (!tree.nodes[at].is_leaf()) {
                const auto& node = tree.nodes[at];
                at = static_cast<std::size_t>(cols.values[static_cast<std::size_t>(node.feature)][i] <= node.threshold ? node.left : node.right);
            }
            pred[i] += config.learning_rate * tree.nodes[at].value;
        }
        for (const auto& node : tree.nodes)
            if (!node.is_leaf()) model.importances[static_cast<std::size_t>(node.feature)] += node.gain;

        const double current = mse();
        // Leaves are residual means, so each round can only lower the squared error.
        if (current > previous * (1.0 + 1e-12) + 1e-300)
            throw Error(ErrorKind::InvalidArgument, "boosting round increased training MSE");
        model.train_mse.push_back(current);
        previous = current;
        model.trees.push_back(std::move(tree));
    }
    return model;
}

/// Features ranked by total split gain, descending; ties go to the lower index.
inline std::vector<std::pair<std::size_t, double>> feature_importance(const BoostedModel& model) {
    std::vector<std::pair<std::size_t, double>> ranked;
    ranked.reserve(model.importances.size());
    for (std::size_t f = 0; f < model.importances.size(); ++f) ranked.emplace_back(f, model.importances[f]);
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    return ranked;
}

}  // namespace hefs
