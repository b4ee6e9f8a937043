#pragma once

#include "hefs/core.hpp"
#include "hefs/hierarchy.hpp"
#include "hefs/learners.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace hefs {

/// A boosted model bound to the dataset columns it was trained on.
struct ColumnModel {
    std::vector<std::size_t> columns;
    BoostedModel model;

    std::vector<double> predict(const Matrix& x) const { return predict_boosted(model, select_columns(x, columns)); }
};

inline ColumnModel fit_on_columns(const Dataset& train, std::span<const std::size_t> columns, const BoostConfig& boost,
                                  std::uint64_t seed) {
    std::vector<std::size_t> cols(columns.begin(), columns.end());
    BoostedModel m = fit_boosted(select_columns(train.x(), cols), train.y(), boost, seed);
    return ColumnModel{std::move(cols), std::move(m)};
}

namespace detail {
inline double mean_squared_error(std::span<const double> y, std::span<const double> y_hat) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += (y[i] - y_hat[i]) * (y[i] - y_hat[i]);
    return acc / static_cast<double>(y.size());
}

inline Dataset train_window(const Dataset& d, const ChronoSplit& s) { return d.rows(0, s.train_end); }

/// Validation rows, or the training rows when the split has no validation window.
inline Dataset selection_window(const Dataset& d, const ChronoSplit& s) {
    return s.has_validation() ? d.rows(s.val_start, s.val_end) : d.rows(0, s.train_end);
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Embedded / full
// ---------------------------------------------------------------------------

/// Learner restricted to the target-history group.
inline ColumnModel fit_embedded(const Dataset& train, const FeatureGroups& groups, const BoostConfig& boost,
                                std::uint64_t seed = 0) {
    if (groups.size() == 0 || groups[0].empty()) throw Error(ErrorKind::EmptyGroup, "embedded baseline needs a non-empty group 0");
    return fit_on_columns(train, groups[0], boost, seed);
}

/// Learner on every assigned column.
inline ColumnModel fit_full_baseline(const Dataset& train, const FeatureGroups& groups, const BoostConfig& boost,
                                     std::uint64_t seed = 0) {
    return fit_on_columns(train, groups.assigned(), boost, seed);
}

// ---------------------------------------------------------------------------
// Wrapper: backward elimination
// ---------------------------------------------------------------------------

struct WrapperStage {
    std::vector<std::size_t> candidates;     // features present at the start of the stage
    std::vector<double> removal_losses;      // validation loss after removing candidates[i]
    std::size_t dropped = 0;
    std::vector<std::size_t> remaining;
    double loss = 0.0;
};

struct WrapperResult {
    std::vector<std::size_t> selected;
    ColumnModel model;
    std::vector<WrapperStage> trace;
    std::size_t n_fits = 0;  // candidate fits, excluding the final refit
};

/// Drops, stage by stage, the feature whose removal gives the lowest L2 validation loss,
/// then refits on the stage subset with the globally lowest loss.
inline WrapperResult fit_wrapper_backward(const Dataset& dataset, const ChronoSplit& split,
                                          std::span<const std::size_t> features, const BoostConfig& boost,
                                          std::uint64_t seed = 0) {
    if (!split.has_validation()) throw Error(ErrorKind::DegenerateSplit, "wrapper needs a non-empty validation window");
    if (features.empty()) throw Error(ErrorKind::EmptyGroup, "wrapper needs at least one feature");
    const Dataset train = detail::train_window(dataset, split);
    const Dataset val = dataset.rows(split.val_start, split.val_end);

    WrapperResult result;
    std::vector<std::size_t> current(features.begin(), features.end());
    std::sort(current.begin(), current.end());
    std::vector<std::size_t> best_subset = current;
    double best_loss = std::numeric_limits<double>::infinity();

    while (current.size() > 1) {
        WrapperStage stage;
        stage.candidates = current;
        std::size_t drop_at = 0;
        double drop_loss = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < current.size(); ++i) {
            std::vector<std::size_t> subset = current;
            subset.erase(subset.begin() + static_cast<std::ptrdiff_t>(i));
            const ColumnModel m = fit_on_columns(train, subset, boost, seed);
            ++result.n_fits;
            const double loss = detail::mean_squared_error(val.y(), m.predict(val.x()));
            stage.removal_losses.push_back(loss);
            if (loss < drop_loss) {
                drop_loss = loss;
                drop_at = i;
            }
        }
        stage.dropped = current[drop_at];
        current.erase(current.begin() + static_cast<std::ptrdiff_t>(drop_at));
        stage.remaining = current;
        stage.loss = drop_loss;
        if (drop_loss < best_loss) {
            best_loss = drop_loss;
            best_subset = current;
        }
        result.trace.push_back(std::move(stage));
    }

    result.selected = best_subset;
    result.model = fit_on_columns(train, result.selected, boost, seed);
    return result;
}

inline WrapperResult fit_wrapper_backward(const Dataset& dataset, const ChronoSplit& split, const FeatureGroups& groups,
                                          const BoostConfig& boost, std::uint64_t seed = 0) {
    const std::vector<std::size_t> all = groups.assigned();
    return fit_wrapper_backward(dataset, split, all, boost, seed);
}

// ---------------------------------------------------------------------------
// Flat two-model ensemble
// ---------------------------------------------------------------------------

struct FlatEnsemble {
    ColumnModel first;   // target-history group
    ColumnModel second;  // remaining features
    std::vector<double> grid;
    std::vector<double> train_alphas;  // per-timestep mixing weights on the training window
    double alpha_star = 1.0;           // constant weight used at prediction time

    std::vector<double> predict(const Matrix& x) const {
        const std::vector<double> a = first.predict(x);
        const std::vector<double> b = second.predict(x);
        std::vector<double> out(a.size());
        for (std::size_t t = 0; t < a.size(); ++t) out[t] = alpha_star * a[t] + (1.0 - alpha_star) * b[t];
        return out;
    }
};

/// Per-timestep convex mixing weights: argmin over grid of loss(y_t, a*p_t + (1-a)*q_t), smallest a on ties.
template <LossFunction L>
std::vector<double> optimize_mixing(std::span<const double> y, std::span<const double> p, std::span<const double> q,
                                    std::span<const double> grid, const L& loss) {
    if (y.size() != p.size() || y.size() != q.size()) throw Error(ErrorKind::LengthMismatch, "optimize_mixing lengths differ");
    std::vector<double> out(y.size());
    for (std::size_t t = 0; t < y.size(); ++t) {
        double best_loss = std::numeric_limits<double>::infinity();
        for (double a : grid) {
            const double l = loss(y[t], a * p[t] + (1.0 - a) * q[t]);
            if (l < best_loss) {
                best_loss = l;
                out[t] = a;
            }
        }
    }
    return out;
}

/// Constant mixing weight minimizing the summed loss over a window; smallest a on ties.
template <LossFunction L>
double optimize_constant_mixing(std::span<const double> y, std::span<const double> p, std::span<const double> q,
                                std::span<const double> grid, const L& loss) {
    double best_loss = std::numeric_limits<double>::infinity();
    double best = grid.front();
    for (double a : grid) {
        double total = 0.0;
        for (std::size_t t = 0; t < y.size(); ++t) total += loss(y[t], a * p[t] + (1.0 - a) * q[t]);
        if (total < best_loss) {
            best_loss = total;
            best = a;
        }
    }
    return best;
}

inline FlatEnsemble fit_flat_ensemble(const Dataset& dataset, const ChronoSplit& split, const FeatureGroups& groups,
                                      const BoostConfig& boost, int n_alpha_steps, const Loss& loss = l1_loss(),
                                      std::uint64_t seed = 0) {
    if (groups.size() != 2)
        throw Error(ErrorKind::GroupCountMismatch, "flat ensemble needs exactly 2 groups, got " + std::to_string(groups.size()));
    const Dataset train = detail::train_window(dataset, split);
    FlatEnsemble e;
    e.first = fit_on_columns(train, groups[0], boost, seed);
    e.second = fit_on_columns(train, groups[1], boost, seed + 1);
    e.grid = linear_grid(0.0, 1.0, n_alpha_steps);
    e.train_alphas = optimize_mixing(train.y(), e.first.predict(train.x()), e.second.predict(train.x()), e.grid, loss);
    const Dataset sel = detail::selection_window(dataset, split);
    e.alpha_star = optimize_constant_mixing(sel.y(), e.first.predict(sel.x()), e.second.predict(sel.x()), e.grid, loss);
    return e;
}

// ---------------------------------------------------------------------------
// Filter: Pearson correlation ranking
// ---------------------------------------------------------------------------

/// Pearson correlation; 0 when either side has zero variance.
inline double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(ErrorKind::LengthMismatch, "pearson lengths differ");
    if (x.empty()) throw Error(ErrorKind::EmptyInput, "pearson on empty input");
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
}

struct FilterResult {
    std::vector<std::size_t> selected;  // ranked, best first
    std::vector<double> scores;         // signed Pearson score per candidate, in candidate order
    ColumnModel model;
};

/// Keeps the m candidates with the largest |Pearson| against the training target; ties go to the lower index.
inline FilterResult fit_filter(const Dataset& dataset, const ChronoSplit& split, std::span<const std::size_t> candidates,
                               std::size_t m, const BoostConfig& boost, std::uint64_t seed = 0) {
    if (m < 1 || m > candidates.size())
        throw Error(ErrorKind::InvalidArgument, "filter size m must be in [1, " + std::to_string(candidates.size()) + "]");
    const Dataset train = detail::train_window(dataset, split);
    FilterResult result;
    std::vector<std::size_t> order(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const std::vector<double> col = train.x().column(candidates[i]);
        const bool constant = std::all_of(col.begin(), col.end(), [&](double v) { return v == col.front(); });
        if (constant) warn("DegenerateFeature: column " + dataset.feature_names()[candidates[i]] + " has zero variance");
        result.scores.push_back(pearson(col, train.y()));
        order[i] = i;
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double sa = std::abs(result.scores[a]);
        const double sb = std::abs(result.scores[b]);
        if (sa != sb) return sa > sb;
        return candidates[a] < candidates[b];
    });
    for (std::size_t i = 0; i < m; ++i) result.selected.push_back(candidates[order[i]]);
    result.model = fit_on_columns(train, result.selected, boost, seed);
    return result;
}

inline FilterResult fit_filter(const Dataset& dataset, const ChronoSplit& split, const FeatureGroups& groups, std::size_t m,
                               const BoostConfig& boost, std::uint64_t seed = 0) {
    const std::vector<std::size_t> all = groups.assigned();
    return fit_filter(dataset, split, all, m, boost, seed);
}

}  // namespace hefs
