#pragma once

#include "hefs/core.hpp"
#include "hefs/learners.hpp"

#include <algorithm>
#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hefs {

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// Pointwise loss l(y, y_hat), queried by value only.
template <class L>
concept LossFunction = std::invocable<const L&, double, double> &&
                       std::convertible_to<std::invoke_result_t<const L&, double, double>, double>;

/// Type-erased named loss.
class Loss {
public:
    using Fn = std::function<double(double, double)>;

    Loss(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {
        if (!fn_) throw Error(ErrorKind::InvalidArgument, "loss '" + name_ + "' has no value function");
    }

    double operator()(double y, double y_hat) const { return fn_(y, y_hat); }
    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
    Fn fn_;
};

inline Loss l1_loss() {
    return Loss("l1", [](double y, double y_hat) { return std::abs(y - y_hat); });
}

inline Loss l2_loss() {
    return Loss("l2", [](double y, double y_hat) { return (y - y_hat) * (y - y_hat); });
}

inline Loss pinball_loss(double q) {
    if (!(q > 0.0 && q < 1.0)) throw Error(ErrorKind::InvalidArgument, "pinball quantile must be in (0,1)");
    return Loss("pinball", [q](double y, double y_hat) {
        const double d = y - y_hat;
        return d >= 0.0 ? q * d : (q - 1.0) * d;
    });
}

/// Name -> loss factory. The factory receives an optional scalar parameter (e.g. the pinball quantile).
class LossRegistry {
public:
    using Factory = std::function<Loss(double param)>;

    static LossRegistry& instance() {
        static LossRegistry registry;
        return registry;
    }

    void add(const std::string& name, Factory factory) {
        std::lock_guard lock(mutex_);
        factories_[name] = std::move(factory);
    }

    Loss make(const std::string& name, double param = 0.5) const {
        std::lock_guard lock(mutex_);
        const auto it = factories_.find(name);
        if (it == factories_.end()) throw Error(ErrorKind::ConfigError, "unknown loss '" + name + "'");
        return it->second(param);
    }

    bool contains(const std::string& name) const {
        std::lock_guard lock(mutex_);
        return factories_.contains(name);
    }

private:
    LossRegistry() {
        factories_["l1"] = [](double) { return l1_loss(); };
        factories_["l2"] = [](double) { return l2_loss(); };
        factories_["pinball"] = [](double q) { return pinball_loss(q); };
    }

    mutable std::mutex mutex_;
    std::map<std::string, Factory> factories_;
};

inline void register_loss(const std::string& name, LossRegistry::Factory factory) {
    LossRegistry::instance().add(name, std::move(factory));
}

inline Loss make_loss(const std::string& name, double param = 0.5) { return LossRegistry::instance().make(name, param); }

// ---------------------------------------------------------------------------
// Cost optimization
// ---------------------------------------------------------------------------

struct CostOptConfig {
    double beta = 0.33;
    int n_steps = 31;
    Loss loss = l1_loss();

    void validate() const {
        if (!(beta >= 0.0 && beta <= 1.0)) throw Error(ErrorKind::InvalidArgument, "beta must be in [0,1]");
        if (n_steps < 2) throw Error(ErrorKind::InvalidArgument, "n_steps must be >= 2");
    }

    double lower() const noexcept { return 1.0 - beta; }
    double upper() const noexcept { return 1.0 + beta; }
};

/// n evenly spaced points over [lo, hi], endpoints exact.
inline std::vector<double> linear_grid(double lo, double hi, int n) {
    if (n < 2) throw Error(ErrorKind::InvalidArgument, "grid needs at least two points");
    std::vector<double> grid(static_cast<std::size_t>(n));
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (int k = 0; k < n; ++k) grid[static_cast<std::size_t>(k)] = lo + static_cast<double>(k) * step;
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

/// Weight grid over [1-beta, 1+beta]; with an odd step count the centre point is exactly 1.
inline std::vector<double> alpha_grid(double beta, int n_steps) {
    std::vector<double> grid = linear_grid(1.0 - beta, 1.0 + beta, n_steps);
    if (n_steps % 2 == 1) grid[static_cast<std::size_t>(n_steps / 2)] = 1.0;
    return grid;
}

inline std::vector<double> alpha_grid(const CostOptConfig& cfg) {
    cfg.validate();
    return alpha_grid(cfg.beta, cfg.n_steps);
}

/// Per-timestep argmin over `grid` of loss(y_t, alpha * y_tilde_t). Ties keep the smallest alpha.
template <LossFunction L>
std::vector<double> optimize_alphas(std::span<const double> y, std::span<const double> y_tilde, std::span<const double> grid,
                                    const L& loss) {
    if (y.size() != y_tilde.size())
        throw Error(ErrorKind::LengthMismatch, "optimize_alphas: len(y)=" + std::to_string(y.size()) +
                                                   " len(y_tilde)=" + std::to_string(y_tilde.size()));
    if (y.empty() || grid.empty()) throw Error(ErrorKind::EmptyInput, "optimize_alphas on empty input");
    std::vector<double> alphas(y.size());
    for (std::size_t t = 0; t < y.size(); ++t) {
        double best_loss = std::numeric_limits<double>::infinity();
        double best = grid.front();
        for (double a : grid) {
            const double l = loss(y[t], a * y_tilde[t]);
            if (l < best_loss) {
                best_loss = l;
                best = a;
            }
        }
        alphas[t] = best;
    }
    return alphas;
}

inline std::vector<double> optimize_alphas(std::span<const double> y, std::span<const double> y_tilde,
                                           const CostOptConfig& cfg) {
    const std::vector<double> grid = alpha_grid(cfg);
    return optimize_alphas(y, y_tilde, grid, cfg.loss);
}

// ---------------------------------------------------------------------------
// Hierarchical stacker
// ---------------------------------------------------------------------------

struct HierarchicalOptions {
    bool clamp = true;
    int oof_folds = 0;  // 0 = in-sample first-layer predictions; >= 2 = chronological out-of-fold
    std::uint64_t seed = 0;
};

/// One refinement step: a learner mapping a side-information group to multiplicative weights.
struct WeightLayer {
    std::size_t group = 0;
    std::vector<std::size_t> columns;
    BoostedModel weight_learner;
    std::vector<double> train_alphas;  // cost-optimized targets the learner was fitted on
};

struct HierarchicalModel {
    std::vector<std::size_t> base_columns;  // target-history group
    BoostedModel base;
    std::vector<WeightLayer> layers;
    CostOptConfig cost;
    bool clamp = true;

    /// Prediction after the base learner and after each weight layer.
    std::vector<std::vector<double>> predict_layers(const Matrix& x) const;
    std::vector<double> predict(const Matrix& x) const { return predict_layers(x).back(); }
};

namespace detail {

inline std::size_t max_column(const HierarchicalModel& m) {
    std::size_t hi = 0;
    for (std::size_t c : m.base_columns) hi = std::max(hi, c + 1);
    for (const auto& l : m.layers)
        for (std::size_t c : l.columns) hi = std::max(hi, c + 1);
    return hi;
}

inline Matrix take_rows(const Matrix& x, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(x.row(rows[i]).begin(), x.row(rows[i]).end(), out.row(i).begin());
    return out;
}

/// First-layer predictions for every training row, each from a model that did not see that row's fold.
inline std::vector<double> out_of_fold_predictions(const Matrix& x, std::span<const double> y, int folds,
                                                   const BoostConfig& boost, std::uint64_t seed) {
    const std::size_t n = y.size();
    const auto k = static_cast<std::size_t>(folds);
    if (n < 2 * k) throw Error(ErrorKind::InvalidArgument, "too few rows for out-of-fold predictions");
    std::vector<double> out(n);
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t begin = f * n / k;
        const std::size_t end = (f + 1) * n / k;
        std::vector<std::size_t> fit_rows;
        std::vector<double> fit_y;
        for (std::size_t r = 0; r < n; ++r) {
            if (r >= begin && r < end) continue;
            fit_rows.push_back(r);
            fit_y.push_back(y[r]);
        }
        const BoostedModel m = fit_boosted(take_rows(x, fit_rows), fit_y, boost, seed + f);
        for (std::size_t r = begin; r < end; ++r) out[r] = m.predict(x.row(r));
    }
    return out;
}

}  // namespace detail

inline std::vector<std::vector<double>> HierarchicalModel::predict_layers(const Matrix& x) const {
    if (x.cols() < detail::max_column(*this))
        throw Error(ErrorKind::DimensionMismatch, "hierarchical model needs " + std::to_string(detail::max_column(*this)) +
                                                      " columns, got " + std::to_string(x.cols()));
    std::vector<std::vector<double>> out;
    out.push_back(predict_boosted(base, select_columns(x, base_columns)));
    for (const auto& layer : layers) {
        std::vector<double> alphas = predict_boosted(layer.weight_learner, select_columns(x, layer.columns));
        std::vector<double> next = out.back();
        for (std::size_t t = 0; t < next.size(); ++t) {
            const double a = clamp ? std::clamp(alphas[t], cost.lower(), cost.upper()) : alphas[t];
            next[t] = a * next[t];
        }
        out.push_back(std::move(next));
    }
    return out;
}

/// Base learner on group 0, then for each later group: optimize weights, learn them, rescale.
inline HierarchicalModel fit_hierarchical(const Dataset& train, const FeatureGroups& groups, const BoostConfig& boost,
                                          const CostOptConfig& cost, const HierarchicalOptions& options = {}) {
    cost.validate();
    if (groups.size() < 2) throw Error(ErrorKind::GroupCountTooSmall, "hierarchical stacking needs K >= 2 groups");
    validate_groups(train, groups);
    if (options.oof_folds == 1 || options.oof_folds < 0)
        throw Error(ErrorKind::InvalidArgument, "oof_folds must be 0 or >= 2");

    HierarchicalModel model;
    model.cost = cost;
    model.clamp = options.clamp;
    model.base_columns = groups[0];

    const std::span<const double> y = train.y();
    const Matrix base_x = select_columns(train.x(), model.base_columns);
    model.base = fit_boosted(base_x, y, boost, options.seed);
    std::vector<double> current = options.oof_folds >= 2
                                      ? detail::out_of_fold_predictions(base_x, y, options.oof_folds, boost, options.seed + 1000)
                                      : predict_boosted(model.base, base_x);

    const std::vector<double> grid = alpha_grid(cost);
    for (std::size_t k = 1; k < groups.size(); ++k) {
        WeightLayer layer;
        layer.group = k;
        layer.columns = groups[k];
        layer.train_alphas = optimize_alphas(y, current, grid, cost.loss);
        const Matrix side_x = select_columns(train.x(), layer.columns);
        layer.weight_learner = fit_boosted(side_x, layer.train_alphas, boost, options.seed + k);
        const std::vector<double> learned = predict_boosted(layer.weight_learner, side_x);
        for (std::size_t t = 0; t < current.size(); ++t)
            current[t] *= options.clamp ? std::clamp(learned[t], cost.lower(), cost.upper()) : learned[t];
        model.layers.push_back(std::move(layer));
    }
    return model;
}

inline std::vector<double> predict_hierarchical(const HierarchicalModel& model, const Matrix& x) { return model.predict(x); }

}  // namespace hefs
