#pragma once

#include "hefs/baselines.hpp"
#include "hefs/core.hpp"
#include "hefs/eval.hpp"
#include "hefs/featgen.hpp"
#include "hefs/hierarchy.hpp"
#include "hefs/io.hpp"
#include "hefs/learners.hpp"
#include "hefs/synthetic.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

namespace hefs {

using json = nlohmann::json;

inline constexpr int kConfigSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class Method { Hierarchical, Ensemble, Embedded, Wrapper, Filter, Full };

inline constexpr Method kAllMethods[] = {Method::Hierarchical, Method::Ensemble, Method::Embedded,
                                         Method::Wrapper,      Method::Filter,   Method::Full};

inline const char* to_string(Method m) {
    switch (m) {
        case Method::Hierarchical: return "hierarchical";
        case Method::Ensemble: return "ensemble";
        case Method::Embedded: return "embedded";
        case Method::Wrapper: return "wrapper";
        case Method::Filter: return "filter";
        case Method::Full: return "full";
    }
    return "?";
}

inline Method parse_method(const std::string& name) {
    for (Method m : kAllMethods)
        if (name == to_string(m)) return m;
    throw Error(ErrorKind::ConfigError, "unknown method '" + name + "'");
}

enum class CsvLayout { Column, M4Rows };

struct CsvSource {
    std::string path;
    CsvLayout layout = CsvLayout::Column;
    std::string target_column = "y";
    std::optional<std::string> timestamp_column;
    FeatureRecipe recipe{{2, 4, 6, 8}, {4, 8}, {2, 4, 6, 8}, {std::begin(kAllCalendarParts), std::end(kAllCalendarParts)}};
    std::vector<std::vector<std::string>> groups;  // feature-name patterns per group; empty = history | rest
    std::size_t sample = 0;                        // rows sampled from an M4 file, 0 = all
};

struct SplitConfig {
    double train_frac = 0.6;
    double val_frac = 0.2;
    std::optional<std::size_t> test_size;  // exact test length; val_frac then applies to the remaining prefix
};

struct ExperimentConfig {
    int schema_version = kConfigSchemaVersion;
    std::variant<SyntheticSpec, CsvSource> dataset = SyntheticSpec{};
    std::vector<Method> methods{std::begin(kAllMethods), std::end(kAllMethods)};
    std::size_t trials = 200;
    BoostConfig boost{};
    CostOptConfig cost{0.33, 30, l1_loss()};
    double loss_param = 0.5;
    bool clamp = true;
    int oof_folds = 0;
    int ensemble_steps = 0;  // 0 = cost.n_steps
    std::string ensemble_loss = "l1";
    std::size_t filter_m = 0;  // 0 = size of group 0
    SplitConfig split{};
    std::uint64_t seed = 0;
    std::string output_dir = "results";
    bool record_timing = true;

    void validate() const {
        if (schema_version != kConfigSchemaVersion)
            throw Error(ErrorKind::ConfigError, "unsupported schema_version " + std::to_string(schema_version));
        if (trials < 1) throw Error(ErrorKind::ConfigError, "trials must be >= 1");
        if (methods.empty()) throw Error(ErrorKind::ConfigError, "at least one method is required");
        for (std::size_t i = 0; i < methods.size(); ++i)
            for (std::size_t j = i + 1; j < methods.size(); ++j)
                if (methods[i] == methods[j]) throw Error(ErrorKind::ConfigError, std::string("duplicate method ") + to_string(methods[i]));
        if (oof_folds == 1 || oof_folds < 0) throw Error(ErrorKind::ConfigError, "oof_folds must be 0 or >= 2");
        if (ensemble_steps == 1 || ensemble_steps < 0) throw Error(ErrorKind::ConfigError, "ensemble.n_steps must be 0 or >= 2");
        try {
            boost.validate();
            cost.validate();
        } catch (const Error& e) {
            throw Error(ErrorKind::ConfigError, e.what());
        }
    }
};

// ---------------------------------------------------------------------------
// JSON (de)serialization
// ---------------------------------------------------------------------------

namespace detail {

template <class T>
void read_opt(const json& j, const char* key, T& out) {
    if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw Error(ErrorKind::ConfigError, where + " must be an object");
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw Error(ErrorKind::ConfigError, "unknown key '" + key + "' in " + where);
    }
}

inline json recipe_to_json(const FeatureRecipe& r) {
    json cal = json::array();
    for (CalendarPart p : kAllCalendarParts)
        if (r.calendar_parts.contains(p)) cal.push_back(to_string(p));
    return {{"lags", r.lag_orders}, {"rolling_windows", r.rolling_windows}, {"rolling_lags", r.rolling_lag_orders}, {"calendar", cal}};
}

inline FeatureRecipe recipe_from_json(const json& j, FeatureRecipe r) {
    check_keys(j, {"lags", "rolling_windows", "rolling_lags", "calendar"}, "recipe");
    read_opt(j, "lags", r.lag_orders);
    read_opt(j, "rolling_windows", r.rolling_windows);
    read_opt(j, "rolling_lags", r.rolling_lag_orders);
    if (j.contains("calendar")) {
        r.calendar_parts.clear();
        for (const auto& p : j.at("calendar")) r.calendar_parts.insert(parse_calendar_part(p.get<std::string>()));
    }
    try {
        r.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::ConfigError, e.what());
    }
    return r;
}

}  // namespace detail

inline json to_json(const ExperimentConfig& c) {
    json methods = json::array();
    for (Method m : c.methods) methods.push_back(to_string(m));
    json split{{"train", c.split.train_frac}, {"val", c.split.val_frac}};
    split["test_size"] = c.split.test_size ? json(*c.split.test_size) : json(nullptr);

    json dataset;
    if (const auto* s = std::get_if<SyntheticSpec>(&c.dataset)) {
        dataset["synthetic"] = {
            {"n", s->arma.n},
            {"phi", s->arma.phi},
            {"theta", s->arma.theta},
            {"arma_noise_std", s->arma.noise_std},
            {"side_features", s->side.n_features},
            {"imbalance", s->side.imbalance},
            {"flip_noise", s->side.flip_noise},
            {"up_scale", s->up_scale},
            {"down_scale", s->down_scale},
            {"noise_std", s->noise_std},
            {"recipe", detail::recipe_to_json(s->recipe)},
        };
    } else {
        const auto& src = std::get<CsvSource>(c.dataset);
        dataset["csv"] = {
            {"path", src.path},
            {"layout", src.layout == CsvLayout::Column ? "column" : "m4_rows"},
            {"target_column", src.target_column},
            {"timestamp_column", src.timestamp_column ? json(*src.timestamp_column) : json(nullptr)},
            {"recipe", detail::recipe_to_json(src.recipe)},
            {"groups", src.groups},
            {"sample", src.sample},
        };
    }
    return {
        {"schema_version", c.schema_version},
        {"seed", c.seed},
        {"trials", c.trials},
        {"output_dir", c.output_dir},
        {"record_timing", c.record_timing},
        {"methods", methods},
        {"split", split},
        {"boost",
         {{"n_rounds", c.boost.n_rounds},
          {"learning_rate", c.boost.learning_rate},
          {"max_depth", c.boost.tree.max_depth},
          {"min_samples_leaf", c.boost.tree.min_samples_leaf},
          {"max_leaves", c.boost.tree.max_leaves},
          {"subsample_features", c.boost.subsample_features}}},
        {"cost",
         {{"beta", c.cost.beta},
          {"n_steps", c.cost.n_steps},
          {"loss", c.cost.loss.name()},
          {"loss_param", c.loss_param},
          {"clamp", c.clamp},
          {"oof_folds", c.oof_folds}}},
        {"ensemble", {{"n_steps", c.ensemble_steps}, {"loss", c.ensemble_loss}}},
        {"filter", {{"m", c.filter_m}}},
        {"dataset", dataset},
    };
}

inline ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    try {
        detail::check_keys(j, {"schema_version", "seed", "trials", "output_dir", "record_timing", "methods", "split", "boost",
                               "cost", "ensemble", "filter", "dataset"},
                           "config");
        if (!j.contains("schema_version")) throw Error(ErrorKind::ConfigError, "missing schema_version");
        c.schema_version = j.at("schema_version").get<int>();
        detail::read_opt(j, "seed", c.seed);
        detail::read_opt(j, "trials", c.trials);
        detail::read_opt(j, "output_dir", c.output_dir);
        detail::read_opt(j, "record_timing", c.record_timing);
        if (j.contains("methods")) {
            c.methods.clear();
            for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m.get<std::string>()));
        }
        if (j.contains("split")) {
            const json& s = j.at("split");
            detail::check_keys(s, {"train", "val", "test_size"}, "split");
            detail::read_opt(s, "train", c.split.train_frac);
            detail::read_opt(s, "val", c.split.val_frac);
            if (s.contains("test_size") && !s.at("test_size").is_null()) c.split.test_size = s.at("test_size").get<std::size_t>();
        }
        if (j.contains("boost")) {
            const json& b = j.at("boost");
            detail::check_keys(b, {"n_rounds", "learning_rate", "max_depth", "min_samples_leaf", "max_leaves", "subsample_features"}, "boost");
            detail::read_opt(b, "n_rounds", c.boost.n_rounds);
            detail::read_opt(b, "learning_rate", c.boost.learning_rate);
            detail::read_opt(b, "max_depth", c.boost.tree.max_depth);
            detail::read_opt(b, "min_samples_leaf", c.boost.tree.min_samples_leaf);
            detail::read_opt(b, "max_leaves", c.boost.tree.max_leaves);
            detail::read_opt(b, "subsample_features", c.boost.subsample_features);
        }
        if (j.contains("cost")) {
            const json& k = j.at("cost");
            detail::check_keys(k, {"beta", "n_steps", "loss", "loss_param", "clamp", "oof_folds"}, "cost");
            detail::read_opt(k, "beta", c.cost.beta);
            detail::read_opt(k, "n_steps", c.cost.n_steps);
            detail::read_opt(k, "loss_param", c.loss_param);
            std::string loss = "l1";
            detail::read_opt(k, "loss", loss);
            c.cost.loss = make_loss(loss, c.loss_param);
            detail::read_opt(k, "clamp", c.clamp);
            detail::read_opt(k, "oof_folds", c.oof_folds);
        }
        if (j.contains("ensemble")) {
            const json& e = j.at("ensemble");
            detail::check_keys(e, {"n_steps", "loss"}, "ensemble");
            detail::read_opt(e, "n_steps", c.ensemble_steps);
            detail::read_opt(e, "loss", c.ensemble_loss);
            if (!LossRegistry::instance().contains(c.ensemble_loss))
                throw Error(ErrorKind::ConfigError, "unknown ensemble loss '" + c.ensemble_loss + "'");
        }
        if (j.contains("filter")) {
            detail::check_keys(j.at("filter"), {"m"}, "filter");
            detail::read_opt(j.at("filter"), "m", c.filter_m);
        }
        if (j.contains("dataset")) {
            const json& d = j.at("dataset");
            detail::check_keys(d, {"synthetic", "csv"}, "dataset");
            if (d.contains("synthetic") == d.contains("csv"))
                throw Error(ErrorKind::ConfigError, "dataset needs exactly one of 'synthetic' or 'csv'");
            if (d.contains("synthetic")) {
                const json& s = d.at("synthetic");
                detail::check_keys(s, {"n", "phi", "theta", "arma_noise_std", "side_features", "imbalance", "flip_noise", "up_scale",
                                       "down_scale", "noise_std", "recipe"},
                                   "dataset.synthetic");
                SyntheticSpec spec;
                std::size_t n = spec.arma.n;
                detail::read_opt(s, "n", n);
                spec.arma.n = spec.side.n = n;
                detail::read_opt(s, "phi", spec.arma.phi);
                detail::read_opt(s, "theta", spec.arma.theta);
                detail::read_opt(s, "arma_noise_std", spec.arma.noise_std);
                detail::read_opt(s, "side_features", spec.side.n_features);
                detail::read_opt(s, "imbalance", spec.side.imbalance);
                detail::read_opt(s, "flip_noise", spec.side.flip_noise);
                detail::read_opt(s, "up_scale", spec.up_scale);
                detail::read_opt(s, "down_scale", spec.down_scale);
                detail::read_opt(s, "noise_std", spec.noise_std);
                if (s.contains("recipe")) spec.recipe = detail::recipe_from_json(s.at("recipe"), spec.recipe);
                try {
                    spec.arma.validate();
                    spec.side.validate();
                } catch (const Error& e) {
                    throw Error(ErrorKind::ConfigError, e.what());
                }
                c.dataset = spec;
            } else {
                const json& s = d.at("csv");
                detail::check_keys(s, {"path", "layout", "target_column", "timestamp_column", "recipe", "groups", "sample"}, "dataset.csv");
                CsvSource src;
                if (!s.contains("path")) throw Error(ErrorKind::ConfigError, "dataset.csv.path is required");
                src.path = s.at("path").get<std::string>();
                std::string layout = "column";
                detail::read_opt(s, "layout", layout);
                if (layout == "column") src.layout = CsvLayout::Column;
                else if (layout == "m4_rows") src.layout = CsvLayout::M4Rows;
                else throw Error(ErrorKind::ConfigError, "unknown csv layout '" + layout + "'");
                detail::read_opt(s, "target_column", src.target_column);
                if (s.contains("timestamp_column") && !s.at("timestamp_column").is_null())
                    src.timestamp_column = s.at("timestamp_column").get<std::string>();
                if (s.contains("recipe")) src.recipe = detail::recipe_from_json(s.at("recipe"), src.recipe);
                detail::read_opt(s, "groups", src.groups);
                detail::read_opt(s, "sample", src.sample);
                c.dataset = src;
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ConfigError, e.what());
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ConfigError, "cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ConfigError, path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Trial data
// ---------------------------------------------------------------------------

struct TrialData {
    Dataset dataset;
    FeatureGroups groups;
    ChronoSplit split;
};

inline ChronoSplit make_split(std::size_t n, const SplitConfig& cfg) {
    return cfg.test_size ? split_with_test_size(n, *cfg.test_size, cfg.val_frac)
                         : chronological_split(n, cfg.train_frac, cfg.val_frac);
}

namespace detail {

inline bool matches(const std::string& pattern, const std::string& name) {
    if (!pattern.empty() && pattern.back() == '*') return name.starts_with(pattern.substr(0, pattern.size() - 1));
    return name == pattern;
}

/// Resolves name patterns to column groups; a column is claimed by the first group matching it.
inline FeatureGroups resolve_groups(const std::vector<std::vector<std::string>>& patterns, const std::vector<std::string>& names) {
    FeatureGroups g;
    std::vector<bool> taken(names.size(), false);
    for (const auto& group : patterns) {
        std::vector<std::size_t> cols;
        for (std::size_t c = 0; c < names.size(); ++c) {
            if (taken[c]) continue;
            if (std::any_of(group.begin(), group.end(), [&](const std::string& p) { return matches(p, names[c]); })) {
                cols.push_back(c);
                taken[c] = true;
            }
        }
        g.groups.push_back(std::move(cols));
    }
    return g;
}

}  // namespace detail

/// Scales a raw series on its training prefix, builds history/calendar features, and trims invalid rows.
/// `extra` holds exogenous columns aligned with `y`.
inline TrialData prepare_series(std::span<const double> y, std::span<const Timestamp> timestamps, const Matrix& extra,
                                const std::vector<std::string>& extra_names, const CsvSource& src, const SplitConfig& split_cfg) {
    if (timestamps.size() != y.size()) throw Error(ErrorKind::LengthMismatch, "timestamps and series lengths differ");
    const std::vector<double> probe(y.begin(), y.end());
    // The trimmed prefix length depends only on the recipe, so the split is known before scaling.
    const std::size_t warmup = make_history_features(probe, src.recipe).valid_from;
    const std::size_t n = y.size() - warmup;
    const ChronoSplit split = make_split(n, split_cfg);

    const ScalerParams scaler = minmax_fit(y.subspan(0, warmup + split.train_end));
    const std::vector<double> scaled = minmax_apply(scaler, y);
    const FeatureBlock history = make_history_features(scaled, src.recipe);
    const FeatureBlock calendar = calendar_features(timestamps, src.recipe.calendar_parts);

    std::vector<std::string> names = history.names;
    names.insert(names.end(), calendar.names.begin(), calendar.names.end());
    names.insert(names.end(), extra_names.begin(), extra_names.end());
    Matrix x(n, names.size());
    for (std::size_t r = 0; r < n; ++r) {
        std::size_t c = 0;
        for (std::size_t j = 0; j < history.values.cols(); ++j) x(r, c++) = history.values(warmup + r, j);
        for (std::size_t j = 0; j < calendar.values.cols(); ++j) x(r, c++) = calendar.values(warmup + r, j);
        for (std::size_t j = 0; j < extra.cols(); ++j) x(r, c++) = extra(warmup + r, j);
    }

    FeatureGroups groups;
    if (src.groups.empty()) {
        groups.groups.resize(2);
        for (std::size_t c = 0; c < names.size(); ++c) groups.groups[c < history.names.size() ? 0 : 1].push_back(c);
        if (groups.groups[1].empty()) groups.groups.pop_back();
    } else {
        groups = detail::resolve_groups(src.groups, names);
    }
    std::vector<Timestamp> ts(timestamps.begin() + static_cast<std::ptrdiff_t>(warmup), timestamps.end());
    Dataset ds(std::vector<double>(scaled.begin() + static_cast<std::ptrdiff_t>(warmup), scaled.end()), std::move(x), std::move(names),
               std::move(ts));
    FeatureGroups validated = validate_groups(ds, groups);
    return TrialData{std::move(ds), std::move(validated), split};
}

/// Source data loaded once per experiment; trials index into it.
class DataSource {
public:
    DataSource(const ExperimentConfig& config, std::optional<std::size_t> sample_override = std::nullopt) : config_(config) {
        if (const auto* src = std::get_if<CsvSource>(&config.dataset)) {
            if (src->layout == CsvLayout::Column) {
                Dataset raw = ingest_csv(src->path, src->target_column, src->timestamp_column);
                series_.push_back(Series{"series", raw.y(), *raw.timestamps(), raw.x(), raw.feature_names()});
            } else {
                const std::vector<NamedSeries> rows = ingest_m4_rows(src->path);
                const std::size_t k = sample_override.value_or(src->sample);
                for (std::size_t i : sample_rows(rows.size(), k, config.seed))
                    series_.push_back(Series{rows[i].id, rows[i].values, synthetic_hourly_timestamps(rows[i].values.size()),
                                             Matrix(rows[i].values.size(), 0), {}});
            }
        }
    }

    std::uint64_t trial_seed(std::size_t trial) const { return config_.seed + trial; }

    TrialData trial(std::size_t j) const {
        if (const auto* spec = std::get_if<SyntheticSpec>(&config_.dataset)) {
            SyntheticData d = assemble_synthetic(spec->with_seed(trial_seed(j)));
            const ChronoSplit split = make_split(d.dataset.size(), config_.split);
            return TrialData{std::move(d.dataset), std::move(d.groups), split};
        }
        const Series& s = series_[j % series_.size()];
        return prepare_series(s.y, s.timestamps, s.extra, s.extra_names, std::get<CsvSource>(config_.dataset), config_.split);
    }

    std::size_t series_count() const { return series_.size(); }

private:
    struct Series {
        std::string id;
        std::vector<double> y;
        std::vector<Timestamp> timestamps;
        Matrix extra;
        std::vector<std::string> extra_names;
    };

    ExperimentConfig config_;
    std::vector<Series> series_;
};

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

struct TrialResult {
    std::string method;
    std::vector<double> per_step_sq_err;  // (y_t - y_hat_t)^2 / N over the test window
    double wall_time_s = 0.0;
    std::size_t trial_id = 0;
    std::uint64_t seed = 0;

    double mse() const {
        double acc = 0.0;
        for (double v : per_step_sq_err) acc += v;
        return acc;
    }
};

namespace detail {

inline FeatureGroups two_group_view(const FeatureGroups& g) {
    if (g.size() <= 2) return g;
    FeatureGroups out;
    out.groups.push_back(g[0]);
    std::vector<std::size_t> rest;
    for (std::size_t k = 1; k < g.size(); ++k) rest.insert(rest.end(), g[k].begin(), g[k].end());
    std::sort(rest.begin(), rest.end());
    out.groups.push_back(std::move(rest));
    return out;
}

inline std::vector<double> fit_and_predict(Method method, const ExperimentConfig& cfg, const TrialData& data, std::uint64_t seed) {
    const Dataset train = data.dataset.rows(0, data.split.train_end);
    const Matrix test_x = slice_rows(data.dataset.x(), data.split.test_start, data.dataset.size());
    switch (method) {
        case Method::Hierarchical: {
            const HierarchicalModel m =
                fit_hierarchical(train, data.groups, cfg.boost, cfg.cost, HierarchicalOptions{cfg.clamp, cfg.oof_folds, seed});
            return m.predict(test_x);
        }
        case Method::Ensemble: {
            const int steps = cfg.ensemble_steps > 0 ? cfg.ensemble_steps : cfg.cost.n_steps;
            const FlatEnsemble e = fit_flat_ensemble(data.dataset, data.split, two_group_view(data.groups), cfg.boost, steps,
                                                     make_loss(cfg.ensemble_loss, cfg.loss_param), seed);
            return e.predict(test_x);
        }
        case Method::Embedded:
            return fit_embedded(train, data.groups, cfg.boost, seed).predict(test_x);
        case Method::Wrapper:
            return fit_wrapper_backward(data.dataset, data.split, data.groups, cfg.boost, seed).model.predict(test_x);
        case Method::Filter: {
            const std::size_t all = data.groups.assigned().size();
            const std::size_t m = std::min(cfg.filter_m > 0 ? cfg.filter_m : data.groups[0].size(), all);
            return fit_filter(data.dataset, data.split, data.groups, m, cfg.boost, seed).model.predict(test_x);
        }
        case Method::Full:
            return fit_full_baseline(train, data.groups, cfg.boost, seed).predict(test_x);
    }
    return {};
}

}  // namespace detail

/// Runs every configured method on one trial; reproducible from (config, trial id) alone.
inline std::vector<TrialResult> run_trial(const ExperimentConfig& cfg, const DataSource& source, std::size_t trial) {
    const std::uint64_t seed = source.trial_seed(trial);
    const TrialData data = source.trial(trial);
    const std::vector<double> test_y = slice(data.dataset.y(), data.split.test_start, data.dataset.size());
    std::vector<TrialResult> out;
    for (Method method : cfg.methods) {
        std::vector<double> pred;
        const double seconds = time_method([&] { pred = detail::fit_and_predict(method, cfg, data, seed); });
        out.push_back(TrialResult{to_string(method), mse_per_step(test_y, pred, test_y.size()), cfg.record_timing ? seconds : 0.0,
                                  trial, seed});
    }
    return out;
}

struct ExperimentResults {
    std::vector<std::vector<TrialResult>> trials;  // [trial][method], in config order
    std::vector<Curve> curves;
    json ttests;
    json timing;
};

/// Paired one-sided tests of each method against the hierarchical method on per-trial MSE.
inline json build_ttests(const std::vector<std::vector<TrialResult>>& trials, const std::vector<Method>& methods) {
    json out{{"proposed", "hierarchical"}, {"metric", "per-trial test MSE"}, {"hypothesis", "H0: mu_compared <= mu_proposed"}};
    json tests = json::array();
    const auto it = std::find(methods.begin(), methods.end(), Method::Hierarchical);
    if (it == methods.end() || trials.size() < 2) {
        out["note"] = it == methods.end() ? "hierarchical method not run" : "need at least two trials";
        out["tests"] = tests;
        return out;
    }
    const auto h = static_cast<std::size_t>(it - methods.begin());
    std::vector<double> proposed;
    for (const auto& t : trials) proposed.push_back(t[h].mse());
    for (std::size_t m = 0; m < methods.size(); ++m) {
        if (m == h) continue;
        std::vector<double> compared;
        for (const auto& t : trials) compared.push_back(t[m].mse());
        const TTestReport r = paired_t_test_one_sided(compared, proposed);
        tests.push_back({{"method", to_string(methods[m])},
                         {"t_stat", r.t_stat},
                         {"p_value", r.p_value},
                         {"dof", r.dof},
                         {"zero_variance", r.zero_variance}});
    }
    out["tests"] = tests;
    return out;
}

/// Runs all trials (in parallel across `jobs` threads) and aggregates them. Output order never depends on `jobs`.
inline ExperimentResults run_trials(const ExperimentConfig& cfg, std::size_t jobs = 1,
                                    std::optional<std::size_t> sample_override = std::nullopt) {
    cfg.validate();
    const DataSource source(cfg, sample_override);
    ExperimentResults res;
    res.trials.resize(cfg.trials);

    std::atomic<std::size_t> next{0};
    std::mutex failure_mutex;
    std::optional<std::size_t> failed_trial;
    std::string failure;
    auto worker = [&] {
        for (std::size_t j = next++; j < cfg.trials; j = next++) {
            {
                std::lock_guard lock(failure_mutex);
                if (failed_trial) return;
            }
            try {
                res.trials[j] = run_trial(cfg, source, j);
            } catch (const std::exception& e) {
                std::lock_guard lock(failure_mutex);
                if (!failed_trial || j < *failed_trial) {
                    failed_trial = j;
                    failure = e.what();
                }
            }
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, cfg.trials));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failed_trial)
        throw Error(ErrorKind::InvalidArgument, "trial " + std::to_string(*failed_trial) + " failed (seed " +
                                                    std::to_string(source.trial_seed(*failed_trial)) + "): " + failure);

    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
        std::vector<std::vector<double>> per_trial;
        for (const auto& t : res.trials) per_trial.push_back(t[m].per_step_sq_err);
        res.curves.push_back(Curve{to_string(cfg.methods[m]), cumulative_average(average_over_trials(per_trial))});
    }
    res.ttests = build_ttests(res.trials, cfg.methods);

    json mean_time = json::object();
    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
        double acc = 0.0;
        for (const auto& t : res.trials) acc += t[m].wall_time_s;
        mean_time[to_string(cfg.methods[m])] = acc / static_cast<double>(res.trials.size());
    }
    res.timing = {{"mean_wall_time_s", mean_time}, {"trials", cfg.trials}, {"timing_recorded", cfg.record_timing}};
    if (mean_time.contains("wrapper") && mean_time.contains("hierarchical") && mean_time["hierarchical"].get<double>() > 0.0)
        res.timing["wrapper_over_hierarchical"] = mean_time["wrapper"].get<double>() / mean_time["hierarchical"].get<double>();
    return res;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::IOError, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorKind::IOError, "failed writing " + path.string());
}

/// Writes per_trial.csv, curves.csv, ttests.json, timing.json and config_echo.json into `dir`.
inline void write_results(const ExperimentConfig& cfg, const ExperimentResults& res, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorKind::IOError, "cannot create " + dir.string() + ": " + ec.message());

    std::string per_trial = "trial,seed,method,wall_time_s,mse\n";
    for (const auto& trial : res.trials)
        for (const auto& r : trial)
            per_trial += std::to_string(r.trial_id) + ',' + std::to_string(r.seed) + ',' + r.method + ',' +
                         csv::format_number(r.wall_time_s) + ',' + csv::format_number(r.mse()) + '\n';
    write_text(dir / "per_trial.csv", per_trial);
    emit_plot_data(res.curves, dir / "curves.csv");
    write_text(dir / "ttests.json", res.ttests.dump(2) + '\n');
    write_text(dir / "timing.json", res.timing.dump(2) + '\n');
    write_text(dir / "config_echo.json", to_json(cfg).dump(2) + '\n');
}

inline ExperimentResults run_experiment(const ExperimentConfig& cfg, std::size_t jobs = 1,
                                        std::optional<std::size_t> sample_override = std::nullopt) {
    ExperimentResults res = run_trials(cfg, jobs, sample_override);
    write_results(cfg, res, cfg.output_dir);
    return res;
}

}  // namespace hefs
