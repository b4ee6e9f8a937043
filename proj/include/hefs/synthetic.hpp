#pragma once

#include "hefs/core.hpp"
#include "hefs/featgen.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace hefs {

struct ArmaSpec {
    std::array<double, 4> phi{0.4, 0.3, 0.2, 0.1};
    std::array<double, 5> theta{0.65, 0.35, 0.3, -0.15, -0.3};
    double noise_std = 1.0;
    std::size_t n = 500;
    std::uint64_t seed = 0;

    static constexpr std::size_t kBurnIn = 50;

    void validate() const {
        if (!(noise_std > 0.0)) throw Error(ErrorKind::InvalidArgument, "ARMA noise_std must be > 0");
        if (n < 20) throw Error(ErrorKind::InvalidArgument, "ARMA length must be >= 20");
    }
};

struct SideInfoSpec {
    std::size_t n_features = 26;
    double imbalance = 0.65;  // P(label = 1)
    double flip_noise = 0.0;
    std::size_t n = 500;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_features < 1) throw Error(ErrorKind::InvalidArgument, "side info needs at least one feature");
        if (!(imbalance > 0.0 && imbalance <= 1.0)) throw Error(ErrorKind::InvalidArgument, "imbalance must be in (0,1]");
        if (!(flip_noise >= 0.0 && flip_noise < 0.5)) throw Error(ErrorKind::InvalidArgument, "flip_noise must be in [0,0.5)");
    }
};

/// ARMA(4,5) with zero initial conditions; the first kBurnIn samples are discarded.
inline std::vector<double> gen_arma(const ArmaSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, spec.noise_std);
    const std::size_t total = spec.n + ArmaSpec::kBurnIn;
    std::vector<double> y(total, 0.0);
    std::vector<double> eps(total, 0.0);
    for (std::size_t t = 0; t < total; ++t) {
        eps[t] = noise(rng);
        double v = eps[t];
        for (std::size_t i = 1; i <= spec.phi.size() && i <= t; ++i) v += spec.phi[i - 1] * y[t - i];
        for (std::size_t j = 1; j <= spec.theta.size() && j <= t; ++j) v += spec.theta[j - 1] * eps[t - j];
        y[t] = v;
    }
    return {y.begin() + static_cast<std::ptrdiff_t>(ArmaSpec::kBurnIn), y.end()};
}

struct SideInfo {
    std::vector<int> labels;
    Matrix features;
    std::vector<double> gaps;  // per-column mean offset delta_j
};

/// Bernoulli labels plus class-conditional Gaussian views N(+-delta_j, 1) of them.
inline SideInfo gen_side_info(const SideInfoSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::bernoulli_distribution label_dist(spec.imbalance);
    std::bernoulli_distribution flip_dist(spec.flip_noise);
    std::uniform_real_distribution<double> gap_dist(0.5, 1.5);
    std::normal_distribution<double> unit(0.0, 1.0);

    SideInfo out{std::vector<int>(spec.n), Matrix(spec.n, spec.n_features), std::vector<double>(spec.n_features)};
    for (auto& g : out.gaps) g = gap_dist(rng);
    for (auto& l : out.labels) l = label_dist(rng) ? 1 : 0;
    for (std::size_t t = 0; t < spec.n; ++t) {
        for (std::size_t j = 0; j < spec.n_features; ++j) {
            int seen = out.labels[t];
            if (spec.flip_noise > 0.0 && flip_dist(rng)) seen = 1 - seen;
            const double mu = seen == 1 ? out.gaps[j] : -out.gaps[j];
            out.features(t, j) = mu + unit(rng);
        }
    }
    return out;
}

struct SyntheticSpec {
    ArmaSpec arma{};
    SideInfoSpec side{};
    double up_scale = 1.33;
    double down_scale = 0.66;
    double noise_std = 0.5;
    std::uint64_t noise_seed = 0;
    FeatureRecipe recipe{{1, 2, 3, 4}, {2, 4, 8}, {1}, {}};

    /// Reseeds every random stream from one trial seed.
    SyntheticSpec with_seed(std::uint64_t seed) const {
        SyntheticSpec s = *this;
        s.arma.seed = seed;
        s.side.seed = seed ^ 0x9E3779B97F4A7C15ull;
        s.noise_seed = seed ^ 0xC2B2AE3D27D4EB4Full;
        return s;
    }
};

struct SyntheticData {
    Dataset dataset;
    FeatureGroups groups;
    std::vector<int> labels;            // aligned with dataset rows
    std::vector<double> base;           // min-max scaled ARMA, aligned with dataset rows
    std::vector<double> scaled_target;  // base times the label-driven factor, before noise and rescaling
};

/// Label-scaled, noisy, min-max rescaled ARMA target with history and side-information groups.
inline SyntheticData assemble_synthetic(const SyntheticSpec& spec) {
    if (spec.arma.n != spec.side.n)
        throw Error(ErrorKind::LengthMismatch, "ARMA length " + std::to_string(spec.arma.n) + " != side-info length " +
                                                   std::to_string(spec.side.n));
    const std::vector<double> arma = gen_arma(spec.arma);
    const SideInfo side = gen_side_info(spec.side);
    const std::size_t n = arma.size();

    const std::vector<double> base = minmax_apply(minmax_fit(arma), arma);
    std::vector<double> scaled(n);
    for (std::size_t t = 0; t < n; ++t) scaled[t] = base[t] * (side.labels[t] == 1 ? spec.up_scale : spec.down_scale);

    std::vector<double> noisy = scaled;
    if (spec.noise_std > 0.0) {
        std::mt19937_64 rng(spec.noise_seed);
        std::normal_distribution<double> noise(0.0, spec.noise_std);
        for (double& v : noisy) v += noise(rng);
    }
    const std::vector<double> target = minmax_apply(minmax_fit(noisy), noisy);

    const FeatureBlock history = make_history_features(target, spec.recipe);
    const std::size_t start = history.valid_from;
    const std::size_t rows = n - start;
    const std::size_t n_hist = history.values.cols();
    const std::size_t n_side = side.features.cols();

    Matrix x(rows, n_hist + n_side);
    std::vector<std::string> names = history.names;
    for (std::size_t j = 0; j < n_side; ++j) names.push_back("side_" + std::to_string(j));
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < n_hist; ++j) x(r, j) = history.values(start + r, j);
        for (std::size_t j = 0; j < n_side; ++j) x(r, n_hist + j) = side.features(start + r, j);
    }

    FeatureGroups groups;
    groups.groups.resize(2);
    for (std::size_t j = 0; j < n_hist; ++j) groups.groups[0].push_back(j);
    for (std::size_t j = 0; j < n_side; ++j) groups.groups[1].push_back(n_hist + j);

    auto tail = [start](const auto& v) { return std::vector<typename std::decay_t<decltype(v)>::value_type>(v.begin() + static_cast<std::ptrdiff_t>(start), v.end()); };
    Dataset ds(tail(target), std::move(x), std::move(names));
    FeatureGroups validated = validate_groups(ds, groups);
    return SyntheticData{std::move(ds), std::move(validated), tail(side.labels), tail(base), tail(scaled)};
}

}  // namespace hefs
