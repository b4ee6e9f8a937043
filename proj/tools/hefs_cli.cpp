// Batch driver: synthetic data generation, experiment runs, CSV validation and t-tests on saved results.

#include "hefs/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kDataError = 3, kRuntimeError = 4 };

int exit_code_for(hefs::ErrorKind kind) {
    switch (kind) {
        case hefs::ErrorKind::ConfigError: return kConfigError;
        case hefs::ErrorKind::ParseError:
        case hefs::ErrorKind::NonNumericTarget:
        case hefs::ErrorKind::IOError: return kDataError;
        default: return kRuntimeError;
    }
}

hefs::ExperimentConfig config_or_default(const std::string& path) {
    if (path.empty()) return hefs::ExperimentConfig{};
    return hefs::load_config(path);
}

void write_synthetic(const hefs::SyntheticData& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& ds = data.dataset;
    std::string text = "y";
    for (const auto& name : ds.feature_names()) text += ',' + name;
    text += ",label\n";
    for (std::size_t r = 0; r < ds.size(); ++r) {
        text += hefs::csv::format_number(ds.y()[r]);
        for (double v : ds.x().row(r)) text += ',' + hefs::csv::format_number(v);
        text += ',' + std::to_string(data.labels[r]) + '\n';
    }
    hefs::write_text(dir / "synthetic.csv", text);

    hefs::json groups = hefs::json::array();
    for (const auto& g : data.groups.groups) {
        hefs::json names = hefs::json::array();
        for (std::size_t c : g) names.push_back(ds.feature_names()[c]);
        groups.push_back(names);
    }
    hefs::write_text(dir / "groups.json", hefs::json{{"groups", groups}, {"excluded", {"label"}}}.dump(2) + '\n');
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical ensemble feature selection for time series forecasting"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
    std::optional<std::size_t> sample;
    bool no_timing = false;

    auto* synth = app.add_subcommand("synth", "write one synthetic dataset as CSV plus its feature groups");
    synth->add_option("--config", config_path, "experiment config (JSON); defaults to the built-in synthetic setup");
    synth->add_option("--seed", seed, "trial seed");
    synth->add_option("--out", out_dir, "output directory")->required();

    auto* run = app.add_subcommand("run", "run a full experiment from a config");
    run->add_option("--config", config_path, "experiment config (JSON)")->required();
    run->add_option("--jobs", jobs, "parallel trials")->check(CLI::PositiveNumber);
    run->add_option("--seed", seed, "base seed (overrides config)");
    run->add_option("--out", out_dir, "output directory (overrides config)");
    run->add_option("--sample", sample, "series sampled from an M4-style file (overrides config)");
    run->add_flag("--no-timing", no_timing, "record zero wall times so every output file is reproducible byte for byte");

    std::string ingest_path;
    std::string target = "y";
    std::optional<std::string> timestamp;
    std::string layout = "column";
    auto* ingest = app.add_subcommand("ingest", "validate a CSV and print a summary");
    ingest->add_option("path", ingest_path, "CSV file")->required();
    ingest->add_option("--target", target, "target column (column layout)");
    ingest->add_option("--timestamp", timestamp, "timestamp column (column layout)");
    ingest->add_option("--layout", layout, "column | m4_rows")->check(CLI::IsMember({"column", "m4_rows"}));
    ingest->add_option("--sample", sample, "series sampled from an M4-style file");
    ingest->add_option("--seed", seed, "sampling seed");

    std::string file_a, file_b, method_a, method_b;
    auto* ttest = app.add_subcommand("ttest", "one-sided paired t-test between two per_trial.csv files");
    ttest->add_option("compared", file_a, "per_trial.csv of the compared method")->required();
    ttest->add_option("proposed", file_b, "per_trial.csv of the proposed method")->required();
    ttest->add_option("--compared-method", method_a, "method label in the compared file");
    ttest->add_option("--proposed-method", method_b, "method label in the proposed file (default: hierarchical if present)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfigError;
    }

    try {
        if (*synth) {
            hefs::ExperimentConfig cfg = config_or_default(config_path);
            const auto* spec = std::get_if<hefs::SyntheticSpec>(&cfg.dataset);
            if (!spec) throw hefs::Error(hefs::ErrorKind::ConfigError, "synth needs a synthetic dataset config");
            const hefs::SyntheticData data = hefs::assemble_synthetic(spec->with_seed(seed.value_or(cfg.seed)));
            write_synthetic(data, out_dir);
            std::cout << "wrote " << data.dataset.size() << " rows x " << data.dataset.n_features() << " features to "
                      << (std::filesystem::path(out_dir) / "synthetic.csv").string() << '\n';
        } else if (*run) {
            hefs::ExperimentConfig cfg = hefs::load_config(config_path);
            if (seed) cfg.seed = *seed;
            if (!out_dir.empty()) cfg.output_dir = out_dir;
            if (no_timing) cfg.record_timing = false;
            const hefs::ExperimentResults res = hefs::run_experiment(cfg, jobs, sample);
            std::cout << "trials: " << cfg.trials << "  output: " << cfg.output_dir << '\n';
            for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
                double acc = 0.0;
                for (const auto& t : res.trials) acc += t[m].mse();
                std::printf("  %-13s mean test MSE %.6g\n", hefs::to_string(cfg.methods[m]), acc / static_cast<double>(res.trials.size()));
            }
        } else if (*ingest) {
            hefs::json summary;
            if (layout == "column") {
                const hefs::Dataset ds = hefs::ingest_csv(ingest_path, target, timestamp);
                summary = {{"layout", "column"}, {"rows", ds.size()}, {"features", ds.feature_names()}};
                const hefs::AdfResult adf = hefs::adf_test(ds.y());
                summary["adf"] = {{"statistic", adf.statistic}, {"p_value", adf.p_value}};
            } else {
                const auto rows = hefs::ingest_m4_rows(ingest_path);
                const auto picked = hefs::sample_rows(rows.size(), sample.value_or(0), seed.value_or(0));
                hefs::json series = hefs::json::array();
                for (std::size_t i : picked) series.push_back({{"id", rows[i].id}, {"length", rows[i].values.size()}});
                summary = {{"layout", "m4_rows"}, {"series_total", rows.size()}, {"series", series}};
            }
            std::cout << summary.dump(2) << '\n';
        } else if (*ttest) {
            const auto a = hefs::read_per_trial(file_a);
            const auto b = hefs::read_per_trial(file_b);
            auto pick = [](const std::vector<hefs::PerTrialRow>& rows, std::string method, const char* fallback) {
                if (method.empty()) {
                    for (const auto& r : rows)
                        if (fallback && r.method == fallback) method = fallback;
                    if (method.empty() && !rows.empty()) method = rows.front().method;
                }
                std::map<std::size_t, double> by_trial;
                for (const auto& r : rows)
                    if (r.method == method) by_trial[r.trial] = r.mse;
                if (by_trial.empty()) throw hefs::Error(hefs::ErrorKind::ParseError, "no rows for method '" + method + "'");
                return std::make_pair(method, by_trial);
            };
            const auto [name_a, mse_a] = pick(a, method_a, nullptr);
            const auto [name_b, mse_b] = pick(b, method_b, "hierarchical");
            std::vector<double> xa, xb;
            for (const auto& [trial, v] : mse_a) {
                const auto it = mse_b.find(trial);
                if (it == mse_b.end()) continue;
                xa.push_back(v);
                xb.push_back(it->second);
            }
            const hefs::TTestReport r = hefs::paired_t_test_one_sided(xa, xb);
            std::cout << hefs::json{{"compared", name_a}, {"proposed", name_b}, {"pairs", xa.size()}, {"t_stat", r.t_stat},
                                    {"p_value", r.p_value}, {"dof", r.dof}, {"zero_variance", r.zero_variance}}
                             .dump(2)
                      << '\n';
        }
    } catch (const hefs::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kOk;
}
