#include "hefs/experiment.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hefs;

namespace {

ExperimentConfig tiny_config(std::vector<Method> methods) {
    ExperimentConfig cfg;
    SyntheticSpec spec;
    spec.arma.n = 160;
    spec.side.n = 160;
    spec.side.n_features = 6;
    cfg.dataset = spec;
    cfg.methods = std::move(methods);
    cfg.trials = 2;
    cfg.boost = BoostConfig{15, 0.2, TreeConfig{3, 3, 8}, 1.0};
    cfg.record_timing = false;
    return cfg;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const char* const kOutputs[] = {"per_trial.csv", "curves.csv", "ttests.json", "timing.json", "config_echo.json"};

}  // namespace

TEST(Config, JsonRoundTrip) {
    ExperimentConfig cfg = tiny_config({Method::Hierarchical, Method::Wrapper});
    cfg.cost = CostOptConfig{0.2, 11, pinball_loss(0.3)};
    cfg.loss_param = 0.3;
    const ExperimentConfig back = config_from_json(to_json(cfg));
    EXPECT_EQ(to_json(back), to_json(cfg));
    EXPECT_EQ(back.cost.loss.name(), "pinball");
}

TEST(Config, UnknownKeyIsConfigError) {
    json j = to_json(ExperimentConfig{});
    j["bogus"] = 1;
    try {
        config_from_json(j);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ConfigError);
    }
}

TEST(Config, BadMethodAndVersion) {
    json j = to_json(ExperimentConfig{});
    j["methods"] = {"hierarchical", "magic"};
    EXPECT_THROW(config_from_json(j), Error);
    j = to_json(ExperimentConfig{});
    j["schema_version"] = 99;
    EXPECT_THROW(config_from_json(j), Error);
}

TEST(Experiment, SmokeWritesAllFiles) {
    ExperimentConfig cfg = tiny_config({Method::Full});
    cfg.trials = 1;
    cfg.output_dir = (std::filesystem::temp_directory_path() / "hefs_exp_smoke").string();
    const ExperimentResults res = run_experiment(cfg);
    for (const char* f : kOutputs) EXPECT_TRUE(std::filesystem::exists(std::filesystem::path(cfg.output_dir) / f)) << f;
    const DataSource source(cfg);
    const TrialData data = source.trial(0);
    ASSERT_EQ(res.curves.size(), 1u);
    EXPECT_EQ(res.curves[0].values.size(), data.split.test_size());
}

TEST(Experiment, AllMethodsRunAndAreReproducible) {
    const ExperimentConfig cfg = tiny_config({std::begin(kAllMethods), std::end(kAllMethods)});
    const ExperimentResults a = run_trials(cfg);
    const ExperimentResults b = run_trials(cfg, 2);
    ASSERT_EQ(a.trials.size(), 2u);
    for (std::size_t t = 0; t < a.trials.size(); ++t)
        for (std::size_t m = 0; m < a.trials[t].size(); ++m) {
            EXPECT_EQ(a.trials[t][m].per_step_sq_err, b.trials[t][m].per_step_sq_err);
            EXPECT_EQ(a.trials[t][m].method, to_string(cfg.methods[m]));
        }
    EXPECT_EQ(a.ttests, b.ttests);
    EXPECT_EQ(a.ttests["tests"].size(), cfg.methods.size() - 1);
}

TEST(Experiment, SingleTrialReproducesFromItsId) {
    const ExperimentConfig cfg = tiny_config({Method::Hierarchical, Method::Embedded});
    const DataSource source(cfg);
    const auto first = run_trial(cfg, source, 1);
    const auto again = run_trial(cfg, source, 1);
    EXPECT_EQ(first[0].per_step_sq_err, again[0].per_step_sq_err);
    EXPECT_EQ(first[0].seed, cfg.seed + 1);
    EXPECT_EQ(run_trials(cfg).trials[1][0].per_step_sq_err, first[0].per_step_sq_err);
}

TEST(Experiment, ByteIdenticalOutputs) {
    ExperimentConfig cfg = tiny_config({Method::Hierarchical, Method::Ensemble, Method::Full});
    const auto root = std::filesystem::temp_directory_path() / "hefs_exp_bytes";
    cfg.output_dir = (root / "a").string();
    run_experiment(cfg, 1);
    cfg.output_dir = (root / "b").string();
    run_experiment(cfg, 3);
    for (const char* f : kOutputs) {
        const std::string a = slurp(root / "a" / f);
        std::string b = slurp(root / "b" / f);
        if (std::string(f) == "config_echo.json") {
            const auto pos = b.find("/b\"");
            ASSERT_NE(pos, std::string::npos);
            b.replace(pos, 3, "/a\"");
        }
        EXPECT_EQ(a, b) << f;
    }
}

TEST(Experiment, CsvSeriesPipeline) {
    const auto dir = std::filesystem::temp_directory_path() / "hefs_exp_csv";
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "series.csv");
        out << "ts,load\n";
        for (int i = 0; i < 300; ++i)
            out << "2020-03-" << (1 + i / 24 < 10 ? "0" : "") << 1 + i / 24 << ' ' << (i % 24 < 10 ? "0" : "") << i % 24 << ":00,"
                << 10.0 + std::sin(i * 0.26) + 0.01 * i << '\n';
    }
    ExperimentConfig cfg;
    CsvSource src;
    src.path = (dir / "series.csv").string();
    src.target_column = "load";
    src.timestamp_column = "ts";
    cfg.dataset = src;
    cfg.methods = {Method::Hierarchical, Method::Full, Method::Filter};
    cfg.trials = 1;
    cfg.boost = BoostConfig{10, 0.2, TreeConfig{3, 3, 8}, 1.0};
    cfg.split = SplitConfig{0.6, 0.2, 48};
    const DataSource source(cfg);
    const TrialData data = source.trial(0);
    EXPECT_EQ(data.split.test_size(), 48u);
    ASSERT_EQ(data.groups.size(), 2u);
    EXPECT_EQ(data.groups[1].size(), 12u);  // calendar encodings
    const auto res = run_trials(cfg);
    for (const auto& r : res.trials[0]) EXPECT_TRUE(std::isfinite(r.mse()));
}
