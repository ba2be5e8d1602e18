#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "pmelab/experiment.hpp"

using namespace pmelab;

namespace {

std::filesystem::path scratch(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("pmelab-test-" + name);
    std::filesystem::remove_all(p);
    return p;
}

}  // namespace

TEST(Config, JsonRoundTrip) {
    ExperimentConfig c;
    c.m = 3.0;
    c.seed = 17;
    c.domain.kind = "rectangle";
    c.domain.nx = 20;
    c.domain.ny = 12;
    c.solver.tau = 5e-3;
    c.selection.kinds = "B";
    EXPECT_EQ(to_json(config_from_json(to_json(c))), to_json(c));
}

TEST(Config, UnknownKeyIsRejected) {
    EXPECT_THROW(config_from_json({{"mm", 2.0}}), ConfigError);
    EXPECT_THROW(config_from_json({{"solver", {{"dt", 0.1}}}}), ConfigError);
}

TEST(Config, InvalidExponentIsRejected) {
    ExperimentConfig c;
    c.m = 0.5;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Run, InvalidConfigExitsWithTwo) {
    ExperimentConfig c;
    c.study = "ground-state";
    c.m = 1.0;
    const auto dir = scratch("invalid");
    const RunOutcome r = run(c, dir.string());
    EXPECT_EQ(r.exit_code, kExitConfig);
    EXPECT_TRUE(r.manifest.contains("error"));
}

TEST(Run, GroundStateWritesManifestAndProfile) {
    ExperimentConfig c;
    c.study = "ground-state";
    c.domain.nx = 64;
    const auto dir = scratch("gs");
    const RunOutcome r = run(c, dir.string());
    EXPECT_EQ(r.exit_code, kExitOk);
    EXPECT_TRUE(std::filesystem::exists(dir / "manifest.json"));
    EXPECT_TRUE(std::filesystem::exists(dir / "profile.csv"));
    std::filesystem::remove_all(dir);
}

TEST(Run, OutputDirectoryPrecedence) {
    ExperimentConfig c;
    c.output_dir = "from-config";
    ::unsetenv(kOutputDirEnv);
    EXPECT_EQ(resolve_output_dir(c, std::nullopt), std::filesystem::path("from-config"));
    ::setenv(kOutputDirEnv, "from-env", 1);
    EXPECT_EQ(resolve_output_dir(c, std::nullopt), std::filesystem::path("from-env"));
    EXPECT_EQ(resolve_output_dir(c, std::string("from-cli")), std::filesystem::path("from-cli"));
    ::unsetenv(kOutputDirEnv);
}

TEST(Csv, EmptySeriesIsHeaderOnly) {
    const std::string s = series_csv({});
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 1);
}
