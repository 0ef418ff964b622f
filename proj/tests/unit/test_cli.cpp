#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "json.hpp"
#include "sdeinfer/cli.hpp"
#include "sdeinfer/errors.hpp"

using namespace sdeinfer;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {
class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               (std::string("sdeinfer_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    json small_config(const std::string& out = "out") const {
        return {{"seed", 3},
                {"prior", {{"K", 6}}},
                {"chain", {{"iterations", 60}, {"burn_in", 10}, {"thinning", 5}, {"pcn_step", 0.3}}},
                {"fd", {{"cells", 48}, {"dt", 1e-2}, {"min_steps", 10}}},
                {"sim", {{"T", 1.0}, {"n_obs", 6}}},
                {"map", {{"sweeps", 1}}},
                {"io", {{"output_dir", (dir_ / out).string()}}}};
    }

    std::string write_config(const json& j, const std::string& name = "cfg.json") const {
        const auto p = dir_ / name;
        std::ofstream(p) << j.dump(1);
        return p.string();
    }

    int run(std::vector<std::string> args) {
        out_.str("");
        err_.str("");
        return cli::run(args, out_, err_);
    }

    static std::string slurp(const fs::path& p) {
        std::ifstream f(p, std::ios::binary);
        std::ostringstream ss;
        ss << f.rdbuf();
        return ss.str();
    }

    fs::path dir_;
    std::ostringstream out_, err_;
};
}  // namespace

TEST_F(CliTest, MissingConfigIsAnIoError) {
    EXPECT_EQ(run({"simulate", "--config", (dir_ / "absent.json").string()}), 3);
}

TEST_F(CliTest, MalformedJsonIsAConfigError) {
    const auto p = dir_ / "bad.json";
    std::ofstream(p) << "{ not json";
    EXPECT_EQ(run({"simulate", "--config", p.string()}), 2);
}

TEST_F(CliTest, UnknownKeyNamesTheField) {
    json j = small_config();
    j["prior"]["betta"] = 3.0;
    EXPECT_EQ(run({"simulate", "--config", write_config(j)}), 2);
    EXPECT_NE(err_.str().find("prior.betta"), std::string::npos);
}

TEST_F(CliTest, InvalidValueNamesTheField) {
    json j = small_config();
    j["chain"]["pcn_step"] = 2.0;
    EXPECT_EQ(run({"sample", "--config", write_config(j)}), 2);
    EXPECT_NE(err_.str().find("chain.pcn_step"), std::string::npos);
    j = small_config();
    j["fd"]["cells"] = "many";
    EXPECT_EQ(run({"sample", "--config", write_config(j)}), 2);
    EXPECT_NE(err_.str().find("fd.cells"), std::string::npos);
}

TEST_F(CliTest, BadCommandLine) {
    const auto cfg = write_config(small_config());
    EXPECT_EQ(run({"explode", "--config", cfg}), 2);
    EXPECT_EQ(run({"simulate"}), 2);
    EXPECT_EQ(run({"simulate", "--config", cfg, "--truncate", "50"}), 2);
}

TEST_F(CliTest, UnwritableOutputIsAnIoError) {
    const auto blocker = dir_ / "file";
    std::ofstream(blocker) << "x";
    json j = small_config();
    j["io"]["output_dir"] = (blocker / "sub").string();
    EXPECT_EQ(run({"simulate", "--config", write_config(j)}), 3);
}

TEST_F(CliTest, SimulateWritesArtifactsWithMetadata) {
    const auto cfg = write_config(small_config());
    ASSERT_EQ(run({"simulate", "--config", cfg}), 0) << err_.str();
    const auto obs = json::parse(slurp(dir_ / "out" / "observations.json"));
    EXPECT_EQ(obs["y"].size(), 6u);
    EXPECT_DOUBLE_EQ(obs["s"].back().get<double>(), 1.0);
    EXPECT_EQ(obs["meta"]["seed"], 3);
    EXPECT_TRUE(obs["meta"]["config_hash"].is_string());
    const auto path = slurp(dir_ / "out" / "path.csv");
    EXPECT_EQ(path.rfind("# config_hash=", 0), 0u);
    EXPECT_NE(out_.str().find("n=6"), std::string::npos);
}

TEST_F(CliTest, DefaultScheduleFromEmptyConfig) {
    json j{{"io", {{"output_dir", (dir_ / "defaults").string()}}}};
    ASSERT_EQ(run({"simulate", "--config", write_config(j)}), 0) << err_.str();
    const auto obs = json::parse(slurp(dir_ / "defaults" / "observations.json"));
    EXPECT_EQ(obs["y"].size(), 100u);
    EXPECT_DOUBLE_EQ(obs["s"].back().get<double>(), 10.0);
    EXPECT_NEAR(obs["s"][0].get<double>(), 0.1, 1e-15);
}

TEST_F(CliTest, SingleObservationGivesPriorSampling) {
    json j = small_config();
    j["sim"] = {{"T", 0.1}, {"n_obs", 1}};
    const auto cfg = write_config(j);
    ASSERT_EQ(run({"simulate", "--config", cfg}), 0) << err_.str();
    ASSERT_EQ(run({"sample", "--config", cfg}), 0) << err_.str();
    EXPECT_NE(out_.str().find("prior"), std::string::npos);
    EXPECT_NE(out_.str().find("acceptance rate 1.0000"), std::string::npos);
}

TEST_F(CliTest, SampleMapAndRerunsAreByteIdentical) {
    const auto cfg = write_config(small_config());
    ASSERT_EQ(run({"simulate", "--config", cfg}), 0) << err_.str();
    ASSERT_EQ(run({"sample", "--config", cfg}), 0) << err_.str();
    ASSERT_EQ(run({"map", "--config", cfg}), 0) << err_.str();
    const std::vector<std::string> files{"path.csv", "observations.json", "samples.jsonl", "trace.csv",
                                         "estimates.csv", "map.json"};
    std::vector<std::string> first;
    for (const auto& f : files) first.push_back(slurp(dir_ / "out" / f));
    ASSERT_EQ(run({"simulate", "--config", cfg}), 0);
    ASSERT_EQ(run({"sample", "--config", cfg}), 0);
    ASSERT_EQ(run({"map", "--config", cfg}), 0);
    for (std::size_t i = 0; i < files.size(); ++i) EXPECT_EQ(slurp(dir_ / "out" / files[i]), first[i]) << files[i];

    const auto map = json::parse(slurp(dir_ / "out" / "map.json"));
    EXPECT_LE(map["value"].get<double>(), map["sample_min"].get<double>());
    const auto trace = slurp(dir_ / "out" / "trace.csv");
    EXPECT_NE(trace.find("iteration,loglik,accepted\n"), std::string::npos);
    const auto est = slurp(dir_ / "out" / "estimates.csv");
    EXPECT_NE(est.find("x,U_true,cm_U,map_U\n"), std::string::npos);
}

TEST_F(CliTest, SeedOverrideChangesArtifacts) {
    const auto cfg = write_config(small_config());
    ASSERT_EQ(run({"simulate", "--config", cfg}), 0);
    const auto a = slurp(dir_ / "out" / "observations.json");
    ASSERT_EQ(run({"simulate", "--config", cfg, "--seed", "4"}), 0);
    const auto b = slurp(dir_ / "out" / "observations.json");
    EXPECT_NE(a, b);
    EXPECT_EQ(json::parse(b)["meta"]["seed"], 4);
}

TEST_F(CliTest, TruncateWritesSeparateArtifacts) {
    const auto cfg = write_config(small_config());
    ASSERT_EQ(run({"simulate", "--config", cfg}), 0);
    ASSERT_EQ(run({"sample", "--config", cfg, "--truncate", "2"}), 0) << err_.str();
    EXPECT_TRUE(fs::exists(dir_ / "out" / "samples_k2.jsonl"));
    EXPECT_TRUE(fs::exists(dir_ / "out" / "trace_k2.csv"));
    EXPECT_TRUE(fs::exists(dir_ / "out" / "estimates_k2.csv"));
    EXPECT_FALSE(fs::exists(dir_ / "out" / "samples.jsonl"));
    const auto first = slurp(dir_ / "out" / "samples_k2.jsonl");
    EXPECT_EQ(json::parse(first.substr(0, first.find('\n')))["meta"]["truncate"], 2);
}

TEST_F(CliTest, MapWithoutSamplesFails) {
    const auto cfg = write_config(small_config());
    ASSERT_EQ(run({"simulate", "--config", cfg}), 0);
    EXPECT_EQ(run({"map", "--config", cfg}), 3);
}

TEST_F(CliTest, ConfigHashTracksSettings) {
    const cli::RunConfig a = cli::RunConfig::from_json(small_config());
    json j = small_config();
    j["chain"]["iterations"] = 61;
    const cli::RunConfig b = cli::RunConfig::from_json(j);
    EXPECT_NE(a.hash(), b.hash());
    EXPECT_EQ(a.hash(), cli::RunConfig::from_json(small_config()).hash());
    json with_mode = small_config();
    with_mode["mode"] = "sample";
    EXPECT_EQ(cli::RunConfig::from_json(with_mode).hash(), a.hash());
}

TEST_F(CliTest, ExecutableRunsAndReportsExitCodes) {
    const auto cfg = write_config(small_config());
    const std::string exe = SDE_INFER_EXE;
    EXPECT_EQ(std::system((exe + " simulate --config " + cfg + " > /dev/null").c_str()), 0);
    const int rc = std::system((exe + " simulate --config " + (dir_ / "nope.json").string() + " 2> /dev/null").c_str());
    EXPECT_TRUE(WIFEXITED(rc));
    EXPECT_EQ(WEXITSTATUS(rc), 3);
}
