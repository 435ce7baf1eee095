#include "ouevo/cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ouevo;

namespace {

struct Result {
    int code = 0;
    std::string out, err;
};

Result call(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    Result r;
    r.code = cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string without_timestamp(const std::string& text) {
    std::istringstream in(text);
    std::string line, kept;
    while (std::getline(in, line)) {
        if (line.rfind("# generated=", 0) == 0) continue;
        kept += line + "\n";
    }
    return kept;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("ouevo_cli_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST(Cli, FlowHeatIdentityPropagator) {
    const Result r = call({"flow", "--model", "heat", "--s", "0", "--t", "2"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("\n0,2,2,1,0,1,0,3.99999999999999"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("\"verdict\":\"pass\""), std::string::npos);
}

TEST(Cli, ApplySecondDerivative) {
    const Result r = call({"apply", "--model", "heat", "--f", "cos", "--s", "0", "--t", "0.5", "--x", "0", "--deriv", "2"});
    EXPECT_EQ(r.code, 0) << r.err;
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    std::getline(in, line);
    std::getline(in, line);
    EXPECT_EQ(line, "x1,value,std_error,d1,d11");
    std::getline(in, line);
    double x, v, se, d1, d11;
    char c;
    std::istringstream row(line);
    row >> x >> c >> v >> c >> se >> c >> d1 >> c >> d11;
    EXPECT_NEAR(v, std::exp(-0.5), 1e-10);
    EXPECT_NEAR(d1, 0.0, 1e-10);
    EXPECT_NEAR(d11, -std::exp(-0.5), 1e-6);
    EXPECT_EQ(call({"apply", "--deriv", "4"}).code, 2);
}

TEST(Cli, GlobalFlagsAfterSubcommand) {
    const Result a = call({"flow", "--model", "ou1", "--t", "1"});
    const Result b = call({"--model", "ou1", "flow", "--t", "1"});
    EXPECT_EQ(a.code, 0);
    EXPECT_EQ(without_timestamp(a.out), without_timestamp(b.out));
}

TEST(Cli, ConfigErrorsExitTwo) {
    EXPECT_EQ(call({"flow", "--model", "nosuchmodel"}).code, 2);
    EXPECT_EQ(call({"flow", "--model", "{\"type\": \"constant\", "}).code, 2);
    EXPECT_EQ(call({"flow", "--weight", "poly:x"}).code, 2);
    EXPECT_EQ(call({"solve", "--problem", "{\"T\": \"late\"}"}).code, 2);
    EXPECT_EQ(call({"frobnicate"}).code, 2);
    EXPECT_EQ(call({"flow", "--no-such-flag"}).code, 2);
    const Result r = call({"flow", "--model", "{\"type\": \"constant\", \"dimension\": 1, \"A\": [[-1]]}"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("model.Q"), std::string::npos) << r.err;
}

TEST(Cli, DeterministicTables) {
    const std::vector<std::string> args{"apply", "--model", "ou1", "--f", "bump", "--t", "0.5"};
    const Result a = call(args), b = call(args);
    EXPECT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(without_timestamp(a.out), without_timestamp(b.out));
    EXPECT_NE(a.out.find("# config_hash="), std::string::npos);
}

TEST(Cli, MonteCarloSeedIsReproducible) {
    const std::vector<std::string> args{"apply", "--quad", "mc:2000", "--seed", "7", "--f", "cos", "--t", "0.5"};
    EXPECT_EQ(without_timestamp(call(args).out), without_timestamp(call(args).out));
    auto other = args;
    other[4] = "8";
    EXPECT_NE(without_timestamp(call(args).out), without_timestamp(call(other).out));
}

TEST(Cli, ArtifactsAndReplay) {
    const auto dir = scratch("replay");
    const Result r = call({"compactness", "--model", "ou1", "--out", dir.string()});
    EXPECT_EQ(r.code, 0) << r.err << r.out;
    ASSERT_TRUE(std::filesystem::exists(dir / "compactness.csv"));
    ASSERT_TRUE(std::filesystem::exists(dir / "run_config.json"));
    ASSERT_TRUE(std::filesystem::exists(dir / "verdict.json"));
    const auto cfg = nlohmann::json::parse(slurp(dir / "run_config.json"));
    const std::string hash = cfg.at("config_hash").get<std::string>();
    const std::string csv = slurp(dir / "compactness.csv");
    EXPECT_EQ(csv.rfind("# config_hash=" + hash + "\n", 0), 0u);
    EXPECT_EQ(nlohmann::json::parse(slurp(dir / "verdict.json")).at("config_hash"), hash);

    const auto again = scratch("replay2");
    const Result rr = call({"replay", dir.string(), "--out", again.string()});
    EXPECT_EQ(rr.code, 0) << rr.err;
    EXPECT_EQ(without_timestamp(slurp(again / "compactness.csv")), without_timestamp(csv));
    std::filesystem::remove_all(dir);
    std::filesystem::remove_all(again);
}

TEST(Cli, RunConfigRoundTrip) {
    cli::RunConfig c;
    c.command = "flow";
    c.model = "ou1";
    c.weight = "poly:1";
    c.quad = "gh:40";
    c.params = {{"s", 0.0}, {"t", {1.0}}};
    const cli::RunConfig d = cli::RunConfig::from_json(c.to_json());
    EXPECT_EQ(d.to_json(), c.to_json());
    EXPECT_EQ(config_hash(d.to_json()), config_hash(c.to_json()));
    nlohmann::json broken = c.to_json();
    broken.erase("quad");
    EXPECT_THROW(cli::RunConfig::from_json(broken), ConfigError);
    broken = c.to_json();
    broken["weight"] = 3;
    EXPECT_THROW(cli::RunConfig::from_json(broken), ConfigError);
}

TEST(Cli, RatesPass) {
    const Result r = call({"rates", "--alpha", "0", "--theta", "1", "--count", "6"});
    EXPECT_EQ(r.code, 0) << r.err << r.out;
}

TEST(Cli, SolveResidualPass) {
    const Result r = call({"solve", "--model", "heat", "--problem",
                           "{\"phi\": \"cos\", \"T\": 1, \"grid\": {\"lo\": -1, \"hi\": 1, \"count\": 3}}"});
    EXPECT_EQ(r.code, 0) << r.err << r.out;
}

TEST(Cli, ValidateDegenerateNoiseFails) {
    const Result r =
        call({"validate", "--model", "{\"type\":\"constant\",\"dimension\":2,\"A\":[[-1,0],[0,-1]],\"Q\":[[1,0],[0,0]]}"});
    EXPECT_EQ(r.code, 1) << r.err;
    EXPECT_NE(r.out.find("\"verdict\":\"fail\""), std::string::npos);
}

TEST(Cli, CounterexampleDefaultPasses) {
    const Result r = call({"counterexample"});
    EXPECT_EQ(r.code, 0) << r.err << r.out;
}

TEST(Io, AtomicWriteAndCsv) {
    const auto dir = scratch("io");
    write_atomic(dir / "a" / "b.txt", "first");
    write_atomic(dir / "a" / "b.txt", "second");
    EXPECT_EQ(slurp(dir / "a" / "b.txt"), "second");
    EXPECT_FALSE(std::filesystem::exists(dir / "a" / "b.txt.tmp"));
    CsvTable t({"x", "y"});
    t.add({0.5, 1.0 / 3.0});
    EXPECT_EQ(t.render("abc", false), "# config_hash=abc\nx,y\n0.5,0.33333333333333331\n");
    EXPECT_EQ(format_number(std::stod(format_number(0.1))), format_number(0.1));
    std::filesystem::remove_all(dir);
}
