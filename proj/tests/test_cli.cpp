#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "locclab/qmat_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

fs::path scratch() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("locclab_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Run cli(const std::string& args) {
    const auto err_file = scratch() / "stderr.txt";
    const std::string cmd = std::string(LOCCLAB_CLI_PATH) + " " + args + " 2>" + err_file.string();
    Run r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return {-1, "", "popen failed"};
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err_file);
    return r;
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

} // namespace

TEST(Cli, HelstromWernerFamily) {
    const auto r = cli("helstrom --d 2");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(json::parse(r.out)["p_opt"].get<double>(), 1.0, 1e-12);
}

TEST(Cli, HelstromFromFiles) {
    using namespace locclab;
    const TensorLayout l{{"A", 2}};
    Matrix zero = Matrix::Zero(2, 2);
    zero(0, 0) = 1.0;
    write(scratch() / "zero.json", to_json_text(Operator(l, zero)));
    write(scratch() / "mixed.json", to_json_text(Operator(l, identity_matrix(2) / 2.0)));
    const auto z = (scratch() / "zero.json").string(), m = (scratch() / "mixed.json").string();

    auto r = cli("helstrom --state0 " + z + " --state1 " + m);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(json::parse(r.out)["p_opt"].get<double>(), 0.75, 1e-12);
    EXPECT_NEAR(json::parse(r.out)["trace_distance"].get<double>(), 1.0, 1e-12);

    r = cli("helstrom --state0 " + z + " --state1 " + z);
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(json::parse(r.out)["p_opt"].get<double>(), 0.5, 1e-15);
}

TEST(Cli, MalformedStateReportsByteOffset) {
    const std::string text = R"({"layout":[{"label":"A","dim":1}],"entries":[[1,0]] x})";
    write(scratch() / "bad.json", text);
    const auto r = cli("helstrom --state0 " + (scratch() / "bad.json").string() + " --state1 " +
                       (scratch() / "bad.json").string());
    EXPECT_NE(r.code, 0);
    const auto e = json::parse(r.err)["error"];
    EXPECT_EQ(e["kind"], "ParseError");
    EXPECT_EQ(e["byte_offset"].get<std::size_t>(), text.find('x') + 1);
}

TEST(Cli, BoundsWerner) {
    auto r = cli("bounds --d 2");
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = json::parse(r.out);
    EXPECT_NEAR(j["ppt_upper"].get<double>(), 0.5 + 1.0 / 3.0, 1e-5);
    for (const char* k : {"helstrom", "locc_lower", "ppt_upper", "witness_id", "sdp_gap"}) EXPECT_TRUE(j.contains(k));

    r = cli("bounds --d 5");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(json::parse(r.out)["ppt_upper"].get<double>(), 0.5 + 1.0 / 6.0, 1e-5);
}

TEST(Cli, BoundsClassicalPairIsTight) {
    using namespace locclab;
    const TensorLayout l{{"A", 2}, {"B", 2}};
    Matrix a = Matrix::Zero(4, 4), b = Matrix::Zero(4, 4);
    a(0, 0) = 0.7;
    a(3, 3) = 0.3;
    b(1, 1) = 0.2;
    b(3, 3) = 0.8;
    write(scratch() / "c0.json", to_json_text(Operator(l, a)));
    write(scratch() / "c1.json", to_json_text(Operator(l, b)));
    const auto r = cli("bounds --state0 " + (scratch() / "c0.json").string() + " --state1 " +
                       (scratch() / "c1.json").string());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_NEAR(j["locc_lower"].get<double>(), j["helstrom"].get<double>(), 1e-10);
}

TEST(Cli, UnknownConfigFieldRejected) {
    write(scratch() / "cfg_bad.json", R"({"lambda": 0.5, "colour": "red"})");
    const auto r = cli("entropy --config " + (scratch() / "cfg_bad.json").string());
    EXPECT_NE(r.code, 0);
    EXPECT_EQ(json::parse(r.err)["error"]["kind"], "ConfigError");
}

TEST(Cli, ConfigWrongTypeRejected) {
    write(scratch() / "cfg_type.json", R"({"lambda": "half"})");
    const auto r = cli("entropy --config " + (scratch() / "cfg_type.json").string());
    EXPECT_NE(r.code, 0);
    EXPECT_EQ(json::parse(r.err)["error"]["kind"], "ConfigError");
}

TEST(Cli, ConfigRoundTripReproducesOutputs) {
    const auto a = scratch() / "rt_a", b = scratch() / "rt_b";
    fs::remove_all(a);
    fs::remove_all(b);
    auto r = cli("simulate --protocol history-capped --p 0.8 --n 300 --trials 6 --seed 17 --out " + a.string());
    ASSERT_EQ(r.code, 0) << r.err;
    r = cli("simulate --config " + (a / "config.json").string() + " --out " + b.string());
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"config.json", "transcripts.jsonl", "summary.csv", "report.json"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Cli, CommandLineOverridesConfig) {
    write(scratch() / "cfg_ent.json", R"({"lambda": 0.9, "d2": 5})");
    const auto r = cli("entropy --config " + (scratch() / "cfg_ent.json").string() + " --lambda 0.5");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_EQ(j["lambda"].get<double>(), 0.5);
    EXPECT_EQ(j["d2"].get<int>(), 5);
}

TEST(Cli, SeedRepeatIsByteIdentical) {
    const auto r1 = cli("simulate --trials 3 --blocks 20 --seed 5 --format csv");
    const auto r2 = cli("simulate --trials 3 --blocks 20 --seed 5 --format csv");
    const auto r3 = cli("simulate --trials 3 --blocks 20 --seed 6 --format csv");
    ASSERT_EQ(r1.code, 0) << r1.err;
    EXPECT_EQ(r1.out, r2.out);
    EXPECT_NE(r1.out, r3.out);
}

TEST(Cli, ArtifactsReparseAndVerify) {
    const auto dir = scratch() / "art";
    fs::remove_all(dir);
    auto r = cli("detect --trials 40 --n 300 --transcripts --records --out " + dir.string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NO_THROW(json::parse(slurp(dir / "report.json")));
    EXPECT_NO_THROW(json::parse(slurp(dir / "manifest.json")));
    std::istringstream lines(slurp(dir / "transcripts.jsonl"));
    std::string line;
    std::size_t headers = 0, rows = 0;
    while (std::getline(lines, line)) {
        const auto j = json::parse(line);
        if (j.contains("protocol_id")) {
            ++headers;
        } else {
            ++rows;
            EXPECT_EQ(j["X"].get<int>(), j["Y"] == j["Z"] ? 1 : 0);
        }
    }
    EXPECT_EQ(headers, 40u);
    EXPECT_EQ(rows, 40u * 300u);
    EXPECT_EQ(slurp(dir / "summary.csv").substr(0, 24), "trial,n,S_n,rate,guess\n0");

    r = cli("verify " + dir.string());
    EXPECT_EQ(r.code, 0) << r.err;
    write(dir / "summary.csv", "tampered\n");
    r = cli("verify " + dir.string());
    EXPECT_NE(r.code, 0);
    EXPECT_EQ(json::parse(r.err)["error"]["kind"], "InvariantError");
}

TEST(Cli, ConstructedStatesReload) {
    const auto dir = scratch() / "states";
    fs::remove_all(dir);
    auto r = cli("construct --what rho-pair --d 2 --lambda 0.9 --d2 2 --out " + dir.string());
    ASSERT_EQ(r.code, 0) << r.err;
    const auto s0 = locclab::load_density((dir / "state0.json").string());
    EXPECT_EQ(s0.dim(), 16u);
    r = cli("helstrom --state0 " + (dir / "state0.json").string() + " --state1 " + (dir / "state1.json").string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(json::parse(r.out)["p_opt"].get<double>(), 1.0, 1e-10);
}

TEST(Cli, DetectBeatsSingleShotAtMinRounds) {
    const auto r = cli("detect --trace-distance 1 --delta 0.05 --trials 400");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_GT(j["p_corr"].get<double>(), j["single_shot_p_opt"].get<double>());
    EXPECT_EQ(j["config"]["n"], j["min_rounds"]);
}

TEST(Cli, InvalidDetectionConfigExitsNonzero) {
    const auto r = cli("detect --delta 0.1");
    EXPECT_NE(r.code, 0);
    EXPECT_EQ(json::parse(r.err)["error"]["kind"], "SpecError");
}

TEST(Cli, ConcentrateExactSmallCase) {
    const auto r = cli("concentrate --lambda 0.5 --d2 2 --n 2 --target 1");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = json::parse(r.out);
    EXPECT_TRUE(j["exact"].get<bool>());
    EXPECT_EQ(j["success"]["p"].get<double>(), 0.5);
    const auto csv = cli("concentrate --lambda 0.5 --d2 2 --n 2 --format csv").out;
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "counts_hash,log2_dim,probability_or_weight");
}

TEST(Cli, UsageErrorIsStructured) {
    const auto r = cli("simulate --no-such-flag");
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(json::parse(r.err)["error"]["kind"], "UsageError");
}
