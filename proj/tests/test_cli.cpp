#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <string>

#include <gtest/gtest.h>

#include "critshe/io.hpp"
#include "critshe/mollifier.hpp"

using namespace critshe;
using io::Json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out, err;
};

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("critshe_cli_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    Outcome run(const std::string& args) const {
        const std::string out = path("stdout.txt"), err = path("stderr.txt");
        const std::string cmd = std::string(CRITSHE_CLI_PATH) + " " + args + " >" + out + " 2>" + err;
        const int status = std::system(cmd.c_str());
        Outcome r{WIFEXITED(status) ? WEXITSTATUS(status) : -1, io::read_file(out), io::read_file(err)};
        return r;
    }

    Json json(const std::string& name) const { return Json::parse(io::read_file(path(name))); }

    fs::path dir_;
};

std::size_t count_lines(const std::string& s) {
    std::size_t n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

} // namespace

TEST(CanonicalJson, SortedKeysAndFullPrecision) {
    const Json j = {{"b", 0.1}, {"a", {{"z", 1}, {"y", Json::array({1.5, "x"})}}}, {"c", Json::object()}};
    EXPECT_EQ(io::to_canonical_json(j),
              "{\n  \"a\": {\n    \"y\": [\n      1.5,\n      \"x\"\n    ],\n    \"z\": 1\n  },\n"
              "  \"b\": 0.10000000000000001,\n  \"c\": {}\n}\n");
}

TEST(CanonicalJson, NonFiniteBecomesNull) {
    const Json j = {{"x", std::numeric_limits<double>::infinity()}, {"y", std::nan("")}};
    EXPECT_EQ(io::to_canonical_json(j), "{\n  \"x\": null,\n  \"y\": null\n}\n");
}

TEST(CanonicalJson, RoundTripsDoubles) {
    for (double v : {1.0 / 3.0, 1e-300, -2.5e17, 0.029410840466142778}) {
        const Json back = Json::parse(io::to_canonical_json(Json{{"v", v}}));
        EXPECT_EQ(back["v"].get<double>(), v);
    }
}

TEST(Quantity, ExactAndEstimated) {
    EXPECT_EQ(io::exact(2.0)["error"], "exact");
    EXPECT_EQ(io::quantity(2.0, 0.5)["error"].get<double>(), 0.5);
    EXPECT_EQ(io::quantity(2.0, 0.0)["error"].get<double>(), 0.0);
}

TEST(Csv, QuotingAndLineEndings) {
    io::CsvTable t({"diagram", "value"});
    t.add_row({"((1,2),(1,3))", "0.5"});
    t.add_row({"say \"hi\"", "1"});
    EXPECT_EQ(t.str(), "diagram,value\r\n\"((1,2),(1,3))\",0.5\r\n\"say \"\"hi\"\"\",1\r\n");
    EXPECT_EQ(t.rows(), 2u);
    EXPECT_THROW(t.add_row({"only one"}), DomainError);
    EXPECT_EQ(io::CsvTable::field("line\nbreak"), "\"line\nbreak\"");
}

TEST(GitBlobHash, KnownValues) {
    EXPECT_EQ(io::git_blob_hash(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
    EXPECT_EQ(io::git_blob_hash("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST(Files, MissingPathsRaiseIoError) {
    EXPECT_THROW(io::read_file("/nonexistent/critshe/in.json"), io::IoError);
    EXPECT_THROW(io::write_file("/nonexistent/critshe/out.json", "x"), io::IoError);
}

TEST_F(CliTest, HelpAndUnknownFlag) {
    EXPECT_EQ(run("--help").code, 0);
    EXPECT_EQ(run("moment --no-such-flag 1").code, 2);
    EXPECT_EQ(run("no-such-command").code, 2);
}

TEST_F(CliTest, DiagramCount) {
    const Outcome r = run("diagrams --n 3 --m 2 --count");
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "6\n");
    // 6 * 5^29, beyond 64 bits
    EXPECT_EQ(run("diagrams --n 4 --m 30 --count").out, "1117587089538574218750\n");
}

TEST_F(CliTest, DiagramListing) {
    const Outcome r = run("diagrams --n 3 --m 2 --json " + path("d.json") + " --csv " + path("d.csv"));
    ASSERT_EQ(r.code, 0) << r.err;
    const Json env = json("d.json");
    EXPECT_EQ(env["schema"], "critshe.result/1");
    EXPECT_EQ(env["command"], "diagrams");
    ASSERT_EQ(env["results"]["diagrams"].size(), 6u);
    EXPECT_EQ(env["results"]["diagrams"][0]["index"], "((1,2),(1,3))");
    EXPECT_EQ(env["results"]["count"], "6");
    EXPECT_EQ(count_lines(io::read_file(path("d.csv"))), 7u);
    EXPECT_EQ(run("diagrams --n 8 --m 6").code, 2);
}

TEST_F(CliTest, MomentEnvelopeAndCsv) {
    const Outcome r = run("moment --n 2 --t 1 --beta-star 0 --json " + path("m.json") + " --csv " + path("m.csv"));
    ASSERT_EQ(r.code, 0) << r.err;
    const Json env = json("m.json");
    EXPECT_EQ(env["status"]["exit_code"], 0);
    EXPECT_FALSE(env["status"]["accuracy_warning"].get<bool>());
    EXPECT_EQ(env["config_hash"], io::git_blob_hash(io::to_canonical_json(env["config"])));
    EXPECT_EQ(env["results"]["free_term"]["error"], "exact");
    EXPECT_GT(env["results"]["total"]["value"].get<double>(), env["results"]["free_term"]["value"].get<double>());
    // header, free term, one diagram
    EXPECT_EQ(count_lines(io::read_file(path("m.csv"))), 3u);
    EXPECT_EQ(env.dump().find("seconds"), std::string::npos);
    EXPECT_NE(r.err.find("timing:"), std::string::npos);
}

TEST_F(CliTest, IdenticalRunsAreByteIdentical) {
    const std::string args = "moment --n 3 --t 0.5 --beta-star -4 --m-max 2 --mode monte-carlo --mc-samples 4000 --rel-tol 0.1 --seed 5";
    ASSERT_EQ(run(args + " --json " + path("a.json") + " --threads 1").code, 0);
    ASSERT_EQ(run(args + " --json " + path("b.json") + " --threads 2").code, 0);
    EXPECT_EQ(io::read_file(path("a.json")), io::read_file(path("b.json")));
}

TEST_F(CliTest, ConfigRoundTrip) {
    ASSERT_EQ(run("moment --n 2 --t 0.5 --beta-star -1 --json " + path("a.json")).code, 0);
    io::write_file(path("cfg.json"), io::to_canonical_json(json("a.json")["config"]));
    ASSERT_EQ(run("moment --config " + path("cfg.json") + " --json " + path("b.json")).code, 0);
    EXPECT_EQ(io::read_file(path("a.json")), io::read_file(path("b.json")));
}

TEST_F(CliTest, InvalidConfigWritesNothing) {
    io::write_file(path("bad.json"), R"({"moment": {"nn": 3}})");
    const Outcome r = run("moment --config " + path("bad.json") + " --json " + path("o.json") + " --csv " + path("o.csv"));
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("nn"), std::string::npos);
    EXPECT_FALSE(fs::exists(path("o.json")));
    EXPECT_FALSE(fs::exists(path("o.csv")));

    io::write_file(path("schema.json"), R"({"schema": "critshe/0"})");
    EXPECT_EQ(run("moment --config " + path("schema.json")).code, 2);
    io::write_file(path("cmd.json"), R"({"schema": "critshe/1", "command": "simulate"})");
    EXPECT_EQ(run("moment --config " + path("cmd.json")).code, 2);
    io::write_file(path("syntax.json"), "{");
    EXPECT_EQ(run("moment --config " + path("syntax.json")).code, 2);
    EXPECT_EQ(run("moment --config " + path("missing.json")).code, 2);
    EXPECT_EQ(run("moment --n 0").code, 2);
    EXPECT_EQ(run("moment --n 2 --json /nonexistent/dir/o.json").code, 2);
}

TEST_F(CliTest, AccuracyWarningExitCode) {
    const Outcome r = run("moment --n 3 --t 1 --beta-star -6 --m-max 3 --mode monte-carlo --mc-samples 2000 --rel-tol 0.001 --json " +
                      path("w.json"));
    EXPECT_EQ(r.code, 3);
    const Json env = json("w.json");
    EXPECT_TRUE(env["status"]["accuracy_warning"].get<bool>());
    EXPECT_EQ(env["status"]["exit_code"], 3);
}

TEST_F(CliTest, BlowupExitCode) {
    const Outcome r = run("simulate --n 1 --times 1 --epsilon 0.5 --beta0 1e9 --grid 32 --domain 4 --replicas 100");
    EXPECT_EQ(r.code, 4);
    EXPECT_NE(r.err.find("blew up"), std::string::npos);
}

TEST_F(CliTest, SimulateWithTorusOracle) {
    const Outcome r = run("simulate --n 2 --times 0,0.05 --epsilon 0.5 --beta0 -0.6 --grid 32 --domain 4 --replicas 200 "
                      "--oracle torus --json " + path("s.json") + " --csv " + path("s.csv"));
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string csv = io::read_file(path("s.csv"));
    EXPECT_EQ(csv.substr(0, csv.find("\r\n")), "time,n,value,standard_error,oracle,oracle_error");
    EXPECT_EQ(count_lines(csv), 3u);
    const Json env = json("s.json");
    const Json& first = env["results"]["series"][0];
    EXPECT_NEAR(first["moment"]["value"].get<double>(), first["oracle"]["value"].get<double>(), 1e-12);
    EXPECT_EQ(first["oracle"]["error"], "exact");
    EXPECT_EQ(run("simulate --n 3 --oracle torus --replicas 100").code, 2);
}

TEST_F(CliTest, Betaconst) {
    ASSERT_EQ(run("betaconst --mollifier bump --beta0 0.5 --epsilon 0.1 --json " + path("b.json")).code, 0);
    const Json env = json("b.json");
    const double bphi = mollifier::beta_phi(mollifier::pair_profile(mollifier::Mollifier::bump()));
    EXPECT_NEAR(env["results"]["beta_phi"]["value"].get<double>(), bphi, 1e-14);
    EXPECT_LT(env["results"]["beta_phi"]["error"].get<double>(), 1e-8);
    EXPECT_NEAR(env["results"]["beta_star"]["value"].get<double>(), mollifier::beta_star(0.5, bphi).value, 1e-14);
    EXPECT_NEAR(env["results"]["beta_eps"]["value"].get<double>(), mollifier::beta_eps({0.5, 0.1}), 1e-14);
    EXPECT_EQ(run("betaconst --mollifier gaussian").code, 2);
}

TEST_F(CliTest, VerifyCombinatorics) {
    const Outcome r = run("verify --suite combinatorics --json " + path("v.json"));
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.err.find("FAIL"), std::string::npos);
    EXPECT_EQ(run("verify --suite nonsense").code, 2);
}
