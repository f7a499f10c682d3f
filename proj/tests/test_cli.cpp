#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "uotv/uotv.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code;
    std::string out, err;
};

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("uotv_cli_" + std::to_string(::getpid()) + "_" +
                                            ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    CliResult run(const std::string& args) const {
        const auto out = dir_ / "stdout", err = dir_ / "stderr";
        const std::string cmd = std::string(UOTV_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
        const int status = std::system(cmd.c_str());
        return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
    }

    static std::string slurp(const fs::path& p) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, GenWritesLoadableField) {
    const auto r = run("gen C1 -o " + path("c1.txt"));
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "mass=1345\n");
    EXPECT_EQ(uotv::load_field(path("c1.txt")), uotv::generate_case("C1"));
    EXPECT_EQ(run("gen S1 --seed 3 -o " + path("s1.txt")).code, 0);
    EXPECT_EQ(uotv::load_field(path("s1.txt")), uotv::generate_case(uotv::CaseSpec{"S1", 3}));
}

TEST_F(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run("gen C10").code, 2);
    EXPECT_EQ(run("gen S1").code, 2);
    EXPECT_EQ(run("score").code, 2);
    EXPECT_EQ(run("score case:C1 case:C2 --penalty l1").code, 2);
    std::ofstream(path("bad.txt")) << "uotfield v1\n1 1\n1 1 1 1\n-3\n";
    const auto r = run("score " + path("bad.txt") + " case:C1");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("line 4: negative weight at row 1"), std::string::npos);
}

TEST_F(Cli, NoMassExitsThree) {
    const auto r = run("score case:P1 case:P1");
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("no mass"), std::string::npos);
}

TEST_F(Cli, ScoreReport) {
    const auto r = run("score case:C1 case:C2 --mass 1873.5 --vectors " + path("v.csv") + " --hist " + path("h.csv"));
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["schema"], "uotv.score");
    ASSERT_EQ(j["results"].size(), 2u);
    for (const auto& res : j["results"]) {
        EXPECT_NEAR(res["scores"]["sink"].get<double>(), 574.0, 0.03 * 574.0);
        EXPECT_NEAR(res["headline"]["atm"].get<double>(), 40.0, 1.0);
        EXPECT_TRUE(res["converged"].get<bool>());
    }
    EXPECT_TRUE(fs::exists(path("v.kl.csv")));
    EXPECT_TRUE(fs::exists(path("h.tv.csv")));
    // Deterministic output.
    EXPECT_EQ(run("score case:C1 case:C2 --mass 1873.5").out, run("score case:C1 case:C2 --mass 1873.5").out);
}

TEST_F(Cli, NullCaseReport) {
    const auto r = run("score case:P1 case:P5 --mass 1873.5 --penalty tv");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto res = nlohmann::json::parse(r.out)["results"][0];
    EXPECT_TRUE(res["null_case"].get<bool>());
    EXPECT_NEAR(res["scores"]["sink"].get<double>(), 21.35, 0.01);
    EXPECT_EQ(res["headline"], "null_case");
    EXPECT_EQ(res["imbalance_ratio"], 0.0);
}

TEST_F(Cli, SweepCsv) {
    const auto r = run("sweep case:C1 case:C3 --mass 1873.5 --rhos 2^-4,1");
    ASSERT_EQ(r.code, 0) << r.err;
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "rho,sink,transport,d0,d1,atm,mass_retained");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 2);
}
