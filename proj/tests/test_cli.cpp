#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace {

namespace fs = std::filesystem;

struct CliRun {
    int code;
    std::string out;
};

CliRun run(const std::string& args) {
    const std::string cmd = std::string(KQE_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return {-1, ""};
    std::string out;
    std::array<char, 4096> buf;
    while (std::size_t k = std::fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), k);
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() / ("kqe_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::create_directories(dir);
        std::ofstream(dir / "a.csv") << "0.1,1\n0.5,2\n-0.3,0.5\n1.2,1.1\n0.7,-0.4\n0.2,0.3\n";
        std::ofstream(dir / "b.csv") << "1.1,0\n1.5,1\n0.7,0.5\n2.2,2.1\n1.7,0.4\n1.9,1.3\n";
    }
    void TearDown() override { fs::remove_all(dir); }

    std::string file(const char* name) const { return (dir / name).string(); }

    fs::path dir;
};

TEST_F(Cli, HelpDocumentsEveryFlag) {
    for (const char* sub : {"discrepancy", "test", "benchmark", "type1"}) {
        const CliRun r = run(std::string(sub) + " --help");
        EXPECT_EQ(r.code, 0) << sub;
        for (const char* flag : {"--stat", "--kernel", "--bandwidth", "--degree", "--p", "--l", "--m", "--nu", "--seed",
                                 "--out", "--format", "--median-include-diagonal", "--fresh-landmarks"})
            EXPECT_NE(r.out.find(flag), std::string::npos) << sub << " " << flag;
    }
    for (const char* sub : {"test", "benchmark", "type1"})
        for (const char* flag : {"--perms", "--level"}) EXPECT_NE(run(std::string(sub) + " --help").out.find(flag), std::string::npos);
    for (const char* sub : {"benchmark", "type1"}) EXPECT_NE(run(std::string(sub) + " --help").out.find("--trials"), std::string::npos);
}

TEST_F(Cli, UnknownFlagIsAnError) {
    EXPECT_NE(run("discrepancy " + file("a.csv") + " " + file("b.csv") + " --bogus").code, 0);
    EXPECT_NE(run("discrepancy " + file("a.csv") + " " + file("b.csv") + " --stat nope").code, 0);
    EXPECT_NE(run("").code, 0);
}

TEST_F(Cli, MissingFileExitsWithTwo) {
    EXPECT_EQ(run("discrepancy " + file("missing.csv") + " " + file("b.csv")).code, 2);
    EXPECT_EQ(run("test " + file("a.csv") + " " + file("missing.csv")).code, 2);
}

TEST_F(Cli, IdenticalFilesGiveZeroEkqd) {
    const CliRun r = run("discrepancy " + file("a.csv") + " " + file("a.csv") + " --stat ekqd");
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("\"value\": 0.0"), std::string::npos) << r.out;
}

TEST_F(Cli, MedianBandwidthIsEchoed) {
    const CliRun r = run("discrepancy " + file("a.csv") + " " + file("b.csv") + " --stat mmd-u --kernel rbf --bandwidth median");
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("\"bandwidth\":"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("\"bandwidth_source\": \"median\""), std::string::npos) << r.out;
}

TEST_F(Cli, BadBandwidthRejected) {
    EXPECT_EQ(run("discrepancy " + file("a.csv") + " " + file("b.csv") + " --bandwidth -1").code, 1);
}

TEST_F(Cli, TestIsDeterministicAndIdenticalFilesDoNotReject) {
    const std::string args = "test " + file("a.csv") + " " + file("b.csv") + " --perms 50 --seed 3 --out ";
    ASSERT_EQ(run(args + file("r1.json")).code, 0);
    ASSERT_EQ(run(args + file("r2.json")).code, 0);
    EXPECT_EQ(slurp(dir / "r1.json"), slurp(dir / "r2.json"));
    const CliRun same = run("test " + file("a.csv") + " " + file("a.csv") + " --perms 50");
    EXPECT_NE(same.out.find("\"reject\": false"), std::string::npos) << same.out;
}

TEST_F(Cli, BenchmarkShape) {
    const CliRun r = run("benchmark --experiment power-decay --methods ekqd,mmd-u,mmd-multi,mmd-lin --sweep 3,4 --n 20 "
                      "--trials 1 --perms 20 --no-timing --out " + file("rep.csv"));
    ASSERT_EQ(r.code, 0);
    std::istringstream in(slurp(dir / "rep.csv"));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "method,param_name,param_value,rejection_rate,trials,seed");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        EXPECT_TRUE(line.find(",0,1,0") != std::string::npos || line.find(",1,1,0") != std::string::npos) << line;
    }
    EXPECT_EQ(rows, 8);
}

TEST_F(Cli, BenchmarkJsonAndCustomCsv) {
    const CliRun r = run("benchmark --experiment custom-csv --x " + file("a.csv") + " --y " + file("b.csv") +
                      " --methods sw --sweep 4,6 --trials 2 --perms 20 --no-timing --format json --out " + file("rep.json"));
    ASSERT_EQ(r.code, 0);
    const std::string j = slurp(dir / "rep.json");
    EXPECT_NE(j.find("\"method\": \"sw\""), std::string::npos) << j;
    EXPECT_NE(j.find("\"param_name\": \"n\""), std::string::npos) << j;
}

TEST_F(Cli, Type1Runs) {
    const CliRun r = run("type1 --stat mmd-lin --n 20 --trials 3 --perms 20 --no-timing");
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("mmd-lin,n,20,"), std::string::npos) << r.out;
}

} // namespace
