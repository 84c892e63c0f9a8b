#include <gtest/gtest.h>

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

// Runs the CLI with stderr discarded and returns its exit status and stdout.
Result run(const std::string& args) {
    const std::string cmd = std::string(MPKM_CLI_PATH) + " " + args + " 2>/dev/null";
    Result r;
    FILE* p = popen(cmd.c_str(), "r");
    if (p == nullptr) return r;
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = fs::temp_directory_path() / "mpkm_cli_test";
        fs::create_directories(dir_);
        data_ = (dir_ / "blobs.csv").string();
        ASSERT_EQ(run("blobs --n 300 --k-true 3 --sigma 0.5 --seed 1 --out " + data_).code, 0);
    }
    static void TearDownTestSuite() { fs::remove_all(dir_); }

    static fs::path dir_;
    static std::string data_;
};

fs::path Cli::dir_;
std::string Cli::data_;

TEST_F(Cli, BlobsWritesLabelledRows) {
    const std::string text = slurp(data_);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 300);
    const Result again = run("blobs --n 300 --k-true 3 --sigma 0.5 --seed 1");
    EXPECT_EQ(again.code, 0);
    EXPECT_EQ(again.out, text);
}

TEST_F(Cli, RunWritesTable) {
    const Result r = run("run --data " + data_ + " --labels --k 3 --mode working --mode mixed --delta 2 --seeds 0-2");
    ASSERT_EQ(r.code, 0);
    std::istringstream in(r.out);
    std::string header, working, mixed;
    std::getline(in, header);
    std::getline(in, working);
    std::getline(in, mixed);
    EXPECT_EQ(header, "mode,normalized,SSE,ARI,AMI,Homogeneity,Completeness,V-measure,eta");
    EXPECT_EQ(working.rfind("working,no,", 0), 0u);
    EXPECT_EQ(mixed.rfind("mixed[delta=2],no,", 0), 0u);
}

TEST_F(Cli, RunIsDeterministic) {
    const std::string args = "run --data " + data_ + " --labels --k 3 --mode mixed --mode low --delta 1.5 --format json";
    const Result a = run(args);
    const Result b = run(args + " --threads 1");
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
    const auto j = nlohmann::json::parse(a.out);
    EXPECT_EQ(j["rows"].size(), 2u);
}

TEST_F(Cli, SweepWritesCurvesAndTable) {
    const std::string curves = (dir_ / "curves.csv").string();
    const std::string table = (dir_ / "table.csv").string();
    const Result r = run("sweep --data " + data_ + " --labels --normalize --k 3 --seeds 0,1 --out " + curves + " --table " + table);
    ASSERT_EQ(r.code, 0);
    const std::string c = slurp(curves);
    // Default grid has 7 deltas; 2 seeds; 7 metrics each.
    EXPECT_EQ(std::count(c.begin(), c.end(), '\n'), 1 + 7 * 2 * 7);
    const std::string t = slurp(table);
    EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 1 + 7);
    EXPECT_NE(t.find("mixed[delta=80],yes,"), std::string::npos);
}

TEST_F(Cli, DiagnoseReportsBounds) {
    const Result r = run("diagnose --data " + data_ + " --labels --k 3 --seeds 0 --kernel-sample 50 --format json");
    ASSERT_EQ(r.code, 0);
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_EQ(j["kernel_points"], 50);
    EXPECT_FALSE(j["min_bounds"].empty());
}

TEST_F(Cli, ErrorsExitNonZero) {
    EXPECT_EQ(run("run --data /nonexistent.csv --k 3").code, 2);
    EXPECT_EQ(run("run --data " + data_ + " --labels --k 3 --mode mixed --delta 0.5").code, 2);
    EXPECT_EQ(run("run --data " + data_ + " --labels --k 3 --mode turbo").code, 2);
    EXPECT_NE(run("run --data " + data_).code, 0);
    EXPECT_NE(run("frobnicate").code, 0);
    const std::string bad = (dir_ / "bad.csv").string();
    std::ofstream(bad) << "1,2\n3,x\n";
    EXPECT_EQ(run("run --data " + bad + " --k 1").code, 2);
}

}  // namespace
