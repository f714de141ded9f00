#include "afrelay/cli.hpp"
#include "afrelay/multipliers.hpp"
#include "afrelay/simkit.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace afrelay;

namespace {

fs::path scratch()
{
    const char* env = std::getenv("AFRELAY_TMP");
    fs::path p = env ? fs::path(env) : fs::temp_directory_path() / "afrelay_cli_test";
    fs::create_directories(p);
    return p;
}

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::initializer_list<std::string> args)
{
    std::vector<std::string> store{"afrelay"};
    store.insert(store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : store) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<std::string> lines_of(const std::string& s)
{
    std::vector<std::string> out;
    std::istringstream is(s);
    for (std::string line; std::getline(is, line);) out.push_back(line);
    return out;
}

} // namespace

TEST(Cli, NeedsASubcommand)
{
    EXPECT_EQ(run({}).code, cli::exit_config);
    EXPECT_EQ(run({"--help"}).code, cli::exit_ok);
}

TEST(Cli, UnknownFlagIsAConfigError)
{
    const auto o = run({"sweep", "--out", (scratch() / "x.csv").string(), "--no-such-flag", "3"});
    EXPECT_EQ(o.code, cli::exit_config);
    EXPECT_NE(o.err.find("no-such-flag"), std::string::npos);
}

TEST(Cli, BadValueIsAConfigError)
{
    const auto o = run({"sweep", "--out", (scratch() / "x.csv").string(), "--hops", "0"});
    EXPECT_EQ(o.code, cli::exit_config);
    EXPECT_EQ(run({"sweep", "--out", (scratch() / "x.csv").string(), "--constraint", "weekly"}).code, cli::exit_config);
}

TEST(Cli, SweepWritesCsvAndSidecar)
{
    const auto out = scratch() / "sweep" / "rates.csv";
    fs::remove_all(out.parent_path());
    const auto o = run({"sweep", "--out", out.string(), "--scheme", "EPA,ASY", "--gamma0-db", "0,10", "--trials", "50",
                        "--subcarriers", "4", "--threads", "1"});
    ASSERT_EQ(o.code, cli::exit_ok) << o.err;
    const auto rows = lines_of(slurp(out));
    ASSERT_EQ(rows.size(), 5u);
    EXPECT_EQ(rows[0], simkit::csv_header);
    EXPECT_EQ(rows[1].rfind("sweep,EPA,STPC,2,4,balanced,0,mean_rate,", 0), 0u);
    const auto side = slurp(out.parent_path() / "rates.resolved.cfg");
    EXPECT_NE(side.find("\ntrials=50\n"), std::string::npos);
    EXPECT_NE(side.find("\nsubcarriers=4\n"), std::string::npos);
}

TEST(Cli, FlagOverridesConfigFile)
{
    const auto dir = scratch() / "override";
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "run.cfg");
        f << "# small run\nhops = 3\nsubcarriers = 2\ntrials = 40\nscheme = EPA\nthreads = 1\n";
    }
    const auto out = dir / "o.csv";
    const auto o = run({"sweep", "--config", (dir / "run.cfg").string(), "--out", out.string(), "--trials", "30"});
    ASSERT_EQ(o.code, cli::exit_ok) << o.err;
    const auto rows = lines_of(slurp(out));
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_NE(rows[1].find(",EPA,STPC,3,2,"), std::string::npos);
    EXPECT_EQ(rows[1].substr(rows[1].size() - 5), ",30,1");
}

TEST(Cli, MissingConfigFile)
{
    EXPECT_EQ(run({"sweep", "--config", (scratch() / "absent.cfg").string(), "--out", (scratch() / "a.csv").string()}).code,
              cli::exit_config);
}

TEST(Cli, OutageAndConvergence)
{
    const auto dir = scratch() / "runs";
    auto o = run({"outage", "--out", (dir / "out.csv").string(), "--scheme", "EPA", "--trials", "100", "--subcarriers",
                  "2", "--threads", "1"});
    ASSERT_EQ(o.code, cli::exit_ok) << o.err;
    EXPECT_EQ(lines_of(slurp(dir / "out.csv")).size(), 2u);
    EXPECT_EQ(run({"outage", "--out", (dir / "bad.csv").string(), "--trials", "20"}).code, cli::exit_config);

    o = run({"converge", "--out", (dir / "conv.csv").string(), "--trace", (dir / "trace.csv").string(), "--scheme",
             "IT-EXA", "--trials", "10", "--iterations", "3", "--subcarriers", "2", "--threads", "1"});
    ASSERT_EQ(o.code, cli::exit_ok) << o.err;
    EXPECT_EQ(lines_of(slurp(dir / "conv.csv")).size(), 5u);
    const auto trace = lines_of(slurp(dir / "trace.csv"));
    ASSERT_FALSE(trace.empty());
    EXPECT_EQ(trace[0], "trial,iteration,rate,scheme,constraint");
    EXPECT_EQ(trace.size(), 1u + 10u * 4u);
}

TEST(Cli, CalibrateWritesMultipliers)
{
    const auto dir = scratch() / "cal";
    const auto o = run({"calibrate", "--out", (dir / "lm.csv").string(), "--scheme", "ASY", "--constraint", "LTTPC",
                        "--gamma0-db", "10", "--training-samples", "200", "--subcarriers", "2"});
    ASSERT_EQ(o.code, cli::exit_ok) << o.err;
    std::ifstream f(dir / "lm.csv");
    const auto sets = read_multipliers_csv(f);
    ASSERT_EQ(sets.size(), 1u);
    EXPECT_EQ(sets[0].kind, MultiplierKind::global);
    EXPECT_EQ(sets[0].samples, 200);

    EXPECT_EQ(run({"calibrate", "--out", (dir / "x.csv").string(), "--scheme", "ASY", "--constraint", "STPC"}).code,
              cli::exit_config);
    EXPECT_EQ(run({"calibrate", "--out", (dir / "x.csv").string(), "--scheme", "ASY", "--constraint", "LTTPC",
                   "--gamma0-db", "0,10"})
                  .code,
              cli::exit_config);
}

TEST(Cli, QuickValidationPasses)
{
    const auto out = scratch() / "validate.txt";
    const auto o = run({"validate", "--quick", "--out", out.string(), "--threads", "1"});
    EXPECT_EQ(o.code, cli::exit_ok) << o.out << o.err;
    const auto rows = lines_of(o.out);
    EXPECT_EQ(rows.size(), 6u);
    for (const auto& r : rows) EXPECT_EQ(r.rfind("PASS ", 0), 0u) << r;
    EXPECT_EQ(slurp(out), o.out);
}
