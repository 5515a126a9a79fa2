#include <gtest/gtest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli_runner.hpp"
#include "qcd/csv.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kBin = QCD_CLI_PATH;
const std::string kS1 = "gaussian:0:1 gaussian:-0.5:1 gaussian:0.5:1";
const std::string kS3 = "gaussian:0:1 gaussian:1:1 gaussian:0.5:1";

qcd::csv::Table table(const fs::path& p) {
    std::ifstream in(p);
    return qcd::csv::read_table(in);
}

std::string quoted(const fs::path& p) { return "'" + p.string() + "'"; }

} // namespace

TEST(Cli, ClassifyPresets) {
    const auto r1 = cli::run(kBin, "classify " + kS1);
    ASSERT_EQ(r1.exit_code, 0);
    const auto j1 = json::parse(r1.out);
    EXPECT_EQ(j1["scenario"], 1);
    EXPECT_NEAR(j1["kl"]["fB||f0"]["value"].get<double>(), 0.125, 1e-12);
    EXPECT_EQ(j1["kl"]["fB||f0"]["method"], "closed-form");

    const auto r3 = cli::run(kBin, "classify " + kS3);
    ASSERT_EQ(r3.exit_code, 0);
    const auto j3 = json::parse(r3.out);
    EXPECT_EQ(j3["scenario"], 3);
    EXPECT_NEAR(j3["drift_w_under_fC"].get<double>(), 0.375, 1e-12);
    EXPECT_NEAR(j3["drift_lambda_under_f0"].get<double>(), 0.375, 1e-12);
    EXPECT_EQ(j3["kl"].size(), 6u);
}

TEST(Cli, ClassifyRejectsBadInput) {
    EXPECT_EQ(cli::run(kBin, "classify gaussian:0:1 gaussian:0:1 gaussian:0.5:1").exit_code, 2);
    EXPECT_EQ(cli::run(kBin, "classify gaussian:0:1 gaussian:1:0 gaussian:0.5:1").exit_code, 2);
    EXPECT_EQ(cli::run(kBin, "classify gaussian:0:1 gaussian:1:1").exit_code, 2);
}

TEST(Cli, BoundsRows) {
    const auto r = cli::run(kBin, "bounds " + kS3 + " --log-gamma 4 1");
    ASSERT_EQ(r.exit_code, 0);
    std::istringstream in(r.out);
    const auto t = qcd::csv::read_table(in);
    ASSERT_EQ(t.rows.size(), 2u);
    EXPECT_EQ(t.header, (std::vector<std::string>{"gamma", "log_gamma", "universal_lower", "s_upper", "j_upper"}));
    EXPECT_EQ(t.rows[0][2], "32");
    EXPECT_EQ(t.rows[0][3], "64");
    EXPECT_EQ(t.rows[0][4], "64");
    EXPECT_EQ(t.rows[1][2], "8");
    EXPECT_EQ(t.rows[1][3], "16");
    EXPECT_EQ(t.rows[1][4], "16");
}

TEST(Cli, BoundsToFile) {
    cli::TempDir dir;
    const auto out = dir.path() / "b.csv";
    ASSERT_EQ(cli::run(kBin, "bounds " + kS1 + " --gamma 100 --out " + quoted(out)).exit_code, 0);
    const auto t = table(out);
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_EQ(t.rows[0][0], "100");
}

TEST(Cli, BoundsRejectsBadGamma) {
    EXPECT_EQ(cli::run(kBin, "bounds " + kS3).exit_code, 2);
    EXPECT_EQ(cli::run(kBin, "bounds " + kS3 + " --gamma 1").exit_code, 2);
    EXPECT_EQ(cli::run(kBin, "bounds " + kS3 + " --gamma 0.5").exit_code, 2);
    EXPECT_EQ(cli::run(kBin, "bounds " + kS3 + " --log-gamma -1").exit_code, 2);
}

TEST(Cli, ReplicateWritesRecordsAndSummary) {
    cli::TempDir dir;
    const auto r = cli::run(kBin, "replicate 3 --trials 60 --out-dir " + quoted(dir.path()));
    ASSERT_EQ(r.exit_code, 0);
    const auto records = table(dir.path() / "scenario3_records.csv");
    EXPECT_EQ(records.rows.size(), 4320u); // 4 detectors x 6 b x 3 regimes x 60
    const auto summary = table(dir.path() / "scenario3_summary.csv");
    EXPECT_EQ(summary.rows.size(), 24u);
    std::string header;
    for (std::size_t i = 0; i < summary.header.size(); ++i) {
        header += (i ? "," : "") + summary.header[i];
    }
    EXPECT_EQ(header, qcd::csv::kSummaryHeader);
    const auto seed = records.column("seed");
    for (const auto& row : records.rows) {
        ASSERT_EQ(row[seed], "1");
    }
}

TEST(Cli, SameSeedSameFiles) {
    cli::TempDir a;
    cli::TempDir b;
    const std::string args = "replicate 2 --trials 20 --seed 7 --b 2 3 --out-dir ";
    ASSERT_EQ(cli::run(kBin, args + quoted(a.path())).exit_code, 0);
    ASSERT_EQ(cli::run(kBin, args + quoted(b.path()) + " --threads 3").exit_code, 0);
    EXPECT_EQ(cli::slurp(a.path() / "scenario2_records.csv"), cli::slurp(b.path() / "scenario2_records.csv"));
    EXPECT_EQ(cli::slurp(a.path() / "scenario2_summary.csv"), cli::slurp(b.path() / "scenario2_summary.csv"));
}

TEST(Cli, ReplicateAll) {
    cli::TempDir dir;
    ASSERT_EQ(cli::run(kBin, "replicate all --trials 5 --b 2 --out-dir " + quoted(dir.path())).exit_code, 0);
    for (int s = 1; s <= 3; ++s) {
        const auto summary = table(dir.path() / ("scenario" + std::to_string(s) + "_summary.csv"));
        ASSERT_EQ(summary.rows.size(), 4u);
        EXPECT_EQ(summary.rows[0][0], std::to_string(s));
    }
    // explicit paths get a per-scenario suffix
    const auto sum = dir.path() / "sum.csv";
    const auto rec = dir.path() / "rec.csv";
    ASSERT_EQ(cli::run(kBin, "replicate all --trials 5 --b 2 --summary " + quoted(sum) + " --records " + quoted(rec))
                  .exit_code,
              0);
    for (int s = 1; s <= 3; ++s) {
        EXPECT_TRUE(fs::exists(dir.path() / ("sum_s" + std::to_string(s) + ".csv")));
        EXPECT_TRUE(fs::exists(dir.path() / ("rec_s" + std::to_string(s) + ".csv")));
    }
}

TEST(Cli, ExitCodes) {
    EXPECT_EQ(cli::run(kBin, "replicate 3 --trials 2 --records /nonexistent/dir/r.csv").exit_code, 3);
    EXPECT_EQ(cli::run(kBin, "replicate 3 --bogus").exit_code, 2);
    EXPECT_EQ(cli::run(kBin, "replicate 4").exit_code, 2);
    EXPECT_EQ(cli::run(kBin, "replicate 3 --trials 0").exit_code, 2);
    EXPECT_EQ(cli::run(kBin, "replicate 3 --detectors cusum").exit_code, 2);
    EXPECT_EQ(cli::run(kBin, "").exit_code, 2);
    EXPECT_EQ(cli::run(kBin, "frobnicate").exit_code, 2);
}

TEST(Cli, HelpListsFlagsAndDefaults) {
    const auto top = cli::run(kBin, "--help");
    EXPECT_EQ(top.exit_code, 0);
    for (const char* sub : {"classify", "bounds", "replicate", "simulate"}) {
        EXPECT_NE(top.out.find(sub), std::string::npos) << sub;
    }
    const auto rep = cli::run(kBin, "replicate --help");
    EXPECT_EQ(rep.exit_code, 0);
    for (const char* flag : {"--trials", "--seed", "--b", "--detectors", "--records", "--summary", "--out-dir",
                             "--nu-grid", "--threads", "--config"}) {
        EXPECT_NE(rep.out.find(flag), std::string::npos) << flag;
    }
    EXPECT_NE(rep.out.find("60"), std::string::npos);
}

TEST(Cli, ConfigFileWithFlagsWinning) {
    cli::TempDir dir;
    const auto cfg = dir.path() / "run.json";
    std::ofstream(cfg) << R"({"trials": 4, "b": [2.5], "seed": 11, "detectors": ["s-cusum", "j-cusum"]})";
    ASSERT_EQ(cli::run(kBin, "replicate 1 --config " + quoted(cfg) + " --trials 3 --out-dir " + quoted(dir.path()))
                  .exit_code,
              0);
    const auto rec = table(dir.path() / "scenario1_records.csv");
    EXPECT_EQ(rec.rows.size(), 2u * 1u * 3u * 3u);
    EXPECT_EQ(rec.rows[0][rec.column("seed")], "11");
    EXPECT_EQ(rec.rows[0][rec.column("b0")], "2.5");

    const auto bad = dir.path() / "bad.json";
    std::ofstream(bad) << R"({"unknown_key": 1})";
    EXPECT_EQ(cli::run(kBin, "replicate 1 --config " + quoted(bad)).exit_code, 2);
    EXPECT_EQ(cli::run(kBin, "replicate 1 --config " + quoted(dir.path() / "missing.json")).exit_code, 3);
}

TEST(Cli, SeedFromEnvironment) {
    cli::TempDir dir;
    const std::string args = "replicate 3 --trials 2 --b 2 --out-dir " + quoted(dir.path());
    ASSERT_EQ(cli::run(kBin, args, "QCD_SEED=99").exit_code, 0);
    auto rec = table(dir.path() / "scenario3_records.csv");
    EXPECT_EQ(rec.rows[0][rec.column("seed")], "99");
    ASSERT_EQ(cli::run(kBin, args + " --seed 5", "QCD_SEED=99").exit_code, 0);
    rec = table(dir.path() / "scenario3_records.csv");
    EXPECT_EQ(rec.rows[0][rec.column("seed")], "5");
    EXPECT_EQ(cli::run(kBin, args, "QCD_SEED=abc").exit_code, 2);
}

TEST(Cli, SimulateCustomModels) {
    cli::TempDir dir;
    const auto r = cli::run(kBin, "simulate --f0 gaussian:0:1 --fc gaussian:1:1 --fb gaussian:0.5:1 --trials 3 --b 2 "
                                  "--out-dir " + quoted(dir.path()));
    ASSERT_EQ(r.exit_code, 0);
    const auto sum = table(dir.path() / "scenario3_summary.csv");
    EXPECT_EQ(sum.rows.size(), 4u);
    EXPECT_EQ(cli::run(kBin, "simulate --f0 gaussian:0:1 --fc gaussian:1:1").exit_code, 2);
}

TEST(Cli, NuGridAddsConfusingRegimes) {
    cli::TempDir dir;
    ASSERT_EQ(cli::run(kBin, "replicate 3 --trials 2 --b 2 --nu-grid --detectors s-cusum --out-dir " +
                                 quoted(dir.path()))
                  .exit_code,
              0);
    const auto rec = table(dir.path() / "scenario3_records.csv");
    EXPECT_EQ(rec.rows.size(), (2u + 5u) * 2u);
}
