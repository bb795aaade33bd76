// End-to-end CLI checks: subcommand contracts, exit codes, byte-identical
// reruns.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

namespace {

namespace fs = std::filesystem;

const char* kCli = ERGOKDE_CLI_PATH;

struct RunResult {
    int status = -1;
    std::string stdout_text;
    std::string stderr_text;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path work_dir() {
    const fs::path dir = fs::temp_directory_path() / "ergokde_cli_test";
    fs::create_directories(dir);
    return dir;
}

RunResult run_cli(const std::string& args) {
    const fs::path dir = work_dir();
    const fs::path out = dir / "stdout.txt";
    const fs::path err = dir / "stderr.txt";
    const std::string cmd =
        std::string(kCli) + " " + args + " > " + out.string() + " 2> " + err.string();
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.status = WEXITSTATUS(raw);
    r.stdout_text = slurp(out);
    r.stderr_text = slurp(err);
    return r;
}

fs::path write_config(const std::string& name, const std::string& text) {
    const fs::path p = work_dir() / name;
    std::ofstream out(p, std::ios::binary);
    out << text;
    return p;
}

const char* kOu2Config = R"json({
  "model": {"type": "ou", "B": [[1.0, 0.0], [0.0, 1.0]], "Q": [[1.0, 0.0], [0.0, 1.0]]},
  "simulation": {"T": 20.0, "dt": 0.01, "seed": 42},
  "estimator": {"h_rule": "fixed", "h": 0.4,
                "grid": {"lower": [-1.0, -1.0], "upper": [1.0, 1.0], "points_per_axis": 9}}
})json";

}  // namespace

TEST(Cli, SimulateWritesPathCsvDeterministically) {
    const fs::path cfg = write_config("ou2.json", kOu2Config);
    const fs::path out1 = work_dir() / "path1.csv";
    const fs::path out2 = work_dir() / "path2.csv";
    ASSERT_EQ(run_cli("simulate --config " + cfg.string() + " --out " + out1.string()).status,
              0);
    ASSERT_EQ(run_cli("simulate --config " + cfg.string() + " --out " + out2.string()).status,
              0);
    const std::string a = slurp(out1);
    EXPECT_EQ(a.substr(0, 8), "t,x1,x2\n");
    EXPECT_EQ(a, slurp(out2));
    // 2001 states + header
    EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 2002);
}

TEST(Cli, EstimateFromStoredPath) {
    const fs::path cfg = write_config("ou2.json", kOu2Config);
    const fs::path path_csv = work_dir() / "path_for_est.csv";
    ASSERT_EQ(
        run_cli("simulate --config " + cfg.string() + " --out " + path_csv.string()).status,
        0);
    const fs::path est_csv = work_dir() / "est.csv";
    const RunResult r = run_cli("estimate --config " + cfg.string() + " --path " +
                                path_csv.string() + " --out " + est_csv.string());
    ASSERT_EQ(r.status, 0);
    const std::string text = slurp(est_csv);
    EXPECT_EQ(text.substr(0, 14), "x1,x2,rho_hat\n");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 81);
}

TEST(Cli, AdaptBelowThresholdExitsTwo) {
    const std::string cfg_text = R"json({
      "model": {"type": "ou",
                "B": [[1.0,0.0,0.0],[0.0,1.0,0.0],[0.0,0.0,1.0]],
                "Q": [[1.0,0.0,0.0],[0.0,1.0,0.0],[0.0,0.0,1.0]]},
      "simulation": {"T": 500.0, "dt": 0.02, "seed": 7},
      "estimator": {"grid": {"lower": [-1.0,-1.0,-1.0], "upper": [1.0,1.0,1.0],
                             "points_per_axis": 9}}
    })json";
    const fs::path cfg = write_config("ou3_short.json", cfg_text);
    const RunResult r =
        run_cli("adapt --config " + cfg.string() + " --out " + (work_dir() / "t.csv").string());
    EXPECT_EQ(r.status, 2);
    EXPECT_NE(r.stderr_text.find("empty-grid"), std::string::npos);
}

TEST(Cli, AdaptWithExplicitLevels) {
    const std::string cfg_text = R"json({
      "model": {"type": "ou",
                "B": [[1.0,0.0,0.0],[0.0,1.0,0.0],[0.0,0.0,1.0]],
                "Q": [[1.0,0.0,0.0],[0.0,1.0,0.0],[0.0,0.0,1.0]]},
      "simulation": {"T": 500.0, "dt": 0.02, "seed": 7},
      "adaptive": {"eta": 2.0, "k": 1, "levels": 3},
      "estimator": {"grid": {"lower": [-1.0,-1.0,-1.0], "upper": [1.0,1.0,1.0],
                             "points_per_axis": 9}}
    })json";
    const fs::path cfg = write_config("ou3_adapt.json", cfg_text);
    const fs::path out1 = work_dir() / "trace1.csv";
    const fs::path out2 = work_dir() / "trace2.csv";
    const RunResult r1 =
        run_cli("adapt --config " + cfg.string() + " --out " + out1.string());
    ASSERT_EQ(r1.status, 0);
    EXPECT_NE(r1.stdout_text.find("selected_h="), std::string::npos);
    const std::string text = slurp(out1);
    EXPECT_EQ(text.substr(0, 30), "h,g,diff_sup,threshold,pass\n1,");
    ASSERT_EQ(run_cli("adapt --config " + cfg.string() + " --out " + out2.string()).status, 0);
    EXPECT_EQ(text, slurp(out2));
}

TEST(Cli, RatesPipelineAndRerun) {
    const std::string cfg_text = R"json({
      "model": {"type": "ou", "B": [[1.0]], "Q": [[1.0]]},
      "simulation": {"seed": 21},
      "estimator": {"h_rule": "theoretical", "c_h": 0.5,
                    "grid": {"lower": [-1.0], "upper": [1.0], "points_per_axis": 21}},
      "experiment": {"reps": 3, "T_list": [100.0, 200.0, 400.0]}
    })json";
    const fs::path cfg = write_config("rates_d1.json", cfg_text);
    const fs::path out1 = work_dir() / "risk1.csv";
    const fs::path out2 = work_dir() / "risk2.csv";
    const RunResult r1 = run_cli("rates --config " + cfg.string() + " --out " + out1.string());
    ASSERT_EQ(r1.status, 0);
    EXPECT_NE(r1.stdout_text.find("summary: slope="), std::string::npos);
    const std::string risk = slurp(out1);
    EXPECT_EQ(risk.substr(0, 28), "T,seed,h,sup_err,pt_sq_err\n1");
    EXPECT_EQ(std::count(risk.begin(), risk.end(), '\n'), 1 + 9);
    EXPECT_TRUE(fs::exists(out1.string() + ".rate.csv"));
    ASSERT_EQ(run_cli("rates --config " + cfg.string() + " --out " + out2.string()).status, 0);
    EXPECT_EQ(risk, slurp(out2));
    EXPECT_EQ(slurp(out1.string() + ".rate.csv"), slurp(out2.string() + ".rate.csv"));
}

TEST(Cli, VariancePipeline) {
    const std::string cfg_text = R"json({
      "model": {"type": "ou", "B": [[1.0]], "Q": [[1.0]]},
      "simulation": {"T": 50.0, "dt": 0.005, "seed": 8},
      "experiment": {"reps": 60, "lambda_list": [0.001, 0.0056, 0.0316, 0.1778],
                     "center": [0.0]}
    })json";
    const fs::path cfg = write_config("var_d1.json", cfg_text);
    const fs::path out = work_dir() / "var.csv";
    const RunResult r = run_cli("variance --config " + cfg.string() + " --out " + out.string());
    ASSERT_EQ(r.status, 0);
    const std::string text = slurp(out);
    EXPECT_EQ(text.substr(0, 18), "lambda,var_over_T\n");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 4);
}

TEST(Cli, FormulasPsi) {
    const RunResult r = run_cli("formulas --fn psi --x 0.01 --d 2");
    ASSERT_EQ(r.status, 0);
    EXPECT_NE(r.stdout_text.find("psi,2.367524062388404"), std::string::npos);
}

TEST(Cli, FormulasBandwidthClipWarning) {
    const RunResult r = run_cli("formulas --fn bandwidth --d 1 --T 54.598 --c_h 1.0");
    ASSERT_EQ(r.status, 0);
    EXPECT_NE(r.stdout_text.find("bandwidth,1\n"), std::string::npos);
    EXPECT_NE(r.stderr_text.find("clipped"), std::string::npos);
}

TEST(Cli, UnknownConfigKeyNamesKeyAndFails) {
    const fs::path cfg = write_config("bad.json", R"json({
      "model": {"type": "ou", "B": [[1.0]], "Q": [[1.0]], "mystery": 3}
    })json");
    const RunResult r = run_cli("simulate --config " + cfg.string() + " --out " +
                                (work_dir() / "x.csv").string());
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.stderr_text.find("model.mystery"), std::string::npos);
}

TEST(Cli, SeedFlagOverridesConfig) {
    const fs::path cfg = write_config("ou2b.json", kOu2Config);
    const fs::path a = work_dir() / "pa.csv";
    const fs::path b = work_dir() / "pb.csv";
    const fs::path c = work_dir() / "pc.csv";
    ASSERT_EQ(run_cli("simulate --config " + cfg.string() + " --seed 9 --out " + a.string())
                  .status,
              0);
    ASSERT_EQ(run_cli("simulate --config " + cfg.string() + " --seed 9 --out " + b.string())
                  .status,
              0);
    ASSERT_EQ(run_cli("simulate --config " + cfg.string() + " --seed 10 --out " + c.string())
                  .status,
              0);
    EXPECT_EQ(slurp(a), slurp(b));
    EXPECT_NE(slurp(a), slurp(c));
}
