// rng determinism, quadrature sanity, csv round trips, config parsing.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ergokde/config.hpp"
#include "ergokde/csv.hpp"
#include "ergokde/parallel.hpp"
#include "ergokde/quadrature.hpp"
#include "ergokde/rng.hpp"

using namespace ergokde;

namespace {

std::string temp_file(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        ASSERT_EQ(a.raw(), b.raw());
    }
    Rng c(42), d(42);
    for (int i = 0; i < 1000; ++i) {
        ASSERT_EQ(c.gaussian(), d.gaussian());
        ASSERT_EQ(c.poisson(0.7), d.poisson(0.7));
    }
}

TEST(Rng, GaussianMoments) {
    Rng rng(7);
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = rng.gaussian();
        s += g;
        s2 += g * g;
    }
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, PoissonMean) {
    Rng rng(11);
    const int n = 100000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += static_cast<double>(rng.poisson(3.5));
    EXPECT_NEAR(s / n, 3.5, 0.05);
}

TEST(Quadrature, PolynomialExactness) {
    // 200-node Gauss-Legendre integrates degree <= 399 exactly.
    auto f = [](double x) { return 5.0 * x * x * x * x - x * x + 2.0; };
    const double exact = 2.0 * (5.0 / 5.0 - 1.0 / 3.0 + 2.0);
    EXPECT_NEAR(integrate(f, -1.0, 1.0, 200), exact, 1e-13);
}

TEST(Quadrature, TailIntegralOfExponential) {
    auto f = [](double x) { return std::exp(-x); };
    const TailIntegral ti = integrate_tail(f, 0.0, 1.0, 1e12);
    EXPECT_FALSE(ti.diverged);
    EXPECT_NEAR(ti.value, 1.0, 1e-12);
}

TEST(Quadrature, TailIntegralDivergence) {
    auto f = [](double x) { return std::exp(0.5 * x); };
    const TailIntegral ti = integrate_tail(f, 0.0, 1.0, 1e12);
    EXPECT_TRUE(ti.diverged);
}

TEST(Parallel, IndexBodyRunsAll) {
    std::vector<int> hits(1000, 0);
    parallel_for_index(hits.size(), [&](std::size_t i) { hits[i] = static_cast<int>(i); }, 4);
    for (std::size_t i = 0; i < hits.size(); ++i) ASSERT_EQ(hits[i], static_cast<int>(i));
}

TEST(Csv, HeaderOnlyForEmptyRows) {
    CsvTable t;
    t.header = {"a", "b"};
    EXPECT_EQ(to_csv_text(t), "a,b\n");
}

TEST(Csv, RowCountLines) {
    CsvTable t;
    t.header = {"a"};
    t.rows = {{1.0}, {2.0}, {3.0}};
    const std::string text = to_csv_text(t);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
}

TEST(Csv, RoundTripIsBitExact) {
    CsvTable t;
    t.header = {"v"};
    t.rows = {{0.1}, {1.0 / 3.0}, {M_PI}, {1e-300}, {12345678901234568.0}};
    const std::string path = temp_file("ergokde_csv_roundtrip.csv");
    write_csv(path, t);
    const CsvTable back = read_csv(path);
    ASSERT_EQ(back.rows.size(), t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        EXPECT_EQ(back.rows[i][0], t.rows[i][0]) << "row " << i;
    std::filesystem::remove(path);
}

namespace {

const char* kMinimalOuConfig = R"json({
  "model": {"type": "ou", "B": [[1.0, 0.0], [0.0, 1.0]], "Q": [[1.0, 0.0], [0.0, 1.0]]},
  "simulation": {"T": 10.0, "dt": 0.01, "seed": 5}
})json";

}  // namespace

TEST(Config, MinimalOuDefaults) {
    const ExperimentConfig cfg = parse_config_text(kMinimalOuConfig);
    EXPECT_EQ(cfg.model_type, "ou");
    EXPECT_EQ(cfg.eta, 2.0);
    EXPECT_EQ(cfg.k, 1);
    EXPECT_EQ(cfg.kernel_order, 1);
    EXPECT_EQ(cfg.seed, 5u);
    EXPECT_EQ(cfg.grid.points_per_axis, 33);
    EXPECT_EQ(cfg.grid.dim(), 2);
}

TEST(Config, UnknownKeyNamesTheKey) {
    try {
        parse_config_text(R"({"model": {"type": "ou", "B": [[1.0]], "Q": [[1.0]],
                              "bogus": 1}})");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("model.bogus"), std::string::npos);
    }
}

TEST(Config, KernelOrderZeroNamesTheKey) {
    const std::string doc = R"({
      "model": {"type": "ou", "B": [[1.0]], "Q": [[1.0]]},
      "kernel": {"order": 0}
    })";
    try {
        parse_config_text(doc);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("kernel.order"), std::string::npos);
    }
}

TEST(Config, SerializeParseRoundTrip) {
    const ExperimentConfig a = parse_config_text(kMinimalOuConfig);
    const ExperimentConfig b = parse_config_text(serialize_config(a));
    EXPECT_EQ(a.resolved, b.resolved);
    const ExperimentConfig c = parse_config_text(serialize_config(b));
    EXPECT_EQ(b.resolved, c.resolved);
}

TEST(Config, JumpSdeSoftRestoring) {
    const char* doc = R"json({
      "model": {"type": "jumpsde", "dim": 2, "b": "soft_restoring",
                "sigma": "identity", "gamma": 0.5,
                "jump": {"type": "cpoisson-gauss", "lambda": 1.0, "jump_cov": 0.0625},
                "constants": {"c1": 1.0, "c2": 1.0, "eta0": 1.0, "alpha": 0.5}},
      "simulation": {"T": 50.0, "dt": 0.01, "seed": 3}
    })json";
    const ExperimentConfig cfg = parse_config_text(doc);
    const auto& model = std::get<JumpSDEModel>(cfg.model);
    Eigen::VectorXd x(2);
    x << 3.0, 4.0;  // ||x|| = 5
    const Eigen::VectorXd b = model.drift_b(x);
    EXPECT_NEAR(b[0], -0.6, 1e-15);
    EXPECT_NEAR(b[1], -0.8, 1e-15);
    Eigen::VectorXd small(2);
    small << 0.3, 0.0;  // inside the unit ball: b(x) = -x
    EXPECT_NEAR(model.drift_b(small)[0], -0.3, 1e-15);
}

TEST(Config, MalformedDocumentIsConfigError) {
    EXPECT_THROW(parse_config_text("{ not json"), ConfigError);
}
