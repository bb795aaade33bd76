// OU and jump-SDE simulators, stationary covariance solve, assumption checks.

#include <cmath>
#include <memory>

#include <gtest/gtest.h>

#include "ergokde/models.hpp"

using namespace ergokde;

namespace {

OUModel brownian_ou(const Eigen::MatrixXd& b, const Eigen::MatrixXd& q) {
    OUModel m;
    m.mean_reversion = b;
    m.noise = LevyTriplet::gaussian(Eigen::VectorXd::Zero(b.rows()), q);
    return m;
}

JumpSDEModel diffusion_only(int d,
                            std::function<Eigen::VectorXd(const Eigen::VectorXd&)> b,
                            double sigma_scale) {
    JumpSDEModel m;
    m.dim = d;
    m.drift_b = std::move(b);
    m.dispersion_sigma = [d, sigma_scale](const Eigen::VectorXd&) {
        return (sigma_scale * Eigen::MatrixXd::Identity(d, d)).eval();
    };
    m.jump_gamma = [d](const Eigen::VectorXd&) {
        return Eigen::MatrixXd::Zero(d, d).eval();
    };
    m.jump_spec = JumpMeasureSpec::none(d);
    return m;
}

}  // namespace

TEST(StationaryCov, IdentityPair) {
    const Eigen::MatrixXd s = stationary_gaussian_cov(Eigen::MatrixXd::Identity(2, 2),
                                                      Eigen::MatrixXd::Identity(2, 2));
    EXPECT_NEAR((s - 0.5 * Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 0.0, 1e-12);
}

TEST(StationaryCov, DiagonalCase) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(2, 2);
    b(0, 0) = 1.0;
    b(1, 1) = 2.0;
    const Eigen::MatrixXd s = stationary_gaussian_cov(b, Eigen::MatrixXd::Identity(2, 2));
    EXPECT_NEAR(s(0, 0), 0.5, 1e-12);
    EXPECT_NEAR(s(1, 1), 0.25, 1e-12);
    EXPECT_NEAR(s(0, 1), 0.0, 1e-12);
    // Residual contract.
    EXPECT_LE((b * s + s * b.transpose() - Eigen::MatrixXd::Identity(2, 2))
                  .cwiseAbs()
                  .maxCoeff(),
              1e-10);
}

TEST(StationaryCov, UnstableRejected) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Identity(2, 2);
    b(1, 1) = -1.0;
    EXPECT_THROW(stationary_gaussian_cov(b, Eigen::MatrixXd::Identity(2, 2)),
                 ValidationError);
}

TEST(SimulateOu, ZeroNoiseMatchesMatrixExponential) {
    OUModel m = brownian_ou(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(2, 2));
    Eigen::VectorXd x0(2);
    x0 << 1.0, 0.0;
    for (double dt : {0.5, 0.1, 0.004}) {
        Rng rng(1);
        const SamplePath path = simulate_ou(m, 1.0, dt, x0, 0.0, rng);
        EXPECT_NEAR(path.state(path.n_steps)[0], std::exp(-1.0), 1e-12) << "dt=" << dt;
        EXPECT_NEAR(path.state(path.n_steps)[1], 0.0, 1e-15) << "dt=" << dt;
    }
}

TEST(SimulateOu, StationaryCovarianceEmpirical) {
    OUModel m = brownian_ou(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2));
    const int reps = 10000;
    const double T = 10.0, dt = 0.01;
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(2, 2);
    for (int r = 0; r < reps; ++r) {
        Rng rng = Rng::child(2000, r);
        const Eigen::VectorXd x0 = stationary_gaussian_start(m, rng);
        const SamplePath path = simulate_ou(m, T, dt, x0, 0.0, rng);
        const Eigen::VectorXd xt = path.state(path.n_steps);
        acc += xt * xt.transpose();
    }
    acc /= static_cast<double>(reps);
    // Entrywise 3 standard errors: diag se = 0.5 sqrt(2/n), offdiag se = 0.5 sqrt(1/n).
    EXPECT_NEAR(acc(0, 0), 0.5, 3.0 * 0.5 * std::sqrt(2.0 / reps));
    EXPECT_NEAR(acc(1, 1), 0.5, 3.0 * 0.5 * std::sqrt(2.0 / reps));
    EXPECT_NEAR(acc(0, 1), 0.0, 3.0 * 0.5 * std::sqrt(1.0 / reps));
}

TEST(SimulateOu, MeanDecayFromFixedStart) {
    OUModel m = brownian_ou(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2));
    Eigen::VectorXd x0(2);
    x0 << 2.0, -1.0;
    const int reps = 10000;
    const double T = 1.0, dt = 0.01;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(2);
    for (int r = 0; r < reps; ++r) {
        Rng rng = Rng::child(4000, r);
        acc += simulate_ou(m, T, dt, x0, 0.0, rng).state(static_cast<std::size_t>(T / dt));
    }
    acc /= static_cast<double>(reps);
    const double sd = std::sqrt(0.5 * (1.0 - std::exp(-2.0 * T)));
    EXPECT_NEAR(acc[0], std::exp(-T) * 2.0, 3.0 * sd / std::sqrt(reps));
    EXPECT_NEAR(acc[1], std::exp(-T) * -1.0, 3.0 * sd / std::sqrt(reps));
}

TEST(SimulateOu, UnstableMatrixRejected) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Identity(2, 2);
    b(0, 0) = -0.5;
    OUModel m = brownian_ou(b, Eigen::MatrixXd::Identity(2, 2));
    Rng rng(1);
    EXPECT_THROW(simulate_ou(m, 1.0, 0.1, Eigen::VectorXd::Zero(2), 0.0, rng),
                 ValidationError);
}

TEST(SimulateOu, SeedDeterminismBitExact) {
    OUModel m = brownian_ou(Eigen::MatrixXd::Identity(3, 3), Eigen::MatrixXd::Identity(3, 3));
    Rng a(123), b(123);
    const SamplePath pa = simulate_ou(m, 5.0, 0.01, Eigen::VectorXd::Zero(3), 1.0, a);
    const SamplePath pb = simulate_ou(m, 5.0, 0.01, Eigen::VectorXd::Zero(3), 1.0, b);
    ASSERT_EQ(pa.states.size(), pb.states.size());
    for (std::size_t i = 0; i < pa.states.size(); ++i) ASSERT_EQ(pa.states[i], pb.states[i]);
}

TEST(SimulateJumpSde, FrozenCoefficientsStayPut) {
    JumpSDEModel m = diffusion_only(2, [](const Eigen::VectorXd& x) {
        return (0.0 * x).eval();
    }, 0.0);
    Eigen::VectorXd x0(2);
    x0 << 0.7, -0.3;
    Rng rng(9);
    const SamplePath path = simulate_jump_sde(m, 2.0, 0.1, x0, 0.0, rng);
    for (std::size_t i = 0; i <= path.n_steps; ++i) {
        ASSERT_EQ(path.state(i)[0], 0.7);
        ASSERT_EQ(path.state(i)[1], -0.3);
    }
}

TEST(SimulateJumpSde, BrownianMarginalVariance) {
    JumpSDEModel m = diffusion_only(1, [](const Eigen::VectorXd& x) {
        return (0.0 * x).eval();
    }, 1.0);
    const int reps = 10000;
    const double T = 1.0, dt = 0.01;
    double s = 0.0, s2 = 0.0;
    for (int r = 0; r < reps; ++r) {
        Rng rng = Rng::child(6000, r);
        const double xt = simulate_jump_sde(m, T, dt, Eigen::VectorXd::Zero(1), 0.0, rng)
                              .state(static_cast<std::size_t>(T / dt))[0];
        s += xt;
        s2 += xt * xt;
    }
    const double var = s2 / reps - (s / reps) * (s / reps);
    EXPECT_NEAR(var, T, 3.0 * T * std::sqrt(2.0 / reps));
}

TEST(SimulateJumpSde, EulerWeakConsistencyUnderRefinement) {
    JumpSDEModel m = diffusion_only(1, [](const Eigen::VectorXd& x) {
        return (0.0 * x).eval();
    }, 1.0);
    const int reps = 4000;
    const double T = 1.0;
    auto terminal_var = [&](double dt, std::uint64_t base) {
        double s = 0.0, s2 = 0.0;
        for (int r = 0; r < reps; ++r) {
            Rng rng = Rng::child(base, r);
            const double xt = simulate_jump_sde(m, T, dt, Eigen::VectorXd::Zero(1), 0.0, rng)
                                  .state(static_cast<std::size_t>(std::llround(T / dt)))[0];
            s += xt;
            s2 += xt * xt;
        }
        return s2 / reps - (s / reps) * (s / reps);
    };
    const double v1 = terminal_var(0.02, 8000);
    const double v2 = terminal_var(0.01, 9000);
    const double se = T * std::sqrt(2.0 / reps);
    EXPECT_NEAR(v1, v2, 2.0 * std::sqrt(2.0) * se);
}

TEST(SimulateJumpSde, SoftRestoringLongRunStable) {
    JumpSDEModel m = diffusion_only(2, [](const Eigen::VectorXd& x) {
        return ((-1.0 / std::max(x.norm(), 1.0)) * x).eval();
    }, 1.0);
    auto mean_norm = [&](double T, std::uint64_t seed) {
        Rng rng(seed);
        const SamplePath p =
            simulate_jump_sde(m, T, 0.01, Eigen::VectorXd::Zero(2), 50.0, rng);
        double acc = 0.0;
        for (std::size_t i = 0; i < p.n_steps; ++i) acc += p.state(i).norm();
        return acc / static_cast<double>(p.n_steps);
    };
    const double a = mean_norm(3000.0, 11);
    const double b = mean_norm(6000.0, 12);  // independent longer run
    EXPECT_LT(std::abs(a - b) / a, 0.05);
}

TEST(SimulateJumpSde, ExplosionCarriesStepIndex) {
    JumpSDEModel m = diffusion_only(1, [](const Eigen::VectorXd& x) {
        return (x * x.squaredNorm()).eval();
    }, 0.0);
    Eigen::VectorXd x0(1);
    x0 << 2.0;
    Rng rng(5);
    try {
        simulate_jump_sde(m, 10.0, 0.1, x0, 0.0, rng);
        FAIL() << "expected SimulationError";
    } catch (const SimulationError& e) {
        EXPECT_LT(e.step, 100u);
    }
}

TEST(ValidateJump, SoftRestoringDriftPassesWithZeroMargin) {
    JumpSDEModel m = diffusion_only(2, [](const Eigen::VectorXd& x) {
        return ((-1.0 / std::max(x.norm(), 1.0)) * x).eval();
    }, 1.0);
    m.c1 = 1.0;
    m.c2 = 1.0;
    Rng rng(3);
    const AssumptionReport report =
        validate_jump_assumptions(m, 500, {1.0, 2.0, 5.0}, rng);
    const AssumptionCheck* drift = report.find("drift_dissipativity");
    ASSERT_NE(drift, nullptr);
    EXPECT_TRUE(drift->passed);
    EXPECT_NEAR(drift->margin, 0.0, 1e-9);
    const AssumptionCheck* ell = report.find("uniform_ellipticity");
    ASSERT_NE(ell, nullptr);
    EXPECT_TRUE(ell->passed);
    EXPECT_NEAR(ell->margin, 1.0, 1e-9);  // sigma = I: smallest feasible c is 1
}

TEST(ValidateJump, DegenerateDispersionFails) {
    JumpSDEModel m = diffusion_only(2, [](const Eigen::VectorXd& x) {
        return (-x).eval();
    }, 1.0);
    m.dispersion_sigma = [](const Eigen::VectorXd&) {
        Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2, 2);
        s(0, 0) = 1.0;
        return s;
    };
    Rng rng(4);
    const AssumptionReport report = validate_jump_assumptions(m, 200, {1.0}, rng);
    const AssumptionCheck* ell = report.find("uniform_ellipticity");
    ASSERT_NE(ell, nullptr);
    EXPECT_FALSE(ell->passed);
    EXPECT_NEAR(ell->margin, 0.0, 1e-12);  // witness eigenvalue 0
}

TEST(ValidateJump, ReportIsReproducible) {
    JumpSDEModel m = diffusion_only(2, [](const Eigen::VectorXd& x) {
        return ((-1.0 / std::max(x.norm(), 1.0)) * x).eval();
    }, 1.0);
    m.jump_spec = JumpMeasureSpec::compound_poisson(
        1.0, std::make_shared<GaussianJumpLaw>(0.0625 * Eigen::MatrixXd::Identity(2, 2)));
    Rng a(77), b(77);
    const AssumptionReport ra = validate_jump_assumptions(m, 300, {1.0, 2.0}, a);
    const AssumptionReport rb = validate_jump_assumptions(m, 300, {1.0, 2.0}, b);
    ASSERT_EQ(ra.checks.size(), rb.checks.size());
    for (std::size_t i = 0; i < ra.checks.size(); ++i) {
        EXPECT_EQ(ra.checks[i].passed, rb.checks[i].passed);
        EXPECT_EQ(ra.checks[i].margin, rb.checks[i].margin);
    }
}

TEST(ValidateOu, FullRankPasses) {
    OUModel m = brownian_ou(Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Identity(2, 2));
    const AssumptionReport r = validate_ou_assumptions(m);
    EXPECT_TRUE(r.find("gaussian_full_rank")->passed);
    EXPECT_EQ(r.find("rate_regime")->witness, "supnorm-and-pointwise-all-d");
}

TEST(ValidateOu, RankDeficientFails) {
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(2, 2);
    q(0, 0) = 1.0;
    OUModel m = brownian_ou(Eigen::MatrixXd::Identity(2, 2), q);
    const AssumptionReport r = validate_ou_assumptions(m);
    EXPECT_FALSE(r.find("gaussian_full_rank")->passed);
}

TEST(ValidateOu, DeclaredMomentFlagEchoed) {
    auto law = std::make_shared<GaussianJumpLaw>(Eigen::MatrixXd::Identity(2, 2));
    MomentFlags flags;
    flags.poly_moment_p = 4.0;
    OUModel m;
    m.mean_reversion = Eigen::MatrixXd::Identity(2, 2);
    m.noise = LevyTriplet{Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2),
                          JumpMeasureSpec::compound_poisson(1.0, law, flags)};
    const AssumptionReport r = validate_ou_assumptions(m);
    EXPECT_TRUE(r.find("declared_p_moment")->passed);
    EXPECT_EQ(r.find("declared_p_moment")->margin, 4.0);
    EXPECT_EQ(r.find("rate_regime")->witness, "supnorm-and-pointwise-all-d");
}
