#pragma once

// Simulators for the two worked model classes: Levy-driven Ornstein-Uhlenbeck
// (exact one-step linear map, midpoint-weighted noise) and Levy-driven jump
// SDEs (Euler-Maruyama with compensated jump increments), plus numeric
// validators for the coefficient assumptions each class carries.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "ergokde/errors.hpp"
#include "ergokde/levy.hpp"
#include "ergokde/rng.hpp"

namespace ergokde {

// Uniform-grid trajectory. Row-major contiguous: the estimator consumes it as
// flat Riemann sums.
struct SamplePath {
    double dt = 0.0;
    std::size_t n_steps = 0;
    int dim = 0;
    std::vector<double> states;  // (n_steps + 1) rows of d
    std::uint64_t seed = 0;
    std::size_t burn_in_steps = 0;
    std::string model_tag;

    double horizon() const { return dt * static_cast<double>(n_steps); }

    const double* state_ptr(std::size_t i) const { return states.data() + i * dim; }

    Eigen::Map<const Eigen::VectorXd> state(std::size_t i) const {
        return Eigen::Map<const Eigen::VectorXd>(state_ptr(i), dim);
    }

    void validate() const {
        if (n_steps < 1) throw ValidationError("SamplePath: n_steps must be >= 1");
        if (!(dt > 0.0)) throw ValidationError("SamplePath: dt must be > 0");
        if (states.size() != (n_steps + 1) * static_cast<std::size_t>(dim))
            throw ValidationError("SamplePath: states size must be (n_steps+1) x d");
    }
};

// dX = -B X dt + dZ with all eigenvalues of B in the open right half-plane.
struct OUModel {
    Eigen::MatrixXd mean_reversion;  // B, 1/time
    LevyTriplet noise;

    int dim() const { return static_cast<int>(mean_reversion.rows()); }

    void validate() const {
        if (mean_reversion.rows() != mean_reversion.cols() || mean_reversion.rows() < 1)
            throw ValidationError("OUModel: B must be square");
        if (noise.dim() != dim()) throw ValidationError("OUModel: noise dimension mismatch");
        noise.validate();
        Eigen::EigenSolver<Eigen::MatrixXd> es(mean_reversion, false);
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
            if (es.eigenvalues()[i].real() <= 1e-10)
                throw ValidationError("OUModel: B must have eigenvalue real parts > 0");
    }

    bool is_brownian_driven() const {
        return noise.jumps.variant == JumpMeasureSpec::Variant::none &&
               noise.gaussian_cov.cwiseAbs().maxCoeff() > 0.0;
    }
};

// dX = b(X) dt + sigma(X) dW + gamma(X-) dZ with compensated pure-jump Z.
struct JumpSDEModel {
    int dim = 1;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> drift_b;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> dispersion_sigma;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jump_gamma;
    JumpMeasureSpec jump_spec;
    // Declared coefficient constants.
    double c1 = 1.0;
    double c2 = 1.0;
    double eta0 = 1.0;
    double alpha = 0.5;

    void validate() const {
        if (dim < 1) throw ValidationError("JumpSDEModel: dim must be >= 1");
        if (!drift_b || !dispersion_sigma || !jump_gamma)
            throw ValidationError("JumpSDEModel: coefficient functions required");
        if (!(alpha > 0.0 && alpha < 2.0))
            throw ValidationError("JumpSDEModel: alpha must lie in (0, 2)");
        if (!(c1 > 0.0 && c2 > 0.0 && eta0 > 0.0))
            throw ValidationError("JumpSDEModel: c1, c2, eta0 must be > 0");
    }
};

// Solves B S + S B^T = Q via Kronecker vectorization; d is small here.
inline Eigen::MatrixXd stationary_gaussian_cov(const Eigen::MatrixXd& b_mat,
                                               const Eigen::MatrixXd& q_mat) {
    const Eigen::Index d = b_mat.rows();
    if (b_mat.cols() != d || q_mat.rows() != d || q_mat.cols() != d)
        throw ValidationError("stationary_gaussian_cov: B, Q must be d x d");
    Eigen::EigenSolver<Eigen::MatrixXd> es(b_mat, false);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()[i].real() <= 1e-10)
            throw ValidationError("stationary_gaussian_cov: B must be stable");
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(d * d, d * d);
    // kron(I, B) + kron(B, I) acting on column-stacked S.
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            for (Eigen::Index k = 0; k < d; ++k) {
                sys(i + d * j, k + d * j) += b_mat(i, k);   // B S term
                sys(i + d * j, i + d * k) += b_mat(j, k);   // S B^T term
            }
    Eigen::VectorXd q_vec(d * d);
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i < d; ++i) q_vec[i + d * j] = q_mat(i, j);
    Eigen::VectorXd s_vec = Eigen::FullPivLU<Eigen::MatrixXd>(sys).solve(q_vec);
    Eigen::MatrixXd s(d, d);
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i < d; ++i) s(i, j) = s_vec[i + d * j];
    s = 0.5 * (s + s.transpose());
    const double residual = (b_mat * s + s * b_mat.transpose() - q_mat).cwiseAbs().maxCoeff();
    if (residual > 1e-10)
        throw NumericError("stationary_gaussian_cov: Lyapunov residual " +
                           std::to_string(residual));
    return s;
}

// Exact N(0, Sigma) draw from the stationary law of a Brownian-driven OU model.
inline Eigen::VectorXd stationary_gaussian_start(const OUModel& model, Rng& rng) {
    if (!model.is_brownian_driven())
        throw ValidationError("stationary start requires a Brownian-driven OU model");
    const Eigen::MatrixXd sigma =
        stationary_gaussian_cov(model.mean_reversion, model.noise.gaussian_cov);
    return detail::psd_sqrt(sigma) * rng.gaussian_vector(model.dim());
}

// One-step map: X <- e^{-dt B} X + e^{-dt B / 2} dZ(dt). The exact linear part
// removes drift discretization bias; the midpoint weighting of the stochastic
// integral increment leaves an O(dt) noise bias controlled by refinement tests.
inline SamplePath simulate_ou(const OUModel& model, double horizon, double dt,
                              const Eigen::VectorXd& x0, double burn_in, Rng& rng,
                              std::uint64_t seed_label = 0) {
    if (!(dt > 0.0)) throw ValidationError("simulate_ou: dt must be > 0");
    if (!(horizon >= dt)) throw ValidationError("simulate_ou: T must be >= dt");
    if (burn_in < 0.0) throw ValidationError("simulate_ou: burn_in must be >= 0");
    model.validate();
    if (x0.size() != model.dim()) throw ValidationError("simulate_ou: x0 dimension mismatch");

    const int d = model.dim();
    const std::size_t n_steps = static_cast<std::size_t>(std::llround(horizon / dt));
    const std::size_t burn_steps = static_cast<std::size_t>(std::llround(burn_in / dt));
    const Eigen::MatrixXd step_map = (-dt * model.mean_reversion).exp();
    const Eigen::MatrixXd half_map = (-0.5 * dt * model.mean_reversion).exp();
    LevyIncrementSampler noise(model.noise, dt);

    SamplePath path;
    path.dt = dt;
    path.n_steps = n_steps;
    path.dim = d;
    path.seed = seed_label;
    path.burn_in_steps = burn_steps;
    path.model_tag = "ou";
    path.states.resize((n_steps + 1) * static_cast<std::size_t>(d));

    Eigen::VectorXd x = x0;
    Eigen::VectorXd next(d);
    for (std::size_t i = 0; i < burn_steps; ++i) {
        next.noalias() = step_map * x;
        next.noalias() += half_map * noise.sample(rng);
        x.swap(next);
    }
    for (std::size_t i = 0; i <= n_steps; ++i) {
        for (int j = 0; j < d; ++j) {
            path.states[i * d + j] = x[j];
            if (!std::isfinite(x[j])) throw SimulationError("simulate_ou: non-finite state", i);
        }
        if (i == n_steps) break;
        next.noalias() = step_map * x;
        next.noalias() += half_map * noise.sample(rng);
        x.swap(next);
    }
    return path;
}

// Euler-Maruyama with compensated jump increments.
inline SamplePath simulate_jump_sde(const JumpSDEModel& model, double horizon, double dt,
                                    const Eigen::VectorXd& x0, double burn_in, Rng& rng,
                                    std::uint64_t seed_label = 0) {
    if (!(dt > 0.0)) throw ValidationError("simulate_jump_sde: dt must be > 0");
    if (!(horizon >= dt)) throw ValidationError("simulate_jump_sde: T must be >= dt");
    if (burn_in < 0.0) throw ValidationError("simulate_jump_sde: burn_in must be >= 0");
    model.validate();
    if (x0.size() != model.dim)
        throw ValidationError("simulate_jump_sde: x0 dimension mismatch");

    const int d = model.dim;
    const std::size_t n_steps = static_cast<std::size_t>(std::llround(horizon / dt));
    const std::size_t burn_steps = static_cast<std::size_t>(std::llround(burn_in / dt));
    const double sqrt_dt = std::sqrt(dt);

    // Jump-only triplet: the Gaussian and drift parts live in sigma and b.
    std::optional<LevyIncrementSampler> jump_noise;
    if (model.jump_spec.variant != JumpMeasureSpec::Variant::none) {
        LevyTriplet jump_triplet{Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d),
                                 model.jump_spec};
        jump_noise.emplace(jump_triplet, dt);
    }

    SamplePath path;
    path.dt = dt;
    path.n_steps = n_steps;
    path.dim = d;
    path.seed = seed_label;
    path.burn_in_steps = burn_steps;
    path.model_tag = "jumpsde";
    path.states.resize((n_steps + 1) * static_cast<std::size_t>(d));

    Eigen::VectorXd x = x0;
    auto advance = [&](std::size_t step_index) {
        Eigen::VectorXd incr = model.drift_b(x) * dt;
        incr.noalias() += model.dispersion_sigma(x) * (sqrt_dt * rng.gaussian_vector(d));
        if (jump_noise) incr.noalias() += model.jump_gamma(x) * jump_noise->sample(rng);
        x += incr;
        if (!x.allFinite())
            throw SimulationError("simulate_jump_sde: non-finite state", step_index);
    };
    for (std::size_t i = 0; i < burn_steps; ++i) advance(i);
    for (std::size_t i = 0; i <= n_steps; ++i) {
        for (int j = 0; j < d; ++j) path.states[i * d + j] = x[j];
        if (i == n_steps) break;
        advance(i);
    }
    return path;
}

struct AssumptionCheck {
    std::string name;
    bool passed = false;
    double margin = 0.0;  // signed slack or estimate; semantics per check
    std::string witness;
};

struct AssumptionReport {
    std::vector<AssumptionCheck> checks;

    bool all_passed() const {
        for (const auto& c : checks)
            if (!c.passed) return false;
        return true;
    }

    const AssumptionCheck* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
};

namespace detail {

inline Eigen::VectorXd uniform_on_sphere(int d, double radius, Rng& rng) {
    Eigen::VectorXd v = rng.gaussian_vector(d);
    const double n = v.norm();
    if (n == 0.0) return uniform_on_sphere(d, radius, rng);
    return (radius / n) * v;
}

inline std::string format_point(const Eigen::VectorXd& x) {
    std::ostringstream os;
    os << "(";
    for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
    os << ")";
    return os.str();
}

}  // namespace detail

// Sampled checks of the jump-SDE coefficient assumptions. Violations are report
// entries, never exceptions; a "pass" means no sampled violation.
inline AssumptionReport validate_jump_assumptions(const JumpSDEModel& model,
                                                  std::size_t sample_count,
                                                  const std::vector<double>& radius_grid,
                                                  Rng& rng) {
    if (sample_count < 100)
        throw ValidationError("validate_jump_assumptions: sample_count must be >= 100");
    model.validate();
    const int d = model.dim;
    AssumptionReport report;

    // (i) drift dissipativity <x, b(x)> <= -c1 ||x|| on spheres of radius >= c2.
    {
        std::vector<double> radii;
        for (double r : radius_grid)
            if (r >= model.c2) radii.push_back(r);
        if (radii.empty()) radii.push_back(model.c2);
        double worst = -std::numeric_limits<double>::infinity();
        Eigen::VectorXd worst_x = Eigen::VectorXd::Zero(d);
        for (double r : radii) {
            for (std::size_t i = 0; i < sample_count / radii.size() + 1; ++i) {
                const Eigen::VectorXd x = detail::uniform_on_sphere(d, r, rng);
                const double margin = x.dot(model.drift_b(x)) + model.c1 * x.norm();
                if (margin > worst) {
                    worst = margin;
                    worst_x = x;
                }
            }
        }
        AssumptionCheck c;
        c.name = "drift_dissipativity";
        c.margin = worst;
        c.passed = worst <= 1e-9 * (1.0 + model.c1);
        c.witness = "max <x,b(x)> + c1||x|| = " + std::to_string(worst) + " at " +
                    detail::format_point(worst_x);
        report.checks.push_back(std::move(c));
    }

    // (ii) uniform ellipticity: eigenvalues of sigma sigma^T within [1/c, c].
    {
        double min_eig = std::numeric_limits<double>::infinity();
        double max_eig = 0.0;
        Eigen::VectorXd min_x = Eigen::VectorXd::Zero(d);
        for (std::size_t i = 0; i < sample_count; ++i) {
            const Eigen::VectorXd x = i == 0 ? Eigen::VectorXd::Zero(d).eval()
                                             : (2.0 * rng.gaussian_vector(d)).eval();
            const Eigen::MatrixXd s = model.dispersion_sigma(x);
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s * s.transpose());
            if (es.eigenvalues().minCoeff() < min_eig) {
                min_eig = es.eigenvalues().minCoeff();
                min_x = x;
            }
            max_eig = std::max(max_eig, es.eigenvalues().maxCoeff());
        }
        AssumptionCheck c;
        c.name = "uniform_ellipticity";
        if (min_eig <= 0.0) {
            c.passed = false;
            c.margin = min_eig;
            c.witness = "eigenvalue " + std::to_string(min_eig) + " at " +
                        detail::format_point(min_x);
        } else {
            c.passed = true;
            c.margin = std::max(max_eig, 1.0 / min_eig);  // smallest feasible c
            c.witness = "smallest feasible c = " + std::to_string(c.margin);
        }
        report.checks.push_back(std::move(c));
    }

    // (iii) boundedness of kappa_alpha(x, z) = ||gamma(x) z||^{d+alpha} nu(z).
    {
        AssumptionCheck c;
        c.name = "kappa_alpha_bounded";
        const auto density = [&](const Eigen::VectorXd& z) -> std::optional<double> {
            switch (model.jump_spec.variant) {
                case JumpMeasureSpec::Variant::none:
                    return std::nullopt;
                case JumpMeasureSpec::Variant::compound_poisson:
                    if (!model.jump_spec.law->has_density()) return std::nullopt;
                    return model.jump_spec.lambda * model.jump_spec.law->density(z);
                case JumpMeasureSpec::Variant::density_family:
                    return model.jump_spec.density_at(z);
            }
            return std::nullopt;
        };
        if (model.jump_spec.variant == JumpMeasureSpec::Variant::none) {
            c.passed = true;
            c.margin = 0.0;
            c.witness = "no jump part";
        } else {
            double sup = 0.0;
            bool finite = true;
            for (std::size_t i = 0; i < sample_count && finite; ++i) {
                const Eigen::VectorXd x = 2.0 * rng.gaussian_vector(d);
                // Probe jump sizes from the measure itself plus stretched shells.
                Eigen::VectorXd z;
                if (model.jump_spec.variant == JumpMeasureSpec::Variant::compound_poisson)
                    z = model.jump_spec.law->sample(rng);
                else
                    z = model.jump_spec.sample_above_eps(rng);
                for (double scale : {0.25, 1.0, 4.0}) {
                    const Eigen::VectorXd zs = scale * z;
                    const auto nu = density(zs);
                    if (!nu) continue;
                    const double k =
                        std::pow((model.jump_gamma(x) * zs).norm(), d + model.alpha) * *nu;
                    if (!std::isfinite(k)) finite = false;
                    sup = std::max(sup, k);
                }
            }
            c.passed = finite;
            c.margin = sup;
            c.witness = finite ? "sampled sup = " + std::to_string(sup)
                               : "non-finite kappa_alpha encountered";
        }
        report.checks.push_back(std::move(c));
    }

    // (iv) exponential jump moment.
    {
        AssumptionCheck c;
        c.name = "exponential_jump_moment";
        try {
            const ExpMomentResult r = exponential_moment_check(model.jump_spec, model.eta0);
            c.passed = !r.diverged;
            c.margin = r.value;
            c.witness = r.diverged ? "integral exceeded overflow guard"
                                   : "integral = " + std::to_string(r.value);
        } catch (const NumericError& e) {
            c.passed = model.jump_spec.moment_flags.exp_eta0.has_value();
            c.margin = 0.0;
            c.witness = std::string("not computable (") + e.what() + "); declared flag " +
                        (c.passed ? "present" : "absent");
        }
        report.checks.push_back(std::move(c));
    }

    // Sampled Lipschitz ratios for b, sigma, gamma; estimates, not proofs.
    {
        double ratio_b = 0.0, ratio_s = 0.0, ratio_g = 0.0;
        for (std::size_t i = 0; i < sample_count; ++i) {
            const Eigen::VectorXd x = 2.0 * rng.gaussian_vector(d);
            const Eigen::VectorXd y = x + 0.1 * rng.gaussian_vector(d);
            const double dist = (x - y).norm();
            if (dist < 1e-12) continue;
            ratio_b = std::max(ratio_b, (model.drift_b(x) - model.drift_b(y)).norm() / dist);
            ratio_s = std::max(
                ratio_s, (model.dispersion_sigma(x) - model.dispersion_sigma(y)).norm() / dist);
            ratio_g = std::max(ratio_g,
                               (model.jump_gamma(x) - model.jump_gamma(y)).norm() / dist);
        }
        report.checks.push_back({"lipschitz_estimate_b", true, ratio_b,
                                 "max sampled difference ratio"});
        report.checks.push_back({"lipschitz_estimate_sigma", true, ratio_s,
                                 "max sampled difference ratio"});
        report.checks.push_back({"lipschitz_estimate_gamma", true, ratio_g,
                                 "max sampled difference ratio"});
    }

    return report;
}

// Checks of the OU assumptions: full-rank Gaussian part, declared jump moment
// flags, stability of B. The rate_regime entry records which estimation-rate
// scenario the declared assumptions support.
inline AssumptionReport validate_ou_assumptions(const OUModel& model) {
    AssumptionReport report;
    const int d = model.dim();

    bool full_rank = false;
    {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.noise.gaussian_cov);
        const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
        int rank = 0;
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
            if (es.eigenvalues()[i] > 1e-10 * scale) ++rank;
        full_rank = (scale > 0.0) && rank == d;
        report.checks.push_back({"gaussian_full_rank", full_rank, static_cast<double>(rank),
                                 "numeric rank " + std::to_string(rank) + " of " +
                                     std::to_string(d)});
    }

    bool stable = true;
    {
        Eigen::EigenSolver<Eigen::MatrixXd> es(model.mean_reversion, false);
        double min_real = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
            min_real = std::min(min_real, es.eigenvalues()[i].real());
        stable = min_real > 1e-10;
        report.checks.push_back({"mean_reversion_stable", stable, min_real,
                                 "min eigenvalue real part " + std::to_string(min_real)});
    }

    const MomentFlags& flags = model.noise.jumps.moment_flags;
    const bool no_jumps = model.noise.jumps.variant == JumpMeasureSpec::Variant::none;
    const bool p_moment = no_jumps || flags.poly_moment_p.has_value();
    const bool log_moment = no_jumps || flags.log_moment_alpha.has_value() || p_moment;
    report.checks.push_back({"declared_p_moment", p_moment,
                             flags.poly_moment_p.value_or(no_jumps ? std::numeric_limits<double>::infinity() : 0.0),
                             no_jumps ? "no jump part" : "declared flag echo"});
    report.checks.push_back({"declared_log_moment", log_moment,
                             flags.log_moment_alpha.value_or(0.0),
                             no_jumps ? "no jump part" : "declared flag echo"});
    // Stationarity moment condition (log moment of the big-jump tail) is
    // implied by either declared flag.
    report.checks.push_back({"stationarity_moment", log_moment || p_moment, 0.0,
                             "declared flag echo"});

    std::string regime = "none";
    if (full_rank && stable && p_moment)
        regime = "supnorm-and-pointwise-all-d";
    else if (full_rank && stable && log_moment)
        regime = "pointwise-d1";
    AssumptionCheck regime_check;
    regime_check.name = "rate_regime";
    regime_check.passed = regime != "none";
    regime_check.margin = 0.0;
    regime_check.witness = regime;
    report.checks.push_back(std::move(regime_check));
    return report;
}

}  // namespace ergokde
