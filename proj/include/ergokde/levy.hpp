#pragma once

// Sampling of Levy process increments from a generating triplet (a, Q, nu).
// Jump activity below the truncation radius eps is replaced by a Gaussian with
// the matching covariance; jumps above eps are compound Poisson with the
// compensator drift subtracted, so increments of the jump part are centered.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ergokde/errors.hpp"
#include "ergokde/quadrature.hpp"
#include "ergokde/rng.hpp"

namespace ergokde {

inline constexpr double kMomentIntegralGuard = 1e12;

// Declared (not verified) finiteness of jump-measure moments. Validators echo
// these; the moment integrals themselves are computed where a density exists.
struct MomentFlags {
    std::optional<double> exp_eta0;          // integral ||z||^2 e^{eta0 ||z||} nu(dz) finite
    std::optional<double> poly_moment_p;     // integral_{||z||>1} ||z||^p nu(dz) finite
    std::optional<double> log_moment_alpha;  // integral_{||z||>1} (log ||z||)^alpha nu(dz) finite
};

// A sampleable jump-size distribution with density, for compound Poisson specs.
class JumpLaw {
public:
    virtual ~JumpLaw() = default;
    virtual int dim() const = 0;
    virtual Eigen::VectorXd sample(Rng& rng) const = 0;
    virtual bool has_density() const { return true; }
    virtual double density(const Eigen::VectorXd& z) const = 0;
    virtual Eigen::VectorXd mean() const = 0;
    // Exact E[||J||^2 e^{eta ||J||}] when the law admits one in closed form.
    virtual std::optional<double> exp_second_moment_exact(double /*eta*/) const {
        return std::nullopt;
    }
};

class GaussianJumpLaw final : public JumpLaw {
public:
    explicit GaussianJumpLaw(Eigen::MatrixXd cov) : cov_(std::move(cov)) {
        if (cov_.rows() != cov_.cols() || cov_.rows() < 1)
            throw ValidationError("GaussianJumpLaw: covariance must be square");
        if (!cov_.isApprox(cov_.transpose(), 1e-12))
            throw ValidationError("GaussianJumpLaw: covariance must be symmetric");
        Eigen::LLT<Eigen::MatrixXd> llt(cov_);
        if (llt.info() != Eigen::Success)
            throw ValidationError("GaussianJumpLaw: covariance must be positive definite");
        chol_ = llt.matrixL();
        const double det = cov_.determinant();
        norm_const_ = std::pow(2.0 * M_PI, -0.5 * static_cast<double>(cov_.rows())) /
                      std::sqrt(det);
        precision_ = cov_.inverse();
    }

    int dim() const override { return static_cast<int>(cov_.rows()); }

    Eigen::VectorXd sample(Rng& rng) const override {
        return chol_ * rng.gaussian_vector(cov_.rows());
    }

    double density(const Eigen::VectorXd& z) const override {
        return norm_const_ * std::exp(-0.5 * z.dot(precision_ * z));
    }

    Eigen::VectorXd mean() const override { return Eigen::VectorXd::Zero(cov_.rows()); }

private:
    Eigen::MatrixXd cov_, chol_, precision_;
    double norm_const_;
};

class PointMassJumpLaw final : public JumpLaw {
public:
    explicit PointMassJumpLaw(Eigen::VectorXd atom) : atom_(std::move(atom)) {
        if (atom_.size() < 1) throw ValidationError("PointMassJumpLaw: empty atom");
    }
    int dim() const override { return static_cast<int>(atom_.size()); }
    Eigen::VectorXd sample(Rng&) const override { return atom_; }
    bool has_density() const override { return false; }
    double density(const Eigen::VectorXd&) const override {
        throw ValidationError("PointMassJumpLaw has no Lebesgue density");
    }
    Eigen::VectorXd mean() const override { return atom_; }
    std::optional<double> exp_second_moment_exact(double eta) const override {
        const double r = atom_.norm();
        return r * r * std::exp(eta * r);
    }

private:
    Eigen::VectorXd atom_;
};

// Jump part of a generating triplet: none, compound Poisson with a jump law, or
// a Levy density with truncation radius eps for the simulation scheme.
struct JumpMeasureSpec {
    enum class Variant { none, compound_poisson, density_family };

    Variant variant = Variant::none;
    int dim = 1;
    MomentFlags moment_flags;

    // compound_poisson
    double lambda = 0.0;  // total mass, 1/time
    std::shared_ptr<const JumpLaw> law;

    // density_family
    std::function<double(const Eigen::VectorXd&)> density;
    double eps = 1e-2;
    double mass_above_eps = 0.0;                       // nu({||z|| > eps})
    Eigen::VectorXd mean_above_eps;                    // integral of z over {||z|| > eps}
    std::function<Eigen::VectorXd(Rng&)> sample_above_eps;

    static JumpMeasureSpec none(int d) {
        JumpMeasureSpec spec;
        spec.variant = Variant::none;
        spec.dim = d;
        return spec;
    }

    static JumpMeasureSpec compound_poisson(double total_mass,
                                            std::shared_ptr<const JumpLaw> jump_law,
                                            MomentFlags flags = {}) {
        if (!(total_mass > 0.0))
            throw ValidationError("compound_poisson: lambda must be > 0");
        if (!jump_law) throw ValidationError("compound_poisson: jump law required");
        JumpMeasureSpec spec;
        spec.variant = Variant::compound_poisson;
        spec.dim = jump_law->dim();
        spec.lambda = total_mass;
        spec.law = std::move(jump_law);
        spec.moment_flags = flags;
        return spec;
    }

    static JumpMeasureSpec density_family(
        int d, std::function<double(const Eigen::VectorXd&)> nu_density, double eps,
        double mass_above, Eigen::VectorXd mean_above,
        std::function<Eigen::VectorXd(Rng&)> tail_sampler, MomentFlags flags = {}) {
        if (!(eps > 0.0)) throw ValidationError("density_family: eps must be > 0");
        if (!nu_density) throw ValidationError("density_family: density required");
        JumpMeasureSpec spec;
        spec.variant = Variant::density_family;
        spec.dim = d;
        spec.density = std::move(nu_density);
        spec.eps = eps;
        spec.mass_above_eps = mass_above;
        spec.mean_above_eps = std::move(mean_above);
        spec.sample_above_eps = std::move(tail_sampler);
        spec.moment_flags = flags;
        return spec;
    }

    double density_at(const Eigen::VectorXd& z) const {
        const double v = density(z);
        if (v < 0.0) throw ValidationError("jump density must be nonnegative");
        return v;
    }
};

// Generating triplet (a, Q, nu) of a d-dimensional Levy process.
struct LevyTriplet {
    Eigen::VectorXd drift;        // a, state-units/time
    Eigen::MatrixXd gaussian_cov; // Q, state-units^2/time
    JumpMeasureSpec jumps;

    int dim() const { return static_cast<int>(drift.size()); }

    void validate() const {
        if (drift.size() < 1) throw ValidationError("LevyTriplet: dimension must be >= 1");
        if (gaussian_cov.rows() != drift.size() || gaussian_cov.cols() != drift.size())
            throw ValidationError("LevyTriplet: Q must be d x d");
        if ((gaussian_cov - gaussian_cov.transpose()).cwiseAbs().maxCoeff() > 1e-12)
            throw ValidationError("LevyTriplet: Q must be symmetric within 1e-12");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gaussian_cov);
        if (es.eigenvalues().minCoeff() < -1e-12)
            throw ValidationError("LevyTriplet: non-PSD Q");
        if (jumps.variant != JumpMeasureSpec::Variant::none && jumps.dim != dim())
            throw ValidationError("LevyTriplet: jump spec dimension mismatch");
    }

    static LevyTriplet gaussian(Eigen::VectorXd a, Eigen::MatrixXd q) {
        LevyTriplet t{std::move(a), std::move(q), JumpMeasureSpec::none(1)};
        t.jumps.dim = t.dim();
        t.validate();
        return t;
    }
};

namespace detail {

// PSD square root via spectral decomposition; tolerates semidefinite Q.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * lam.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

// Average of nu over the sphere of radius r (times surface measure), i.e.
// g(r) = integral over directions u of nu(r u); supports d <= 3.
template <typename Density>
double angular_integral(const Density& nu, int d, double r) {
    if (d == 1) {
        Eigen::VectorXd z(1);
        z[0] = r;
        double s = nu(z);
        z[0] = -r;
        return s + nu(z);
    }
    if (d == 2) {
        const QuadratureRule& rule = cached_gauss_legendre(128);
        double s = 0.0;
        Eigen::VectorXd z(2);
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            const double theta = M_PI * (rule.nodes[i] + 1.0);
            z[0] = r * std::cos(theta);
            z[1] = r * std::sin(theta);
            s += rule.weights[i] * nu(z);
        }
        return M_PI * s;  // maps [-1,1] -> [0, 2 pi]
    }
    if (d == 3) {
        const QuadratureRule& phi_rule = cached_gauss_legendre(64);
        const QuadratureRule& theta_rule = cached_gauss_legendre(64);
        double s = 0.0;
        Eigen::VectorXd z(3);
        for (std::size_t i = 0; i < phi_rule.nodes.size(); ++i) {
            const double c = phi_rule.nodes[i];  // cos(phi) in [-1,1]
            const double sphi = std::sqrt(std::max(0.0, 1.0 - c * c));
            double ring = 0.0;
            for (std::size_t j = 0; j < theta_rule.nodes.size(); ++j) {
                const double theta = M_PI * (theta_rule.nodes[j] + 1.0);
                z[0] = r * sphi * std::cos(theta);
                z[1] = r * sphi * std::sin(theta);
                z[2] = r * c;
                ring += theta_rule.weights[j] * nu(z);
            }
            s += phi_rule.weights[i] * ring * M_PI;
        }
        return s;
    }
    throw NumericError("jump-measure quadrature supports d <= 3 only");
}

}  // namespace detail

// integral over {||z|| <= eps} of z z^T nu(dz), by radial-angular quadrature with
// refinement. Result is the per-unit-time covariance of the small-jump part.
inline Eigen::MatrixXd small_jump_covariance(const JumpMeasureSpec& spec, double eps) {
    if (spec.variant != JumpMeasureSpec::Variant::density_family)
        throw ValidationError("small_jump_covariance: spec must be density_family");
    if (!(eps > 0.0)) throw ValidationError("small_jump_covariance: eps must be > 0");
    const int d = spec.dim;
    if (d > 3) throw NumericError("small_jump_covariance supports d <= 3 only");

    auto compute = [&](std::size_t radial_nodes) {
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
        const QuadratureRule& rule = cached_gauss_legendre(radial_nodes);
        for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
            const double r = 0.5 * eps * (rule.nodes[i] + 1.0);
            const double w = 0.5 * eps * rule.weights[i];
            // direction-resolved second moment on the sphere of radius r
            if (d == 1) {
                Eigen::VectorXd z(1);
                z[0] = r;
                double s = spec.density_at(z);
                z[0] = -r;
                s += spec.density_at(z);
                acc(0, 0) += w * r * r * s;
            } else if (d == 2) {
                const QuadratureRule& ang = cached_gauss_legendre(128);
                Eigen::VectorXd z(2);
                for (std::size_t j = 0; j < ang.nodes.size(); ++j) {
                    const double theta = M_PI * (ang.nodes[j] + 1.0);
                    z[0] = r * std::cos(theta);
                    z[1] = r * std::sin(theta);
                    acc += (M_PI * ang.weights[j] * w * r * spec.density_at(z)) *
                           (z * z.transpose());
                }
            } else {
                const QuadratureRule& phi_rule = cached_gauss_legendre(64);
                const QuadratureRule& theta_rule = cached_gauss_legendre(64);
                Eigen::VectorXd z(3);
                for (std::size_t a = 0; a < phi_rule.nodes.size(); ++a) {
                    const double c = phi_rule.nodes[a];
                    const double sphi = std::sqrt(std::max(0.0, 1.0 - c * c));
                    for (std::size_t b = 0; b < theta_rule.nodes.size(); ++b) {
                        const double theta = M_PI * (theta_rule.nodes[b] + 1.0);
                        z[0] = r * sphi * std::cos(theta);
                        z[1] = r * sphi * std::sin(theta);
                        z[2] = r * c;
                        acc += (M_PI * phi_rule.weights[a] * theta_rule.weights[b] * w * r * r *
                                spec.density_at(z)) *
                               (z * z.transpose());
                    }
                }
            }
        }
        return acc;
    };

    Eigen::MatrixXd prev = compute(64);
    for (std::size_t n : {128, 256, 512}) {
        Eigen::MatrixXd next = compute(n);
        const double scale = std::max(1e-300, next.cwiseAbs().maxCoeff());
        const double change = (next - prev).cwiseAbs().maxCoeff() / scale;
        if (change <= 1e-6) {
            Eigen::MatrixXd sym = 0.5 * (next + next.transpose());
            return sym;
        }
        prev = next;
    }
    throw NumericError("small_jump_covariance: quadrature did not converge");
}

struct ExpMomentResult {
    double value = 0.0;
    bool diverged = false;
};

// integral of ||z||^2 e^{eta0 ||z||} nu(dz). Divergence (running value past the
// overflow guard) is reported in the result, never thrown.
inline ExpMomentResult exponential_moment_check(const JumpMeasureSpec& spec, double eta0) {
    if (!(eta0 > 0.0)) throw ValidationError("exponential_moment_check: eta0 must be > 0");
    ExpMomentResult out;
    switch (spec.variant) {
        case JumpMeasureSpec::Variant::none:
            return out;
        case JumpMeasureSpec::Variant::compound_poisson: {
            if (auto exact = spec.law->exp_second_moment_exact(eta0)) {
                out.value = spec.lambda * *exact;
                out.diverged = out.value > kMomentIntegralGuard;
                return out;
            }
            if (!spec.law->has_density())
                throw NumericError("exponential_moment_check: law has neither density nor closed form");
            auto nu = [&](const Eigen::VectorXd& z) {
                return spec.lambda * spec.law->density(z);
            };
            auto radial = [&](double r) {
                return r * r * std::exp(eta0 * r) * std::pow(r, spec.dim - 1) *
                       detail::angular_integral(nu, spec.dim, r);
            };
            TailIntegral ti = integrate_tail(radial, 0.0, 1.0, kMomentIntegralGuard);
            out.value = ti.value;
            out.diverged = ti.diverged;
            return out;
        }
        case JumpMeasureSpec::Variant::density_family: {
            auto nu = [&](const Eigen::VectorXd& z) { return spec.density_at(z); };
            auto radial = [&](double r) {
                return r * r * std::exp(eta0 * r) * std::pow(r, spec.dim - 1) *
                       detail::angular_integral(nu, spec.dim, r);
            };
            TailIntegral ti = integrate_tail(radial, 0.0, 1.0, kMomentIntegralGuard);
            out.value = ti.value;
            out.diverged = ti.diverged;
            return out;
        }
    }
    throw NumericError("exponential_moment_check: unreachable");
}

// Stateful increment sampler; factors the Gaussian part and the small-jump
// substitution once, then samples per step. One instance per thread.
class LevyIncrementSampler {
public:
    LevyIncrementSampler(const LevyTriplet& triplet, double dt)
        : triplet_(triplet), dt_(dt) {
        if (!(dt > 0.0)) throw ValidationError("sample_increment: dt must be > 0");
        triplet.validate();
        const int d = triplet.dim();
        gauss_factor_ = detail::psd_sqrt(triplet.gaussian_cov * dt);
        drift_dt_ = triplet.drift * dt;
        switch (triplet.jumps.variant) {
            case JumpMeasureSpec::Variant::none:
                break;
            case JumpMeasureSpec::Variant::compound_poisson:
                jump_compensator_ = triplet.jumps.lambda * dt * triplet.jumps.law->mean();
                break;
            case JumpMeasureSpec::Variant::density_family: {
                const Eigen::MatrixXd small_cov =
                    small_jump_covariance(triplet.jumps, triplet.jumps.eps);
                small_jump_factor_ = detail::psd_sqrt(small_cov * dt);
                jump_compensator_ = dt * triplet.jumps.mean_above_eps;
                break;
            }
        }
        if (jump_compensator_.size() == 0) jump_compensator_ = Eigen::VectorXd::Zero(d);
    }

    Eigen::VectorXd sample(Rng& rng) const {
        const int d = triplet_.dim();
        Eigen::VectorXd inc = drift_dt_ + gauss_factor_ * rng.gaussian_vector(d);
        switch (triplet_.jumps.variant) {
            case JumpMeasureSpec::Variant::none:
                break;
            case JumpMeasureSpec::Variant::compound_poisson: {
                const std::uint64_t n = rng.poisson(triplet_.jumps.lambda * dt_);
                for (std::uint64_t i = 0; i < n; ++i) inc += triplet_.jumps.law->sample(rng);
                inc -= jump_compensator_;
                break;
            }
            case JumpMeasureSpec::Variant::density_family: {
                inc += small_jump_factor_ * rng.gaussian_vector(d);
                const std::uint64_t n = rng.poisson(triplet_.jumps.mass_above_eps * dt_);
                for (std::uint64_t i = 0; i < n; ++i)
                    inc += triplet_.jumps.sample_above_eps(rng);
                inc -= jump_compensator_;
                break;
            }
        }
        return inc;
    }

    // Jump count drawn for one step; exposed for tests of the Poisson clock.
    std::uint64_t sample_jump_count(Rng& rng) const {
        if (triplet_.jumps.variant == JumpMeasureSpec::Variant::compound_poisson)
            return rng.poisson(triplet_.jumps.lambda * dt_);
        if (triplet_.jumps.variant == JumpMeasureSpec::Variant::density_family)
            return rng.poisson(triplet_.jumps.mass_above_eps * dt_);
        return 0;
    }

private:
    LevyTriplet triplet_;
    double dt_;
    Eigen::VectorXd drift_dt_;
    Eigen::MatrixXd gauss_factor_;
    Eigen::MatrixXd small_jump_factor_;
    Eigen::VectorXd jump_compensator_;
};

// One increment of the Levy process over dt; deterministic given the rng state.
inline Eigen::VectorXd sample_increment(const LevyTriplet& triplet, double dt, Rng& rng) {
    return LevyIncrementSampler(triplet, dt).sample(rng);
}

}  // namespace ergokde
