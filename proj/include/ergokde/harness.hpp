#pragma once

// Monte Carlo experiments: sup-norm/pointwise risk over horizons, log-log rate
// fits, and variance scaling of localized occupation functionals. Every
// experiment is a pure function of (options, master seed); replications run in
// parallel with a deterministic seed schedule and are sorted before summary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ergokde/errors.hpp"
#include "ergokde/estimator.hpp"
#include "ergokde/formulas.hpp"
#include "ergokde/models.hpp"
#include "ergokde/parallel.hpp"
#include "ergokde/selector.hpp"

namespace ergokde {

// Max over grid points of |estimate - reference|.
inline double sup_norm_error(const DensityEstimate& est,
                             const std::function<double(const Eigen::VectorXd&)>& reference) {
    double sup = 0.0;
    for (std::size_t i = 0; i < est.values.size(); ++i) {
        const double r = reference(est.grid.point(i));
        if (!std::isfinite(r))
            throw ValidationError("sup_norm_error: reference not finite on the grid");
        sup = std::max(sup, std::abs(est.values[i] - r));
    }
    return sup;
}

struct RateFit {
    std::vector<double> log_t;
    std::vector<double> log_err;
    double slope = 0.0;
    double intercept = 0.0;
    double residual_rms = 0.0;
};

inline RateFit fit_log_rate(const std::vector<double>& t_values,
                            const std::vector<double>& errors) {
    if (t_values.size() != errors.size() || t_values.size() < 3)
        throw ValidationError("fit_log_rate: need >= 3 (T, error) pairs");
    RateFit fit;
    for (std::size_t i = 0; i < t_values.size(); ++i) {
        if (!(t_values[i] > 0.0) || !(errors[i] > 0.0))
            throw ValidationError("fit_log_rate: T and errors must be > 0");
        fit.log_t.push_back(std::log(t_values[i]));
        fit.log_err.push_back(std::log(errors[i]));
    }
    const std::size_t n = fit.log_t.size();
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += fit.log_t[i];
        sy += fit.log_err[i];
        sxx += fit.log_t[i] * fit.log_t[i];
        sxy += fit.log_t[i] * fit.log_err[i];
    }
    const double denom = n * sxx - sx * sx;
    fit.slope = (n * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / n;
    if (!std::isfinite(fit.slope)) throw NumericError("fit_log_rate: non-finite slope");
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = fit.log_err[i] - (fit.intercept + fit.slope * fit.log_t[i]);
        ss += r * r;
    }
    fit.residual_rms = std::sqrt(ss / n);
    return fit;
}

// Riemann average of g along the path (left endpoints).
inline double ergodic_average(const SamplePath& path,
                              const std::function<double(const Eigen::VectorXd&)>& g) {
    path.validate();
    double acc = 0.0;
    for (std::size_t i = 0; i < path.n_steps; ++i) acc += g(path.state(i));
    return acc / static_cast<double>(path.n_steps);
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) throw ValidationError("median of empty set");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double quantile_of(std::vector<double> v, double q) {
    if (v.empty()) throw ValidationError("quantile of empty set");
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const std::size_t i = static_cast<std::size_t>(pos);
    if (i + 1 >= v.size()) return v.back();
    const double frac = pos - static_cast<double>(i);
    return v[i] * (1.0 - frac) + v[i + 1] * frac;
}

// Bootstrap confidence band for the median (percentile method).
struct BootstrapBand {
    double lo = 0.0;
    double hi = 0.0;
};

inline BootstrapBand bootstrap_median_band(const std::vector<double>& sample,
                                           std::uint64_t seed, std::size_t resamples = 500) {
    Rng rng(seed);
    std::vector<double> medians(resamples);
    std::vector<double> draw(sample.size());
    for (std::size_t b = 0; b < resamples; ++b) {
        for (std::size_t i = 0; i < sample.size(); ++i)
            draw[i] = sample[static_cast<std::size_t>(rng.uniform() * sample.size())];
        medians[b] = median_of(draw);
    }
    return {quantile_of(medians, 0.025), quantile_of(medians, 0.975)};
}

enum class BandwidthRule { fixed, theoretical, adaptive };

struct RiskRow {
    double horizon = 0.0;
    std::uint64_t seed = 0;
    double h = 0.0;
    double sup_error = 0.0;
    double pt_sq_error = 0.0;
};

struct RiskSummary {
    double horizon = 0.0;
    double median_sup = 0.0;
    double q25_sup = 0.0;
    double q75_sup = 0.0;
    BootstrapBand median_band;
    double median_pt_sq = 0.0;
};

struct RiskReport {
    std::vector<RiskRow> rows;  // sorted by (T, seed)
    std::vector<RiskSummary> summaries;
    RateFit sup_rate;    // log median sup error vs log T (when >= 3 horizons)
    RateFit pt_rate;     // log median pointwise squared error vs log T
    bool has_rate_fits = false;
};

struct RiskExperimentOptions {
    std::variant<OUModel, JumpSDEModel> model;
    int kernel_order = 1;
    std::vector<double> horizons;
    BandwidthRule rule = BandwidthRule::theoretical;
    double fixed_h = 0.25;
    double c_h = 1.0;
    double beta = 3.0;  // smoothness plugged into the d >= 3 bandwidth formula
    double eta = 2.0;
    int k = 1;
    int grid_levels = 0;  // 0: asymptotic floor; > 0: explicit desk-scale depth
    std::size_t reps = 1;
    std::uint64_t master_seed = 1;
    EvaluationGrid grid;
    double dt = 0.0;       // 0: per-horizon dt = h/10
    double burn_in = -1.0; // < 0: default min(T/10, 50) for non-stationary starts
    Eigen::VectorXd x0;    // empty: origin
    Eigen::VectorXd pointwise_at;  // empty: box center
    // Reference: analytic for Brownian-driven OU; otherwise a pilot estimate or
    // an explicit override must be provided.
    bool use_pilot_reference = false;
    double pilot_horizon_factor = 50.0;
    std::function<double(const Eigen::VectorXd&)> reference_override;
    unsigned n_threads = 1;
};

// Shared simulation entry: stationary start for Brownian-driven OU models when
// no x0 is given, zero start plus default burn-in otherwise.
inline SamplePath simulate_model(const std::variant<OUModel, JumpSDEModel>& model, double T,
                                 double dt, const Eigen::VectorXd& x0_opt, double burn_in_opt,
                                 Rng& rng, std::uint64_t seed_label) {
    if (const auto* ou = std::get_if<OUModel>(&model)) {
        Eigen::VectorXd x0 = x0_opt;
        double burn = burn_in_opt;
        if (!x0.size()) {
            if (ou->is_brownian_driven()) {
                x0 = stationary_gaussian_start(*ou, rng);
                if (burn < 0.0) burn = 0.0;
            } else {
                x0 = Eigen::VectorXd::Zero(ou->dim());
            }
        }
        if (burn < 0.0) burn = std::min(T / 10.0, 50.0);
        return simulate_ou(*ou, T, dt, x0, burn, rng, seed_label);
    }
    const auto& sde = std::get<JumpSDEModel>(model);
    const Eigen::VectorXd x0 =
        x0_opt.size() ? x0_opt : Eigen::VectorXd::Zero(sde.dim).eval();
    const double burn = burn_in_opt >= 0.0 ? burn_in_opt : std::min(T / 10.0, 50.0);
    return simulate_jump_sde(sde, T, dt, x0, burn, rng, seed_label);
}

namespace detail {

inline std::function<double(const Eigen::VectorXd&)> gaussian_density(
    const Eigen::MatrixXd& cov) {
    const Eigen::MatrixXd precision = cov.inverse();
    const double norm_const =
        std::pow(2.0 * M_PI, -0.5 * static_cast<double>(cov.rows())) /
        std::sqrt(cov.determinant());
    return [precision, norm_const](const Eigen::VectorXd& x) {
        return norm_const * std::exp(-0.5 * x.dot(precision * x));
    };
}

// Reference lookup backed by a grid estimate; valid on that grid's points.
inline std::function<double(const Eigen::VectorXd&)> grid_reference(DensityEstimate pilot) {
    return [pilot = std::move(pilot)](const Eigen::VectorXd& x) {
        const EvaluationGrid& g = pilot.grid;
        std::size_t flat = 0;
        for (int a = 0; a < g.dim(); ++a) {
            const double t = (x[a] - g.lower[a]) / g.spacing(a);
            const long idx = std::lround(t);
            if (idx < 0 || idx >= g.points_per_axis || std::abs(t - idx) > 1e-6)
                throw ValidationError("pilot reference queried off its lattice");
            flat = flat * g.points_per_axis + static_cast<std::size_t>(idx);
        }
        return pilot.values[flat];
    };
}

}  // namespace detail

inline double bandwidth_for(const RiskExperimentOptions& opt, double T, int d) {
    switch (opt.rule) {
        case BandwidthRule::fixed:
            return opt.fixed_h;
        case BandwidthRule::theoretical:
            return theoretical_bandwidth(d, opt.beta, T, opt.c_h).value;
        case BandwidthRule::adaptive:
            return 0.0;  // per-replication, data-driven
    }
    throw ValidationError("bandwidth_for: unknown rule");
}

// Pilot reference for models without a closed-form invariant density: one long
// trajectory estimated at half the smallest experiment bandwidth.
inline DensityEstimate pilot_reference_estimate(const RiskExperimentOptions& opt) {
    const auto* jump_model = std::get_if<JumpSDEModel>(&opt.model);
    const auto* ou_model = std::get_if<OUModel>(&opt.model);
    const int d = jump_model ? jump_model->dim : ou_model->dim();
    double t_max = 0.0, h_min = 1.0;
    for (double T : opt.horizons) {
        t_max = std::max(t_max, T);
        if (opt.rule != BandwidthRule::adaptive)
            h_min = std::min(h_min, bandwidth_for(opt, T, d));
        else
            h_min = std::min(h_min, explicit_grid(T, d, opt.eta, opt.k,
                                                  std::max(1, opt.grid_levels))
                                        .h_min());
    }
    const double pilot_h = 0.5 * h_min;
    const double pilot_t = opt.pilot_horizon_factor * t_max;
    const double pilot_dt = std::min(opt.dt > 0.0 ? opt.dt : pilot_h / 10.0, pilot_h / 10.0);
    Rng rng(opt.master_seed ^ 0x9e3779b97f4a7c15ULL);
    const SamplePath path =
        simulate_model(opt.model, pilot_t, pilot_dt, opt.x0, opt.burn_in, rng, 0);
    const Kernel kernel = build_order_kernel(d, opt.kernel_order);
    return estimate_density(path, kernel, pilot_h, opt.grid, opt.n_threads);
}

inline RiskReport run_risk_experiment(const RiskExperimentOptions& opt) {
    if (opt.reps < 1) throw ValidationError("run_risk_experiment: reps must be >= 1");
    if (opt.horizons.empty()) throw ValidationError("run_risk_experiment: empty T list");
    opt.grid.validate();
    const auto* jump_model = std::get_if<JumpSDEModel>(&opt.model);
    const auto* ou_model = std::get_if<OUModel>(&opt.model);
    const int d = jump_model ? jump_model->dim : ou_model->dim();
    if (opt.grid.dim() != d) throw ValidationError("run_risk_experiment: grid dim mismatch");

    // Resolve the reference density.
    std::function<double(const Eigen::VectorXd&)> reference = opt.reference_override;
    if (!reference) {
        if (ou_model && ou_model->is_brownian_driven()) {
            reference = detail::gaussian_density(stationary_gaussian_cov(
                ou_model->mean_reversion, ou_model->noise.gaussian_cov));
        } else if (opt.use_pilot_reference) {
            reference = detail::grid_reference(pilot_reference_estimate(opt));
        } else {
            throw ConfigError("experiment.reference",
                              "no analytic reference for this model; request a pilot");
        }
    }

    Eigen::VectorXd pt = opt.pointwise_at;
    if (!pt.size()) pt = 0.5 * (opt.grid.lower + opt.grid.upper);
    // Flat index of the grid point nearest to pt, for the pointwise error.
    std::size_t pt_flat = 0;
    for (int a = 0; a < d; ++a) {
        const long idx = std::lround((pt[a] - opt.grid.lower[a]) / opt.grid.spacing(a));
        pt_flat = pt_flat * opt.grid.points_per_axis +
                  static_cast<std::size_t>(std::clamp<long>(idx, 0, opt.grid.points_per_axis - 1));
    }
    const double ref_at_pt = reference(opt.grid.point(pt_flat));

    const Kernel kernel = build_order_kernel(d, opt.kernel_order);
    const std::size_t total = opt.horizons.size() * opt.reps;
    std::vector<RiskRow> rows(total);

    parallel_for_index(total, [&](std::size_t task) {
        const std::size_t t_idx = task / opt.reps;
        const std::size_t rep = task % opt.reps;
        const double T = opt.horizons[t_idx];
        const std::uint64_t seed = opt.master_seed + task;
        Rng rng = Rng::child(opt.master_seed, task);

        double h = bandwidth_for(opt, T, d);
        const double dt = opt.dt > 0.0
                              ? opt.dt
                              : (opt.rule == BandwidthRule::adaptive
                                     ? explicit_grid(T, d, opt.eta, opt.k,
                                                     std::max(1, opt.grid_levels))
                                               .h_min() /
                                           10.0
                                     : h / 10.0);

        SamplePath path = simulate_model(opt.model, T, dt, opt.x0, opt.burn_in, rng, seed);

        DensityEstimate est;
        if (opt.rule == BandwidthRule::adaptive) {
            const BandwidthGrid bw_grid =
                opt.grid_levels > 0 ? explicit_grid(T, d, opt.eta, opt.k, opt.grid_levels)
                                    : build_grid(T, d, opt.eta, opt.k);
            SelectionResult sel = select_bandwidth_full(path, kernel, bw_grid, opt.grid);
            h = sel.trace.selected_h;
            est = std::move(sel.selected);
        } else {
            est = estimate_density(path, kernel, h, opt.grid);
        }

        RiskRow row;
        row.horizon = T;
        row.seed = seed;
        row.h = h;
        row.sup_error = sup_norm_error(est, reference);
        const double diff = est.values[pt_flat] - ref_at_pt;
        row.pt_sq_error = diff * diff;
        rows[task] = row;
    }, opt.n_threads);

    std::sort(rows.begin(), rows.end(), [](const RiskRow& a, const RiskRow& b) {
        return a.horizon != b.horizon ? a.horizon < b.horizon : a.seed < b.seed;
    });

    RiskReport report;
    report.rows = std::move(rows);
    std::vector<double> med_sup, med_pt, horizons_sorted = opt.horizons;
    std::sort(horizons_sorted.begin(), horizons_sorted.end());
    for (double T : horizons_sorted) {
        std::vector<double> sups, pts;
        for (const RiskRow& r : report.rows)
            if (r.horizon == T) {
                sups.push_back(r.sup_error);
                pts.push_back(r.pt_sq_error);
            }
        RiskSummary s;
        s.horizon = T;
        s.median_sup = median_of(sups);
        s.q25_sup = quantile_of(sups, 0.25);
        s.q75_sup = quantile_of(sups, 0.75);
        s.median_band = bootstrap_median_band(sups, opt.master_seed ^ 0x5bf03635ULL);
        s.median_pt_sq = median_of(pts);
        report.summaries.push_back(s);
        med_sup.push_back(s.median_sup);
        med_pt.push_back(s.median_pt_sq);
    }
    if (horizons_sorted.size() >= 3) {
        bool positive = true;
        for (std::size_t i = 0; i < med_sup.size(); ++i)
            positive = positive && med_sup[i] > 0.0 && med_pt[i] > 0.0;
        if (positive) {
            report.sup_rate = fit_log_rate(horizons_sorted, med_sup);
            report.pt_rate = fit_log_rate(horizons_sorted, med_pt);
            report.has_rate_fits = true;
        }
    }
    return report;
}

struct VarianceScalingReport {
    std::vector<double> lambdas;
    std::vector<double> var_over_t;  // empirical Var(int_0^T f dt) / T per lambda
    std::optional<double> slope;     // log-log fit when all variances positive
    double theoretical_exponent = 0.0;
    double residual_rms = 0.0;
};

// Theoretical exponent of Var/T in lambda: from the volume-localized variance
// bound, lambda^2 psi_d^2(lambda) gives 1 + 2/d for d >= 3 and 2-with-log for
// d = 2; for d = 1 the mu(S) factor contributes the second power of lambda.
inline double variance_scaling_exponent(int d) {
    if (d >= 3) return 1.0 + 2.0 / static_cast<double>(d);
    return 2.0;
}

struct VarianceExperimentOptions {
    std::variant<OUModel, JumpSDEModel> model;
    Eigen::VectorXd center;
    std::vector<double> lambdas;
    double horizon = 200.0;
    double dt = 1e-3;
    std::size_t reps = 200;
    std::uint64_t master_seed = 1;
    bool require_slope = true;
    unsigned n_threads = 1;
};

inline VarianceScalingReport variance_scaling_experiment(const VarianceExperimentOptions& opt) {
    if (opt.reps < 50) throw ValidationError("variance_scaling_experiment: reps must be >= 50");
    if (opt.lambdas.size() < 2)
        throw ValidationError("variance_scaling_experiment: need >= 2 lambda values");
    double lo = opt.lambdas[0], hi = opt.lambdas[0];
    for (double l : opt.lambdas) {
        if (!(l > 0.0 && l < 1.0))
            throw ValidationError("variance_scaling_experiment: lambda must lie in (0, 1)");
        lo = std::min(lo, l);
        hi = std::max(hi, l);
    }
    if (hi / lo < std::pow(10.0, 1.5))
        throw ValidationError("variance_scaling_experiment: lambdas must span >= 1.5 decades");
    const auto* ou = std::get_if<OUModel>(&opt.model);
    const int d = ou ? ou->dim() : std::get<JumpSDEModel>(opt.model).dim;
    if (opt.center.size() != d)
        throw ValidationError("variance_scaling_experiment: center dimension mismatch");

    const std::size_t n_lambda = opt.lambdas.size();
    std::vector<double> half_side(n_lambda);
    for (std::size_t i = 0; i < n_lambda; ++i)
        half_side[i] = 0.5 * std::pow(opt.lambdas[i], 1.0 / d);

    // integrals[rep * n_lambda + i] = int_0^T 1{X_t in cube_i} dt
    std::vector<double> integrals(opt.reps * n_lambda, 0.0);
    parallel_for_index(opt.reps, [&](std::size_t rep) {
        Rng rng = Rng::child(opt.master_seed, rep);
        const SamplePath path = simulate_model(opt.model, opt.horizon, opt.dt, {}, -1.0, rng,
                                               opt.master_seed + rep);
        double* out = integrals.data() + rep * n_lambda;
        for (std::size_t s = 0; s < path.n_steps; ++s) {
            const double* x = path.state_ptr(s);
            double dist = 0.0;
            for (int a = 0; a < d; ++a)
                dist = std::max(dist, std::abs(x[a] - opt.center[a]));
            for (std::size_t i = 0; i < n_lambda; ++i)
                if (dist <= half_side[i]) out[i] += opt.dt;
        }
    }, opt.n_threads);

    VarianceScalingReport report;
    report.lambdas = opt.lambdas;
    report.theoretical_exponent = variance_scaling_exponent(d);
    bool all_positive = true;
    for (std::size_t i = 0; i < n_lambda; ++i) {
        double mean = 0.0;
        for (std::size_t rep = 0; rep < opt.reps; ++rep)
            mean += integrals[rep * n_lambda + i];
        mean /= static_cast<double>(opt.reps);
        double ss = 0.0;
        for (std::size_t rep = 0; rep < opt.reps; ++rep) {
            const double dv = integrals[rep * n_lambda + i] - mean;
            ss += dv * dv;
        }
        const double var = ss / static_cast<double>(opt.reps - 1);
        report.var_over_t.push_back(var / opt.horizon);
        all_positive = all_positive && var > 0.0;
    }
    if (all_positive) {
        const RateFit fit = fit_log_rate(report.lambdas, report.var_over_t);
        report.slope = fit.slope;
        report.residual_rms = fit.residual_rms;
    } else if (opt.require_slope) {
        throw DegenerateDataError(
            "variance_scaling_experiment: zero occupation variance; move the center into "
            "the bulk or enlarge lambda");
    }
    return report;
}

}  // namespace ergokde
