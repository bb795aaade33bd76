#pragma once

// Data-driven bandwidth selection: geometric candidate grid with an iterated-
// log floor, and the comparison rule that keeps the largest bandwidth whose
// estimate stays within sqrt(max_est) * sigma(g, T) of every finer one.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ergokde/errors.hpp"
#include "ergokde/estimator.hpp"
#include "ergokde/formulas.hpp"

namespace ergokde {

// Horizon too short for the candidate-grid floor; the CLI maps this to its own
// exit code so callers can advise a larger T.
struct EmptyGridError : ValidationError {
    using ValidationError::ValidationError;
};

struct BandwidthGrid {
    double eta = 2.0;
    int k = 1;
    int d = 1;
    double horizon = 0.0;      // T
    double threshold = 0.0;    // (log_(k)T (log T)^5 / T)^{1/(d+2)}
    bool floor_enforced = true;
    std::vector<double> bandwidths;  // eta^{-l}, strictly decreasing

    double h_min() const { return bandwidths.back(); }

    void validate() const {
        if (bandwidths.empty()) throw ValidationError("BandwidthGrid: empty");
        for (std::size_t i = 0; i + 1 < bandwidths.size(); ++i) {
            const double ratio = bandwidths[i] / bandwidths[i + 1];
            if (std::abs(ratio - eta) > 1e-9 * eta)
                throw ValidationError("BandwidthGrid: elements must decrease by factor eta");
        }
        if (floor_enforced)
            for (double h : bandwidths)
                if (!(h > threshold))
                    throw ValidationError("BandwidthGrid: element at or below threshold");
    }
};

inline double bandwidth_grid_threshold(double T, int d, int k) {
    const double log_k = iterated_log(T, k);
    const double log_t = std::log(T);
    if (!(log_t > 0.0)) throw ValidationError("build_grid: log T must be > 0");
    return std::pow(log_k * std::pow(log_t, 5) / T, 1.0 / (d + 2.0));
}

// Candidate set {eta^{-l} : eta^{-l} > threshold}. Empty grids are an error:
// the horizon is too short for the floor.
inline BandwidthGrid build_grid(double T, int d, double eta, int k) {
    if (!(eta > 1.0)) throw ValidationError("build_grid: eta must be > 1");
    if (d < 1) throw ValidationError("build_grid: d must be >= 1");
    BandwidthGrid grid;
    grid.eta = eta;
    grid.k = k;
    grid.d = d;
    grid.horizon = T;
    grid.threshold = bandwidth_grid_threshold(T, d, k);
    if (grid.threshold >= 1.0)
        throw EmptyGridError(
            "build_grid: empty bandwidth grid (threshold " + std::to_string(grid.threshold) +
            " >= 1); a larger T is required for this d and k");
    double h = 1.0;
    while (h > grid.threshold) {
        grid.bandwidths.push_back(h);
        h /= eta;
    }
    return grid;
}

// Fixed-depth grid {eta^{-l} : l < levels} that ignores the asymptotic floor.
// Desk-scale horizons leave the floor above 1, so experiments opt into an
// explicit depth; the formula threshold is still recorded for reference.
inline BandwidthGrid explicit_grid(double T, int d, double eta, int k, int levels) {
    if (!(eta > 1.0)) throw ValidationError("explicit_grid: eta must be > 1");
    if (levels < 1) throw ValidationError("explicit_grid: levels must be >= 1");
    BandwidthGrid grid;
    grid.eta = eta;
    grid.k = k;
    grid.d = d;
    grid.horizon = T;
    grid.threshold = bandwidth_grid_threshold(T, d, k);
    grid.floor_enforced = false;
    double h = 1.0;
    for (int l = 0; l < levels; ++l) {
        grid.bandwidths.push_back(h);
        h /= eta;
    }
    return grid;
}

struct PairwiseStat {
    double h = 0.0;
    double g = 0.0;          // the smaller bandwidth; sigma uses this one
    double diff_sup = 0.0;   // ||rho_h - rho_g||_inf over the shared grid
    double threshold = 0.0;  // sqrt(max_est) * sigma(g, T)
    bool pass = false;
};

struct SelectionTrace {
    double selected_h = 0.0;
    double max_est = 0.0;  // sup of the h_min estimate over the grid, clamped at 0
    bool max_est_clamped = false;
    std::vector<PairwiseStat> pairs;
    std::vector<std::pair<double, bool>> decisions;  // per h, largest first
};

struct SelectionResult {
    SelectionTrace trace;
    DensityEstimate selected;
    std::vector<DensityEstimate> estimates;  // one per grid bandwidth, largest first
};

inline SelectionResult select_bandwidth_full(const SamplePath& path, const Kernel& kernel,
                                             const BandwidthGrid& grid,
                                             const EvaluationGrid& eval_grid,
                                             unsigned n_threads = 1) {
    grid.validate();
    if (path.dt > grid.h_min() / 10.0)
        throw ValidationError("select_bandwidth: dt must be <= h_min / 10");

    const std::size_t m = grid.bandwidths.size();
    std::vector<DensityEstimate> estimates(m);
    parallel_for_index(
        m, [&](std::size_t i) {
            estimates[i] = estimate_density(path, kernel, grid.bandwidths[i], eval_grid);
        },
        n_threads);

    SelectionTrace trace;
    trace.max_est = estimates.back().max_value();
    if (trace.max_est < 0.0) {  // possible with high-order kernels
        trace.max_est = 0.0;
        trace.max_est_clamped = true;
    }
    const double root_max = std::sqrt(trace.max_est);

    auto sup_diff = [&](const DensityEstimate& a, const DensityEstimate& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.values.size(); ++i)
            s = std::max(s, std::abs(a.values[i] - b.values[i]));
        return s;
    };

    std::size_t selected = m - 1;  // h_min always qualifies
    bool decided = false;
    for (std::size_t i = 0; i < m; ++i) {
        bool ok = true;
        for (std::size_t j = i; j < m; ++j) {
            PairwiseStat stat;
            stat.h = grid.bandwidths[i];
            stat.g = grid.bandwidths[j];
            stat.diff_sup = sup_diff(estimates[i], estimates[j]);
            stat.threshold = root_max * sigma_proxy(stat.g, grid.horizon, grid.d, grid.k);
            stat.pass = stat.diff_sup <= stat.threshold;
            ok = ok && stat.pass;
            trace.pairs.push_back(stat);
        }
        trace.decisions.emplace_back(grid.bandwidths[i], ok);
        if (ok && !decided) {
            selected = i;
            decided = true;
        }
    }
    trace.selected_h = grid.bandwidths[selected];

    SelectionResult result;
    result.trace = std::move(trace);
    result.selected = estimates[selected];
    result.estimates = std::move(estimates);
    return result;
}

inline SelectionTrace select_bandwidth(const SamplePath& path, const Kernel& kernel,
                                       const BandwidthGrid& grid,
                                       const EvaluationGrid& eval_grid,
                                       unsigned n_threads = 1) {
    return select_bandwidth_full(path, kernel, grid, eval_grid, n_threads).trace;
}

}  // namespace ergokde
