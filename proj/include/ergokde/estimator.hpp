#pragma once

// Kernel invariant-density estimator on a lattice: left-endpoint Riemann
// approximation of (1/T) int_0^T K_h(x - X_s) ds. Compact kernel support means
// each path point touches only lattice points within h/2 per axis, so the cost
// is O(n (h/spacing + 1)^d) instead of O(n |grid|).

#include <cmath>
#include <cstddef>
#include <limits>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "ergokde/errors.hpp"
#include "ergokde/kernels.hpp"
#include "ergokde/models.hpp"
#include "ergokde/parallel.hpp"

namespace ergokde {

// Axis-aligned lattice over a box. Flat indexing is lexicographic with axis 0
// slowest.
struct EvaluationGrid {
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    int points_per_axis = 2;

    int dim() const { return static_cast<int>(lower.size()); }

    std::size_t size() const {
        std::size_t s = 1;
        for (int i = 0; i < dim(); ++i) s *= static_cast<std::size_t>(points_per_axis);
        return s;
    }

    double spacing(int axis) const {
        return (upper[axis] - lower[axis]) / (points_per_axis - 1);
    }

    double coord(int axis, int idx) const { return lower[axis] + spacing(axis) * idx; }

    Eigen::VectorXd point(std::size_t flat) const {
        const int d = dim();
        Eigen::VectorXd x(d);
        for (int axis = d - 1; axis >= 0; --axis) {
            x[axis] = coord(axis, static_cast<int>(flat % points_per_axis));
            flat /= points_per_axis;
        }
        return x;
    }

    void validate() const {
        if (lower.size() < 1 || lower.size() != upper.size())
            throw ValidationError("EvaluationGrid: lower/upper must share a dimension >= 1");
        if (points_per_axis < 2)
            throw ValidationError("EvaluationGrid: points_per_axis must be >= 2");
        for (int i = 0; i < dim(); ++i)
            if (!(lower[i] < upper[i]))
                throw ValidationError("EvaluationGrid: lower must be < upper componentwise");
    }

    static EvaluationGrid box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int ppa) {
        EvaluationGrid g{lo, hi, ppa};
        g.validate();
        return g;
    }
};

struct DensityEstimate {
    EvaluationGrid grid;
    std::vector<double> values;  // one per lattice point, 1/state-units^d
    double h = 0.0;
    double horizon = 0.0;
    int kernel_order = 1;
    // Continuum-vs-lattice sup gap bound L * spacing / h^{d+1}.
    double sup_gap_bound = 0.0;
    // Set when dt > h/10; the Riemann sum is then too coarse for the bandwidth.
    bool coarse_dt_warning = false;

    double max_value() const {
        double m = -std::numeric_limits<double>::infinity();
        for (double v : values) m = std::max(m, v);
        return m;
    }
};

inline DensityEstimate estimate_density(const SamplePath& path, const Kernel& kernel,
                                        double h, const EvaluationGrid& grid,
                                        unsigned n_threads = 1) {
    if (!(h > 0.0)) throw ValidationError("estimate_density: h must be > 0");
    if (h > 1.0) throw ValidationError("estimate_density: h must be <= 1");
    grid.validate();
    path.validate();
    const int d = grid.dim();
    if (path.dim != d || kernel.dim != d)
        throw ValidationError("estimate_density: dimension mismatch");

    const std::size_t n = path.n_steps;  // left endpoints 0 .. n-1
    const int ppa = grid.points_per_axis;

    DensityEstimate est;
    est.grid = grid;
    est.h = h;
    est.horizon = path.horizon();
    est.kernel_order = kernel.order;
    est.values.assign(grid.size(), 0.0);
    est.coarse_dt_warning = path.dt > h / 10.0;
    double max_spacing = 0.0;
    for (int a = 0; a < d; ++a) max_spacing = std::max(max_spacing, grid.spacing(a));
    est.sup_gap_bound = kernel.lipschitz_L * max_spacing / std::pow(h, d + 1);

    std::vector<double> inv_spacing(d), lower(d);
    for (int a = 0; a < d; ++a) {
        inv_spacing[a] = 1.0 / grid.spacing(a);
        lower[a] = grid.lower[a];
    }
    const double half_width = 0.5 * h;
    const double inv_h = 1.0 / h;

    // Threads own disjoint slabs along axis 0; every cell is accumulated in
    // path order by exactly one thread, so results are independent of the
    // thread count, bit for bit.
    auto run_slab = [&](int slab_lo, int slab_hi) {
        std::vector<std::vector<double>> axis_vals(d);
        std::vector<int> lo(d), hi(d);
        for (int a = 0; a < d; ++a) axis_vals[a].reserve(64);
        double* out = est.values.data();
        const double* states = path.states.data();
        for (std::size_t i = 0; i < n; ++i) {
            const double* x = states + i * static_cast<std::size_t>(d);
            bool empty = false;
            for (int a = 0; a < d; ++a) {
                const int axis_min = a == 0 ? slab_lo : 0;
                const int axis_max = a == 0 ? slab_hi : ppa - 1;
                int l = static_cast<int>(std::ceil((x[a] - half_width - lower[a]) * inv_spacing[a]));
                int u = static_cast<int>(std::floor((x[a] + half_width - lower[a]) * inv_spacing[a]));
                l = std::max(l, axis_min);
                u = std::min(u, axis_max);
                if (l > u) {
                    empty = true;
                    break;
                }
                lo[a] = l;
                hi[a] = u;
                auto& vals = axis_vals[a];
                vals.clear();
                for (int t = l; t <= u; ++t)
                    vals.push_back(kernel.eval1((lower[a] + grid.spacing(a) * t - x[a]) * inv_h));
            }
            if (empty) continue;
            if (d == 1) {
                for (int t = lo[0]; t <= hi[0]; ++t) out[t] += axis_vals[0][t - lo[0]];
            } else if (d == 2) {
                for (int t0 = lo[0]; t0 <= hi[0]; ++t0) {
                    const double v0 = axis_vals[0][t0 - lo[0]];
                    if (v0 == 0.0) continue;
                    double* row = out + static_cast<std::size_t>(t0) * ppa;
                    for (int t1 = lo[1]; t1 <= hi[1]; ++t1)
                        row[t1] += v0 * axis_vals[1][t1 - lo[1]];
                }
            } else if (d == 3) {
                for (int t0 = lo[0]; t0 <= hi[0]; ++t0) {
                    const double v0 = axis_vals[0][t0 - lo[0]];
                    if (v0 == 0.0) continue;
                    for (int t1 = lo[1]; t1 <= hi[1]; ++t1) {
                        const double v01 = v0 * axis_vals[1][t1 - lo[1]];
                        if (v01 == 0.0) continue;
                        double* row =
                            out + (static_cast<std::size_t>(t0) * ppa + t1) * ppa;
                        for (int t2 = lo[2]; t2 <= hi[2]; ++t2)
                            row[t2] += v01 * axis_vals[2][t2 - lo[2]];
                    }
                }
            } else {
                // Generic odometer over the touched box.
                std::vector<int> idx(lo);
                for (;;) {
                    double v = 1.0;
                    std::size_t flat = 0;
                    for (int a = 0; a < d; ++a) {
                        v *= axis_vals[a][idx[a] - lo[a]];
                        flat = flat * ppa + static_cast<std::size_t>(idx[a]);
                    }
                    out[flat] += v;
                    int a = d - 1;
                    while (a >= 0) {
                        if (++idx[a] <= hi[a]) break;
                        idx[a] = lo[a];
                        --a;
                    }
                    if (a < 0) break;
                }
            }
        }
    };

    n_threads = std::max(1u, std::min<unsigned>(n_threads, static_cast<unsigned>(ppa)));
    if (n_threads == 1) {
        run_slab(0, ppa - 1);
    } else {
        std::vector<std::thread> pool;
        const int per = (ppa + static_cast<int>(n_threads) - 1) / static_cast<int>(n_threads);
        for (unsigned t = 0; t < n_threads; ++t) {
            const int lo_slab = static_cast<int>(t) * per;
            const int hi_slab = std::min(ppa - 1, lo_slab + per - 1);
            if (lo_slab > hi_slab) break;
            pool.emplace_back(run_slab, lo_slab, hi_slab);
        }
        for (auto& th : pool) th.join();
    }

    const double scale = 1.0 / (static_cast<double>(n) * std::pow(h, d));
    for (double& v : est.values) v *= scale;
    return est;
}

}  // namespace ergokde
