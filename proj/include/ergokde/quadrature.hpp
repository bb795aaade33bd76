#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <mutex>
#include <utility>
#include <vector>

#include "ergokde/errors.hpp"

namespace ergokde {

struct QuadratureRule {
    std::vector<double> nodes;    // on [-1, 1]
    std::vector<double> weights;  // sum to 2
};

// Gauss-Legendre nodes/weights by Newton iteration on the Legendre recurrence.
inline QuadratureRule gauss_legendre(std::size_t n) {
    if (n == 0) throw ValidationError("gauss_legendre: n must be >= 1");
    QuadratureRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const std::size_t m = (n + 1) / 2;
    for (std::size_t i = 0; i < m; ++i) {
        // Chebyshev-based initial guess, then Newton.
        double x = std::cos(M_PI * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p0 = 1.0, p1 = x;
            for (std::size_t k = 2; k <= n; ++k) {
                const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        rule.nodes[i] = -x;
        rule.nodes[n - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.weights[i] = w;
        rule.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
    return rule;
}

// Rules are pure functions of n; cache them since kernel verification asks for
// the same orders repeatedly.
inline const QuadratureRule& cached_gauss_legendre(std::size_t n) {
    static std::map<std::size_t, QuadratureRule> cache;
    static std::mutex mutex;
    std::lock_guard<std::mutex> lock(mutex);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, gauss_legendre(n)).first;
    return it->second;
}

template <typename F>
double integrate(const F& f, double a, double b, std::size_t n_nodes) {
    const QuadratureRule& rule = cached_gauss_legendre(n_nodes);
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i)
        sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
    return half * sum;
}

// Integral of f over [a, inf): fixed-width panels, stopping once a panel's
// contribution is negligible relative to the running total. `partial_guard`
// aborts divergent integrands; the caller decides what divergence means.
struct TailIntegral {
    double value = 0.0;
    bool diverged = false;
};

template <typename F>
TailIntegral integrate_tail(const F& f, double a, double panel_width, double partial_guard,
                            std::size_t n_nodes = 200, std::size_t max_panels = 4000) {
    TailIntegral out;
    double lo = a;
    for (std::size_t p = 0; p < max_panels; ++p) {
        const double piece = integrate(f, lo, lo + panel_width, n_nodes);
        out.value += piece;
        if (out.value > partial_guard) {
            out.diverged = true;
            return out;
        }
        lo += panel_width;
        if (p > 2 && std::abs(piece) < 1e-14 * (1.0 + std::abs(out.value))) return out;
    }
    // Panels never became negligible within the cap: treat as divergent.
    out.diverged = true;
    return out;
}

}  // namespace ergokde
