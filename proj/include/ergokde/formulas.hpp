#pragma once

// Closed-form rate and variance-proxy functions used by the estimator and the
// bandwidth selection rule. All are pure and total on their stated domains.

#include <cmath>
#include <string>

#include "ergokde/errors.hpp"

namespace ergokde {

// Dimension factor governing how the variance of localized additive
// functionals scales with support volume. Domain (0, e).
inline double psi_d(double x, int d) {
    if (!(x > 0.0 && x < M_E)) throw ValidationError("psi_d: x must lie in (0, e)");
    if (d < 1) throw ValidationError("psi_d: d must be >= 1");
    if (d == 1) return 1.0;
    if (d == 2) return std::sqrt(1.0 + std::log(1.0 / x));
    return std::pow(x, 1.0 / d - 0.5);
}

// k-th iterated logarithm, log_(0) T = T. Every stage must stay positive.
inline double iterated_log(double t, int k) {
    if (k < 0) throw ValidationError("iterated_log: k must be >= 0");
    double v = t;
    if (!(v > 0.0)) throw ValidationError("iterated_log: T must be > 0");
    for (int i = 0; i < k; ++i) {
        v = std::log(v);
        if (!(v > 0.0))
            throw ValidationError("iterated_log: log_(" + std::to_string(i + 1) +
                                  ") T is not positive");
    }
    return v;
}

// Variance proxy sigma(h, T) of the selection rule. Exactly 0 at h = 1, where
// the rule's comparison is vacuous anyway.
inline double sigma_proxy(double h, double T, int d, int k) {
    if (!(h > 0.0 && h <= 1.0)) throw ValidationError("sigma_proxy: h must lie in (0, 1]");
    if (d < 1) throw ValidationError("sigma_proxy: d must be >= 1");
    const double log_k = iterated_log(T, k);  // throws when undefined
    const double log_t = std::log(T);
    if (!(log_t > 0.0)) throw ValidationError("sigma_proxy: log T must be > 0");
    const double log_inv_h = std::log(1.0 / h);
    if (log_inv_h == 0.0) return 0.0;
    const double hd = std::pow(h, d);
    return log_k * log_t * log_t / (T * hd) * log_inv_h +
           psi_d(hd, d) * std::sqrt(log_k * log_inv_h / T);
}

// Deviation-inequality scale Upsilon_{h,T}(u), u >= 1.
inline double upsilon(double h, double T, double u, int d) {
    if (!(u >= 1.0)) throw ValidationError("upsilon: u must be >= 1");
    if (!(h > 0.0 && h <= 1.0)) throw ValidationError("upsilon: h must lie in (0, 1]");
    const double log_t = std::log(T);
    if (!(log_t > 0.0)) throw ValidationError("upsilon: log T must be > 0");
    const double hd = std::pow(h, d);
    const double root_arg = std::max(u, std::log(1.0 / h));
    return u * log_t * log_t / (T * hd) + psi_d(hd, d) * std::sqrt(root_arg) / std::sqrt(T);
}

struct BandwidthChoice {
    double value = 0.0;   // after clipping to (0, 1]
    double raw = 0.0;     // formula value before clipping
    bool clipped = false;
};

// Rate-optimal bandwidth; smoothness-free for d <= 2, beta-dependent for d >= 3.
// Asymptotic formulas exceed 1 at small T, so the result is clipped to the
// estimator's admissible range with a flag.
inline BandwidthChoice theoretical_bandwidth(int d, double beta, double T, double c_h) {
    if (d < 1) throw ValidationError("theoretical_bandwidth: d must be >= 1");
    if (!(beta > 0.0)) throw ValidationError("theoretical_bandwidth: beta must be > 0");
    if (!(T > M_E)) throw ValidationError("theoretical_bandwidth: T must be > e");
    if (!(c_h > 0.0)) throw ValidationError("theoretical_bandwidth: c_h must be > 0");
    const double log_t = std::log(T);
    double h = 0.0;
    if (d == 1) {
        h = c_h * log_t * log_t / std::sqrt(T);
    } else if (d == 2) {
        h = c_h * log_t / std::pow(T, 0.25);
    } else {
        h = c_h * std::pow(log_t / T, 1.0 / (2.0 * beta + d - 2.0));
    }
    BandwidthChoice out;
    out.raw = h;
    out.clipped = h >= 1.0;
    out.value = out.clipped ? 1.0 : h;
    return out;
}

// Pointwise L2 rate Phi_{d,beta}(T).
inline double rate_phi(int d, double beta, double T) {
    if (d < 1) throw ValidationError("rate_phi: d must be >= 1");
    if (!(beta > 0.0)) throw ValidationError("rate_phi: beta must be > 0");
    if (!(T > M_E)) throw ValidationError("rate_phi: T must be > e");
    if (d == 1) return 1.0 / std::sqrt(T);
    if (d == 2) return std::sqrt(std::log(T) / T);
    return std::pow(T, -beta / (2.0 * beta + d - 2.0));
}

// Sup-norm rate Psi_{d,beta}(T).
inline double rate_psi(int d, double beta, double T) {
    if (d < 1) throw ValidationError("rate_psi: d must be >= 1");
    if (!(beta > 0.0)) throw ValidationError("rate_psi: beta must be > 0");
    if (!(T > M_E)) throw ValidationError("rate_psi: T must be > e");
    if (d == 1) return std::sqrt(std::log(T) / T);
    if (d == 2) return std::log(T) / std::sqrt(T);
    return std::pow(std::log(T) / T, beta / (2.0 * beta + d - 2.0));
}

}  // namespace ergokde
