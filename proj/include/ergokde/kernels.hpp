#pragma once

// Compactly supported product kernels of prescribed order on [-1/2, 1/2]^d.
// The univariate factor is K1(u) = p(u^2) * (1 - 2|u|)+ with the even
// polynomial p solving the moment system int u^{2j} K1 = delta_{j0}. The weight
// vanishes at the support boundary, so K1 is Lipschitz on all of R.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "ergokde/errors.hpp"
#include "ergokde/quadrature.hpp"

namespace ergokde {

namespace detail {

// Real roots of a polynomial (ascending coefficients) inside [lo, hi], via the
// companion matrix.
inline std::vector<double> real_roots_in(std::vector<double> coeffs, double lo, double hi) {
    while (!coeffs.empty() && std::abs(coeffs.back()) < 1e-300) coeffs.pop_back();
    std::vector<double> roots;
    const std::size_t deg = coeffs.empty() ? 0 : coeffs.size() - 1;
    if (deg == 0) return roots;
    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
    for (std::size_t i = 0; i + 1 < deg; ++i) companion(i + 1, i) = 1.0;
    for (std::size_t i = 0; i < deg; ++i) companion(i, deg - 1) = -coeffs[i] / coeffs[deg];
    Eigen::EigenSolver<Eigen::MatrixXd> es(companion, /*computeEigenvectors=*/false);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const auto z = es.eigenvalues()[i];
        if (std::abs(z.imag()) > 1e-9 * (1.0 + std::abs(z.real()))) continue;
        const double r = z.real();
        if (r >= lo && r <= hi) roots.push_back(r);
    }
    return roots;
}

inline double eval_poly(const std::vector<double>& coeffs, double x) {
    double v = 0.0;
    for (std::size_t i = coeffs.size(); i-- > 0;) v = v * x + coeffs[i];
    return v;
}

inline std::vector<double> differentiate(const std::vector<double>& coeffs) {
    std::vector<double> out;
    for (std::size_t i = 1; i < coeffs.size(); ++i) out.push_back(coeffs[i] * static_cast<double>(i));
    return out;
}

}  // namespace detail

struct Kernel {
    int dim = 1;
    int order = 1;             // effective order (odd)
    int requested_order = 1;   // as asked; even requests round up
    Eigen::VectorXd coeffs;    // p coefficients over even powers: p(u^2) = sum_j coeffs[j] u^{2j}
    double lipschitz_L = 0.0;  // Lipschitz constant of the product kernel wrt ||.||_inf
    double sup1 = 0.0;         // sup |K1|
    double lip1 = 0.0;         // sup |K1'|

    double eval1(double u) const {
        const double a = std::abs(u);
        if (a >= 0.5) return 0.0;
        const double u2 = u * u;
        double p = 0.0;
        for (Eigen::Index j = coeffs.size(); j-- > 0;) p = p * u2 + coeffs[j];
        return p * (1.0 - 2.0 * a);
    }

    double operator()(const Eigen::VectorXd& u) const {
        double v = 1.0;
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            v *= eval1(u[i]);
            if (v == 0.0) return 0.0;
        }
        return v;
    }

    double sup_abs() const { return std::pow(sup1, dim); }
};

// Moments of the weight w(u) = (1 - 2|u|)+:
// int u^{2k} w(u) du = (1/4)^k / ((2k+1)(2k+2)).
inline double weight_even_moment(int k) {
    return std::pow(0.25, k) / ((2.0 * k + 1.0) * (2.0 * k + 2.0));
}

inline Kernel build_order_kernel(int d, int ell) {
    if (d < 1) throw ValidationError("build_order_kernel: d must be >= 1");
    if (ell < 1) throw ValidationError("build_order_kernel: ell must be >= 1");
    Kernel k;
    k.dim = d;
    k.requested_order = ell;
    k.order = (ell % 2 == 1) ? ell : ell + 1;  // symmetric kernels: orders coincide
    const int m = (k.order - 1) / 2;

    // Hankel moment system: sum_j c_j int u^{2(i+j)} w = delta_{i0}.
    Eigen::MatrixXd a(m + 1, m + 1);
    for (int i = 0; i <= m; ++i)
        for (int j = 0; j <= m; ++j) a(i, j) = weight_even_moment(i + j);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 1);
    rhs[0] = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible())
        throw NumericError("build_order_kernel: singular moment system");
    k.coeffs = lu.solve(rhs);

    // K1 on [0, 1/2] as a plain polynomial q(u) = p(u^2)(1 - 2u).
    std::vector<double> q(2 * m + 2, 0.0);
    for (int j = 0; j <= m; ++j) {
        q[2 * j] += k.coeffs[j];
        q[2 * j + 1] -= 2.0 * k.coeffs[j];
    }
    const std::vector<double> dq = detail::differentiate(q);
    const std::vector<double> ddq = detail::differentiate(dq);

    auto sup_abs_on_support = [&](const std::vector<double>& poly,
                                  const std::vector<double>& dpoly) {
        double best = std::max(std::abs(detail::eval_poly(poly, 0.0)),
                               std::abs(detail::eval_poly(poly, 0.5)));
        for (double r : detail::real_roots_in(dpoly, 0.0, 0.5))
            best = std::max(best, std::abs(detail::eval_poly(poly, r)));
        return best;
    };
    k.sup1 = sup_abs_on_support(q, dq);
    k.lip1 = sup_abs_on_support(dq, ddq);
    // Product rule wrt the sup-norm: per-axis slope lip1, the remaining d-1
    // factors bounded by sup1.
    k.lipschitz_L = d * std::pow(k.sup1, d - 1) * k.lip1;
    return k;
}

inline double eval_kernel(const Kernel& k, const Eigen::VectorXd& u) {
    if (u.size() != k.dim) throw ValidationError("eval_kernel: dimension mismatch");
    return k(u);
}

struct MomentEntry {
    std::vector<int> alpha;  // multi-index
    double value = 0.0;
    double target = 0.0;
};

struct MomentReport {
    bool pass = false;
    double worst_deviation = 0.0;
    MomentEntry worst;
    std::vector<MomentEntry> entries;
};

// Tensor Gauss-Legendre verification of int K = 1 and int u^alpha K = 0 for
// 1 <= |alpha| <= ell. Accepts any evaluable kernel so declared orders can be
// checked against arbitrary candidates; supports d <= 3.
template <typename KernelFn>
MomentReport verify_moments_fn(const KernelFn& kernel, int d, int ell, double tol,
                               std::size_t nodes_per_axis = 200) {
    if (!(tol > 0.0)) throw ValidationError("verify_moments: tol must be > 0");
    if (d < 1 || d > 3) throw ValidationError("verify_moments: d must be in {1,2,3}");
    if (ell < 0) throw ValidationError("verify_moments: ell must be >= 0");
    const QuadratureRule& rule = cached_gauss_legendre(nodes_per_axis);
    const std::size_t n = rule.nodes.size();
    std::vector<double> x(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = 0.5 * rule.nodes[i];  // [-1,1] -> [-1/2, 1/2]
        w[i] = 0.5 * rule.weights[i];
    }
    const int p = ell + 1;  // powers 0..ell per axis
    std::vector<double> pw(n * p);
    for (std::size_t i = 0; i < n; ++i) {
        pw[i * p] = 1.0;
        for (int a = 1; a < p; ++a) pw[i * p + a] = pw[i * p + a - 1] * x[i];
    }

    // moments[a + p*b + p*p*c] accumulates int u1^a u2^b u3^c K.
    std::vector<double> moments(static_cast<std::size_t>(p) * (d >= 2 ? p : 1) *
                                    (d >= 3 ? p : 1),
                                0.0);
    Eigen::VectorXd u(d);
    if (d == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            u[0] = x[i];
            const double kv = w[i] * kernel(u);
            for (int a = 0; a < p; ++a) moments[a] += kv * pw[i * p + a];
        }
    } else if (d == 2) {
        std::vector<double> s(p);
        for (std::size_t i = 0; i < n; ++i) {
            u[0] = x[i];
            std::fill(s.begin(), s.end(), 0.0);
            for (std::size_t j = 0; j < n; ++j) {
                u[1] = x[j];
                const double kv = w[j] * kernel(u);
                for (int b = 0; b < p; ++b) s[b] += kv * pw[j * p + b];
            }
            for (int a = 0; a < p; ++a) {
                const double fa = w[i] * pw[i * p + a];
                for (int b = 0; b < p; ++b) moments[a + p * b] += fa * s[b];
            }
        }
    } else {
        std::vector<double> s(p);
        for (std::size_t i = 0; i < n; ++i) {
            u[0] = x[i];
            for (std::size_t j = 0; j < n; ++j) {
                u[1] = x[j];
                std::fill(s.begin(), s.end(), 0.0);
                for (std::size_t l = 0; l < n; ++l) {
                    u[2] = x[l];
                    const double kv = w[l] * kernel(u);
                    for (int c = 0; c < p; ++c) s[c] += kv * pw[l * p + c];
                }
                for (int a = 0; a < p; ++a) {
                    const double fa = w[i] * pw[i * p + a];
                    for (int b = 0; b < p; ++b) {
                        const double fab = fa * w[j] * pw[j * p + b];
                        for (int c = 0; c < p; ++c)
                            moments[a + p * (b + p * c)] += fab * s[c];
                    }
                }
            }
        }
    }

    MomentReport report;
    report.pass = true;
    auto visit = [&](std::vector<int> alpha, double value) {
        int total = 0;
        for (int ai : alpha) total += ai;
        if (total > ell) return;
        MomentEntry entry{std::move(alpha), value, total == 0 ? 1.0 : 0.0};
        const double dev = std::abs(entry.value - entry.target);
        if (dev > report.worst_deviation) {
            report.worst_deviation = dev;
            report.worst = entry;
        }
        if (dev > tol) report.pass = false;
        report.entries.push_back(std::move(entry));
    };
    if (d == 1) {
        for (int a = 0; a < p; ++a) visit({a}, moments[a]);
    } else if (d == 2) {
        for (int a = 0; a < p; ++a)
            for (int b = 0; b < p; ++b) visit({a, b}, moments[a + p * b]);
    } else {
        for (int a = 0; a < p; ++a)
            for (int b = 0; b < p; ++b)
                for (int c = 0; c < p; ++c) visit({a, b, c}, moments[a + p * (b + p * c)]);
    }
    return report;
}

inline MomentReport verify_moments(const Kernel& k, double tol,
                                   std::size_t nodes_per_axis = 200) {
    return verify_moments_fn(k, k.dim, k.order, tol, nodes_per_axis);
}

}  // namespace ergokde
