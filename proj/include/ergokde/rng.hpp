#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "ergokde/errors.hpp"

namespace ergokde {

// Deterministic random source. Every consumer owns its own instance; replication
// streams are derived from (base seed, replication index) so reruns are
// bit-identical and replications can execute in parallel.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed)) {}

    // Stream for replication `index` of an experiment with master seed `base`.
    static Rng child(std::uint64_t base, std::uint64_t index) {
        return Rng(base + index);
    }

    std::uint64_t raw() { return gen_(); }

    // Uniform on [0,1); 53-bit resolution.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    // Standard normal via the polar method; the spare variate is cached, so the
    // draw sequence is a pure function of the seed and the call sequence.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double v1 = 0.0, v2 = 0.0, s = 0.0;
        do {
            v1 = 2.0 * uniform() - 1.0;
            v2 = 2.0 * uniform() - 1.0;
            s = v1 * v1 + v2 * v2;
        } while (s >= 1.0 || s == 0.0);
        const double scale = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v2 * scale;
        has_spare_ = true;
        return v1 * scale;
    }

    Eigen::VectorXd gaussian_vector(Eigen::Index d) {
        Eigen::VectorXd g(d);
        for (Eigen::Index i = 0; i < d; ++i) g[i] = gaussian();
        return g;
    }

    // Poisson count by Knuth's product method, chunked so large means stay
    // numerically safe. Means here are per-step jump intensities (tiny).
    std::uint64_t poisson(double mean) {
        if (mean < 0.0) throw ValidationError("poisson mean must be >= 0");
        std::uint64_t total = 0;
        while (mean > 200.0) {
            total += poisson_small(200.0);
            mean -= 200.0;
        }
        return total + poisson_small(mean);
    }

private:
    std::uint64_t poisson_small(double mean) {
        if (mean == 0.0) return 0;
        const double limit = std::exp(-mean);
        std::uint64_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

    // Mixes raw seeds so that consecutive (base + index) values produce
    // decorrelated mt19937_64 states.
    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace ergokde
