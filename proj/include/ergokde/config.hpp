#pragma once

// JSON experiment configuration: strict key validation, defaults filled on
// parse, and a normalized form that serializes back to an identical document.
// Key names are documented in docs/config_schema.md.

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ergokde/errors.hpp"
#include "ergokde/estimator.hpp"
#include "ergokde/harness.hpp"
#include "ergokde/models.hpp"
#include "ergokde/quadrature.hpp"

namespace ergokde {

using json = nlohmann::json;

namespace cfg_detail {

inline void require_keys(const json& obj, const std::string& section,
                         const std::set<std::string>& allowed) {
    if (!obj.is_object()) throw ConfigError(section, "must be an object");
    for (const auto& item : obj.items())
        if (!allowed.count(item.key()))
            throw ConfigError(section + "." + item.key(), "unknown key");
}

inline double num(const json& obj, const std::string& key, const std::string& section) {
    const json& v = obj.at(key);
    if (!v.is_number()) throw ConfigError(section + "." + key, "expected a number");
    return v.get<double>();
}

inline double num_or(const json& obj, const std::string& key, const std::string& section,
                     double fallback) {
    if (!obj.contains(key)) return fallback;
    return num(obj, key, section);
}

inline Eigen::VectorXd vec(const json& v, const std::string& where) {
    if (!v.is_array()) throw ConfigError(where, "expected an array of numbers");
    Eigen::VectorXd out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_number()) throw ConfigError(where, "expected an array of numbers");
        out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
    }
    return out;
}

// Matrix literal [[...]] or {"scaled_identity": s} resolved against dim.
inline Eigen::MatrixXd mat(const json& v, int dim, const std::string& where) {
    if (v.is_object()) {
        require_keys(v, where, {"scaled_identity"});
        const double s = num(v, "scaled_identity", where);
        return s * Eigen::MatrixXd::Identity(dim, dim);
    }
    if (!v.is_array() || v.empty()) throw ConfigError(where, "expected a matrix literal");
    const std::size_t rows = v.size();
    Eigen::MatrixXd out(rows, rows);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!v[i].is_array() || v[i].size() != rows)
            throw ConfigError(where, "matrix literal must be square");
        for (std::size_t j = 0; j < rows; ++j) {
            if (!v[i][j].is_number()) throw ConfigError(where, "matrix entries must be numbers");
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                v[i][j].get<double>();
        }
    }
    if (dim > 0 && out.rows() != dim) throw ConfigError(where, "matrix dimension mismatch");
    return out;
}

inline json mat_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(row);
    }
    return rows;
}

inline json vec_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

// Tail mass and sampler for the built-in isotropic Gaussian Levy density
// lambda * N(0, s^2 I).
inline double gaussian_tail_mass(int d, double s, double eps) {
    // P(||Z|| > eps) for Z ~ N(0, s^2 I_d) via the chi distribution.
    auto chi_density = [&](double r) {
        const double k = static_cast<double>(d);
        const double c = std::pow(2.0, 1.0 - 0.5 * k) / std::tgamma(0.5 * k);
        return c * std::pow(r, k - 1.0) * std::exp(-0.5 * r * r);
    };
    const double a = eps / s;
    TailIntegral ti = integrate_tail(chi_density, a, 1.0, 1e300);
    return ti.value;
}

}  // namespace cfg_detail

struct ExperimentConfig {
    json resolved;  // normalized document; serializing it reproduces the config
    std::variant<OUModel, JumpSDEModel> model;
    std::string model_type;

    // simulation
    double horizon = 0.0;
    double dt = 0.0;
    bool dt_explicit = false;  // experiments auto-pick dt = h/10 when defaulted
    double burn_in = -1.0;     // < 0: default rule
    std::uint64_t seed = 1;
    Eigen::VectorXd x0;

    // kernel / estimator
    int kernel_order = 1;
    std::string h_rule = "theoretical";
    double fixed_h = 0.25;
    double c_h = 1.0;
    double beta = 3.0;
    EvaluationGrid grid;

    // adaptive
    double eta = 2.0;
    int k = 1;
    int levels = 0;

    // experiment
    std::size_t reps = 1;
    std::vector<double> t_list;
    std::vector<double> lambda_list;
    Eigen::VectorXd center;
    bool use_pilot = false;
    double pilot_factor = 50.0;

    int dim() const {
        if (const auto* ou = std::get_if<OUModel>(&model)) return ou->dim();
        return std::get<JumpSDEModel>(model).dim;
    }
};

namespace cfg_detail {

inline JumpMeasureSpec parse_jump_spec(const json& j, int dim, const std::string& section,
                                       json& normalized) {
    require_keys(j, section,
                 {"type", "lambda", "jump_cov", "name", "eps", "level", "radius",
                  "moment_eta0", "moment_p", "log_moment_alpha"});
    const std::string type = j.value("type", "none");
    MomentFlags flags;
    if (j.contains("moment_eta0")) flags.exp_eta0 = num(j, "moment_eta0", section);
    if (j.contains("moment_p")) flags.poly_moment_p = num(j, "moment_p", section);
    if (j.contains("log_moment_alpha"))
        flags.log_moment_alpha = num(j, "log_moment_alpha", section);

    if (type == "none") {
        normalized = {{"type", "none"}};
        return JumpMeasureSpec::none(dim);
    }
    if (type == "cpoisson-gauss") {
        const double lambda = num(j, "lambda", section);
        Eigen::MatrixXd cov;
        if (j.contains("jump_cov") && j.at("jump_cov").is_number())
            cov = j.at("jump_cov").get<double>() * Eigen::MatrixXd::Identity(dim, dim);
        else if (j.contains("jump_cov"))
            cov = mat(j.at("jump_cov"), dim, section + ".jump_cov");
        else
            cov = Eigen::MatrixXd::Identity(dim, dim);
        normalized = {{"type", "cpoisson-gauss"}, {"lambda", lambda},
                      {"jump_cov", mat_to_json(cov)}};
        if (flags.exp_eta0) normalized["moment_eta0"] = *flags.exp_eta0;
        if (flags.poly_moment_p) normalized["moment_p"] = *flags.poly_moment_p;
        if (flags.log_moment_alpha) normalized["log_moment_alpha"] = *flags.log_moment_alpha;
        if (!flags.exp_eta0) flags.exp_eta0 = 1.0;          // Gaussian jumps: any eta0
        if (!flags.poly_moment_p) flags.poly_moment_p = 2.0;
        auto spec = JumpMeasureSpec::compound_poisson(
            lambda, std::make_shared<GaussianJumpLaw>(cov), flags);
        return spec;
    }
    if (type == "density") {
        const std::string name = j.value("name", "");
        const double eps = num_or(j, "eps", section, 1e-2);
        if (name == "uniform1d") {
            if (dim != 1) throw ConfigError(section + ".name", "uniform1d requires d = 1");
            const double level = num_or(j, "level", section, 1.0);
            const double radius = num_or(j, "radius", section, 1.0);
            normalized = {{"type", "density"}, {"name", "uniform1d"}, {"eps", eps},
                          {"level", level}, {"radius", radius}};
            auto density = [level, radius](const Eigen::VectorXd& z) {
                return std::abs(z[0]) <= radius ? level : 0.0;
            };
            const double tail = std::max(0.0, radius - eps);
            const double mass = 2.0 * level * tail;
            auto sampler = [eps, tail](Rng& rng) {
                Eigen::VectorXd z(1);
                const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
                z[0] = sign * (eps + tail * rng.uniform());
                return z;
            };
            if (!flags.exp_eta0) flags.exp_eta0 = 1.0;
            if (!flags.poly_moment_p) flags.poly_moment_p = 2.0;
            return JumpMeasureSpec::density_family(1, density, eps, mass,
                                                   Eigen::VectorXd::Zero(1), sampler, flags);
        }
        if (name == "gauss") {
            const double lambda = num_or(j, "lambda", section, 1.0);
            const double scale = num_or(j, "level", section, 1.0);  // std dev per axis
            normalized = {{"type", "density"}, {"name", "gauss"}, {"eps", eps},
                          {"lambda", lambda}, {"level", scale}};
            const double norm_c = lambda * std::pow(2.0 * M_PI * scale * scale, -0.5 * dim);
            auto density = [norm_c, scale](const Eigen::VectorXd& z) {
                return norm_c * std::exp(-0.5 * z.squaredNorm() / (scale * scale));
            };
            const double mass = lambda * gaussian_tail_mass(dim, scale, eps);
            auto sampler = [dim, scale, eps](Rng& rng) {
                // Rejection from the unrestricted law; eps is far inside the bulk.
                for (;;) {
                    Eigen::VectorXd z = scale * rng.gaussian_vector(dim);
                    if (z.norm() > eps) return z;
                }
            };
            if (!flags.exp_eta0) flags.exp_eta0 = 1.0;
            if (!flags.poly_moment_p) flags.poly_moment_p = 2.0;
            return JumpMeasureSpec::density_family(dim, density, eps, mass,
                                                   Eigen::VectorXd::Zero(dim), sampler, flags);
        }
        throw ConfigError(section + ".name", "unknown density family '" + name + "'");
    }
    throw ConfigError(section + ".type", "unknown jump type '" + type + "'");
}

inline std::function<Eigen::VectorXd(const Eigen::VectorXd&)> parse_drift_fn(
    const json& j, int dim, const std::string& section, json& normalized) {
    if (j.is_string()) {
        const std::string name = j.get<std::string>();
        if (name == "soft_restoring") {
            normalized = name;
            return [](const Eigen::VectorXd& x) {
                return (-1.0 / std::max(x.norm(), 1.0)) * x;
            };
        }
        if (name == "zero") {
            normalized = name;
            return [dim](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(dim); };
        }
        throw ConfigError(section, "unknown drift '" + name + "'");
    }
    require_keys(j, section, {"type", "B"});
    if (j.value("type", "") != "linear") throw ConfigError(section + ".type", "expected 'linear'");
    const Eigen::MatrixXd b = mat(j.at("B"), dim, section + ".B");
    normalized = {{"type", "linear"}, {"B", mat_to_json(b)}};
    return [b](const Eigen::VectorXd& x) { return (-b * x).eval(); };
}

inline std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> parse_matrix_fn(
    const json& j, int dim, const std::string& section, json& normalized) {
    if (j.is_string()) {
        const std::string name = j.get<std::string>();
        if (name == "identity") {
            normalized = name;
            return [dim](const Eigen::VectorXd&) {
                return Eigen::MatrixXd::Identity(dim, dim).eval();
            };
        }
        if (name == "zero") {
            normalized = name;
            return [dim](const Eigen::VectorXd&) {
                return Eigen::MatrixXd::Zero(dim, dim).eval();
            };
        }
        throw ConfigError(section, "unknown coefficient '" + name + "'");
    }
    if (j.is_number()) {
        const double s = j.get<double>();
        normalized = s;
        return [dim, s](const Eigen::VectorXd&) {
            return (s * Eigen::MatrixXd::Identity(dim, dim)).eval();
        };
    }
    const Eigen::MatrixXd m = mat(j, dim, section);
    normalized = mat_to_json(m);
    return [m](const Eigen::VectorXd&) { return m; };
}

}  // namespace cfg_detail

inline ExperimentConfig parse_config(const json& doc) {
    using namespace cfg_detail;
    require_keys(doc, "config",
                 {"model", "simulation", "kernel", "estimator", "adaptive", "experiment"});
    if (!doc.contains("model")) throw ConfigError("model", "section required");
    ExperimentConfig out;
    json norm;

    // --- model
    {
        const json& m = doc.at("model");
        json nm;
        const std::string type = m.value("type", "");
        out.model_type = type;
        if (type == "ou") {
            require_keys(m, "model", {"type", "B", "Q", "a", "jump"});
            const Eigen::MatrixXd b = mat(m.at("B"), 0, "model.B");
            const int d = static_cast<int>(b.rows());
            const Eigen::MatrixXd q = m.contains("Q") ? mat(m.at("Q"), d, "model.Q")
                                                      : Eigen::MatrixXd::Zero(d, d);
            const Eigen::VectorXd a = m.contains("a") ? vec(m.at("a"), "model.a")
                                                      : Eigen::VectorXd::Zero(d);
            if (a.size() != d) throw ConfigError("model.a", "dimension mismatch");
            json jump_norm = {{"type", "none"}};
            JumpMeasureSpec jumps = m.contains("jump")
                                        ? parse_jump_spec(m.at("jump"), d, "model.jump", jump_norm)
                                        : JumpMeasureSpec::none(d);
            OUModel model;
            model.mean_reversion = b;
            model.noise = LevyTriplet{a, q, jumps};
            try {
                model.validate();
            } catch (const ValidationError& e) {
                throw ConfigError("model", e.what());
            }
            out.model = model;
            nm = {{"type", "ou"}, {"B", mat_to_json(b)}, {"Q", mat_to_json(q)},
                  {"a", vec_to_json(a)}, {"jump", jump_norm}};
        } else if (type == "jumpsde") {
            require_keys(m, "model", {"type", "dim", "b", "sigma", "gamma", "jump", "constants"});
            if (!m.contains("dim")) throw ConfigError("model.dim", "required for jumpsde");
            const int d = static_cast<int>(num(m, "dim", "model"));
            if (d < 1) throw ConfigError("model.dim", "must be >= 1");
            JumpSDEModel model;
            model.dim = d;
            json nb, ns, ng, nj = {{"type", "none"}};
            model.drift_b = m.contains("b")
                                ? parse_drift_fn(m.at("b"), d, "model.b", nb)
                                : parse_drift_fn(json("soft_restoring"), d, "model.b", nb);
            model.dispersion_sigma =
                m.contains("sigma") ? parse_matrix_fn(m.at("sigma"), d, "model.sigma", ns)
                                    : parse_matrix_fn(json("identity"), d, "model.sigma", ns);
            model.jump_gamma = m.contains("gamma")
                                   ? parse_matrix_fn(m.at("gamma"), d, "model.gamma", ng)
                                   : parse_matrix_fn(json("zero"), d, "model.gamma", ng);
            model.jump_spec = m.contains("jump")
                                  ? parse_jump_spec(m.at("jump"), d, "model.jump", nj)
                                  : JumpMeasureSpec::none(d);
            json nc;
            if (m.contains("constants")) {
                const json& c = m.at("constants");
                require_keys(c, "model.constants", {"c1", "c2", "eta0", "alpha"});
                model.c1 = num_or(c, "c1", "model.constants", 1.0);
                model.c2 = num_or(c, "c2", "model.constants", 1.0);
                model.eta0 = num_or(c, "eta0", "model.constants", 1.0);
                model.alpha = num_or(c, "alpha", "model.constants", 0.5);
            }
            nc = {{"c1", model.c1}, {"c2", model.c2}, {"eta0", model.eta0},
                  {"alpha", model.alpha}};
            try {
                model.validate();
            } catch (const ValidationError& e) {
                throw ConfigError("model", e.what());
            }
            out.model = model;
            nm = {{"type", "jumpsde"}, {"dim", d},     {"b", nb},
                  {"sigma", ns},       {"gamma", ng},  {"jump", nj},
                  {"constants", nc}};
        } else {
            throw ConfigError("model.type", "must be 'ou' or 'jumpsde'");
        }
        norm["model"] = nm;
    }
    const int d = out.dim();

    // --- simulation
    {
        json ns;
        if (doc.contains("simulation")) {
            const json& s = doc.at("simulation");
            require_keys(s, "simulation", {"T", "dt", "burn_in", "seed", "x0"});
            out.horizon = num_or(s, "T", "simulation", 100.0);
            out.dt = num_or(s, "dt", "simulation", 0.01);
            out.dt_explicit = s.contains("dt");
            out.burn_in = num_or(s, "burn_in", "simulation", -1.0);
            out.seed = static_cast<std::uint64_t>(num_or(s, "seed", "simulation", 1.0));
            if (s.contains("x0")) out.x0 = vec(s.at("x0"), "simulation.x0");
        } else {
            out.horizon = 100.0;
            out.dt = 0.01;
        }
        if (!(out.horizon > 0.0)) throw ConfigError("simulation.T", "must be > 0");
        if (!(out.dt > 0.0)) throw ConfigError("simulation.dt", "must be > 0");
        if (out.x0.size() && out.x0.size() != d)
            throw ConfigError("simulation.x0", "dimension mismatch");
        ns = {{"T", out.horizon}, {"dt", out.dt}, {"burn_in", out.burn_in},
              {"seed", out.seed}};
        if (out.x0.size()) ns["x0"] = cfg_detail::vec_to_json(out.x0);
        norm["simulation"] = ns;
    }

    // --- kernel
    {
        if (doc.contains("kernel")) {
            const json& kj = doc.at("kernel");
            require_keys(kj, "kernel", {"order"});
            const double order = num_or(kj, "order", "kernel", 1.0);
            if (!(order >= 1.0) || order != std::floor(order))
                throw ConfigError("kernel.order", "must be an integer >= 1");
            out.kernel_order = static_cast<int>(order);
        }
        norm["kernel"] = {{"order", out.kernel_order}};
    }

    // --- estimator
    {
        json ne;
        if (doc.contains("estimator")) {
            const json& e = doc.at("estimator");
            require_keys(e, "estimator", {"h_rule", "h", "c_h", "beta", "grid"});
            out.h_rule = e.value("h_rule", "theoretical");
            if (out.h_rule != "fixed" && out.h_rule != "theoretical" && out.h_rule != "adaptive")
                throw ConfigError("estimator.h_rule", "must be fixed|theoretical|adaptive");
            out.fixed_h = num_or(e, "h", "estimator", 0.25);
            if (!(out.fixed_h > 0.0 && out.fixed_h <= 1.0))
                throw ConfigError("estimator.h", "must lie in (0, 1]");
            out.c_h = num_or(e, "c_h", "estimator", 1.0);
            if (!(out.c_h > 0.0)) throw ConfigError("estimator.c_h", "must be > 0");
            out.beta = num_or(e, "beta", "estimator", 3.0);
            if (!(out.beta > 0.0)) throw ConfigError("estimator.beta", "must be > 0");
            if (e.contains("grid")) {
                const json& g = e.at("grid");
                require_keys(g, "estimator.grid", {"lower", "upper", "points_per_axis"});
                const Eigen::VectorXd lo = vec(g.at("lower"), "estimator.grid.lower");
                const Eigen::VectorXd hi = vec(g.at("upper"), "estimator.grid.upper");
                const double ppa = num_or(g, "points_per_axis", "estimator.grid", 33.0);
                if (!(ppa >= 2.0) || ppa != std::floor(ppa))
                    throw ConfigError("estimator.grid.points_per_axis",
                                      "must be an integer >= 2");
                try {
                    out.grid = EvaluationGrid::box(lo, hi, static_cast<int>(ppa));
                } catch (const ValidationError& err) {
                    throw ConfigError("estimator.grid", err.what());
                }
                if (out.grid.dim() != d) throw ConfigError("estimator.grid", "dimension mismatch");
            }
        }
        if (!out.grid.lower.size()) {
            out.grid = EvaluationGrid::box(Eigen::VectorXd::Constant(d, -1.0),
                                           Eigen::VectorXd::Constant(d, 1.0), 33);
        }
        ne = {{"h_rule", out.h_rule},
              {"h", out.fixed_h},
              {"c_h", out.c_h},
              {"beta", out.beta},
              {"grid",
               {{"lower", cfg_detail::vec_to_json(out.grid.lower)},
                {"upper", cfg_detail::vec_to_json(out.grid.upper)},
                {"points_per_axis", out.grid.points_per_axis}}}};
        norm["estimator"] = ne;
    }

    // --- adaptive
    {
        if (doc.contains("adaptive")) {
            const json& a = doc.at("adaptive");
            require_keys(a, "adaptive", {"eta", "k", "levels"});
            out.eta = num_or(a, "eta", "adaptive", 2.0);
            if (!(out.eta > 1.0)) throw ConfigError("adaptive.eta", "must be > 1");
            const double k = num_or(a, "k", "adaptive", 1.0);
            if (!(k >= 1.0) || k != std::floor(k))
                throw ConfigError("adaptive.k", "must be an integer >= 1");
            out.k = static_cast<int>(k);
            const double levels = num_or(a, "levels", "adaptive", 0.0);
            if (levels < 0.0 || levels != std::floor(levels))
                throw ConfigError("adaptive.levels", "must be an integer >= 0");
            out.levels = static_cast<int>(levels);
        }
        norm["adaptive"] = {{"eta", out.eta}, {"k", out.k}, {"levels", out.levels}};
    }

    // --- experiment
    {
        json nx;
        if (doc.contains("experiment")) {
            const json& x = doc.at("experiment");
            require_keys(x, "experiment",
                         {"reps", "T_list", "lambda_list", "center", "pilot", "pilot_factor"});
            const double reps = num_or(x, "reps", "experiment", 1.0);
            if (!(reps >= 1.0) || reps != std::floor(reps))
                throw ConfigError("experiment.reps", "must be an integer >= 1");
            out.reps = static_cast<std::size_t>(reps);
            if (x.contains("T_list")) {
                for (const auto& t : x.at("T_list")) {
                    if (!t.is_number() || !(t.get<double>() > 0.0))
                        throw ConfigError("experiment.T_list", "entries must be > 0");
                    out.t_list.push_back(t.get<double>());
                }
            }
            if (x.contains("lambda_list")) {
                for (const auto& l : x.at("lambda_list")) {
                    if (!l.is_number()) throw ConfigError("experiment.lambda_list",
                                                          "entries must be numbers");
                    out.lambda_list.push_back(l.get<double>());
                }
            }
            if (x.contains("center")) out.center = vec(x.at("center"), "experiment.center");
            out.use_pilot = x.value("pilot", false);
            out.pilot_factor = num_or(x, "pilot_factor", "experiment", 50.0);
        }
        if (!out.center.size()) out.center = Eigen::VectorXd::Zero(d);
        if (out.center.size() != d) throw ConfigError("experiment.center", "dimension mismatch");
        nx = {{"reps", out.reps},
              {"T_list", out.t_list},
              {"lambda_list", out.lambda_list},
              {"center", cfg_detail::vec_to_json(out.center)},
              {"pilot", out.use_pilot},
              {"pilot_factor", out.pilot_factor}};
        norm["experiment"] = nx;
    }

    out.resolved = norm;
    return out;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError("config", std::string("malformed document: ") + e.what());
    }
    return parse_config(doc);
}

inline std::string serialize_config(const ExperimentConfig& cfg) {
    return cfg.resolved.dump(2) + "\n";
}

}  // namespace ergokde
