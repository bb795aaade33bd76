// ergokde: simulate ergodic Markov models, estimate invariant densities with
// compactly supported kernels, run the adaptive bandwidth selection rule, and
// drive Monte Carlo rate/variance experiments. All outputs are CSV with
// 17-significant-digit floats so reruns are byte-identical.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ergokde/config.hpp"
#include "ergokde/csv.hpp"
#include "ergokde/estimator.hpp"
#include "ergokde/formulas.hpp"
#include "ergokde/harness.hpp"
#include "ergokde/kernels.hpp"
#include "ergokde/models.hpp"
#include "ergokde/selector.hpp"

namespace {

using namespace ergokde;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config", "cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ExperimentConfig load_config(const std::string& path, long long seed_override) {
    ExperimentConfig cfg = parse_config_text(read_file(path));
    if (seed_override >= 0) {
        cfg.seed = static_cast<std::uint64_t>(seed_override);
        cfg.resolved["simulation"]["seed"] = cfg.seed;
    }
    std::cerr << "resolved config:\n" << serialize_config(cfg);
    return cfg;
}

SamplePath simulate_from_config(const ExperimentConfig& cfg) {
    Rng rng(cfg.seed);
    return simulate_model(cfg.model, cfg.horizon, cfg.dt, cfg.x0, cfg.burn_in, rng, cfg.seed);
}

CsvTable path_to_table(const SamplePath& path) {
    CsvTable table;
    table.header.push_back("t");
    for (int a = 1; a <= path.dim; ++a) table.header.push_back("x" + std::to_string(a));
    table.rows.reserve(path.n_steps + 1);
    for (std::size_t i = 0; i <= path.n_steps; ++i) {
        std::vector<double> row;
        row.push_back(static_cast<double>(i) * path.dt);
        for (int a = 0; a < path.dim; ++a) row.push_back(path.states[i * path.dim + a]);
        table.rows.push_back(std::move(row));
    }
    return table;
}

SamplePath path_from_table(const CsvTable& table) {
    if (table.header.empty() || table.header[0] != "t")
        throw ValidationError("path CSV must start with column t");
    const int d = static_cast<int>(table.header.size()) - 1;
    if (d < 1 || table.rows.size() < 2)
        throw ValidationError("path CSV needs x columns and >= 2 rows");
    SamplePath path;
    path.dim = d;
    path.n_steps = table.rows.size() - 1;
    path.dt = table.rows[1][0] - table.rows[0][0];
    if (!(path.dt > 0.0)) throw ValidationError("path CSV: non-increasing time column");
    path.model_tag = "csv";
    path.states.reserve(table.rows.size() * d);
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const double expected_t = table.rows[0][0] + static_cast<double>(i) * path.dt;
        if (std::abs(table.rows[i][0] - expected_t) > 1e-9 * (1.0 + std::abs(expected_t)))
            throw ValidationError("path CSV: time column is not a uniform grid");
        for (int a = 0; a < d; ++a) path.states.push_back(table.rows[i][1 + a]);
    }
    return path;
}

double resolve_bandwidth(const ExperimentConfig& cfg, double horizon, int d) {
    if (cfg.h_rule == "fixed") return cfg.fixed_h;
    if (cfg.h_rule == "theoretical")
        return theoretical_bandwidth(d, cfg.beta, horizon, cfg.c_h).value;
    throw ConfigError("estimator.h_rule",
                      "adaptive selection is the adapt subcommand; estimate expects "
                      "fixed or theoretical");
}

int cmd_simulate(const ExperimentConfig& cfg, const std::string& out_path) {
    write_csv(out_path, path_to_table(simulate_from_config(cfg)));
    return 0;
}

int cmd_estimate(const ExperimentConfig& cfg, const std::string& path_csv,
                 const std::string& out_path) {
    const SamplePath path = path_from_table(read_csv(path_csv));
    if (path.dim != cfg.dim())
        throw ConfigError("model", "path CSV dimension does not match the model");
    const Kernel kernel = build_order_kernel(path.dim, cfg.kernel_order);
    const double h = resolve_bandwidth(cfg, path.horizon(), path.dim);
    const DensityEstimate est = estimate_density(path, kernel, h, cfg.grid, thread_cap());
    if (est.coarse_dt_warning)
        std::cerr << "warning: path dt " << path.dt << " exceeds h/10 = " << h / 10.0
                  << "; the Riemann sum is coarse for this bandwidth\n";
    CsvTable table;
    for (int a = 1; a <= path.dim; ++a) table.header.push_back("x" + std::to_string(a));
    table.header.push_back("rho_hat");
    for (std::size_t i = 0; i < est.values.size(); ++i) {
        const Eigen::VectorXd x = est.grid.point(i);
        std::vector<double> row(x.data(), x.data() + x.size());
        row.push_back(est.values[i]);
        table.rows.push_back(std::move(row));
    }
    write_csv(out_path, table);
    return 0;
}

int cmd_adapt(const ExperimentConfig& cfg, const std::string& out_path) {
    const int d = cfg.dim();
    const BandwidthGrid grid = cfg.levels > 0
                                   ? explicit_grid(cfg.horizon, d, cfg.eta, cfg.k, cfg.levels)
                                   : build_grid(cfg.horizon, d, cfg.eta, cfg.k);
    const SamplePath path = simulate_from_config(cfg);
    const Kernel kernel = build_order_kernel(d, cfg.kernel_order);
    const SelectionTrace trace = select_bandwidth(path, kernel, grid, cfg.grid, thread_cap());
    CsvTable table;
    table.header = {"h", "g", "diff_sup", "threshold", "pass"};
    for (const PairwiseStat& s : trace.pairs)
        table.rows.push_back({s.h, s.g, s.diff_sup, s.threshold, s.pass ? 1.0 : 0.0});
    write_csv(out_path, table);
    std::cout << "selected_h=" << format_double(trace.selected_h)
              << " max_est=" << format_double(trace.max_est) << "\n";
    return 0;
}

RiskExperimentOptions risk_options(const ExperimentConfig& cfg) {
    RiskExperimentOptions opt;
    opt.model = cfg.model;
    opt.kernel_order = cfg.kernel_order;
    opt.horizons = cfg.t_list.empty() ? std::vector<double>{cfg.horizon} : cfg.t_list;
    opt.rule = cfg.h_rule == "fixed" ? BandwidthRule::fixed
               : cfg.h_rule == "adaptive" ? BandwidthRule::adaptive
                                          : BandwidthRule::theoretical;
    opt.fixed_h = cfg.fixed_h;
    opt.c_h = cfg.c_h;
    opt.beta = cfg.beta;
    opt.eta = cfg.eta;
    opt.k = cfg.k;
    opt.grid_levels = cfg.levels;
    opt.reps = cfg.reps;
    opt.master_seed = cfg.seed;
    opt.grid = cfg.grid;
    opt.dt = cfg.dt_explicit ? cfg.dt : 0.0;
    opt.burn_in = cfg.burn_in;
    opt.x0 = cfg.x0;
    opt.use_pilot_reference = cfg.use_pilot;
    opt.pilot_horizon_factor = cfg.pilot_factor;
    opt.n_threads = thread_cap();
    return opt;
}

int cmd_rates(const ExperimentConfig& cfg, const std::string& out_path) {
    const RiskReport report = run_risk_experiment(risk_options(cfg));
    CsvTable risk;
    risk.header = {"T", "seed", "h", "sup_err", "pt_sq_err"};
    for (const RiskRow& r : report.rows)
        risk.rows.push_back(
            {r.horizon, static_cast<double>(r.seed), r.h, r.sup_error, r.pt_sq_error});
    write_csv(out_path, risk);
    if (report.has_rate_fits) {
        CsvTable rate;
        rate.header = {"logT", "log_med_err"};
        for (std::size_t i = 0; i < report.sup_rate.log_t.size(); ++i)
            rate.rows.push_back({report.sup_rate.log_t[i], report.sup_rate.log_err[i]});
        write_csv(out_path + ".rate.csv", rate);
        std::cout << "summary: slope=" << format_double(report.sup_rate.slope)
                  << " intercept=" << format_double(report.sup_rate.intercept)
                  << " residual_rms=" << format_double(report.sup_rate.residual_rms) << "\n";
    } else {
        std::cout << "summary: slope=nan (need >= 3 horizons with positive errors)\n";
    }
    return 0;
}

int cmd_variance(const ExperimentConfig& cfg, const std::string& out_path) {
    VarianceExperimentOptions opt;
    opt.model = cfg.model;
    opt.center = cfg.center;
    opt.lambdas = cfg.lambda_list;
    opt.horizon = cfg.horizon;
    opt.dt = cfg.dt;
    opt.reps = cfg.reps;
    opt.master_seed = cfg.seed;
    opt.n_threads = thread_cap();
    const VarianceScalingReport report = variance_scaling_experiment(opt);
    CsvTable table;
    table.header = {"lambda", "var_over_T"};
    for (std::size_t i = 0; i < report.lambdas.size(); ++i)
        table.rows.push_back({report.lambdas[i], report.var_over_t[i]});
    write_csv(out_path, table);
    std::cout << "summary: slope=" << format_double(report.slope.value_or(
                     std::numeric_limits<double>::quiet_NaN()))
              << " theoretical_exponent=" << format_double(report.theoretical_exponent)
              << " residual_rms=" << format_double(report.residual_rms) << "\n";
    return 0;
}

struct FormulaArgs {
    std::string fn;
    double x = 0.5;
    int d = 1;
    double h = 0.5;
    double big_t = 1e4;
    int k = 1;
    double u = 1.0;
    double beta = 3.0;
    double c_h = 1.0;
};

int cmd_formulas(const FormulaArgs& args, const std::string& out_path) {
    double value = 0.0;
    if (args.fn == "psi")
        value = psi_d(args.x, args.d);
    else if (args.fn == "sigma")
        value = sigma_proxy(args.h, args.big_t, args.d, args.k);
    else if (args.fn == "upsilon")
        value = upsilon(args.h, args.big_t, args.u, args.d);
    else if (args.fn == "phi")
        value = rate_phi(args.d, args.beta, args.big_t);
    else if (args.fn == "psi_rate")
        value = rate_psi(args.d, args.beta, args.big_t);
    else if (args.fn == "bandwidth") {
        const BandwidthChoice choice =
            theoretical_bandwidth(args.d, args.beta, args.big_t, args.c_h);
        if (choice.clipped)
            std::cerr << "warning: bandwidth " << choice.raw << " clipped to "
                      << choice.value << "\n";
        value = choice.value;
    } else {
        throw ConfigError("formulas.fn",
                          "must be one of psi|sigma|upsilon|phi|psi_rate|bandwidth");
    }
    const std::string line = args.fn + "," + format_double(value) + "\n";
    if (out_path.empty()) {
        std::cout << "fn,value\n" << line;
    } else {
        std::ofstream out(out_path, std::ios::binary);
        out << "fn,value\n" << line;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ergokde: ergodic-process simulation and invariant density estimation"};
    app.require_subcommand(1);

    std::string config_path, out_path = "out.csv", path_csv;
    long long seed_override = -1;

    auto add_common = [&](CLI::App* cmd, bool needs_config) {
        if (needs_config)
            cmd->add_option("--config", config_path, "JSON config file")->required();
        cmd->add_option("--out", out_path, "output CSV path");
        cmd->add_option("--seed", seed_override, "override simulation.seed");
    };

    CLI::App* simulate = app.add_subcommand("simulate", "simulate one trajectory to CSV");
    add_common(simulate, true);
    CLI::App* estimate =
        app.add_subcommand("estimate", "kernel density estimate from a stored path CSV");
    add_common(estimate, true);
    estimate->add_option("--path", path_csv, "input path CSV")->required();
    CLI::App* adapt = app.add_subcommand("adapt", "adaptive bandwidth selection trace");
    add_common(adapt, true);
    CLI::App* rates = app.add_subcommand("rates", "Monte Carlo risk/rate experiment");
    add_common(rates, true);
    CLI::App* variance = app.add_subcommand("variance", "occupation variance scaling");
    add_common(variance, true);

    CLI::App* formulas = app.add_subcommand("formulas", "evaluate closed-form functions");
    FormulaArgs fargs;
    formulas->add_option("--fn", fargs.fn, "psi|sigma|upsilon|phi|psi_rate|bandwidth")
        ->required();
    formulas->add_option("--x", fargs.x, "argument of psi_d");
    formulas->add_option("--d", fargs.d, "dimension");
    formulas->add_option("--h", fargs.h, "bandwidth");
    formulas->add_option("--T", fargs.big_t, "horizon");
    formulas->add_option("--k", fargs.k, "iterated-log depth");
    formulas->add_option("--u", fargs.u, "deviation level");
    formulas->add_option("--beta", fargs.beta, "Holder smoothness");
    formulas->add_option("--c_h", fargs.c_h, "bandwidth constant");
    formulas->add_option("--out", out_path, "output CSV path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (formulas->parsed())
            return cmd_formulas(fargs, formulas->count("--out") ? out_path : "");
        const ExperimentConfig cfg = load_config(config_path, seed_override);
        if (simulate->parsed()) return cmd_simulate(cfg, out_path);
        if (estimate->parsed()) return cmd_estimate(cfg, path_csv, out_path);
        if (adapt->parsed()) return cmd_adapt(cfg, out_path);
        if (rates->parsed()) return cmd_rates(cfg, out_path);
        if (variance->parsed()) return cmd_variance(cfg, out_path);
    } catch (const EmptyGridError& e) {
        std::cerr << "error: empty-grid: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
