#pragma once

// Command implementations behind the `cte` executable. Each command takes the
// argument list and the two output streams so tests can drive it in-process.

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cte/cte.hpp"

namespace cte::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitEstimation = 2;

inline constexpr std::uint64_t kDefaultSeed = 42;

/// Parsed loss file, or the reason it could not be read.
struct LossFile {
    std::vector<double> values;
    std::string error;    // empty on success
    bool had_header = false;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_double(std::string_view s) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::string_view first_token(std::string_view line) {
    const auto end = line.find_first_of(" \t,;");
    return line.substr(0, end);
}

} // namespace detail

/// One loss per line. Blank lines are skipped; the first non-blank line is
/// taken as a header when its first token is not a number.
inline LossFile read_losses(std::istream& in) {
    LossFile out;
    std::string raw;
    std::size_t line_no = 0;
    bool seen_content = false;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string_view line = detail::trim(raw);
        if (line.empty()) continue;
        if (!seen_content) {
            seen_content = true;
            if (!detail::parse_double(detail::first_token(line))) {
                out.had_header = true;
                continue;
            }
        }
        const auto v = detail::parse_double(line);
        if (!v || !std::isfinite(*v)) {
            out.error = "line " + std::to_string(line_no) + ": cannot parse '" +
                        std::string(line) + "' as a number";
            return out;
        }
        out.values.push_back(*v);
    }
    return out;
}

namespace detail {

enum class OutputFormat { csv, json };

struct CommonOptions {
    std::uint64_t seed = kDefaultSeed;
    std::size_t reps = 1000;
    unsigned workers = 1;
    bool fallback = false;
    std::string level_policy = "oriented";
    double min_ratio = 1.0;
    std::string output;
    std::string format = "csv";
};

struct ModelOptions {
    std::string family = "frechet";
    std::optional<double> alpha;
    std::optional<double> lambda;
    std::optional<double> tau;
};

inline void add_output_flags(CLI::App& app, CommonOptions& o) {
    app.add_option("--output,-o", o.output, "Write results to this file instead of stdout");
    app.add_option("--format", o.format, "Output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
}

inline void add_solver_flags(CLI::App& app, CommonOptions& o) {
    app.add_flag("--fallback", o.fallback,
                 "Substitute the classic estimate when the bias-reduced one fails");
    app.add_option("--level-policy", o.level_policy,
                   "Handling of t above 1 - k/n: strict rejects, oriented integrates back")
        ->check(CLI::IsMember({"strict", "oriented"}))
        ->capture_default_str();
    app.add_option("--min-ratio", o.min_ratio,
                   "Skip solver roots with beta/alpha below this value (1 keeps all)")
        ->check(CLI::Range(1.0, 100.0))
        ->capture_default_str();
}

inline void add_simulation_flags(CLI::App& app, CommonOptions& o, ModelOptions& m) {
    app.add_option("--model", m.family, "Loss model")
        ->check(CLI::IsMember({"frechet", "burr", "pareto"}))
        ->capture_default_str();
    app.add_option("--alpha", m.alpha, "Tail index (Frechet, Pareto; Burr with --lambda)");
    app.add_option("--lambda", m.lambda, "Burr lambda");
    app.add_option("--tau", m.tau, "Burr tau");
    app.add_option("--reps", o.reps, "Monte Carlo replications")->capture_default_str();
    app.add_option("--seed", o.seed, "Master seed")->capture_default_str();
    app.add_option("--workers", o.workers, "Worker threads")->capture_default_str();
}

inline HeavyTailModel build_model(const ModelOptions& m) {
    if (m.family == "frechet" || m.family == "pareto") {
        if (!m.alpha) cte::detail::fail(errc::invalid_config, m.family + " requires --alpha");
        return m.family == "frechet" ? HeavyTailModel::frechet(*m.alpha)
                                     : HeavyTailModel::pareto(*m.alpha);
    }
    if (m.lambda && m.tau) return HeavyTailModel::burr(*m.lambda, *m.tau);
    if (m.lambda && m.alpha) return HeavyTailModel::burr_with_tail_index(*m.alpha, *m.lambda);
    cte::detail::fail(errc::invalid_config, "burr requires --lambda with --tau or --alpha");
}

inline LevelPolicy policy_of(const CommonOptions& o) {
    return o.level_policy == "strict" ? LevelPolicy::strict : LevelPolicy::oriented;
}

/// Runs `body` against the requested sink: the file named by --output or `out`.
template <class Body>
int with_sink(const CommonOptions& o, std::ostream& out, std::ostream& err, Body&& body) {
    if (o.output.empty()) {
        body(out);
        out.flush();
        return kExitOk;
    }
    std::ofstream file(o.output, std::ios::binary);
    if (!file) {
        err << "error: cannot open output file " << o.output << '\n';
        return kExitUsage;
    }
    body(file);
    file.flush();
    if (!file) {
        err << "error: failed writing " << o.output << '\n';
        return kExitUsage;
    }
    return kExitOk;
}

inline void warn_epsilon(double eps, std::ostream& err) {
    if (!(eps > 0.2 && eps < 1.0 / 3.0))
        err << "warning: epsilon = " << eps << " lies outside (1/5, 1/3)\n";
}

/// CLI11 wants its arguments reversed when given as a vector.
inline std::vector<std::string> reversed(const std::vector<std::string>& args) {
    return {args.rbegin(), args.rend()};
}

inline int parse_or_exit(CLI::App& app, const std::vector<std::string>& args, std::ostream& out,
                         std::ostream& err, bool& done) {
    done = false;
    try {
        auto rev = reversed(args);
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        done = true;
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }
    return kExitOk;
}

} // namespace detail

/// `estimate`: both CTE estimates for a loss file.
inline int cmd_estimate(const std::vector<std::string>& args, std::ostream& out,
                        std::ostream& err) {
    CLI::App app{"Estimate the conditional tail expectation of a loss file", "cte estimate"};
    std::string input;
    double t = 0.9;
    std::optional<std::size_t> k_flag;
    double eps = 0.25;
    detail::CommonOptions o;
    app.add_option("input", input, "Loss file, one value per line")->required();
    app.add_option("--t", t, "Level t in (0, 1)")->capture_default_str();
    app.add_option("--k", k_flag, "Number of upper order statistics");
    app.add_option("--epsilon", eps, "k = floor(n^(1 - epsilon)) when --k is absent")
        ->capture_default_str();
    detail::add_solver_flags(app, o);
    detail::add_output_flags(app, o);
    bool done = false;
    if (int rc = detail::parse_or_exit(app, args, out, err, done); done) return rc;

    if (!(t > 0.0 && t < 1.0)) {
        err << "error: --t must lie in (0, 1)\n";
        return kExitUsage;
    }
    std::ifstream in(input);
    if (!in) {
        err << "error: cannot open " << input << '\n';
        return kExitUsage;
    }
    const LossFile file = read_losses(in);
    if (!file.error.empty()) {
        err << "error: " << input << ": " << file.error << '\n';
        return kExitUsage;
    }
    const std::size_t n = file.values.size();
    if (n < 2) {
        err << "error: sample size " << n << " is too small; at least 2 losses are needed\n";
        return kExitUsage;
    }
    std::size_t k = 0;
    if (k_flag) {
        k = *k_flag;
        if (k < 2 || k > n - 1) {
            err << "error: k = " << k << " is out of range; need 2 <= k <= n - 1 = " << n - 1
                << '\n';
            return kExitUsage;
        }
    } else {
        k = choose_k(n, eps).k;
        detail::warn_epsilon(eps, err);
    }
    const auto positives = static_cast<std::size_t>(
        std::count_if(file.values.begin(), file.values.end(), [](double v) { return v > 0.0; }));
    if (positives < k + 2) {
        err << "error: " << positives << " positive losses; at least k + 2 = " << k + 2
            << " are needed\n";
        return kExitUsage;
    }

    const SortedSample s = make_sorted(file.values);
    const LevelPolicy policy = detail::policy_of(o);
    SolverOptions solver;
    solver.min_ratio = o.min_ratio;

    std::optional<CteEstimate> old_est;
    std::optional<CteEstimate> new_est;
    std::optional<TailFit> fit;
    int status = kExitOk;
    bool fell_back = false;
    try {
        old_est = cte_old(s, t, k, policy);
    } catch (const error& e) {
        err << "error: classic estimator failed (" << to_string(e.code()) << "): " << e.what()
            << '\n';
        status = kExitEstimation;
    }
    try {
        fit = cml_fit(s, k, solver);
        new_est = cte_new(s, t, k, *fit, policy);
    } catch (const error& e) {
        if (o.fallback && old_est) {
            err << "warning: bias-reduced estimator failed (" << to_string(e.code())
                << "); reporting the classic estimate instead\n";
            fell_back = true;
        } else {
            err << "error: bias-reduced estimator failed (" << to_string(e.code())
                << "): " << e.what() << '\n';
            status = kExitEstimation;
        }
    }
    if (new_est && new_est->near_boundary)
        err << "warning: beta_hat / alpha_hat = " << new_est->fit->beta_hat / new_est->alpha_hat
            << " is close to 1; the bias correction is poorly identified\n";
    if ((old_est && old_est->level_beyond_anchor) || (new_est && new_est->level_beyond_anchor))
        err << "warning: t exceeds 1 - k/n; the empirical part is integrated backwards\n";

    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double hill_alpha = fit ? fit->hill_alpha : (old_est ? old_est->alpha_hat : nan);
    const double cte_new_value =
        new_est ? new_est->value : (fell_back ? old_est->value : nan);
    std::optional<double> sig2 = new_est ? new_est->sigma2 : std::nullopt;

    const int sink_rc = detail::with_sink(o, out, err, [&](std::ostream& os) {
        if (o.format == "json") {
            nlohmann::json j = {{"n", n},
                                {"k", k},
                                {"t", t},
                                {"hill_alpha", hill_alpha},
                                {"alpha_hat", fit ? fit->alpha_hat : nan},
                                {"beta_hat", fit ? fit->beta_hat : nan},
                                {"c_hat", fit ? fit->c_hat : nan},
                                {"d_hat", fit ? fit->d_hat : nan},
                                {"cte_old", old_est ? old_est->value : nan},
                                {"cte_new", cte_new_value},
                                {"sigma2", sig2 ? nlohmann::json(*sig2) : nlohmann::json()},
                                {"converged", fit.has_value()},
                                {"iterations", fit ? fit->iterations : 0},
                                {"residual_norm", fit ? fit->residual_norm : nan},
                                {"near_boundary", new_est ? new_est->near_boundary : false},
                                {"fallback_used", fell_back}};
            os << j.dump(2) << '\n';
            return;
        }
        auto row = [&os](const char* key, const std::string& value) {
            os << key << ',' << value << '\n';
        };
        os << "field,value\n";
        row("n", std::to_string(n));
        row("k", std::to_string(k));
        row("t", format_number(t));
        row("hill_alpha", format_number(hill_alpha));
        row("alpha_hat", format_number(fit ? fit->alpha_hat : nan));
        row("beta_hat", format_number(fit ? fit->beta_hat : nan));
        row("c_hat", format_number(fit ? fit->c_hat : nan));
        row("d_hat", format_number(fit ? fit->d_hat : nan));
        row("cte_old", format_number(old_est ? old_est->value : nan));
        row("cte_new", format_number(cte_new_value));
        if (sig2) row("sigma2", format_number(*sig2));
        row("converged", fit ? "true" : "false");
        row("iterations", std::to_string(fit ? fit->iterations : 0));
        row("residual_norm", format_number(fit ? fit->residual_norm : nan));
        row("near_boundary", new_est && new_est->near_boundary ? "true" : "false");
        row("fallback_used", fell_back ? "true" : "false");
    });
    return sink_rc != kExitOk ? sink_rc : status;
}

/// `simulate`: bias and RMSE of both estimators over a grid of sample sizes and levels.
inline int cmd_simulate(const std::vector<std::string>& args, std::ostream& out,
                        std::ostream& err) {
    CLI::App app{"Monte Carlo comparison of the two estimators", "cte simulate"};
    detail::CommonOptions o;
    detail::ModelOptions m;
    std::vector<std::size_t> sizes = {250, 500, 1000, 2000};
    std::vector<double> levels = {0.9, 0.95};
    std::optional<std::size_t> k_flag;
    double eps = 0.25;
    detail::add_simulation_flags(app, o, m);
    app.add_option("--n", sizes, "Sample sizes, comma separated")->delimiter(',');
    app.add_option("--t", levels, "Levels t, comma separated")->delimiter(',');
    app.add_option("--k", k_flag, "Fixed k for every sample size");
    app.add_option("--epsilon", eps, "k = floor(n^(1 - epsilon))")->capture_default_str();
    detail::add_solver_flags(app, o);
    detail::add_output_flags(app, o);
    bool done = false;
    if (int rc = detail::parse_or_exit(app, args, out, err, done); done) return rc;

    std::vector<ExperimentReport> reports;
    try {
        const HeavyTailModel model = detail::build_model(m);
        if (!k_flag) detail::warn_epsilon(eps, err);
        for (std::size_t n : sizes) {
            ExperimentConfig cfg;
            cfg.model = model;
            cfg.n = n;
            cfg.reps = o.reps;
            cfg.t_levels = levels;
            cfg.k_rule = k_flag ? KRule{FixedK{*k_flag}} : KRule{EpsilonRule{eps}};
            cfg.seed = o.seed;
            cfg.fallback = o.fallback ? Fallback::old_on_failure : Fallback::none;
            cfg.level_policy = detail::policy_of(o);
            cfg.solver.min_ratio = o.min_ratio;
            cfg.workers = o.workers;
            reports.push_back(run_experiment(cfg));
        }
    } catch (const error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    for (const auto& r : reports) {
        for (const auto& c : r.cells) {
            if (c.failure_count > 0 || c.fallback_count > 0)
                err << "warning: n=" << r.n << " t=" << c.t << " " << to_string(c.method) << ": "
                    << c.failure_count << " failed, " << c.fallback_count
                    << " replaced by the classic estimate, out of " << r.reps << '\n';
        }
    }
    return detail::with_sink(o, out, err, [&](std::ostream& os) {
        if (o.format == "json")
            os << experiment_json(reports).dump(2) << '\n';
        else
            write_experiment_csv(os, reports);
    });
}

/// `ksweep`: Monte Carlo means of both estimators along a grid of k.
inline int cmd_ksweep(const std::vector<std::string>& args, std::ostream& out,
                      std::ostream& err) {
    CLI::App app{"Both estimators as functions of k", "cte ksweep"};
    detail::CommonOptions o;
    detail::ModelOptions m;
    std::size_t n = 1000;
    double t = 0.9;
    std::size_t kmin = 50;
    std::size_t kmax = 850;
    std::size_t step = 50;
    detail::add_simulation_flags(app, o, m);
    app.add_option("--n", n, "Sample size")->capture_default_str();
    app.add_option("--t", t, "Level t")->capture_default_str();
    app.add_option("--kmin", kmin, "Smallest k")->capture_default_str();
    app.add_option("--kmax", kmax, "Largest k")->capture_default_str();
    app.add_option("--step", step, "Grid step")->capture_default_str();
    detail::add_solver_flags(app, o);
    detail::add_output_flags(app, o);
    bool done = false;
    if (int rc = detail::parse_or_exit(app, args, out, err, done); done) return rc;

    KSweepCurve curve;
    try {
        ExperimentConfig cfg;
        cfg.model = detail::build_model(m);
        cfg.n = n;
        cfg.reps = o.reps;
        cfg.t_levels = {t};
        cfg.seed = o.seed;
        cfg.fallback = o.fallback ? Fallback::old_on_failure : Fallback::none;
        cfg.level_policy = detail::policy_of(o);
        cfg.solver.min_ratio = o.min_ratio;
        cfg.workers = o.workers;
        curve = k_sweep(cfg, kmin, kmax, step);
    } catch (const error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    for (const auto& row : curve.rows) {
        if (!row.valid)
            err << "warning: k=" << row.k << " skipped, t exceeds 1 - k/n\n";
        else if (row.failures_old > 0 || row.failures_new > 0)
            err << "warning: k=" << row.k << ": " << row.failures_old << " classic and "
                << row.failures_new << " bias-reduced failures out of " << o.reps << '\n';
    }
    return detail::with_sink(o, out, err, [&](std::ostream& os) {
        if (o.format == "json")
            os << sweep_json(curve).dump(2) << '\n';
        else
            write_sweep_csv(os, curve);
    });
}

inline void print_usage(std::ostream& os) {
    os << "usage: cte <estimate|simulate|ksweep> [options]\n"
          "       cte <command> --help for the options of a command\n";
}

/// Dispatches on the first argument.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    if (args.empty()) {
        print_usage(err);
        return kExitUsage;
    }
    const std::string& cmd = args.front();
    const std::vector<std::string> rest(args.begin() + 1, args.end());
    try {
        if (cmd == "estimate") return cmd_estimate(rest, out, err);
        if (cmd == "simulate") return cmd_simulate(rest, out, err);
        if (cmd == "ksweep") return cmd_ksweep(rest, out, err);
        if (cmd == "--help" || cmd == "-h") {
            print_usage(out);
            return kExitOk;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitEstimation;
    }
    err << "error: unknown command '" << cmd << "'\n";
    print_usage(err);
    return kExitUsage;
}

} // namespace cte::cli
