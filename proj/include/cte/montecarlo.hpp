#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "cte/distributions.hpp"
#include "cte/empirical.hpp"
#include "cte/error.hpp"
#include "cte/estimators.hpp"
#include "cte/rng.hpp"
#include "cte/tail_inference.hpp"

namespace cte {

struct FixedK {
    std::size_t k;
};

struct EpsilonRule {
    double epsilon;
};

using KRule = std::variant<FixedK, EpsilonRule>;

enum class Fallback { none, old_on_failure };

struct ExperimentConfig {
    HeavyTailModel model = HeavyTailModel::frechet(1.5);
    std::size_t n = 1000;
    std::size_t reps = 1000;
    std::vector<double> t_levels = {0.9};
    KRule k_rule = EpsilonRule{0.25};
    std::uint64_t seed = 42;
    std::vector<Method> estimators = {Method::classic, Method::bias_reduced};
    Fallback fallback = Fallback::none;
    LevelPolicy level_policy = LevelPolicy::oriented;
    SolverOptions solver{};
    unsigned workers = 1;
    bool keep_values = false; // retain per-replication estimates in the report
};

inline std::size_t resolve_k(const KRule& rule, std::size_t n) {
    if (const auto* fixed = std::get_if<FixedK>(&rule)) return fixed->k;
    return choose_k(n, std::get<EpsilonRule>(rule).epsilon).k;
}

/// Aggregates for one (t, estimator) pair.
struct ReportCell {
    double t = 0.0;
    Method method = Method::classic;
    std::size_t k = 0;
    double true_cte = 0.0;
    double mc_mean = std::numeric_limits<double>::quiet_NaN();
    double bias = std::numeric_limits<double>::quiet_NaN(); // mc_mean - true_cte
    double rmse = std::numeric_limits<double>::quiet_NaN();
    std::size_t successes = 0;
    std::size_t failure_count = 0;  // replications where the estimator erred
    std::size_t fallback_count = 0; // failures replaced by the classic estimate
    std::vector<double> values;     // per replication, NaN on failure (keep_values only)
};

struct ExperimentReport {
    HeavyTailModel model = HeavyTailModel::frechet(1.5);
    std::size_t n = 0;
    std::size_t reps = 0;
    std::size_t resolved_k = 0;
    std::vector<ReportCell> cells; // ordered by t, then by estimator
};

/// Estimator hook: returns the estimate for one replication or throws cte::error.
/// `fit` is the replication's CML fit (nullptr when it failed) and `fit_error`
/// the reason.
struct ReplicationContext {
    const SortedSample& sample;
    std::size_t k;
    double t;
    const TailFit* fit;
    const error* fit_error;
    LevelPolicy policy;
};

using EstimatorFn = std::function<double(Method, const ReplicationContext&)>;

inline double default_estimator(Method m, const ReplicationContext& ctx) {
    if (m == Method::classic) return cte_old(ctx.sample, ctx.t, ctx.k, ctx.policy).value;
    if (ctx.fit == nullptr) throw *ctx.fit_error;
    return cte_new(ctx.sample, ctx.t, ctx.k, *ctx.fit, ctx.policy).value;
}

namespace detail {

inline void validate(const ExperimentConfig& cfg, std::size_t k) {
    if (cfg.reps < 1) fail(errc::invalid_config, "reps must be at least 1");
    if (cfg.n < 3) fail(errc::invalid_config, "n must be at least 3");
    if (cfg.t_levels.empty()) fail(errc::invalid_config, "at least one level t is required");
    if (cfg.estimators.empty()) fail(errc::invalid_config, "at least one estimator is required");
    if (k < 2 || k >= cfg.n)
        fail(errc::invalid_config, "resolved k=" + std::to_string(k) + " outside [2, n-1]");
    for (double t : cfg.t_levels) {
        if (!(t > 0.0 && t < 1.0)) fail(errc::invalid_config, "levels must lie in (0, 1)");
        if (cfg.level_policy == LevelPolicy::strict &&
            t > 1.0 - static_cast<double>(k) / static_cast<double>(cfg.n))
            fail(errc::invalid_config, "level t=" + std::to_string(t) +
                                           " exceeds 1 - k/n under the strict policy");
    }
}

/// Runs body(r) for r in [0, reps) on `workers` threads. Each r writes only its own slot.
template <class Body>
void for_each_replication(std::size_t reps, unsigned workers, Body&& body) {
    const unsigned w = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(reps)));
    if (w == 1) {
        for (std::size_t r = 0; r < reps; ++r) body(r);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (unsigned id = 0; id < w; ++id) {
        pool.emplace_back([&, id] {
            for (std::size_t r = id; r < reps; r += w) body(r);
        });
    }
    for (auto& th : pool) th.join();
}

struct Outcome {
    double value = std::numeric_limits<double>::quiet_NaN();
    bool ok = false;
    bool fell_back = false;
};

inline Outcome evaluate(Method m, const ReplicationContext& ctx, const EstimatorFn& fn,
                        Fallback fallback) {
    Outcome out;
    try {
        out.value = fn(m, ctx);
        out.ok = std::isfinite(out.value);
    } catch (const error&) {
        out.ok = false;
    }
    if (!out.ok && m == Method::bias_reduced && fallback == Fallback::old_on_failure) {
        try {
            out.value = fn(Method::classic, ctx);
            out.ok = std::isfinite(out.value);
            out.fell_back = out.ok;
        } catch (const error&) {
            out.ok = false;
        }
    }
    if (!out.ok) out.value = std::numeric_limits<double>::quiet_NaN();
    return out;
}

/// Mean / bias / RMSE over successful entries, reduced in replication order.
inline void aggregate(ReportCell& cell, const std::vector<Outcome>& outcomes) {
    CompensatedSum sum;
    CompensatedSum sq;
    for (const Outcome& o : outcomes) {
        if (!o.ok) {
            ++cell.failure_count;
            continue;
        }
        ++cell.successes;
        if (o.fell_back) ++cell.fallback_count;
        sum.add(o.value);
        const double err = o.value - cell.true_cte;
        sq.add(err * err);
    }
    // Fallback replications are counted as failures of the requested estimator too.
    cell.failure_count += cell.fallback_count;
    if (cell.successes > 0) {
        const double cnt = static_cast<double>(cell.successes);
        cell.mc_mean = sum.value() / cnt;
        cell.bias = cell.mc_mean - cell.true_cte;
        cell.rmse = std::sqrt(sq.value() / cnt);
    }
}

struct FitSlot {
    std::optional<TailFit> fit;
    std::optional<error> err;
};

inline FitSlot fit_replication(const SortedSample& s, std::size_t k, const SolverOptions& opts) {
    FitSlot slot;
    try {
        slot.fit = cml_fit(s, k, opts);
    } catch (const error& e) {
        slot.err = e;
    }
    return slot;
}

} // namespace detail

/// Monte Carlo mean, bias and RMSE of the requested estimators. Replication r
/// draws from UniformStream::child(seed, r); the report does not depend on
/// `workers`.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg,
                                       const EstimatorFn& estimator = default_estimator) {
    const std::size_t k = resolve_k(cfg.k_rule, cfg.n);
    detail::validate(cfg, k);

    const bool needs_fit = std::find(cfg.estimators.begin(), cfg.estimators.end(),
                                     Method::bias_reduced) != cfg.estimators.end();
    const std::size_t levels = cfg.t_levels.size();
    const std::size_t methods = cfg.estimators.size();

    // outcomes[level][method][rep]
    std::vector<std::vector<std::vector<detail::Outcome>>> outcomes(
        levels, std::vector<std::vector<detail::Outcome>>(methods,
                                                          std::vector<detail::Outcome>(cfg.reps)));

    detail::for_each_replication(cfg.reps, cfg.workers, [&](std::size_t r) {
        UniformStream stream = UniformStream::child(cfg.seed, r);
        const SortedSample s = sample(cfg.model, cfg.n, stream);
        detail::FitSlot slot;
        if (needs_fit) slot = detail::fit_replication(s, k, cfg.solver);
        const error missing(errc::unusable_fit, "no fit");
        for (std::size_t li = 0; li < levels; ++li) {
            const ReplicationContext ctx{s,
                                         k,
                                         cfg.t_levels[li],
                                         slot.fit ? &*slot.fit : nullptr,
                                         slot.err ? &*slot.err : &missing,
                                         cfg.level_policy};
            for (std::size_t mi = 0; mi < methods; ++mi)
                outcomes[li][mi][r] =
                    detail::evaluate(cfg.estimators[mi], ctx, estimator, cfg.fallback);
        }
    });

    ExperimentReport report;
    report.model = cfg.model;
    report.n = cfg.n;
    report.reps = cfg.reps;
    report.resolved_k = k;
    for (std::size_t li = 0; li < levels; ++li) {
        const double truth = true_cte(cfg.model, cfg.t_levels[li]);
        for (std::size_t mi = 0; mi < methods; ++mi) {
            ReportCell cell;
            cell.t = cfg.t_levels[li];
            cell.method = cfg.estimators[mi];
            cell.k = k;
            cell.true_cte = truth;
            detail::aggregate(cell, outcomes[li][mi]);
            if (cfg.keep_values) {
                cell.values.reserve(cfg.reps);
                for (const auto& o : outcomes[li][mi]) cell.values.push_back(o.value);
            }
            report.cells.push_back(std::move(cell));
        }
    }
    return report;
}

struct KSweepRow {
    std::size_t k = 0;
    double mean_old = std::numeric_limits<double>::quiet_NaN();
    double mean_new = std::numeric_limits<double>::quiet_NaN();
    double true_cte = 0.0;
    std::size_t failures_old = 0;
    std::size_t failures_new = 0;
    bool valid = true; // false when t > 1 - k/n under the strict policy
};

struct KSweepCurve {
    std::size_t kmin = 0;
    std::size_t kmax = 0;
    std::size_t step = 1;
    double t = 0.0;
    std::vector<KSweepRow> rows;
};

/// Both estimators across a k grid at the first level of `cfg`. Replication r
/// uses the same sample for every k.
inline KSweepCurve k_sweep(const ExperimentConfig& cfg, std::size_t kmin, std::size_t kmax,
                           std::size_t step) {
    if (!(kmin >= 2 && kmin < kmax && kmax < cfg.n))
        detail::fail(errc::invalid_config, "k grid must satisfy 2 <= kmin < kmax < n");
    if (step < 1) detail::fail(errc::invalid_config, "step must be at least 1");
    if (cfg.reps < 1) detail::fail(errc::invalid_config, "reps must be at least 1");
    if (cfg.t_levels.empty()) detail::fail(errc::invalid_config, "a level t is required");
    const double t = cfg.t_levels.front();
    if (!(t > 0.0 && t < 1.0)) detail::fail(errc::invalid_config, "t must lie in (0, 1)");

    KSweepCurve curve;
    curve.kmin = kmin;
    curve.kmax = kmax;
    curve.step = step;
    curve.t = t;
    std::vector<std::size_t> grid;
    for (std::size_t k = kmin; k <= kmax; k += step) grid.push_back(k);

    const double truth = true_cte(cfg.model, t);
    // values[g][rep] for each method
    std::vector<std::vector<detail::Outcome>> olds(grid.size(),
                                                   std::vector<detail::Outcome>(cfg.reps));
    std::vector<std::vector<detail::Outcome>> news(grid.size(),
                                                   std::vector<detail::Outcome>(cfg.reps));
    std::vector<bool> valid(grid.size(), true);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double anchor = 1.0 - static_cast<double>(grid[g]) / static_cast<double>(cfg.n);
        valid[g] = !(cfg.level_policy == LevelPolicy::strict && t > anchor);
    }

    detail::for_each_replication(cfg.reps, cfg.workers, [&](std::size_t r) {
        UniformStream stream = UniformStream::child(cfg.seed, r);
        const SortedSample s = sample(cfg.model, cfg.n, stream);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            if (!valid[g]) continue;
            const std::size_t k = grid[g];
            detail::FitSlot slot = detail::fit_replication(s, k, cfg.solver);
            const error missing(errc::unusable_fit, "no fit");
            const ReplicationContext ctx{s,
                                         k,
                                         t,
                                         slot.fit ? &*slot.fit : nullptr,
                                         slot.err ? &*slot.err : &missing,
                                         cfg.level_policy};
            olds[g][r] = detail::evaluate(Method::classic, ctx, default_estimator, Fallback::none);
            news[g][r] =
                detail::evaluate(Method::bias_reduced, ctx, default_estimator, cfg.fallback);
        }
    });

    for (std::size_t g = 0; g < grid.size(); ++g) {
        KSweepRow row;
        row.k = grid[g];
        row.true_cte = truth;
        row.valid = valid[g];
        if (valid[g]) {
            ReportCell old_cell;
            old_cell.true_cte = truth;
            detail::aggregate(old_cell, olds[g]);
            ReportCell new_cell;
            new_cell.true_cte = truth;
            detail::aggregate(new_cell, news[g]);
            row.mean_old = old_cell.mc_mean;
            row.mean_new = new_cell.mc_mean;
            row.failures_old = old_cell.failure_count;
            row.failures_new = new_cell.failure_count;
        }
        curve.rows.push_back(row);
    }
    return curve;
}

} // namespace cte
