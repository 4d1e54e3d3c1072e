#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cte/empirical.hpp"
#include "cte/error.hpp"

namespace cte {

/// Log-excesses log(X_{n-i+1:n} / X_{n-k:n}), i = 1..k, over the threshold X_{n-k:n}.
struct TailExcesses {
    std::size_t k = 0;
    std::size_t n = 0;
    double threshold = 0.0;
    double mean = 0.0; // M, the mean log-excess
    std::vector<double> log_excess;

    double fraction() const noexcept {
        return static_cast<double>(k) / static_cast<double>(n);
    }
};

inline TailExcesses tail_excesses(const SortedSample& s, std::size_t k) {
    const std::size_t n = s.size();
    if (k < 1 || k >= n)
        detail::fail(errc::domain, "k must satisfy 1 <= k < n (k=" + std::to_string(k) +
                                       ", n=" + std::to_string(n) + ")");
    TailExcesses out;
    out.k = k;
    out.n = n;
    out.threshold = s.threshold(k);
    if (!(out.threshold > 0.0))
        detail::fail(errc::degenerate_sample, "threshold X_{n-k:n} must be positive");
    out.log_excess.resize(k);
    detail::CompensatedSum sum;
    for (std::size_t i = 1; i <= k; ++i) {
        // Ratio first: scaling the sample by a power of two leaves it bit-identical.
        const double l = std::log(s.order_stat(n - i + 1) / out.threshold);
        out.log_excess[i - 1] = l;
        sum.add(l);
    }
    out.mean = sum.value() / static_cast<double>(k);
    if (!(out.mean > 0.0))
        detail::fail(errc::degenerate_sample, "top k+1 order statistics are all equal");
    return out;
}

/// Hill estimator of the tail index: reciprocal mean log-excess.
inline double hill(const SortedSample& s, std::size_t k) {
    return 1.0 / tail_excesses(s, k).mean;
}

/// Value of the censored-ML system at (alpha, beta).
struct CmlSystemState {
    double h_value = 0.0;      // H(alpha) = 1/alpha - M
    std::vector<double> g;     // G_i(alpha, beta)
    std::array<double, 2> residuals{};
    bool admissible = false;   // every G_i > 0 and beta > alpha > 0

    double residual_norm() const noexcept {
        return std::max(std::abs(residuals[0]), std::abs(residuals[1]));
    }
};

inline CmlSystemState evaluate_cml_system(const TailExcesses& ex, double alpha, double beta) {
    CmlSystemState st;
    st.h_value = 1.0 / alpha - ex.mean;
    if (!(beta > alpha && alpha > 0.0) || !std::isfinite(beta)) return st;

    const double gamma = alpha * beta / (alpha - beta) * st.h_value;
    const double slope = alpha / beta * (1.0 + gamma);
    const double theta = beta - alpha;
    st.g.resize(ex.k);
    detail::CompensatedSum inv_sum;
    detail::CompensatedSum weighted_sum;
    bool positive = true;
    for (std::size_t i = 0; i < ex.k; ++i) {
        const double l = ex.log_excess[i];
        const double gi = slope * std::exp(theta * l) - gamma;
        st.g[i] = gi;
        if (!(gi > 0.0) || !std::isfinite(gi)) positive = false;
        inv_sum.add(1.0 / gi);
        weighted_sum.add(l / gi);
    }
    const double dk = static_cast<double>(ex.k);
    st.residuals[0] = inv_sum.value() / dk - 1.0;
    st.residuals[1] = weighted_sum.value() / dk - 1.0 / beta;
    st.admissible = positive && std::isfinite(st.residuals[0]) && std::isfinite(st.residuals[1]);
    return st;
}

struct SolverOptions {
    double tolerance = 1e-10;
    int max_iterations = 100;
    int max_halvings = 30;
    std::optional<double> alpha0; // default: Hill
    std::optional<double> beta0;  // default: 2 * alpha0
    /// Retry from a fixed list of alternative starting points when the
    /// primary start fails or lands on a degenerate root.
    bool restarts = true;
    /// Roots with |beta*M - 1| or beta/alpha - 1 below this are degenerate.
    double degeneracy_margin = 1e-6;
    /// Also skip roots with beta/alpha below this. Off (1.0) by default: such
    /// fits are only flagged, see kNearBoundaryRatio in estimators.hpp.
    double min_ratio = 1.0;
};

/// Fitted tail parameters with solver diagnostics.
struct TailFit {
    std::size_t k = 0;
    std::size_t n = 0;
    double threshold = 0.0;
    double hill_alpha = 0.0;
    double alpha_hat = 0.0;
    double beta_hat = 0.0;
    double c_hat = 0.0;
    double d_hat = 0.0;
    double mean_log_excess = 0.0;
    bool converged = false;
    int iterations = 0;
    double residual_norm = std::numeric_limits<double>::infinity();
    int start_index = 0; // 0 = primary start

    double fraction() const noexcept {
        return static_cast<double>(k) / static_cast<double>(n);
    }
};

/// Thrown when no start reaches a root; carries the best iterate seen.
class CmlFitError : public error {
public:
    CmlFitError(errc code, const std::string& what, TailFit best)
        : error(code, what), best_(std::move(best)) {}

    const TailFit& best_iterate() const noexcept { return best_; }

private:
    TailFit best_;
};

/// (c_hat, d_hat) from the closed-form expressions in terms of alpha_hat, beta_hat
/// and the mean log-excess.
inline std::pair<double, double> hall_coefficients(const TailExcesses& ex, double alpha_hat,
                                                   double beta_hat) {
    if (alpha_hat == beta_hat)
        detail::fail(errc::singularity, "hall_coefficients: alpha_hat equals beta_hat");
    if (!(alpha_hat > 0.0 && beta_hat > 0.0))
        detail::fail(errc::domain, "hall_coefficients: estimates must be positive");
    const double pre = alpha_hat * beta_hat / (alpha_hat - beta_hat) * ex.fraction();
    const double c_hat = pre * std::pow(ex.threshold, alpha_hat) * (1.0 / beta_hat - ex.mean);
    const double d_hat = pre * std::pow(ex.threshold, beta_hat) * (1.0 / alpha_hat - ex.mean);
    return {c_hat, d_hat};
}

inline std::pair<double, double> hall_coefficients(const SortedSample& s, std::size_t k,
                                                   double alpha_hat, double beta_hat) {
    return hall_coefficients(tail_excesses(s, k), alpha_hat, beta_hat);
}

namespace detail {

// Newton runs in y = (log alpha, log(beta - alpha)), so beta > alpha > 0 always.
inline std::pair<double, double> from_solver_coords(const std::array<double, 2>& y) {
    const double alpha = std::exp(y[0]);
    return {alpha, alpha + std::exp(y[1])};
}

struct DeflatedPoint {
    CmlSystemState state;
    std::array<double, 2> deflated{}; // residuals / (beta*M - 1)
    double deflated_norm = std::numeric_limits<double>::infinity();
    bool ok = false;
};

// Every point on the line beta = 1/M solves the system (all G_i = 1), and the
// residual carries (beta*M - 1) as a factor. Newton runs on the quotient so
// that line stops attracting the iteration.
inline DeflatedPoint deflated_eval(const TailExcesses& ex, const std::array<double, 2>& y) {
    DeflatedPoint p;
    if (!std::isfinite(y[0]) || !std::isfinite(y[1]) || std::abs(y[0]) > 50.0 ||
        std::abs(y[1]) > 50.0)
        return p;
    const auto [alpha, beta] = from_solver_coords(y);
    p.state = evaluate_cml_system(ex, alpha, beta);
    if (!p.state.admissible) return p;
    const double factor = beta * ex.mean - 1.0;
    if (factor == 0.0) return p;
    p.deflated = {p.state.residuals[0] / factor, p.state.residuals[1] / factor};
    p.deflated_norm = std::max(std::abs(p.deflated[0]), std::abs(p.deflated[1]));
    p.ok = std::isfinite(p.deflated_norm);
    return p;
}

struct NewtonOutcome {
    bool converged = false;
    bool domain_failure = false;
    int iterations = 0;
    std::array<double, 2> y{};
    CmlSystemState state;
};

inline NewtonOutcome damped_newton(const TailExcesses& ex, double alpha0, double beta0,
                                   const SolverOptions& opts) {
    NewtonOutcome out;
    out.y = {std::log(alpha0), std::log(beta0 - alpha0)};
    DeflatedPoint cur = deflated_eval(ex, out.y);
    if (!cur.ok) {
        out.domain_failure = true;
        return out;
    }
    out.state = cur.state;

    for (int it = 0; it <= opts.max_iterations; ++it) {
        out.iterations = it;
        if (cur.state.residual_norm() <= opts.tolerance && cur.deflated_norm <= opts.tolerance) {
            out.converged = true;
            return out;
        }
        if (it == opts.max_iterations) break;

        // Central-difference Jacobian of the deflated residual.
        double jac[2][2];
        for (int j = 0; j < 2; ++j) {
            const double h = 1e-6 * std::max(1.0, std::abs(out.y[j]));
            auto yp = out.y;
            auto ym = out.y;
            yp[j] += h;
            ym[j] -= h;
            const DeflatedPoint fp = deflated_eval(ex, yp);
            const DeflatedPoint fm = deflated_eval(ex, ym);
            if (!fp.ok || !fm.ok) {
                out.domain_failure = true;
                return out;
            }
            for (int r = 0; r < 2; ++r) jac[r][j] = (fp.deflated[r] - fm.deflated[r]) / (2.0 * h);
        }
        const double det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if (!(std::abs(det) > 0.0) || !std::isfinite(det)) return out;
        const std::array<double, 2> step = {
            -(jac[1][1] * cur.deflated[0] - jac[0][1] * cur.deflated[1]) / det,
            -(-jac[1][0] * cur.deflated[0] + jac[0][0] * cur.deflated[1]) / det};

        double scale = 1.0;
        bool accepted = false;
        bool saw_domain_violation = false;
        DeflatedPoint next;
        for (int halving = 0; halving <= opts.max_halvings; ++halving) {
            const std::array<double, 2> trial = {out.y[0] + scale * step[0],
                                                 out.y[1] + scale * step[1]};
            next = deflated_eval(ex, trial);
            if (next.ok && next.deflated_norm <= cur.deflated_norm) {
                out.y = trial;
                accepted = true;
                break;
            }
            if (!next.ok) saw_domain_violation = true;
            scale *= 0.5;
        }
        if (!accepted) {
            out.domain_failure = saw_domain_violation;
            return out;
        }
        cur = next;
        out.state = cur.state;
    }
    return out;
}

inline constexpr std::array<std::pair<double, double>, 10> kRestartGrid = {{
    {1.0, 2.0},   // primary: alpha0 = Hill, beta0 = 2 alpha0
    {1.0, 1.5},
    {1.0, 3.0},
    {0.75, 2.0},
    {1.25, 2.0},
    {1.0, 5.0},
    {0.75, 1.5},
    {1.25, 1.5},
    {0.5, 2.0},
    {1.0, 10.0},
}};

} // namespace detail

/// Joint (alpha, beta) estimate from the censored-ML equations, then (c, d).
/// Throws CmlFitError (non_convergence or numerical_domain) when no start
/// reaches a non-degenerate root.
inline TailFit cml_fit(const TailExcesses& ex, const SolverOptions& opts = {}) {
    if (ex.k < 2) detail::fail(errc::domain, "cml_fit requires k >= 2");

    TailFit fit;
    fit.k = ex.k;
    fit.n = ex.n;
    fit.threshold = ex.threshold;
    fit.mean_log_excess = ex.mean;
    fit.hill_alpha = 1.0 / ex.mean;

    const double base_alpha = opts.alpha0.value_or(fit.hill_alpha);
    const double base_ratio =
        opts.beta0 ? *opts.beta0 / base_alpha : detail::kRestartGrid[0].second;
    if (!(base_alpha > 0.0) || !(base_ratio > 1.0))
        detail::fail(errc::domain, "cml_fit: initial values need beta0 > alpha0 > 0");

    TailFit best = fit;
    bool primary_domain_failure = false;
    int total_iterations = 0;
    const std::size_t attempts = opts.restarts ? detail::kRestartGrid.size() : 1;

    for (std::size_t a = 0; a < attempts; ++a) {
        const double alpha0 = base_alpha * detail::kRestartGrid[a].first;
        const double ratio = a == 0 ? base_ratio : detail::kRestartGrid[a].second;
        const auto run = detail::damped_newton(ex, alpha0, alpha0 * ratio, opts);
        total_iterations += run.iterations;
        if (a == 0) primary_domain_failure = run.domain_failure;

        const auto [alpha, beta] = detail::from_solver_coords(run.y);
        const double norm = run.state.admissible ? run.state.residual_norm()
                                                 : std::numeric_limits<double>::infinity();
        if (norm < best.residual_norm) {
            best.alpha_hat = alpha;
            best.beta_hat = beta;
            best.residual_norm = norm;
            best.start_index = static_cast<int>(a);
        }
        if (!run.converged) continue;
        const bool degenerate = std::abs(beta * ex.mean - 1.0) <= opts.degeneracy_margin ||
                                beta / alpha - 1.0 <= opts.degeneracy_margin ||
                                beta / alpha < opts.min_ratio;
        if (degenerate) continue;

        fit.alpha_hat = alpha;
        fit.beta_hat = beta;
        fit.residual_norm = norm;
        fit.converged = true;
        fit.iterations = total_iterations;
        fit.start_index = static_cast<int>(a);
        std::tie(fit.c_hat, fit.d_hat) = hall_coefficients(ex, alpha, beta);
        return fit;
    }

    best.iterations = total_iterations;
    if (primary_domain_failure && attempts == 1)
        throw CmlFitError(errc::numerical_domain,
                          "cml_fit: damping could not keep every G_i positive", best);
    throw CmlFitError(errc::non_convergence,
                      "cml_fit: no non-degenerate root within " +
                          std::to_string(opts.max_iterations) + " iterations (best residual " +
                          std::to_string(best.residual_norm) + ")",
                      best);
}

inline TailFit cml_fit(const SortedSample& s, std::size_t k, const SolverOptions& opts = {}) {
    if (k < 2) detail::fail(errc::domain, "cml_fit requires k >= 2");
    return cml_fit(tail_excesses(s, k), opts);
}

/// Weissman extrapolation (k/n)^(1/alpha) X_{n-k:n} prob^(-1/alpha).
inline double weissman_quantile(double threshold, double fraction, double alpha_hat,
                                double prob) {
    if (!(prob > 0.0 && prob < 1.0))
        detail::fail(errc::domain, "weissman_quantile: prob must lie in (0, 1)");
    if (!(alpha_hat > 0.0)) detail::fail(errc::domain, "weissman_quantile: alpha_hat must be positive");
    return threshold * std::pow(fraction / prob, 1.0 / alpha_hat);
}

inline double weissman_quantile(const SortedSample& s, std::size_t k, double alpha_hat,
                                double prob) {
    const double fraction = static_cast<double>(k) / static_cast<double>(s.size());
    return weissman_quantile(s.threshold(k), fraction, alpha_hat, prob);
}

/// Bias-reduced extreme quantile Q(1 - prob) from a converged fit.
inline double li_quantile(const TailFit& fit, double prob) {
    if (!fit.converged) detail::fail(errc::unusable_fit, "li_quantile: fit did not converge");
    if (!(fit.c_hat > 0.0)) detail::fail(errc::unusable_fit, "li_quantile: c_hat must be positive");
    if (!(prob > 0.0 && prob < 1.0))
        detail::fail(errc::domain, "li_quantile: prob must lie in (0, 1)");
    const double a = fit.alpha_hat;
    const double b = fit.beta_hat;
    const double first_order = std::pow(fit.c_hat, 1.0 / a) * std::pow(prob, -1.0 / a);
    const double correction =
        fit.d_hat * std::pow(fit.c_hat, -b / a) * std::pow(prob, b / a - 1.0) / a;
    return first_order * (1.0 + correction);
}

} // namespace cte
