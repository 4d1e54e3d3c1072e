#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>

#include "cte/empirical.hpp"
#include "cte/error.hpp"
#include "cte/tail_inference.hpp"

namespace cte {

enum class Method { classic, bias_reduced };

/// "old" (Weissman/Hill tail) and "new" (bias-reduced tail) in reports.
inline const char* to_string(Method m) noexcept {
    return m == Method::classic ? "old" : "new";
}

/// How a level t at or above the anchor 1 - k/n is treated.
///  strict:   t > 1 - k/n is rejected with errc::level_conflict.
///  oriented: the empirical piece is the signed integral from t to 1 - k/n,
///            so the extrapolated tail mass beyond t is kept and the stretch
///            (1 - k/n, t) is subtracted.
enum class LevelPolicy { strict, oriented };

/// Beta/alpha ratio below which a fit is reported as close to the boundary.
inline constexpr double kNearBoundaryRatio = 1.05;

struct CteEstimate {
    double value = 0.0;
    Method method = Method::classic;
    double t = 0.0;
    std::size_t k = 0;
    std::size_t n = 0;
    double alpha_hat = 0.0;              // Hill for the classic method, CML otherwise
    std::optional<TailFit> fit;          // set for the bias-reduced method
    std::optional<double> sigma2;        // only when alpha_hat lies in (1, 2)
    std::optional<double> scale_factor;  // (k/n)^(1/2) (n c/k)^(1/alpha) / ((1-t) sqrt(n))
    bool sigma2_omitted = false;
    bool near_boundary = false;          // beta_hat / alpha_hat < kNearBoundaryRatio
    bool level_beyond_anchor = false;    // t > 1 - k/n, oriented integral used
};

/// Asymptotic variance of the standardized bias-reduced estimator.
inline double sigma2(double alpha, double beta) {
    if (!(alpha > 1.0)) detail::fail(errc::domain, "sigma2: alpha must exceed 1");
    if (!(alpha < 2.0)) detail::fail(errc::domain, "sigma2: alpha must be below 2");
    if (!(beta > alpha)) detail::fail(errc::domain, "sigma2: beta must exceed alpha");
    const double am1 = alpha - 1.0;
    const double amb = alpha - beta;
    const double am1_2 = am1 * am1;
    const double amb_2 = amb * amb;
    const double beta_2 = beta * beta;
    return alpha * alpha * beta_2 * beta_2 / (am1_2 * am1_2 * amb_2 * amb_2) +
           2.0 / (2.0 - alpha) + 2.0 * alpha * beta_2 / (am1_2 * amb_2);
}

struct KChoice {
    std::size_t k = 0;
    bool epsilon_in_range = true; // epsilon in (1/5, 1/3)
    bool valid_for_cml = true;    // k >= 2
};

/// k = floor(n^(1 - epsilon)), clamped to [2, n - 1].
inline KChoice choose_k(std::size_t n, double epsilon) {
    if (n < 2) detail::fail(errc::domain, "choose_k: n must be at least 2");
    KChoice out;
    const double raw = std::pow(static_cast<double>(n), 1.0 - epsilon);
    // Absorb pow() rounding just below an exact integer.
    const double floored = std::floor(raw * (1.0 + 1e-12));
    std::size_t k = floored < 2.0 ? 2 : static_cast<std::size_t>(floored);
    if (k > n - 1) k = n - 1;
    out.k = k;
    out.epsilon_in_range = epsilon > 0.2 && epsilon < 1.0 / 3.0;
    out.valid_for_cml = k >= 2;
    return out;
}

namespace detail {

inline double empirical_piece(const SortedSample& s, double t, double fraction,
                              LevelPolicy policy, bool& beyond) {
    if (!(t > 0.0 && t < 1.0)) fail(errc::domain, "t must lie in (0, 1)");
    const double anchor = 1.0 - fraction;
    beyond = t > anchor;
    if (beyond && policy == LevelPolicy::strict)
        fail(errc::level_conflict, "t = " + std::to_string(t) + " exceeds 1 - k/n = " +
                                       std::to_string(anchor));
    return oriented_integral(s, t, anchor);
}

inline void require_finite_value(double v, const char* what) {
    if (!std::isfinite(v)) fail(errc::numerical_domain, std::string(what) + " is not finite");
}

} // namespace detail

/// Empirical body plus Weissman/Hill tail.
inline CteEstimate cte_old(const SortedSample& s, double t, std::size_t k,
                           LevelPolicy policy = LevelPolicy::strict) {
    const TailExcesses ex = tail_excesses(s, k);
    const double alpha = 1.0 / ex.mean;
    if (!(alpha > 1.0))
        detail::fail(errc::infinite_mean,
                     "cte_old: Hill estimate " + std::to_string(alpha) + " <= 1");
    CteEstimate est;
    est.method = Method::classic;
    est.t = t;
    est.k = k;
    est.n = s.size();
    est.alpha_hat = alpha;
    const double body = detail::empirical_piece(s, t, ex.fraction(), policy,
                                                est.level_beyond_anchor);
    const double tail = ex.fraction() * alpha * ex.threshold / (alpha - 1.0);
    est.value = (body + tail) / (1.0 - t);
    detail::require_finite_value(est.value, "cte_old");
    return est;
}

/// Empirical body plus the integrated bias-reduced tail quantile.
inline CteEstimate cte_new(const SortedSample& s, double t, std::size_t k, const TailFit& fit,
                           LevelPolicy policy = LevelPolicy::strict) {
    if (!fit.converged) detail::fail(errc::unusable_fit, "cte_new: fit did not converge");
    if (fit.k != k || fit.n != s.size())
        detail::fail(errc::domain, "cte_new: fit was computed for a different (k, n)");
    const double a = fit.alpha_hat;
    const double b = fit.beta_hat;
    if (!(a > 1.0))
        detail::fail(errc::infinite_mean, "cte_new: requires alpha_hat > 1 (got " +
                                              std::to_string(a) + ")");
    if (!(b > a))
        detail::fail(errc::domain, "cte_new: requires beta_hat > alpha_hat");
    if (!(fit.c_hat > 0.0))
        detail::fail(errc::unusable_fit, "cte_new: c_hat must be positive (got " +
                                             std::to_string(fit.c_hat) + ")");

    CteEstimate est;
    est.method = Method::bias_reduced;
    est.t = t;
    est.k = k;
    est.n = s.size();
    est.alpha_hat = a;
    est.fit = fit;
    est.near_boundary = b / a < kNearBoundaryRatio;

    const double frac = fit.fraction();
    const double body = detail::empirical_piece(s, t, frac, policy, est.level_beyond_anchor);
    const double level = std::pow(fit.c_hat / frac, 1.0 / a);
    const double correction =
        fit.d_hat * std::pow(fit.c_hat, -b / a) * std::pow(frac, b / a - 1.0) / (b - 1.0);
    const double tail = frac * level * (a / (a - 1.0) + correction);
    est.value = (body + tail) / (1.0 - t);
    detail::require_finite_value(est.value, "cte_new");

    const double dn = static_cast<double>(est.n);
    est.scale_factor = std::sqrt(frac) * level / ((1.0 - t) * std::sqrt(dn));
    if (a < 2.0)
        est.sigma2 = sigma2(a, b);
    else
        est.sigma2_omitted = true;
    return est;
}

} // namespace cte
