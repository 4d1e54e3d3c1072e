#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "cte/empirical.hpp"
#include "cte/error.hpp"
#include "cte/rng.hpp"

namespace cte {

/// Second-order tail description 1 - F(x) = c x^-alpha + d x^-beta + o(x^-beta).
struct HallParameters {
    double alpha;
    double beta; // +inf when the model has no second-order term
    double c;
    double d;
};

enum class Family { frechet, burr, pareto };

inline const char* to_string(Family f) noexcept {
    switch (f) {
    case Family::frechet: return "frechet";
    case Family::burr: return "burr";
    case Family::pareto: return "pareto";
    }
    return "unknown";
}

inline double frechet_quantile(double p, double alpha) {
    if (!(p > 0.0 && p < 1.0))
        detail::fail(errc::domain, "frechet_quantile: p must lie in (0, 1)");
    if (!(alpha > 0.0)) detail::fail(errc::domain, "frechet_quantile: alpha must be positive");
    return std::pow(-std::log(p), -1.0 / alpha);
}

inline double burr_quantile(double p, double lambda, double tau) {
    if (!(p >= 0.0 && p < 1.0))
        detail::fail(errc::domain, "burr_quantile: p must lie in [0, 1)");
    if (!(lambda > 0.0 && tau > 0.0))
        detail::fail(errc::domain, "burr_quantile: lambda and tau must be positive");
    // (1-p)^(-1/lambda) - 1 without cancellation for small p.
    return std::pow(std::expm1(-std::log1p(-p) / lambda), 1.0 / tau);
}

/// A parametric heavy-tailed loss law. Models with tail index outside (1, 2)
/// can be built; `in_estimator_range()` flags them.
class HeavyTailModel {
public:
    static HeavyTailModel frechet(double alpha) {
        require_positive(alpha, "alpha");
        return HeavyTailModel(Family::frechet, alpha, 0.0);
    }

    static HeavyTailModel burr(double lambda, double tau) {
        require_positive(lambda, "lambda");
        require_positive(tau, "tau");
        return HeavyTailModel(Family::burr, lambda, tau);
    }

    /// Burr with a prescribed tail index: tau = alpha / lambda.
    static HeavyTailModel burr_with_tail_index(double alpha, double lambda) {
        require_positive(alpha, "alpha");
        require_positive(lambda, "lambda");
        return burr(lambda, alpha / lambda);
    }

    static HeavyTailModel pareto(double alpha) {
        require_positive(alpha, "alpha");
        return HeavyTailModel(Family::pareto, alpha, 0.0);
    }

    Family family() const noexcept { return family_; }

    /// Fréchet / Pareto: alpha. Burr: lambda.
    double first_param() const noexcept { return p1_; }
    /// Burr: tau. Zero otherwise.
    double second_param() const noexcept { return p2_; }

    double tail_index() const noexcept {
        return family_ == Family::burr ? p1_ * p2_ : p1_;
    }

    bool in_estimator_range() const noexcept {
        const double a = tail_index();
        return a > 1.0 && a < 2.0;
    }

    HallParameters hall() const noexcept {
        const double a = tail_index();
        switch (family_) {
        case Family::frechet: return {a, 2.0 * a, 1.0, -0.5};
        case Family::burr: return {a, p1_ * p2_ + p2_, 1.0, -p1_};
        case Family::pareto:
            return {a, std::numeric_limits<double>::infinity(), 1.0, 0.0};
        }
        return {a, 0.0, 0.0, 0.0};
    }

    double quantile(double p) const {
        switch (family_) {
        case Family::frechet: return frechet_quantile(p, p1_);
        case Family::burr: return burr_quantile(p, p1_, p2_);
        case Family::pareto:
            if (!(p >= 0.0 && p < 1.0))
                detail::fail(errc::domain, "pareto quantile: p must lie in [0, 1)");
            return std::exp(-std::log1p(-p) / p1_);
        }
        return 0.0;
    }

    /// Q(1 - u), evaluated from the exceedance probability u directly so that
    /// small u keeps full relative precision.
    double tail_quantile(double u) const {
        if (!(u > 0.0 && u <= 1.0))
            detail::fail(errc::domain, "tail_quantile: u must lie in (0, 1]");
        switch (family_) {
        case Family::frechet: return std::pow(-std::log1p(-u), -1.0 / p1_);
        case Family::burr: return std::pow(std::expm1(-std::log(u) / p1_), 1.0 / p2_);
        case Family::pareto: return std::pow(u, -1.0 / p1_);
        }
        return 0.0;
    }

    double cdf(double x) const {
        switch (family_) {
        case Family::frechet: return x <= 0.0 ? 0.0 : std::exp(-std::pow(x, -p1_));
        case Family::burr:
            return x <= 0.0 ? 0.0 : -std::expm1(-p1_ * std::log1p(std::pow(x, p2_)));
        case Family::pareto: return x <= 1.0 ? 0.0 : -std::expm1(-p1_ * std::log(x));
        }
        return 0.0;
    }

    std::string describe() const {
        std::string out = to_string(family_);
        if (family_ == Family::burr)
            out += "(lambda=" + std::to_string(p1_) + ", tau=" + std::to_string(p2_) + ")";
        else
            out += "(alpha=" + std::to_string(p1_) + ")";
        return out;
    }

private:
    HeavyTailModel(Family f, double p1, double p2) : family_(f), p1_(p1), p2_(p2) {}

    static void require_positive(double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            detail::fail(errc::domain, std::string(name) + " must be positive and finite");
    }

    Family family_;
    double p1_;
    double p2_;
};

namespace detail {

inline void require_finite_mean(const HeavyTailModel& m, double t) {
    if (!(m.tail_index() > 1.0))
        fail(errc::infinite_mean, "true_cte: tail index must exceed 1 for a finite mean");
    if (!(t > 0.0 && t < 1.0)) fail(errc::domain, "true_cte: t must lie in (0, 1)");
}

inline double tanh_sinh_integral(auto&& f, double a, double b) {
    static thread_local boost::math::quadrature::tanh_sinh<double> integrator(15);
    const double tol = 1e-13;
    double err = 0.0;
    double l1 = 0.0;
    return integrator.integrate(f, a, b, tol, &err, &l1);
}

} // namespace detail

/// (1/(1-t)) * integral of Q(1-u) over u in (0, 1-t), by tanh-sinh quadrature,
/// which absorbs the u^(-1/alpha) endpoint singularity.
inline double true_cte_by_quadrature(const HeavyTailModel& m, double t) {
    detail::require_finite_mean(m, t);
    const double tail_mass = 1.0 - t;
    const double integral = detail::tanh_sinh_integral(
        [&m](double u) { return u > 0.0 ? m.tail_quantile(u) : 0.0; }, 0.0, tail_mass);
    return integral / tail_mass;
}

/// C(t) = E[X | X > Q(t)] for the model.
inline double true_cte(const HeavyTailModel& m, double t) {
    detail::require_finite_mean(m, t);
    const double a = m.tail_index();
    switch (m.family()) {
    case Family::pareto: return std::pow(1.0 - t, -1.0 / a) * a / (a - 1.0);
    case Family::frechet: {
        // u = -ln s turns the integral into a lower incomplete gamma integrand.
        const double upper = -std::log(t);
        const double integral = detail::tanh_sinh_integral(
            [a](double u) { return u > 0.0 ? std::pow(u, -1.0 / a) * std::exp(-u) : 0.0; },
            0.0, upper);
        return integral / (1.0 - t);
    }
    case Family::burr: return true_cte_by_quadrature(m, t);
    }
    return 0.0;
}

/// n inverse-transform draws from `stream`, sorted ascending.
inline SortedSample sample(const HeavyTailModel& m, std::size_t n, UniformStream& stream) {
    if (n == 0) detail::fail(errc::domain, "sample: n must be at least 1");
    std::vector<double> draws(n);
    for (double& x : draws) x = m.tail_quantile(stream.next_open01());
    return SortedSample::from_unsorted(std::move(draws));
}

inline SortedSample sample(const HeavyTailModel& m, std::size_t n, std::uint64_t seed) {
    UniformStream stream(seed);
    return sample(m, n, stream);
}

} // namespace cte
