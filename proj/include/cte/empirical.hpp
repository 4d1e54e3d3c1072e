#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cte/error.hpp"

namespace cte {

/// Ascending-sorted loss sample. values()[i] is the order statistic X_{i+1:n}.
/// Immutable once built; negative values are allowed (gains).
class SortedSample {
public:
    /// Sorts `data` ascending. Throws on empty input or non-finite values.
    static SortedSample from_unsorted(std::vector<double> data) {
        if (data.empty())
            detail::fail(errc::degenerate_sample, "sample must be non-empty");
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (!std::isfinite(data[i]))
                detail::fail(errc::domain,
                             "non-finite value at position " + std::to_string(i));
        }
        std::stable_sort(data.begin(), data.end());
        return SortedSample(std::move(data));
    }

    std::size_t size() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }

    /// 1-based order statistic X_{i:n}.
    double order_stat(std::size_t i) const { return values_.at(i - 1); }

    /// X_{n-k:n}, the threshold used by the tail estimators.
    double threshold(std::size_t k) const { return order_stat(size() - k); }

    double max() const noexcept { return values_.back(); }

    /// Every value multiplied by `factor` (> 0 keeps the order).
    SortedSample scaled(double factor) const {
        if (!(factor > 0.0))
            detail::fail(errc::domain, "scale factor must be positive");
        std::vector<double> out(values_);
        for (double& v : out) v *= factor;
        return SortedSample(std::move(out));
    }

    /// Copy with X_{i:n} replaced by `value`; the caller keeps the order valid.
    SortedSample with_order_stat(std::size_t i, double value) const {
        std::vector<double> out(values_);
        out.at(i - 1) = value;
        if (!std::is_sorted(out.begin(), out.end()))
            detail::fail(errc::domain, "replacement breaks ascending order");
        return SortedSample(std::move(out));
    }

private:
    explicit SortedSample(std::vector<double> sorted) : values_(std::move(sorted)) {}

    std::vector<double> values_;
};

inline SortedSample make_sorted(std::vector<double> data) {
    return SortedSample::from_unsorted(std::move(data));
}

namespace detail {

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Index i (1-based) of the cell ((i-1)/n, i/n] containing p, p in (0, 1].
inline std::size_t cell_of(double p, std::size_t n) {
    const double np = static_cast<double>(n) * p;
    auto i = static_cast<std::size_t>(std::ceil(np));
    i = std::clamp<std::size_t>(i, 1, n);
    // Grid points computed as i/n may round a hair above i; pull them back.
    if (i > 1 && static_cast<double>(i - 1) / static_cast<double>(n) >= p) --i;
    if (i < n && static_cast<double>(i) / static_cast<double>(n) < p) ++i;
    return i;
}

} // namespace detail

/// Q_n(p) = X_{i:n} for p in ((i-1)/n, i/n].
inline double empirical_quantile(const SortedSample& s, double p) {
    if (!(p > 0.0 && p <= 1.0))
        detail::fail(errc::domain, "empirical_quantile: p must lie in (0, 1]");
    return s.order_stat(detail::cell_of(p, s.size()));
}

/// Exact integral of the step function Q_n over (lo, hi], 0 <= lo <= hi <= 1.
inline double partial_integral(const SortedSample& s, double lo, double hi) {
    if (!(lo >= 0.0 && hi <= 1.0))
        detail::fail(errc::domain, "partial_integral: bounds must lie in [0, 1]");
    if (lo > hi)
        detail::fail(errc::domain, "partial_integral: lo > hi");
    if (lo == hi) return 0.0;

    const std::size_t n = s.size();
    const double dn = static_cast<double>(n);
    // First cell with positive overlap: the one holding lo^+.
    std::size_t first = static_cast<std::size_t>(std::floor(dn * lo)) + 1;
    if (first > 1 && static_cast<double>(first - 1) / dn > lo) --first;
    if (first > n) first = n;
    const std::size_t last = detail::cell_of(hi, n);

    detail::CompensatedSum acc;
    for (std::size_t i = first; i <= last; ++i) {
        const double cell_lo = std::max(static_cast<double>(i - 1) / dn, lo);
        const double cell_hi = std::min(static_cast<double>(i) / dn, hi);
        if (cell_hi > cell_lo) acc.add(s.order_stat(i) * (cell_hi - cell_lo));
    }
    return acc.value();
}

/// Oriented integral of Q_n from `from` to `to`; negative when to < from.
inline double oriented_integral(const SortedSample& s, double from, double to) {
    return from <= to ? partial_integral(s, from, to) : -partial_integral(s, to, from);
}

} // namespace cte
