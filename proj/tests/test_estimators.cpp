#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "cte/distributions.hpp"
#include "cte/estimators.hpp"
#include "cte/rng.hpp"
#include "oracles.hpp"

using cte::HeavyTailModel;
using cte::LevelPolicy;

namespace {

cte::SortedSample one_to_ten() { return cte::make_sorted({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}); }

cte::SortedSample draw(const HeavyTailModel& m, std::size_t n, std::uint64_t seed) {
    return cte::sample(m, n, cte::UniformStream::child(seed, 7).next_u64());
}

/// A converged fit whose bias-reduced tail collapses onto the Weissman tail.
cte::TailFit weissman_equivalent_fit(const cte::SortedSample& s, std::size_t k, double alpha) {
    cte::TailFit f;
    f.k = k;
    f.n = s.size();
    f.threshold = s.threshold(k);
    f.alpha_hat = alpha;
    f.beta_hat = 2.0 * alpha;
    f.c_hat = f.fraction() * std::pow(f.threshold, alpha);
    f.d_hat = 0.0;
    f.converged = true;
    return f;
}

} // namespace

TEST(Sigma2, HandValues) {
    EXPECT_NEAR(cte::sigma2(1.5, 3.0), 628.0, 1e-9);
    EXPECT_GT(cte::sigma2(1.999, 3.0), 2000.0);
    EXPECT_NEAR(cte::sigma2(1.75, 3.5), 187.75, 0.01);
}

TEST(Sigma2, DomainErrors) {
    EXPECT_THROW(cte::sigma2(2.0, 3.0), cte::error);
    EXPECT_THROW(cte::sigma2(1.0, 3.0), cte::error);
    EXPECT_THROW(cte::sigma2(1.5, 1.5), cte::error);
    EXPECT_THROW(cte::sigma2(1.5, 1.2), cte::error);
}

TEST(Sigma2, PositiveWithPolesAtTheEdges) {
    for (double a = 1.05; a < 2.0; a += 0.05)
        for (double r = 1.1; r < 5.0; r += 0.3) EXPECT_GT(cte::sigma2(a, a * r), 0.0);
    EXPECT_GT(cte::sigma2(1.0 + 1e-4, 3.0), 1e12);
    EXPECT_GT(cte::sigma2(2.0 - 1e-6, 3.0), 1e6);
    EXPECT_GT(cte::sigma2(1.5, 1.5 + 1e-4), 1e12);
}

TEST(ChooseK, HandValues) {
    EXPECT_EQ(cte::choose_k(1000, 0.25).k, 177u);
    EXPECT_EQ(cte::choose_k(250, 0.25).k, 62u);
    EXPECT_EQ(cte::choose_k(500, 0.25).k, 105u);
    EXPECT_EQ(cte::choose_k(2000, 0.25).k, 299u);
    EXPECT_TRUE(cte::choose_k(1000, 0.25).epsilon_in_range);
    EXPECT_FALSE(cte::choose_k(1000, 0.1).epsilon_in_range);
    EXPECT_FALSE(cte::choose_k(1000, 1.0 / 3.0).epsilon_in_range);
}

TEST(ChooseK, ClampsSmallSamples) {
    const auto two = cte::choose_k(2, 0.25);
    EXPECT_EQ(two.k, 1u);
    EXPECT_FALSE(two.valid_for_cml);
    EXPECT_EQ(cte::choose_k(3, 0.9).k, 2u);
    EXPECT_TRUE(cte::choose_k(3, 0.9).valid_for_cml);
    EXPECT_EQ(cte::choose_k(10, 0.0).k, 9u);
    EXPECT_THROW(cte::choose_k(1, 0.25), cte::error);
}

TEST(CteOld, HandExample) {
    const auto est = cte::cte_old(one_to_ten(), 0.5, 2);
    EXPECT_NEAR(est.value, 8.0576, 0.0005);
    // Same number assembled from its parts.
    const double alpha = 1.0 / (0.5 * (std::log(10.0) + std::log(9.0)) - std::log(8.0));
    EXPECT_NEAR(est.alpha_hat, alpha, 1e-12);
    EXPECT_NEAR(est.value, (2.1 + 0.2 * alpha / (alpha - 1.0) * 8.0) / 0.5, 1e-12);
    EXPECT_FALSE(est.level_beyond_anchor);
}

TEST(CteOld, BoundaryLeavesOnlyTheTailTerm) {
    const auto s = one_to_ten();
    const double alpha = cte::hill(s, 2);
    const double t = 0.8 - 1e-12;
    const auto est = cte::cte_old(s, t, 2);
    EXPECT_NEAR(est.value * (1.0 - t), 0.2 * alpha * 8.0 / (alpha - 1.0), 1e-9);
    EXPECT_NEAR(cte::cte_old(s, 0.8, 2).value, alpha * 8.0 / (alpha - 1.0), 1e-9);
}

TEST(CteOld, LevelAboveAnchor) {
    const auto s = one_to_ten();
    try {
        cte::cte_old(s, 0.85, 2);
        FAIL() << "expected a level conflict";
    } catch (const cte::error& err) {
        EXPECT_EQ(err.code(), cte::errc::level_conflict);
    }
    const auto est = cte::cte_old(s, 0.85, 2, LevelPolicy::oriented);
    EXPECT_TRUE(est.level_beyond_anchor);
    const double alpha = est.alpha_hat;
    EXPECT_NEAR(est.value, (-0.05 * 9.0 + 0.2 * alpha * 8.0 / (alpha - 1.0)) / 0.15, 1e-12);
}

TEST(CteOld, InfiniteMeanTail) {
    // Hill on a steep geometric top gives alpha_hat below 1.
    const auto s = cte::make_sorted({1, 2, 3, 4, 5, 6, 7, 8, 100, 10000});
    try {
        cte::cte_old(s, 0.5, 2);
        FAIL() << "expected an infinite-mean error";
    } catch (const cte::error& err) {
        EXPECT_EQ(err.code(), cte::errc::infinite_mean);
    }
}

TEST(CteOld, ParetoMonteCarlo) {
    const auto m = HeavyTailModel::pareto(1.5);
    double sum = 0.0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) sum += cte::cte_old(draw(m, 2000, seed), 0.9, 177).value;
    const double truth = oracle::pareto_cte(1.5, 0.9);
    EXPECT_NEAR(sum / 200.0, truth, 0.15 * truth);
}

TEST(CteOld, PositiveHomogeneity) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto s = draw(HeavyTailModel::frechet(1.5), 1000, seed);
        const double base = cte::cte_old(s, 0.8, 177).value;
        for (double c : {0.25, 2.0, 64.0}) EXPECT_EQ(cte::cte_old(s.scaled(c), 0.8, 177).value, c * base);
        for (double c : {0.3, 3.7, 1e5})
            EXPECT_NEAR(cte::cte_old(s.scaled(c), 0.8, 177).value, c * base, 1e-12 * c * base);
    }
}

TEST(CteNew, ReducesToClassicTail) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto s = draw(HeavyTailModel::frechet(1.75), 1000, seed);
        const std::size_t k = 100;
        const double alpha = 1.3 + 0.05 * static_cast<double>(seed);
        const auto fit = weissman_equivalent_fit(s, k, alpha);
        for (double t : {0.5, 0.8, 0.85}) {
            const double body = cte::partial_integral(s, t, 0.9);
            const double expect = (body + 0.1 * alpha * s.threshold(k) / (alpha - 1.0)) / (1.0 - t);
            EXPECT_NEAR(cte::cte_new(s, t, k, fit).value, expect, 1e-12 * expect);
        }
    }
}

TEST(CteNew, Preconditions) {
    const auto s = draw(HeavyTailModel::frechet(1.5), 1000, 1);
    auto fit = weissman_equivalent_fit(s, 100, 1.5);

    auto bad = fit;
    bad.alpha_hat = 0.9;
    try {
        cte::cte_new(s, 0.8, 100, bad);
        FAIL();
    } catch (const cte::error& err) {
        EXPECT_EQ(err.code(), cte::errc::infinite_mean);
    }
    bad = fit;
    bad.beta_hat = 1.4;
    EXPECT_THROW(cte::cte_new(s, 0.8, 100, bad), cte::error);
    bad = fit;
    bad.c_hat = 0.0;
    try {
        cte::cte_new(s, 0.8, 100, bad);
        FAIL();
    } catch (const cte::error& err) {
        EXPECT_EQ(err.code(), cte::errc::unusable_fit);
    }
    bad = fit;
    bad.converged = false;
    EXPECT_THROW(cte::cte_new(s, 0.8, 100, bad), cte::error);
    EXPECT_THROW(cte::cte_new(s, 0.8, 120, fit), cte::error);
    EXPECT_THROW(cte::cte_new(s, 0.95, 100, fit), cte::error);
    EXPECT_NO_THROW(cte::cte_new(s, 0.95, 100, fit, LevelPolicy::oriented));
}

TEST(CteNew, VarianceAttachment) {
    const auto s = draw(HeavyTailModel::frechet(1.5), 1000, 2);
    const auto in_range = cte::cte_new(s, 0.8, 100, weissman_equivalent_fit(s, 100, 1.5));
    ASSERT_TRUE(in_range.sigma2.has_value());
    EXPECT_NEAR(*in_range.sigma2, 628.0, 1e-9);
    EXPECT_FALSE(in_range.sigma2_omitted);
    ASSERT_TRUE(in_range.scale_factor.has_value());
    const double expect_scale =
        std::sqrt(0.1) * std::pow(in_range.fit->c_hat / 0.1, 1 / 1.5) / (0.2 * std::sqrt(1000.0));
    EXPECT_NEAR(*in_range.scale_factor, expect_scale, 1e-12 * expect_scale);

    const auto outside = cte::cte_new(s, 0.8, 100, weissman_equivalent_fit(s, 100, 2.4));
    EXPECT_FALSE(outside.sigma2.has_value());
    EXPECT_TRUE(outside.sigma2_omitted);
}

TEST(CteNew, FlagsNearBoundaryFits) {
    const auto s = draw(HeavyTailModel::frechet(1.5), 1000, 3);
    auto fit = weissman_equivalent_fit(s, 100, 1.5);
    fit.beta_hat = 1.52;
    EXPECT_TRUE(cte::cte_new(s, 0.8, 100, fit).near_boundary);
    fit.beta_hat = 3.0;
    EXPECT_FALSE(cte::cte_new(s, 0.8, 100, fit).near_boundary);
}

TEST(Estimators, MonotoneInUpperOrderStatistics) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto s = draw(HeavyTailModel::frechet(1.5), 500, seed);
        const std::size_t n = s.size();
        const std::size_t k = 50;
        const auto fit = weissman_equivalent_fit(s, k, 1.6);
        // X_{n-1:n} inside the tail block, and one order statistic inside the body.
        for (std::size_t i : {n - 1, n - k - 10}) {
            const double room = s.order_stat(i + 1) - s.order_stat(i);
            const auto bumped = s.with_order_stat(i, s.order_stat(i) + 0.5 * room);
            EXPECT_GE(cte::cte_old(bumped, 0.8, k).value, cte::cte_old(s, 0.8, k).value);
            EXPECT_GE(cte::cte_new(bumped, 0.8, k, fit).value, cte::cte_new(s, 0.8, k, fit).value);
        }
    }
}

TEST(CteNew, FrechetTableMean) {
    const auto m = HeavyTailModel::frechet(1.75);
    const std::size_t n = 2000;
    const std::size_t k = cte::choose_k(n, 0.25).k;
    double sum = 0.0;
    std::size_t ok = 0;
    for (std::uint64_t r = 0; r < 1000; ++r) {
        cte::UniformStream stream = cte::UniformStream::child(42, r);
        const auto s = cte::sample(m, n, stream);
        try {
            const auto fit = cte::cml_fit(s, k);
            sum += cte::cte_new(s, 0.9, k, fit, LevelPolicy::oriented).value;
            ++ok;
        } catch (const cte::error&) {
        }
    }
    ASSERT_GT(ok, 0u);
    EXPECT_NEAR(sum / static_cast<double>(ok), 8.6504, 0.02 * 8.6504);
}
