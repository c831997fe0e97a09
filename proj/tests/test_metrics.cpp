#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "phaselock/metrics.hpp"

using namespace phaselock;

namespace
{

std::vector<double> ramp(int n_flat, int n_ramp, int n_tail, double a)
{
    std::vector<double> x(n_flat, 0.0);
    for (int k = 1; k <= n_ramp; ++k)
        x.push_back(a * k / n_ramp);
    x.insert(x.end(), n_tail, a);
    return x;
}

} // namespace

TEST(NoiseStats, ReferenceRowValues)
{
    NoiseStats s;
    s.mean = 366.777;
    EXPECT_NEAR(std::sqrt(s.mean), 19.151, 0.001);
    EXPECT_NEAR(107.335 / 366.777, 0.293, 0.001);
}

TEST(NoiseStats, KnownSample)
{
    const std::vector<double> x{2, 4, 4, 4, 5, 5, 7, 9};
    const auto s = noise_stats(x);
    EXPECT_DOUBLE_EQ(s.mean, 5.0);
    EXPECT_NEAR(s.std, std::sqrt(32.0 / 7.0), 1e-12);
    EXPECT_NEAR(s.sigma_p, std::sqrt(5.0), 1e-12);
    ASSERT_TRUE(s.cv.has_value());
    EXPECT_NEAR(*s.cv, s.std / 5.0, 1e-12);
}

TEST(NoiseStats, ConstantSeries)
{
    const std::vector<double> x(20, 42.0);
    const auto s = noise_stats(x);
    EXPECT_EQ(s.std, 0.0);
    EXPECT_EQ(s.cv.value(), 0.0);
}

TEST(NoiseStats, ZeroMeanLeavesCvUndefined)
{
    const std::vector<double> x{-1, 1, -1, 1};
    EXPECT_FALSE(noise_stats(x).cv.has_value());
}

TEST(NoiseStats, IntervalSelection)
{
    std::vector<double> x;
    for (int i = 1; i <= 10; ++i)
        x.push_back(i);
    const auto s = noise_stats(x, IntervalSpec{3, 5});
    EXPECT_DOUBLE_EQ(s.mean, 4.0);
    EXPECT_THROW(noise_stats(x, IntervalSpec{9, 11}), ContractError);
    EXPECT_THROW(noise_stats(x, IntervalSpec{5, 5}), ContractError);
    EXPECT_THROW(noise_stats(x, IntervalSpec{6, 5}), ContractError);
    EXPECT_THROW(noise_stats(std::vector<double>{}), ContractError);
}

TEST(NoiseStats, IdentitiesAndScaling)
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(1, 5000);
    for (int trial = 0; trial < 100; ++trial)
    {
        std::vector<double> x(50);
        for (auto& v : x)
            v = u(rng);
        const auto s = noise_stats(x);
        EXPECT_NEAR(s.sigma_p, std::sqrt(s.mean), 1e-9 * s.sigma_p);
        EXPECT_NEAR(*s.cv, s.std / s.mean, 1e-9 * *s.cv);
        const double k = 1 + trial;
        auto y = x;
        for (auto& v : y)
            v *= k;
        const auto t = noise_stats(y);
        EXPECT_NEAR(t.mean, k * s.mean, 1e-9 * t.mean);
        EXPECT_NEAR(t.std, k * s.std, 1e-9 * t.std);
        EXPECT_NEAR(*t.cv, *s.cv, 1e-9);
    }
}

TEST(PercentDecrease, Values)
{
    EXPECT_NEAR(percent_decrease_noise(107.335, 77.065), 28.20, 0.01);
    EXPECT_NEAR(percent_decrease_noise(227.227, 65.155), 71.33, 0.01);
    EXPECT_EQ(percent_decrease_noise(12.5, 12.5), 0.0);
    EXPECT_DOUBLE_EQ(percent_decrease_time(10, 3), 70.0);
    EXPECT_EQ(percent_decrease_time(4, 4), 0.0);
    EXPECT_LT(percent_decrease_time(4, 6), 0.0);
}

TEST(PercentDecrease, ScaleInvariant)
{
    EXPECT_NEAR(percent_decrease_noise(107.335 * 7, 77.065 * 7), percent_decrease_noise(107.335, 77.065), 1e-9);
    EXPECT_NEAR(percent_decrease_time(0.1, 0.03), 70.0, 1e-9);
}

TEST(PercentDecrease, ZeroReferenceIsDomainError)
{
    EXPECT_THROW(percent_decrease_noise(0, 1), DomainError);
    EXPECT_THROW(percent_decrease_time(0, 1), DomainError);
    EXPECT_THROW(percent_decrease_time(-1, 1), DomainError);
}

TEST(RiseTime, LinearRamp)
{
    const auto x = ramp(20, 50, 40, 1000);
    const auto tr = rise_fall_time(x, IntervalSpec{1, static_cast<std::int64_t>(x.size())});
    EXPECT_NEAR(tr.duration, 0.8 * 50, 1e-9);
    EXPECT_DOUBLE_EQ(tr.baseline, 0);
    EXPECT_DOUBLE_EQ(tr.steady, 1000);
}

TEST(RiseTime, StepIsZero)
{
    std::vector<double> x(30, 100.0);
    x.insert(x.end(), 30, 900.0);
    const auto tr = rise_fall_time(x, IntervalSpec{1, 60});
    EXPECT_EQ(tr.duration, 0.0);
    EXPECT_NEAR(tr.t10, 30.5, 1e-9);
}

TEST(RiseTime, ExponentialApproach)
{
    for (double tau : {3.0, 7.5, 15.0})
    {
        std::vector<double> x(10, 200.0);
        for (int k = 0; k < 200; ++k)
            x.push_back(200 + 2500 * (1 - std::exp(-k / tau)));
        const auto tr = rise_fall_time(x, IntervalSpec{1, static_cast<std::int64_t>(x.size())});
        EXPECT_NEAR(tr.duration, tau * std::log(9.0), 1.0) << "tau " << tau;
    }
}

TEST(RiseTime, FallIsSymmetric)
{
    auto x = ramp(20, 50, 40, 1000);
    for (auto& v : x)
        v = 1000 - v;
    const auto tr = rise_fall_time(x, IntervalSpec{1, static_cast<std::int64_t>(x.size())});
    EXPECT_NEAR(tr.duration, 40, 1e-9);
    EXPECT_GT(tr.baseline, tr.steady);
}

TEST(RiseTime, OffsetInvariant)
{
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n(0, 20);
    auto x = ramp(30, 25, 50, 2000);
    for (auto& v : x)
        v += n(rng);
    const IntervalSpec iv{5, 100};
    const auto a = rise_fall_time(x, iv);
    for (auto& v : x)
        v += 12345;
    const auto b = rise_fall_time(x, iv);
    EXPECT_NEAR(a.duration, b.duration, 1e-6);
    EXPECT_NEAR(a.t10, b.t10, 1e-6);
}

TEST(RiseTime, FlatSeriesIsNoTransition)
{
    std::vector<double> x(50, 3.0);
    EXPECT_THROW(rise_fall_time(x, IntervalSpec{1, 50}), NoTransitionError);
}

TEST(RiseTime, TicksAreAbsolute)
{
    const auto x = ramp(20, 50, 40, 1000);
    const auto a = rise_fall_time(x, IntervalSpec{1, 110}, 1);
    const auto b = rise_fall_time(x, IntervalSpec{451, 560}, 451);
    EXPECT_NEAR(b.t10 - a.t10, 450, 1e-9);
    EXPECT_NEAR(a.duration, b.duration, 1e-12);
}

TEST(TimeImprovement, BothConventions)
{
    const std::vector<double> po{10, 20};
    const std::vector<double> ad{3, 16};
    const auto r = summarize_time_improvement(po, ad);
    EXPECT_NEAR(r.mean_of_deltas, (70.0 + 20.0) / 2, 1e-12);
    EXPECT_NEAR(r.delta_of_means, 100.0 * (15 - 9.5) / 15, 1e-12);
    EXPECT_THROW(summarize_time_improvement(po, std::vector<double>{1}), ContractError);
}

TEST(Visibility, Values)
{
    EXPECT_DOUBLE_EQ(visibility(3000, 0), 1.0);
    EXPECT_NEAR(visibility(1500 * 1.9, 1500 * 0.1), 0.9, 1e-15);
    EXPECT_THROW(visibility(0, 0), DomainError);
    EXPECT_THROW(visibility(5, 10), DomainError);
    EXPECT_THROW(visibility(5, -1), DomainError);
}

TEST(Visibility, RobustExtremaTrimOutliers)
{
    std::vector<double> x(100, 500.0);
    for (int i = 0; i < 50; ++i)
        x[i] = 100.0;
    x[70] = 10000;
    const auto e = robust_extrema(x, 0.05);
    EXPECT_DOUBLE_EQ(e.min, 100.0);
    EXPECT_DOUBLE_EQ(e.max, (10000.0 + 4 * 500.0) / 5);
}

TEST(Visibility, FringeScanRecoversContrast)
{
    std::vector<double> x;
    for (int k = 0; k < 2000; ++k)
        x.push_back(1500 * (1 + 0.9 * std::cos((2 * std::numbers::pi) * k / 200.0)));
    EXPECT_NEAR(fringe_visibility(x, 0.01), 0.9, 0.002);
}

TEST(Visibility, LockedPortContrast)
{
    const std::vector<double> hi(10, 2850.0), lo(10, 150.0);
    EXPECT_NEAR(locked_visibility(hi, lo), 0.9, 1e-12);
    EXPECT_LT(locked_visibility(lo, hi), 0.0);
}

TEST(DetectTransitions, FindsSteps)
{
    std::vector<double> x(100, 100.0);
    for (int i = 50; i < 100; ++i)
        x[i] = 1000;
    const auto iv = detect_transitions(x, 5, 200);
    ASSERT_EQ(iv.size(), 1u);
    EXPECT_LE(iv[0].t_start, 51);
    EXPECT_GE(iv[0].t_end, 51);
    EXPECT_TRUE(detect_transitions(std::vector<double>(40, 1.0), 5, 0.5).empty());
}
