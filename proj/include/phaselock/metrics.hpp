#pragma once

// Performance statistics for counting time series: interval noise statistics
// against the Poisson reference, 10-90% transition times, percentage
// improvements and fringe visibility.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phaselock/error.hpp"

namespace phaselock
{

/// Closed tick interval [t_start, t_end].
struct IntervalSpec
{
    std::int64_t t_start = 0;
    std::int64_t t_end = 0;

    std::int64_t length() const { return t_end - t_start + 1; }

    friend bool operator==(const IntervalSpec&, const IntervalSpec&) = default;
};

struct NoiseStats
{
    double mean = 0;
    double std = 0;
    double sigma_p = 0;       ///< Poisson reference sqrt(mean)
    std::optional<double> cv; ///< std / mean; empty when mean == 0
};

struct Transition
{
    double baseline = 0;
    double steady = 0;
    double t10 = 0;
    double t90 = 0;
    double duration = 0;
};

namespace detail
{

// Samples of `series` (first sample at tick t0) that fall in the interval.
inline std::span<const double> slice(std::span<const double> series, IntervalSpec iv, std::int64_t t0)
{
    if (iv.t_start > iv.t_end)
        throw ContractError("interval start must not exceed its end");
    const std::int64_t first = iv.t_start - t0;
    const std::int64_t last = iv.t_end - t0;
    if (first < 0 || last >= static_cast<std::int64_t>(series.size()))
        throw ContractError("interval [" + std::to_string(iv.t_start) + ", " + std::to_string(iv.t_end) +
                            "] lies outside the series");
    return series.subspan(static_cast<std::size_t>(first), static_cast<std::size_t>(last - first + 1));
}

inline double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace detail

inline double mean_of(std::span<const double> x)
{
    if (x.empty())
        throw ContractError("mean of an empty series");
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Sample standard deviation (n - 1 denominator).
inline double sample_std(std::span<const double> x)
{
    if (x.size() < 2)
        throw ContractError("standard deviation needs at least two samples");
    const double m = mean_of(x);
    double ss = 0;
    for (double v : x)
        ss += (v - m) * (v - m);
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

inline NoiseStats noise_stats(std::span<const double> samples)
{
    if (samples.size() < 2)
        throw ContractError("noise statistics need at least two samples in the interval");
    NoiseStats s;
    s.mean = mean_of(samples);
    s.std = sample_std(samples);
    s.sigma_p = std::sqrt(s.mean);
    if (s.mean != 0)
        s.cv = s.std / s.mean;
    return s;
}

inline NoiseStats noise_stats(std::span<const double> series, IntervalSpec iv, std::int64_t t0 = 1)
{
    return noise_stats(detail::slice(series, iv, t0));
}

/// 100 (sigma_po - sigma_adaptive) / sigma_po. Positive means the adaptive run is quieter.
inline double percent_decrease_noise(double sigma_po, double sigma_adaptive)
{
    if (!(sigma_po > 0))
        throw DomainError("reference standard deviation must be > 0");
    return 100.0 * (sigma_po - sigma_adaptive) / sigma_po;
}

/// 100 (t_po - t_adaptive) / t_po.
inline double percent_decrease_time(double t_po, double t_adaptive)
{
    if (!(t_po > 0))
        throw DomainError("reference transition time must be > 0");
    return 100.0 * (t_po - t_adaptive) / t_po;
}

/// 10-90% transition time inside `iv`.
///
/// The baseline is the median of the first 10% of the interval and the final
/// level the median of the last 20%. Crossing instants are linearly
/// interpolated between ticks; when both crossings fall between the same pair
/// of ticks the transition is not resolved and collapses to a single instant.
inline Transition rise_fall_time(std::span<const double> series, IntervalSpec iv, std::int64_t t0 = 1)
{
    const auto x = detail::slice(series, iv, t0);
    const std::size_t n = x.size();
    if (n < 3)
        throw ContractError("transition interval needs at least three samples");
    const auto head = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(n))));
    const auto tail = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(n))));

    Transition tr;
    tr.baseline = detail::median({x.begin(), x.begin() + static_cast<std::ptrdiff_t>(head)});
    tr.steady = detail::median({x.end() - static_cast<std::ptrdiff_t>(tail), x.end()});
    const double swing = tr.steady - tr.baseline;
    if (swing == 0)
        throw NoTransitionError("no level change in interval [" + std::to_string(iv.t_start) + ", " +
                                std::to_string(iv.t_end) + "]");
    const double sign = swing > 0 ? 1.0 : -1.0;

    // First sample index at or past `level` (in the direction of the swing),
    // searching from `from`. Returns n when never reached.
    auto first_at = [&](double level, std::size_t from) {
        for (std::size_t i = from; i < n; ++i)
            if (sign * (x[i] - level) >= 0)
                return i;
        return n;
    };
    auto instant = [&](double level, std::size_t i) {
        const double t_i = static_cast<double>(iv.t_start) + static_cast<double>(i);
        if (i == 0 || x[i] == x[i - 1])
            return t_i;
        return t_i - 1.0 + (level - x[i - 1]) / (x[i] - x[i - 1]);
    };

    const double l10 = tr.baseline + 0.1 * swing;
    const double l90 = tr.baseline + 0.9 * swing;
    const std::size_t i10 = first_at(l10, 0);
    if (i10 == n)
        throw NoTransitionError("10% level never reached");
    const std::size_t i90 = first_at(l90, i10);
    if (i90 == n)
        throw NoTransitionError("90% level never reached");

    if (i10 == i90)
    {
        tr.t10 = tr.t90 = instant(tr.baseline + 0.5 * swing, i10);
    }
    else
    {
        tr.t10 = instant(l10, i10);
        tr.t90 = instant(l90, i90);
    }
    tr.duration = std::abs(tr.t90 - tr.t10);
    return tr;
}

/// Averages of per-interval transition times under both conventions for the
/// improvement: the percentage of the mean times, and the mean of per-interval
/// percentages.
struct TimeImprovement
{
    double mean_po = 0;
    double std_po = 0;
    double mean_adaptive = 0;
    double std_adaptive = 0;
    double delta_of_means = 0;
    double mean_of_deltas = 0;
    double std_of_deltas = 0;
};

inline TimeImprovement summarize_time_improvement(std::span<const double> t_po, std::span<const double> t_adaptive)
{
    if (t_po.size() != t_adaptive.size() || t_po.empty())
        throw ContractError("need matching, non-empty lists of transition times");
    TimeImprovement r;
    std::vector<double> deltas;
    for (std::size_t i = 0; i < t_po.size(); ++i)
        deltas.push_back(percent_decrease_time(t_po[i], t_adaptive[i]));
    r.mean_po = mean_of(t_po);
    r.mean_adaptive = mean_of(t_adaptive);
    r.delta_of_means = percent_decrease_time(r.mean_po, r.mean_adaptive);
    r.mean_of_deltas = mean_of(deltas);
    if (t_po.size() > 1)
    {
        r.std_po = sample_std(t_po);
        r.std_adaptive = sample_std(t_adaptive);
        r.std_of_deltas = sample_std(deltas);
    }
    return r;
}

/// Fringe visibility (max - min) / (max + min).
inline double visibility(double series_max, double series_min)
{
    if (!(series_min >= 0) || !(series_max >= series_min))
        throw DomainError("visibility requires max >= min >= 0");
    if (series_max + series_min == 0)
        throw DomainError("visibility undefined for max + min = 0");
    return (series_max - series_min) / (series_max + series_min);
}

struct Extrema
{
    double max = 0;
    double min = 0;
};

/// Means of the top and bottom `fraction` of the samples.
inline Extrema robust_extrema(std::span<const double> samples, double fraction = 0.05)
{
    if (samples.empty())
        throw ContractError("extrema of an empty series");
    std::vector<double> v(samples.begin(), samples.end());
    std::sort(v.begin(), v.end());
    const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(v.size()))));
    Extrema e;
    e.min = std::accumulate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), 0.0) / static_cast<double>(k);
    e.max = std::accumulate(v.end() - static_cast<std::ptrdiff_t>(k), v.end(), 0.0) / static_cast<double>(k);
    return e;
}

/// Visibility of a fringe scan (e.g. an uncontrolled drift segment) from its
/// trimmed extrema.
inline double fringe_visibility(std::span<const double> samples, double fraction = 0.05)
{
    const auto e = robust_extrema(samples, fraction);
    return visibility(e.max, e.min);
}

/// Visibility of a locked interferometer: mean of the port held at the
/// maximum against the mean of the complementary port over the same ticks.
/// Signed; negative when the lock sits on the wrong fringe.
inline double locked_visibility(std::span<const double> locked_port, std::span<const double> dark_port)
{
    const double hi = mean_of(locked_port);
    const double lo = mean_of(dark_port);
    if (hi + lo <= 0)
        throw DomainError("visibility undefined for max + min = 0");
    return (hi - lo) / (hi + lo);
}

/// Change-point detector on a rolling mean. A tick is flagged when the means
/// of the `half` samples before and after it differ by more than `threshold`;
/// each run of flagged ticks yields one interval padded by `half` on both
/// sides and clipped to the series.
inline std::vector<IntervalSpec> detect_transitions(std::span<const double> series, std::size_t half, double threshold,
                                                    std::int64_t t0 = 1)
{
    std::vector<IntervalSpec> out;
    if (half == 0 || series.size() < 2 * half + 1)
        return out;
    std::vector<double> prefix(series.size() + 1, 0.0);
    for (std::size_t i = 0; i < series.size(); ++i)
        prefix[i + 1] = prefix[i] + series[i];
    auto window_mean = [&](std::size_t a, std::size_t b) { return (prefix[b] - prefix[a]) / static_cast<double>(b - a); };

    const auto last = static_cast<std::int64_t>(series.size()) - 1 + t0;
    std::optional<IntervalSpec> open;
    for (std::size_t i = half; i + half <= series.size(); ++i)
    {
        const bool flagged = std::abs(window_mean(i, i + half) - window_mean(i - half, i)) > threshold;
        const auto t = static_cast<std::int64_t>(i) + t0;
        if (flagged)
        {
            if (!open)
                open = IntervalSpec{std::max(t0, t - static_cast<std::int64_t>(half)), t};
            open->t_end = std::min(last, t + static_cast<std::int64_t>(half));
        }
        else if (open)
        {
            out.push_back(*open);
            open.reset();
        }
    }
    if (open)
        out.push_back(*open);
    return out;
}

} // namespace phaselock
