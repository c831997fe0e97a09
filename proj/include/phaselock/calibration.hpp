#pragma once

// Sawtooth self-adjustment of the circular constraint. A ramp is applied to
// one stretcher and the fringe it writes on the coincidence counts is
// classified; the ramp amplitude that writes exactly one fringe period sets
// [S_min, S_max].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "phaselock/error.hpp"
#include "phaselock/plant.hpp"

namespace phaselock
{

struct SawtoothConfig
{
    int offset = 0;     ///< lower word of the ramp
    int amplitude = 0;  ///< ramp height, AU
    int period = 64;    ///< ticks per ramp
    int ramps = 8;      ///< repetitions per measurement

    void validate() const
    {
        if (offset < 0)
            throw ConfigError("calibration.offset", "calibration.offset must be >= 0");
        if (amplitude < 0 || offset + amplitude > kDacMax)
            throw ConfigError("calibration.amplitude", "sawtooth offset + amplitude must be <= 4095");
        if (period < 8)
            throw ConfigError("calibration.period", "calibration.period must be >= 8");
        if (ramps < 2)
            throw ConfigError("calibration.ramps", "calibration.ramps must be >= 2");
    }
};

enum class ResponseClass
{
    Incomplete,
    Optimal,
    Discontinuous,
};

inline const char* to_string(ResponseClass c)
{
    switch (c)
    {
    case ResponseClass::Incomplete: return "Incomplete";
    case ResponseClass::Optimal: return "Optimal";
    case ResponseClass::Discontinuous: return "Discontinuous";
    }
    return "?";
}

inline int generate_sawtooth(const SawtoothConfig& cfg, std::uint64_t tick)
{
    const auto k = static_cast<std::int64_t>(tick % static_cast<std::uint64_t>(cfg.period));
    return cfg.offset + static_cast<int>(static_cast<std::int64_t>(cfg.amplitude) * k / cfg.period);
}

struct ClassifierOptions
{
    double eps_span = 0.03; ///< relative tolerance on the written phase span
    double eps_jump = 0.1;  ///< rad, largest phase step tolerated at the ramp reset
};

/// Per-ramp-phase average of a trace made of whole ramps.
inline std::vector<double> fold_ramps(std::span<const double> trace, int period)
{
    if (period < 1 || trace.size() < 2 * static_cast<std::size_t>(period))
        throw ContractError("trace must cover at least two full ramps");
    const auto p = static_cast<std::size_t>(period);
    const std::size_t ramps = trace.size() / p;
    std::vector<double> folded(p, 0.0);
    for (std::size_t r = 0; r < ramps; ++r)
        for (std::size_t j = 0; j < p; ++j)
            folded[j] += trace[r * p + j];
    for (auto& v : folded)
        v /= static_cast<double>(ramps);
    return folded;
}

namespace detail
{

// Residual sum of squares of the best fit y ~ a + b cos(w k) + c sin(w k).
inline double sinusoid_residual(std::span<const double> y, double w)
{
    double m[3][4] = {};
    double yy = 0;
    for (std::size_t k = 0; k < y.size(); ++k)
    {
        const double x[3] = {1.0, std::cos(w * static_cast<double>(k)), std::sin(w * static_cast<double>(k))};
        for (int i = 0; i < 3; ++i)
        {
            for (int j = 0; j < 3; ++j)
                m[i][j] += x[i] * x[j];
            m[i][3] += x[i] * y[k];
        }
        yy += y[k] * y[k];
    }
    double rhs[3] = {m[0][3], m[1][3], m[2][3]};
    // Gaussian elimination with partial pivoting on the normal equations.
    for (int c = 0; c < 3; ++c)
    {
        int piv = c;
        for (int r = c + 1; r < 3; ++r)
            if (std::abs(m[r][c]) > std::abs(m[piv][c]))
                piv = r;
        std::swap(m[c], m[piv]);
        if (std::abs(m[c][c]) < 1e-12)
            return yy;
        for (int r = c + 1; r < 3; ++r)
        {
            const double f = m[r][c] / m[c][c];
            for (int j = c; j < 4; ++j)
                m[r][j] -= f * m[c][j];
        }
    }
    double theta[3];
    for (int i = 2; i >= 0; --i)
    {
        double v = m[i][3];
        for (int j = i + 1; j < 3; ++j)
            v -= m[i][j] * theta[j];
        theta[i] = v / m[i][i];
    }
    return yy - (theta[0] * rhs[0] + theta[1] * rhs[1] + theta[2] * rhs[2]);
}

} // namespace detail

/// Phase written by one ramp: the frequency of the least-squares sinusoid
/// through the ramp-folded trace, times the ramp length. A coarse scan picks
/// the best span, golden-section search refines it. Empty when the modulation
/// of the folded trace is not above `noise_floor`.
inline std::optional<double> estimate_phase_span(std::span<const double> trace, int period, double noise_floor)
{
    const auto y = fold_ramps(trace, period);
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    if (*hi - *lo <= noise_floor)
        return std::nullopt;

    const double n = static_cast<double>(period);
    auto cost = [&](double span) { return detail::sinusoid_residual(y, span / n); };
    const double s_lo = 0.25 * std::numbers::pi;
    const double s_hi = std::min(16.0 * std::numbers::pi, 0.5 * std::numbers::pi * n);
    const double step = 0.02;
    double best = s_lo, best_cost = cost(s_lo);
    for (double s = s_lo + step; s <= s_hi; s += step)
    {
        const double c = cost(s);
        if (c < best_cost)
            best = s, best_cost = c;
    }

    double a = std::max(s_lo, best - step), b = std::min(s_hi, best + step);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - g * (b - a), x2 = a + g * (b - a);
    double f1 = cost(x1), f2 = cost(x2);
    for (int it = 0; it < 40; ++it)
    {
        if (f1 < f2)
        {
            b = x2, x2 = x1, f2 = f1;
            x1 = b - g * (b - a), f1 = cost(x1);
        }
        else
        {
            a = x1, x1 = x2, f1 = f2;
            x2 = a + g * (b - a), f2 = cost(x2);
        }
    }
    return 0.5 * (a + b);
}

inline ResponseClass classify_span(std::optional<double> span, const ClassifierOptions& opt = {})
{
    if (!span || *span < kTwoPi * (1.0 - opt.eps_span))
        return ResponseClass::Incomplete;
    if (*span > kTwoPi * (1.0 + opt.eps_span) || *span - kTwoPi > opt.eps_jump)
        return ResponseClass::Discontinuous;
    return ResponseClass::Optimal;
}

/// Classifies the response of a trace covering whole ramps of `period` ticks.
inline ResponseClass classify_response(std::span<const double> trace, int period, double noise_floor,
                                       const ClassifierOptions& opt = {})
{
    return classify_span(estimate_phase_span(trace, period, noise_floor), opt);
}

struct CalibrationOptions
{
    SawtoothConfig sweep;       ///< amplitude is chosen by the search
    int min_amplitude = 64;
    int hold_word = 0;          ///< word held on the other stretcher
    bool sweep_stretcher1 = false;
    Port port = Port::D1;
    ClassifierOptions classifier;
    int rounds = 12;
};

struct CalibrationProbe
{
    int amplitude = 0;
    std::optional<double> span;
    ResponseClass response = ResponseClass::Incomplete;
};

struct CalibrationResult
{
    int s_min = 0;
    int s_max = 0;
    double gain_estimate = 0; ///< rad per AU implied by the bounds
    std::vector<CalibrationProbe> probes;
};

class CalibrationError : public std::runtime_error
{
  public:
    CalibrationError(const std::string& what, CalibrationProbe below, CalibrationProbe above)
        : std::runtime_error(what), below_(below), above_(above)
    {
    }

    /// Bracketing measurements at the end of the search.
    const CalibrationProbe& below() const { return below_; }
    const CalibrationProbe& above() const { return above_; }

  private:
    CalibrationProbe below_;
    CalibrationProbe above_;
};

/// Plays `ramps` sawtooth periods into the plant and records the port counts.
template<class PlantT>
std::vector<double> record_sawtooth(PlantT& plant, const SawtoothConfig& saw, const CalibrationOptions& opt)
{
    std::vector<double> trace;
    const auto ticks = static_cast<std::uint64_t>(saw.period) * static_cast<std::uint64_t>(saw.ramps);
    trace.reserve(ticks);
    for (std::uint64_t t = 0; t < ticks; ++t)
    {
        const int word = generate_sawtooth(saw, t);
        const auto obs = opt.sweep_stretcher1 ? plant.advance(word, opt.hold_word) : plant.advance(opt.hold_word, word);
        trace.push_back(opt.port == Port::D1 ? obs.counts.cc_tg_d1 : obs.counts.cc_tg_d2);
    }
    return trace;
}

/// Shot-noise floor of the folded trace: six standard errors of a Poisson
/// level equal to the trace mean.
inline double default_noise_floor(std::span<const double> trace, int ramps)
{
    double m = 0;
    for (double v : trace)
        m += v;
    m = trace.empty() ? 0 : m / static_cast<double>(trace.size());
    return 6.0 * std::sqrt(std::max(m, 1.0) / std::max(ramps, 1));
}

/// Bisection over the ramp amplitude for the span that writes one fringe
/// period. Every probe is one classification round.
template<class PlantT>
CalibrationResult auto_calibrate(PlantT& plant, const CalibrationOptions& opt)
{
    opt.sweep.validate();
    int lo = opt.min_amplitude;
    int hi = kDacMax - opt.sweep.offset;
    if (lo >= hi)
        throw ConfigError("calibration.offset", "calibration offset leaves no amplitude range to search");

    CalibrationResult res;
    std::optional<CalibrationProbe> below, above, best;
    for (int round = 0; round < opt.rounds && hi - lo > 1; ++round)
    {
        SawtoothConfig saw = opt.sweep;
        saw.amplitude = lo + (hi - lo) / 2;
        const auto trace = record_sawtooth(plant, saw, opt);
        CalibrationProbe probe;
        probe.amplitude = saw.amplitude;
        probe.span = estimate_phase_span(trace, saw.period, default_noise_floor(trace, saw.ramps));
        probe.response = classify_span(probe.span, opt.classifier);
        res.probes.push_back(probe);

        if (probe.response == ResponseClass::Optimal &&
            (!best || std::abs(*probe.span - kTwoPi) < std::abs(*best->span - kTwoPi)))
            best = probe;
        const bool past = probe.response == ResponseClass::Discontinuous ||
                          (probe.response == ResponseClass::Optimal && *probe.span >= kTwoPi);
        if (past)
        {
            hi = probe.amplitude;
            above = probe;
        }
        else
        {
            lo = probe.amplitude;
            below = probe;
        }
    }

    if (!best)
        throw CalibrationError("no amplitude in [" + std::to_string(opt.min_amplitude) + ", " +
                                   std::to_string(kDacMax - opt.sweep.offset) + "] writes one fringe period",
                               below.value_or(CalibrationProbe{lo, {}, ResponseClass::Incomplete}),
                               above.value_or(CalibrationProbe{hi, {}, ResponseClass::Discontinuous}));
    res.s_min = opt.sweep.offset;
    res.s_max = opt.sweep.offset + best->amplitude;
    res.gain_estimate = kTwoPi / best->amplitude;
    return res;
}

} // namespace phaselock
