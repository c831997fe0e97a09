#pragma once

// Perturb-and-observe controllers in the integer arithmetic of the FPGA
// phase-control block. Both variants share a three-state machine clocked by
// the sync pulse; they differ in step size and in what happens at the edge
// of the actuator range.

#include <algorithm>
#include <cstdint>
#include <string>

#include "phaselock/counting.hpp"
#include "phaselock/error.hpp"
#include "phaselock/plant.hpp"

namespace phaselock
{

struct ControlState
{
    int s_ctrl = 0;             ///< actuator word, AU
    std::uint8_t index = 0;     ///< state-machine case, 0..2
    std::int64_t i_prev = 0;    ///< intensity latched on the previous sync edge
    bool en_control = true;

    friend bool operator==(const ControlState&, const ControlState&) = default;
};

struct FixedParams
{
    int p = 50;

    void validate() const
    {
        if (p < 1)
            throw ConfigError("classical.p", "classical.p must be >= 1");
    }

    friend bool operator==(const FixedParams&, const FixedParams&) = default;
};

/// Step law dp = ((i_max - I) >> shift) + beta with circular bounds.
struct AdaptiveParams
{
    int shift = 3;
    int beta = 50;
    std::int64_t i_max = 3000;
    int s_min = 0;
    int s_max = 1700;

    /// Slope numerator of the step law, i.e. the largest increment above beta.
    std::int64_t alpha() const { return i_max >> shift; }

    void validate() const
    {
        if (shift < 0 || shift > 30)
            throw ConfigError("adaptive.shift", "adaptive.shift must lie in [0, 30]");
        if (beta < 1)
            throw ConfigError("adaptive.beta", "adaptive.beta must be >= 1");
        if (i_max < 0)
            throw ConfigError("adaptive.i_max", "adaptive.i_max must be >= 0");
        if (s_max > kDacMax)
            throw ConfigError("adaptive.s_max", "adaptive.s_max must be <= 4095");
        if (s_min < kDacMin)
            throw ConfigError("adaptive.s_min", "adaptive.s_min must be >= 0");
        if (s_min >= s_max)
            throw ConfigError("adaptive.s_min", "adaptive.s_min must be < adaptive.s_max");
    }

    friend bool operator==(const AdaptiveParams&, const AdaptiveParams&) = default;
};

enum class FeedbackTarget
{
    TgD1,
    TgD2,
};

inline const char* to_string(FeedbackTarget t) { return t == FeedbackTarget::TgD1 ? "TgD1" : "TgD2"; }

inline FeedbackTarget parse_target(const std::string& s)
{
    if (s == "TgD1")
        return FeedbackTarget::TgD1;
    if (s == "TgD2")
        return FeedbackTarget::TgD2;
    throw ContractError("unknown feedback target '" + s + "'");
}

inline FeedbackTarget complement(FeedbackTarget t)
{
    return t == FeedbackTarget::TgD1 ? FeedbackTarget::TgD2 : FeedbackTarget::TgD1;
}

namespace detail
{

// The shared three-case machine. Returns the new state with an unbounded
// s_ctrl; callers apply clamping or wrapping.
inline ControlState po_transition(ControlState st, std::int64_t i_actual, int step)
{
    const bool rose = i_actual > st.i_prev;
    st.i_prev = i_actual;
    switch (st.index)
    {
    case 0:
        if (st.en_control)
        {
            st.s_ctrl += step;
            st.index = 1;
        }
        break;
    case 1:
        if (rose)
        {
            st.s_ctrl += step;
        }
        else
        {
            st.s_ctrl -= 2 * step;
            st.index = 2;
        }
        break;
    case 2:
        if (rose)
        {
            st.s_ctrl -= step;
        }
        else
        {
            st.s_ctrl += step;
            st.index = 0;
        }
        break;
    default:
        throw ContractError("P&O state index out of range");
    }
    return st;
}

} // namespace detail

/// Classical P&O, fixed step `p`. The word saturates at the DAC limits.
inline ControlState po_step(ControlState state, std::int64_t i_actual, const FixedParams& params)
{
    auto next = detail::po_transition(state, i_actual, params.p);
    next.s_ctrl = std::clamp(next.s_ctrl, kDacMin, kDacMax);
    return next;
}

/// Step size of the adaptive controller for the observed intensity.
inline int adaptive_step_size(std::int64_t i_actual, const AdaptiveParams& params)
{
    const std::int64_t i = std::clamp<std::int64_t>(i_actual, 0, params.i_max);
    return static_cast<int>(((params.i_max - i) >> params.shift) + params.beta);
}

/// Adaptive P&O with the circular constraint on [s_min, s_max].
inline ControlState adaptive_po_step(ControlState state, std::int64_t i_actual, const AdaptiveParams& params)
{
    auto next = detail::po_transition(state, i_actual, adaptive_step_size(i_actual, params));
    if (next.s_ctrl > params.s_max)
        next.s_ctrl = params.s_min;
    if (next.s_ctrl < params.s_min)
        next.s_ctrl = params.s_max;
    return next;
}

/// Latches the intensity without moving the actuator; the machine restarts at
/// case 0 when control is re-enabled.
inline ControlState hold(ControlState state, std::int64_t i_actual)
{
    state.i_prev = i_actual;
    state.index = 0;
    return state;
}

inline std::int64_t select_feedback(const CountReport& report, FeedbackTarget target)
{
    return target == FeedbackTarget::TgD1 ? report.cc_tg_d1 : report.cc_tg_d2;
}

/// Optional dynamic estimate of I_max: a running maximum that decays by a
/// constant factor every tick.
class RunningMaxEstimator
{
  public:
    explicit RunningMaxEstimator(std::int64_t initial, double decay = 0.999) : value_(initial), decay_(decay) {}

    std::int64_t update(std::int64_t i_actual)
    {
        value_ = std::max(value_ * decay_, static_cast<double>(i_actual));
        return current();
    }

    std::int64_t current() const { return static_cast<std::int64_t>(value_); }

  private:
    double value_;
    double decay_;
};

} // namespace phaselock
