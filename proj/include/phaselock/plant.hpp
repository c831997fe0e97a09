#pragma once

// Optical plant: two cascaded unbalanced interferometers read out in
// coincidence with a herald. Expected rates follow the two-port fringe
// C0 [1 +/- v cos(phi2 - phi1 + phi_noise)], counts are Poisson.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>

#include "phaselock/counting.hpp"
#include "phaselock/error.hpp"

namespace phaselock
{

inline constexpr int kDacMin = 0;
inline constexpr int kDacMax = 4095;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct NoiseConfig
{
    double diffusion = 0.0;      ///< random-walk scale, rad per sqrt(window)
    double drift_rate = 0.0;     ///< rad per window
    double sine_amplitude = 0.0; ///< rad
    double sine_period = 0.0;    ///< windows
    std::uint64_t seed = 0;

    void validate() const
    {
        if (!(diffusion >= 0))
            throw ConfigError("noise.diffusion", "noise.diffusion must be >= 0");
        if (!(drift_rate >= 0))
            throw ConfigError("noise.drift_rate", "noise.drift_rate must be >= 0");
        if (!(sine_amplitude >= 0))
            throw ConfigError("noise.sine_amplitude", "noise.sine_amplitude must be >= 0");
        if (!(sine_period >= 0) || (sine_amplitude > 0 && sine_period <= 0))
            throw ConfigError("noise.sine_period", "noise.sine_period must be > 0 when sine_amplitude > 0");
    }

    friend bool operator==(const NoiseConfig&, const NoiseConfig&) = default;
};

struct PlantConfig
{
    double c0 = 1500.0;
    double visibility = 0.9;
    double gain1 = kTwoPi / 1700.0; ///< rad per AU, stretcher 1
    double gain2 = kTwoPi / 1700.0; ///< rad per AU, stretcher 2
    double amp_offset = 0.0;        ///< phase at S_ctrl = 0
    NoiseConfig noise;
    double singles_tg = 20000.0;
    double singles_d1 = 8000.0;
    double singles_d2 = 8000.0;

    void validate() const
    {
        if (!(c0 > 0))
            throw ConfigError("plant.c0", "plant.c0 must be > 0");
        if (!(visibility >= 0 && visibility <= 1))
            throw ConfigError("plant.visibility", "plant.visibility must lie in [0, 1]");
        if (!(gain1 > 0))
            throw ConfigError("plant.gain1", "plant.gain1 must be > 0");
        if (!(gain2 > 0))
            throw ConfigError("plant.gain2", "plant.gain2 must be > 0");
        if (!(singles_tg >= 0))
            throw ConfigError("plant.singles_tg", "plant.singles_tg must be >= 0");
        if (!(singles_d1 >= 0))
            throw ConfigError("plant.singles_d1", "plant.singles_d1 must be >= 0");
        if (!(singles_d2 >= 0))
            throw ConfigError("plant.singles_d2", "plant.singles_d2 must be >= 0");
        noise.validate();
    }

    friend bool operator==(const PlantConfig&, const PlantConfig&) = default;
};

struct PlantState
{
    double phi_noise = 0.0;
    std::uint64_t tick = 0;
};

enum class Port
{
    D1,
    D2,
};

struct Observation
{
    double rate_d1 = 0;
    double rate_d2 = 0;
    CountReport counts;
};

/// Phase written by a stretcher driven with the 12-bit word `s_ctrl`.
inline double actuator_phase(int s_ctrl, double gain, double offset)
{
    if (s_ctrl < kDacMin || s_ctrl > kDacMax)
        throw DomainError("control word " + std::to_string(s_ctrl) + " outside [0, 4095]");
    return offset + gain * s_ctrl;
}

/// Mean coincidence rate of the herald with `port`. D1 takes the "+" branch.
inline double expected_rate(const PlantConfig& cfg, double phi1, double phi2, double phi_noise, Port port)
{
    const double swing = cfg.c0 * cfg.visibility * std::cos(phi2 - phi1 + phi_noise);
    const double rate = port == Port::D1 ? cfg.c0 + swing : cfg.c0 - swing;
    return std::max(rate, 0.0);
}

/// One window of environmental phase noise: drift + Wiener increment + the
/// increment of a sinusoid evaluated at tick and tick + 1.
template<class Rng>
PlantState step_noise(PlantState state, const NoiseConfig& cfg, Rng& rng)
{
    const double gauss = std::normal_distribution<double>(0.0, 1.0)(rng);
    double sine = 0.0;
    if (cfg.sine_amplitude > 0)
    {
        const double w = kTwoPi / cfg.sine_period;
        const auto t = static_cast<double>(state.tick);
        sine = cfg.sine_amplitude * (std::sin(w * (t + 1)) - std::sin(w * t));
    }
    state.phi_noise += cfg.drift_rate + cfg.diffusion * gauss + sine;
    ++state.tick;
    return state;
}

/// Poisson draw with the given mean.
template<class Rng>
std::uint64_t sample_counts(double rate, Rng& rng)
{
    if (!(rate >= 0))
        throw DomainError("Poisson rate must be >= 0");
    if (rate == 0)
        return 0;
    return std::poisson_distribution<std::uint64_t>(rate)(rng);
}

/// Single-owner plant instance. Phase noise and shot noise come from two
/// independent generators so that two plants sharing `cfg.noise.seed` see the
/// same phase trajectory regardless of how their counts are sampled.
class Plant
{
  public:
    Plant(PlantConfig cfg, std::uint64_t shot_seed)
        : cfg_(std::move(cfg)), noise_rng_(cfg_.noise.seed), shot_rng_(shot_seed)
    {
        cfg_.validate();
    }

    const PlantConfig& config() const { return cfg_; }
    const PlantState& state() const { return state_; }

    /// Expected port rates for the given control words at the current noise phase.
    std::pair<double, double> expected(int s1, int s2) const
    {
        const double phi1 = actuator_phase(s1, cfg_.gain1, cfg_.amp_offset);
        const double phi2 = actuator_phase(s2, cfg_.gain2, cfg_.amp_offset);
        return {expected_rate(cfg_, phi1, phi2, state_.phi_noise, Port::D1),
                expected_rate(cfg_, phi1, phi2, state_.phi_noise, Port::D2)};
    }

    /// Adds an abrupt phase step to the environment (burst injection).
    void kick(double radians) { state_.phi_noise += radians; }

    /// One 1 Hz feedback window.
    Observation advance(int s1, int s2)
    {
        actuator_phase(s1, cfg_.gain1, cfg_.amp_offset);
        actuator_phase(s2, cfg_.gain2, cfg_.amp_offset);
        state_ = step_noise(state_, cfg_.noise, noise_rng_);

        Observation obs;
        std::tie(obs.rate_d1, obs.rate_d2) = expected(s1, s2);
        auto& c = obs.counts;
        c.window_index = state_.tick;
        c.cc_tg_d1 = counter_add(0, sample_counts(obs.rate_d1, shot_rng_));
        c.cc_tg_d2 = counter_add(0, sample_counts(obs.rate_d2, shot_rng_));
        c.singles_tg = counter_add(0, sample_counts(cfg_.singles_tg, shot_rng_));
        c.singles_d1 = counter_add(0, sample_counts(cfg_.singles_d1, shot_rng_));
        c.singles_d2 = counter_add(0, sample_counts(cfg_.singles_d2, shot_rng_));
        return obs;
    }

  private:
    PlantConfig cfg_;
    PlantState state_;
    std::mt19937_64 noise_rng_;
    std::mt19937_64 shot_rng_;
};

} // namespace phaselock
