#pragma once

// The 1 Hz feedback loop: plant window -> counter report -> feedback channel
// -> controller -> log.

#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "phaselock/control.hpp"
#include "phaselock/counting.hpp"
#include "phaselock/error.hpp"
#include "phaselock/harness/config.hpp"
#include "phaselock/plant.hpp"

namespace phaselock
{

struct TimeSeriesRecord
{
    std::int64_t t = 0;
    std::uint32_t cc_tg_d1 = 0;
    std::uint32_t cc_tg_d2 = 0;
    int s_ctrl1 = 0;
    int s_ctrl2 = 0;
    int dp = 0;
    bool en_control = false;
    FeedbackTarget target = FeedbackTarget::TgD1;
    double phi_noise = 0;

    friend bool operator==(const TimeSeriesRecord&, const TimeSeriesRecord&) = default;
};

inline constexpr const char* kTimeSeriesHeader = "t,cc_tg_d1,cc_tg_d2,s_ctrl1,s_ctrl2,dp,en_control,target,phi_noise";

/// Independent stream seeds derived from one run seed. Stream 1 drives the
/// environmental phase, stream 2 the shot noise.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

/// Applies the calibration record named in the config, if any.
inline ExperimentConfig resolve_calibration(ExperimentConfig cfg)
{
    if (cfg.calibration_file.empty())
        return cfg;
    const auto rec = load_calibration_record(cfg.calibration_file);
    cfg.adaptive.s_min = rec.s_min;
    cfg.adaptive.s_max = rec.s_max;
    cfg.adaptive.validate();
    return cfg;
}

inline std::vector<TimeSeriesRecord> run_experiment(const ExperimentConfig& base)
{
    const ExperimentConfig cfg = resolve_calibration(base);
    cfg.validate();

    PlantConfig pc = cfg.plant;
    pc.noise.seed = derive_seed(cfg.seed, 1);
    Plant plant(pc, derive_seed(cfg.seed, 2));

    ControlState ctl;
    ctl.s_ctrl = cfg.initial_word;
    if (cfg.controller == ControllerKind::Adaptive &&
        (ctl.s_ctrl < cfg.adaptive.s_min || ctl.s_ctrl > cfg.adaptive.s_max))
        throw ConfigError("actuators.initial_word", "initial word lies outside [adaptive.s_min, adaptive.s_max]");

    AdaptiveParams adaptive = cfg.adaptive;
    std::optional<RunningMaxEstimator> i_max_est;
    if (cfg.i_max_mode == IMaxMode::Running)
        i_max_est.emplace(cfg.adaptive.i_max, cfg.i_max_decay);

    FeedbackTarget target = cfg.initial_target;
    std::vector<TimeSeriesRecord> log;
    log.reserve(static_cast<std::size_t>(cfg.duration));
    auto next_event = cfg.schedule.begin();

    for (std::int64_t t = 1; t <= cfg.duration; ++t)
    {
        const auto first_event = next_event;
        while (next_event != cfg.schedule.end() && next_event->tick == t)
            ++next_event;
        for (auto it = first_event; it != next_event; ++it)
            if (it->kind == ScheduleEvent::Kind::Burst)
                plant.kick(it->radians);

        const int s1 = cfg.actuate_stretcher1 ? ctl.s_ctrl : cfg.s_ctrl1;
        const int s2 = cfg.actuate_stretcher1 ? cfg.s_ctrl1 : ctl.s_ctrl;
        const auto obs = plant.advance(s1, s2);

        for (auto it = first_event; it != next_event; ++it)
        {
            switch (it->kind)
            {
            case ScheduleEvent::Kind::ControlOn: ctl.en_control = true; break;
            case ScheduleEvent::Kind::ControlOff: ctl.en_control = false; break;
            case ScheduleEvent::Kind::Target: target = it->target; break;
            case ScheduleEvent::Kind::Burst: break;
            }
        }

        const std::int64_t feedback = select_feedback(obs.counts, target);
        int dp = 0;
        if (!ctl.en_control)
        {
            ctl = hold(ctl, feedback);
        }
        else if (cfg.controller == ControllerKind::Classical)
        {
            dp = cfg.classical.p;
            ctl = po_step(ctl, feedback, cfg.classical);
        }
        else
        {
            if (i_max_est)
                adaptive.i_max = i_max_est->update(feedback);
            dp = adaptive_step_size(feedback, adaptive);
            ctl = adaptive_po_step(ctl, feedback, adaptive);
        }

        TimeSeriesRecord r;
        r.t = t;
        r.cc_tg_d1 = obs.counts.cc_tg_d1;
        r.cc_tg_d2 = obs.counts.cc_tg_d2;
        r.s_ctrl1 = s1;
        r.s_ctrl2 = s2;
        r.dp = dp;
        r.en_control = ctl.en_control;
        r.target = target;
        r.phi_noise = plant.state().phi_noise;
        log.push_back(r);
    }
    return log;
}

inline void write_timeseries_csv(std::ostream& os, const std::vector<TimeSeriesRecord>& records)
{
    os << kTimeSeriesHeader << '\n';
    char phi[40];
    for (const auto& r : records)
    {
        std::snprintf(phi, sizeof phi, "%.9f", r.phi_noise);
        os << r.t << ',' << r.cc_tg_d1 << ',' << r.cc_tg_d2 << ',' << r.s_ctrl1 << ',' << r.s_ctrl2 << ',' << r.dp
           << ',' << (r.en_control ? 1 : 0) << ',' << to_string(r.target) << ',' << phi << '\n';
    }
}

inline void save_timeseries_csv(const std::string& path, const std::vector<TimeSeriesRecord>& records)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write '" + path + "'");
    write_timeseries_csv(out, records);
}

inline std::vector<TimeSeriesRecord> read_timeseries_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line) || line != kTimeSeriesHeader)
        throw ContractError(std::string("time-series CSV must start with header '") + kTimeSeriesHeader + "'");
    std::vector<TimeSeriesRecord> out;
    std::size_t lineno = 1;
    while (std::getline(is, line))
    {
        ++lineno;
        if (line.empty())
            continue;
        std::vector<std::string> f;
        std::istringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');)
            f.push_back(cell);
        if (f.size() != 9)
            throw ContractError("time-series CSV line " + std::to_string(lineno) + ": expected 9 fields");
        try
        {
            TimeSeriesRecord r;
            r.t = std::stoll(f[0]);
            r.cc_tg_d1 = static_cast<std::uint32_t>(std::stoul(f[1]));
            r.cc_tg_d2 = static_cast<std::uint32_t>(std::stoul(f[2]));
            r.s_ctrl1 = std::stoi(f[3]);
            r.s_ctrl2 = std::stoi(f[4]);
            r.dp = std::stoi(f[5]);
            r.en_control = f[6] == "1";
            r.target = parse_target(f[7]);
            r.phi_noise = std::stod(f[8]);
            out.push_back(r);
        }
        catch (const std::logic_error&)
        {
            throw ContractError("time-series CSV line " + std::to_string(lineno) + ": malformed field");
        }
    }
    return out;
}

inline std::vector<TimeSeriesRecord> load_timeseries_csv(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot read '" + path + "'");
    return read_timeseries_csv(in);
}

/// Counts of one feedback channel as a series indexed from the first record.
inline std::vector<double> channel_series(const std::vector<TimeSeriesRecord>& records, FeedbackTarget channel)
{
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records)
        out.push_back(channel == FeedbackTarget::TgD1 ? r.cc_tg_d1 : r.cc_tg_d2);
    return out;
}

} // namespace phaselock
