#pragma once

// Experiment configuration: a flat key/value text format with [sections].
//
//   seed = 7
//   [plant]
//   c0 = 1500
//   [schedule]
//   at = 454 target TgD2
//
// Blank lines and '#' comments are ignored. Unknown sections and keys are
// errors. Omitted keys take the documented defaults (see README).

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "phaselock/calibration.hpp"
#include "phaselock/control.hpp"
#include "phaselock/error.hpp"
#include "phaselock/metrics.hpp"
#include "phaselock/plant.hpp"

namespace phaselock
{

enum class ControllerKind
{
    Classical,
    Adaptive,
};

inline const char* to_string(ControllerKind k) { return k == ControllerKind::Classical ? "classical" : "adaptive"; }

enum class IMaxMode
{
    Fixed,
    Running,
};

struct ScheduleEvent
{
    enum class Kind
    {
        ControlOn,
        ControlOff,
        Target,
        Burst,
    };

    std::int64_t tick = 0;
    Kind kind = Kind::ControlOn;
    FeedbackTarget target = FeedbackTarget::TgD1; ///< Kind::Target
    double radians = 0;                           ///< Kind::Burst

    friend bool operator==(const ScheduleEvent&, const ScheduleEvent&) = default;
};

/// Channel-tagged steady-state window used by the comparison.
struct ChannelWindow
{
    IntervalSpec interval;
    FeedbackTarget channel = FeedbackTarget::TgD1;

    friend bool operator==(const ChannelWindow&, const ChannelWindow&) = default;
};

struct AnalysisConfig
{
    ChannelWindow transition{{450, 500}, FeedbackTarget::TgD2};
    std::vector<ChannelWindow> steady{{{100, 450}, FeedbackTarget::TgD1}, {{500, 600}, FeedbackTarget::TgD2}};

    friend bool operator==(const AnalysisConfig&, const AnalysisConfig&) = default;
};

struct ExperimentConfig
{
    std::uint64_t seed = 1;
    std::int64_t duration = 700;
    std::string output = "run.csv";
    std::string calibration_file;

    PlantConfig plant = default_plant();
    int s_ctrl1 = 0;              ///< word held on the stretcher not under control
    int initial_word = 850;       ///< start word of the controlled stretcher
    bool actuate_stretcher1 = false;
    FeedbackTarget initial_target = FeedbackTarget::TgD1;

    ControllerKind controller = ControllerKind::Adaptive;
    FixedParams classical;
    AdaptiveParams adaptive;
    IMaxMode i_max_mode = IMaxMode::Fixed;
    double i_max_decay = 0.999;

    std::vector<ScheduleEvent> schedule = default_schedule();
    AnalysisConfig analysis;

    static PlantConfig default_plant()
    {
        PlantConfig p;
        p.noise.diffusion = 0.15;
        p.noise.drift_rate = 0.005;
        p.noise.sine_amplitude = 0.5;
        p.noise.sine_period = 60;
        return p;
    }

    static std::vector<ScheduleEvent> default_schedule()
    {
        return {{454, ScheduleEvent::Kind::Target, FeedbackTarget::TgD2, 0},
                {600, ScheduleEvent::Kind::ControlOff, FeedbackTarget::TgD1, 0}};
    }

    void validate() const
    {
        if (duration < 1)
            throw ConfigError("duration", "duration must be >= 1");
        plant.validate();
        classical.validate();
        adaptive.validate();
        if (s_ctrl1 < kDacMin || s_ctrl1 > kDacMax)
            throw ConfigError("actuators.s_ctrl1", "actuators.s_ctrl1 must lie in [0, 4095]");
        if (initial_word < kDacMin || initial_word > kDacMax)
            throw ConfigError("actuators.initial_word", "actuators.initial_word must lie in [0, 4095]");
        if (!(i_max_decay > 0 && i_max_decay <= 1))
            throw ConfigError("adaptive.i_max_decay", "adaptive.i_max_decay must lie in (0, 1]");
        std::int64_t last = 0;
        for (const auto& e : schedule)
        {
            if (e.tick < 1 || e.tick > duration)
                throw ConfigError("schedule.at", "schedule event at tick " + std::to_string(e.tick) +
                                                     " lies outside [1, duration]");
            if (e.tick < last)
                throw ConfigError("schedule.at", "schedule events must be tick-ordered");
            last = e.tick;
        }
        auto check_window = [&](const IntervalSpec& iv, const char* field) {
            if (iv.t_start < 1 || iv.t_end > duration || iv.t_start >= iv.t_end)
                throw ConfigError(field, std::string(field) + " must satisfy 1 <= start < end <= duration");
        };
        check_window(analysis.transition.interval, "analysis.transition");
        for (const auto& w : analysis.steady)
            check_window(w.interval, "analysis.steady");
    }

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail
{

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_ws(const std::string& s)
{
    std::istringstream ss(s);
    std::vector<std::string> out;
    for (std::string w; ss >> w;)
        out.push_back(w);
    return out;
}

struct Entry
{
    std::string section;
    std::string key;
    std::string value;
    int line = 0;
};

// Splits text into (section, key, value) entries; syntax errors carry the
// offending line number.
inline std::vector<Entry> parse_entries(std::istream& is)
{
    std::vector<Entry> out;
    std::string section;
    std::string raw;
    int lineno = 0;
    while (std::getline(is, raw))
    {
        ++lineno;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty())
            continue;
        if (line.front() == '[')
        {
            if (line.back() != ']')
                throw ConfigError("", "line " + std::to_string(lineno) + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("", "line " + std::to_string(lineno) + ": expected 'key = value'");
        Entry e{section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), lineno};
        if (e.key.empty())
            throw ConfigError("", "line " + std::to_string(lineno) + ": missing key");
        out.push_back(std::move(e));
    }
    return out;
}

inline std::string field_name(const Entry& e) { return e.section.empty() ? e.key : e.section + "." + e.key; }

[[noreturn]] inline void bad_value(const Entry& e, const std::string& why)
{
    throw ConfigError(field_name(e), "line " + std::to_string(e.line) + ": " + field_name(e) + ": " + why);
}

template<class T>
T parse_number(const Entry& e)
{
    T v{};
    const auto* first = e.value.data();
    const auto* last = first + e.value.size();
    if constexpr (std::is_floating_point_v<T>)
    {
        char* end = nullptr;
        const std::string s(e.value);
        v = static_cast<T>(std::strtod(s.c_str(), &end));
        if (s.empty() || end != s.c_str() + s.size())
            bad_value(e, "expected a number, got '" + e.value + "'");
    }
    else
    {
        const auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc{} || ptr != last)
            bad_value(e, "expected an integer, got '" + e.value + "'");
    }
    return v;
}

// Actuator gain in rad/AU, either a number or "2pi/<AU per fringe>".
inline double parse_gain(const Entry& e)
{
    if (e.value.rfind("2pi/", 0) != 0)
        return parse_number<double>(e);
    Entry period = e;
    period.value = e.value.substr(4);
    const double au = parse_number<double>(period);
    if (!(au > 0))
        bad_value(e, "fringe period must be > 0");
    return kTwoPi / au;
}

inline IntervalSpec parse_interval(const Entry& e, const std::string& text)
{
    const auto dash = text.find('-');
    if (dash == std::string::npos)
        bad_value(e, "expected an interval 'start-end', got '" + text + "'");
    Entry a = e, b = e;
    a.value = text.substr(0, dash);
    b.value = text.substr(dash + 1);
    return {parse_number<std::int64_t>(a), parse_number<std::int64_t>(b)};
}

inline ChannelWindow parse_window(const Entry& e)
{
    const auto words = split_ws(e.value);
    if (words.size() != 2)
        bad_value(e, "expected 'start-end channel'");
    try
    {
        return {parse_interval(e, words[0]), parse_target(words[1])};
    }
    catch (const ContractError& ex)
    {
        bad_value(e, ex.what());
    }
}

inline ScheduleEvent parse_event(const Entry& e)
{
    const auto words = split_ws(e.value);
    if (words.size() < 2)
        bad_value(e, "expected '<tick> <action> [argument]'");
    Entry tick = e;
    tick.value = words[0];
    ScheduleEvent ev;
    ev.tick = parse_number<std::int64_t>(tick);
    const auto& action = words[1];
    auto need = [&](std::size_t n) {
        if (words.size() != n)
            bad_value(e, "wrong number of arguments for '" + action + "'");
    };
    if (action == "control")
    {
        need(3);
        if (words[2] == "on")
            ev.kind = ScheduleEvent::Kind::ControlOn;
        else if (words[2] == "off")
            ev.kind = ScheduleEvent::Kind::ControlOff;
        else
            bad_value(e, "control expects 'on' or 'off'");
    }
    else if (action == "target")
    {
        need(3);
        ev.kind = ScheduleEvent::Kind::Target;
        try
        {
            ev.target = parse_target(words[2]);
        }
        catch (const ContractError& ex)
        {
            bad_value(e, ex.what());
        }
    }
    else if (action == "burst")
    {
        need(3);
        ev.kind = ScheduleEvent::Kind::Burst;
        Entry r = e;
        r.value = words[2];
        ev.radians = parse_number<double>(r);
    }
    else
    {
        bad_value(e, "unknown schedule action '" + action + "'");
    }
    return ev;
}

// Shortest text that parses back to the same double.
inline std::string fmt_double(double v)
{
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

} // namespace detail

/// Parses configuration text. Keys not present keep their defaults.
inline ExperimentConfig parse_config(std::istream& is)
{
    using detail::Entry;
    using detail::parse_number;
    ExperimentConfig cfg;
    bool schedule_seen = false;
    bool steady_seen = false;

    for (const Entry& e : detail::parse_entries(is))
    {
        const std::string f = detail::field_name(e);
        auto dbl = [&] { return parse_number<double>(e); };
        auto int_ = [&] { return parse_number<int>(e); };
        auto& p = cfg.plant;

        if (f == "seed")
            cfg.seed = parse_number<std::uint64_t>(e);
        else if (f == "duration")
            cfg.duration = parse_number<std::int64_t>(e);
        else if (f == "output")
            cfg.output = e.value;
        else if (f == "calibration_file")
            cfg.calibration_file = e.value;
        else if (f == "controller")
        {
            if (e.value == "classical")
                cfg.controller = ControllerKind::Classical;
            else if (e.value == "adaptive")
                cfg.controller = ControllerKind::Adaptive;
            else
                detail::bad_value(e, "expected 'classical' or 'adaptive'");
        }
        else if (f == "plant.c0")
            p.c0 = dbl();
        else if (f == "plant.visibility")
            p.visibility = dbl();
        else if (f == "plant.gain1")
            p.gain1 = detail::parse_gain(e);
        else if (f == "plant.gain2")
            p.gain2 = detail::parse_gain(e);
        else if (f == "plant.amp_offset")
            p.amp_offset = dbl();
        else if (f == "plant.singles_tg")
            p.singles_tg = dbl();
        else if (f == "plant.singles_d1")
            p.singles_d1 = dbl();
        else if (f == "plant.singles_d2")
            p.singles_d2 = dbl();
        else if (f == "noise.diffusion")
            p.noise.diffusion = dbl();
        else if (f == "noise.drift_rate")
            p.noise.drift_rate = dbl();
        else if (f == "noise.sine_amplitude")
            p.noise.sine_amplitude = dbl();
        else if (f == "noise.sine_period")
            p.noise.sine_period = dbl();
        else if (f == "actuators.s_ctrl1")
            cfg.s_ctrl1 = int_();
        else if (f == "actuators.initial_word")
            cfg.initial_word = int_();
        else if (f == "actuators.actuated")
        {
            if (e.value == "st1")
                cfg.actuate_stretcher1 = true;
            else if (e.value == "st2")
                cfg.actuate_stretcher1 = false;
            else
                detail::bad_value(e, "expected 'st1' or 'st2'");
        }
        else if (f == "actuators.initial_target")
        {
            try
            {
                cfg.initial_target = parse_target(e.value);
            }
            catch (const ContractError& ex)
            {
                detail::bad_value(e, ex.what());
            }
        }
        else if (f == "classical.p")
            cfg.classical.p = int_();
        else if (f == "adaptive.shift")
            cfg.adaptive.shift = int_();
        else if (f == "adaptive.beta")
            cfg.adaptive.beta = int_();
        else if (f == "adaptive.i_max")
            cfg.adaptive.i_max = parse_number<std::int64_t>(e);
        else if (f == "adaptive.s_min")
            cfg.adaptive.s_min = int_();
        else if (f == "adaptive.s_max")
            cfg.adaptive.s_max = int_();
        else if (f == "adaptive.i_max_mode")
        {
            if (e.value == "fixed")
                cfg.i_max_mode = IMaxMode::Fixed;
            else if (e.value == "running")
                cfg.i_max_mode = IMaxMode::Running;
            else
                detail::bad_value(e, "expected 'fixed' or 'running'");
        }
        else if (f == "adaptive.i_max_decay")
            cfg.i_max_decay = dbl();
        else if (f == "schedule.at")
        {
            if (!schedule_seen)
                cfg.schedule.clear();
            schedule_seen = true;
            cfg.schedule.push_back(detail::parse_event(e));
        }
        else if (f == "schedule.none")
        {
            cfg.schedule.clear();
            schedule_seen = true;
        }
        else if (f == "analysis.transition")
            cfg.analysis.transition = detail::parse_window(e);
        else if (f == "analysis.steady")
        {
            if (!steady_seen)
                cfg.analysis.steady.clear();
            steady_seen = true;
            cfg.analysis.steady.push_back(detail::parse_window(e));
        }
        else
            throw ConfigError(f, "line " + std::to_string(e.line) + ": unknown key '" + f + "'");
    }
    cfg.validate();
    return cfg;
}

inline ExperimentConfig parse_config(const std::string& text)
{
    std::istringstream ss(text);
    return parse_config(ss);
}

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("", "cannot open config file '" + path + "'");
    return parse_config(in);
}

/// Writes every field, resolved defaults included, in the format read by
/// `parse_config`.
inline std::string serialize_config(const ExperimentConfig& cfg)
{
    using detail::fmt_double;
    std::ostringstream os;
    const auto& p = cfg.plant;
    os << "seed = " << cfg.seed << '\n'
       << "duration = " << cfg.duration << '\n'
       << "output = " << cfg.output << '\n';
    if (!cfg.calibration_file.empty())
        os << "calibration_file = " << cfg.calibration_file << '\n';
    os << "controller = " << to_string(cfg.controller) << "\n\n";

    os << "[plant]\n"
       << "c0 = " << fmt_double(p.c0) << '\n'
       << "visibility = " << fmt_double(p.visibility) << '\n'
       << "gain1 = " << fmt_double(p.gain1) << '\n'
       << "gain2 = " << fmt_double(p.gain2) << '\n'
       << "amp_offset = " << fmt_double(p.amp_offset) << '\n'
       << "singles_tg = " << fmt_double(p.singles_tg) << '\n'
       << "singles_d1 = " << fmt_double(p.singles_d1) << '\n'
       << "singles_d2 = " << fmt_double(p.singles_d2) << "\n\n";

    os << "[noise]\n"
       << "diffusion = " << fmt_double(p.noise.diffusion) << '\n'
       << "drift_rate = " << fmt_double(p.noise.drift_rate) << '\n'
       << "sine_amplitude = " << fmt_double(p.noise.sine_amplitude) << '\n'
       << "sine_period = " << fmt_double(p.noise.sine_period) << "\n\n";

    os << "[actuators]\n"
       << "s_ctrl1 = " << cfg.s_ctrl1 << '\n'
       << "initial_word = " << cfg.initial_word << '\n'
       << "actuated = " << (cfg.actuate_stretcher1 ? "st1" : "st2") << '\n'
       << "initial_target = " << to_string(cfg.initial_target) << "\n\n";

    os << "[classical]\n"
       << "p = " << cfg.classical.p << "\n\n";

    os << "[adaptive]\n"
       << "shift = " << cfg.adaptive.shift << '\n'
       << "beta = " << cfg.adaptive.beta << '\n'
       << "i_max = " << cfg.adaptive.i_max << '\n'
       << "s_min = " << cfg.adaptive.s_min << '\n'
       << "s_max = " << cfg.adaptive.s_max << '\n'
       << "i_max_mode = " << (cfg.i_max_mode == IMaxMode::Fixed ? "fixed" : "running") << '\n'
       << "i_max_decay = " << fmt_double(cfg.i_max_decay) << "\n\n";

    os << "[schedule]\n";
    if (cfg.schedule.empty())
        os << "none = 1\n";
    for (const auto& e : cfg.schedule)
    {
        os << "at = " << e.tick << ' ';
        switch (e.kind)
        {
        case ScheduleEvent::Kind::ControlOn: os << "control on"; break;
        case ScheduleEvent::Kind::ControlOff: os << "control off"; break;
        case ScheduleEvent::Kind::Target: os << "target " << to_string(e.target); break;
        case ScheduleEvent::Kind::Burst: os << "burst " << fmt_double(e.radians); break;
        }
        os << '\n';
    }

    auto window = [](const ChannelWindow& w) {
        return std::to_string(w.interval.t_start) + "-" + std::to_string(w.interval.t_end) + " " + to_string(w.channel);
    };
    os << "\n[analysis]\n"
       << "transition = " << window(cfg.analysis.transition) << '\n';
    for (const auto& w : cfg.analysis.steady)
        os << "steady = " << window(w) << '\n';
    return os.str();
}

/// Bounds discovered by the sawtooth calibration, as stored on disk.
struct CalibrationRecord
{
    int s_min = 0;
    int s_max = 0;
    double gain_estimate = 0;
    std::string timestamp;
    std::uint64_t seed = 0;
};

inline void write_calibration_record(std::ostream& os, const CalibrationRecord& r)
{
    os << "# phaselock calibration record\n"
       << "s_min = " << r.s_min << '\n'
       << "s_max = " << r.s_max << '\n'
       << "gain_estimate = " << detail::fmt_double(r.gain_estimate) << '\n'
       << "timestamp = " << r.timestamp << '\n'
       << "seed = " << r.seed << '\n';
}

inline CalibrationRecord read_calibration_record(std::istream& is)
{
    CalibrationRecord r;
    bool has_min = false, has_max = false;
    for (const auto& e : detail::parse_entries(is))
    {
        if (!e.section.empty())
            throw ConfigError(detail::field_name(e), "calibration record has no sections");
        if (e.key == "s_min")
            r.s_min = detail::parse_number<int>(e), has_min = true;
        else if (e.key == "s_max")
            r.s_max = detail::parse_number<int>(e), has_max = true;
        else if (e.key == "gain_estimate")
            r.gain_estimate = detail::parse_number<double>(e);
        else if (e.key == "timestamp")
            r.timestamp = e.value;
        else if (e.key == "seed")
            r.seed = detail::parse_number<std::uint64_t>(e);
        else
            throw ConfigError(e.key, "line " + std::to_string(e.line) + ": unknown key '" + e.key + "'");
    }
    if (!has_min || !has_max)
        throw ConfigError(has_min ? "s_max" : "s_min", "calibration record lacks s_min or s_max");
    return r;
}

inline CalibrationRecord load_calibration_record(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("calibration_file", "calibration record '" + path + "' not found");
    return read_calibration_record(in);
}

} // namespace phaselock
