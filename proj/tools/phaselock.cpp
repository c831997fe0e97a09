// phaselock command-line front end: calibrate, run, compare, metrics.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "phaselock/phaselock.hpp"

namespace fs = std::filesystem;
using namespace phaselock;

namespace
{

std::string utc_timestamp()
{
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::ofstream open_out(const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write '" + path + "'");
    return out;
}

std::string fmt(double v, int prec)
{
    if (std::isnan(v))
        return "";
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

// ---- calibrate ------------------------------------------------------------

int cmd_calibrate(const std::string& config_path, const std::string& out_path, std::optional<std::uint64_t> seed,
                  bool with_drift, int offset, int period, int ramps)
{
    auto cfg = load_config(config_path);
    if (seed)
        cfg.seed = *seed;
    PlantConfig pc = cfg.plant;
    if (!with_drift)
        pc.noise = NoiseConfig{};
    pc.noise.seed = derive_seed(cfg.seed, 1);
    Plant plant(pc, derive_seed(cfg.seed, 2));

    CalibrationOptions opt;
    opt.sweep.offset = offset;
    opt.sweep.period = period;
    opt.sweep.ramps = ramps;
    opt.sweep_stretcher1 = cfg.actuate_stretcher1;
    opt.hold_word = cfg.s_ctrl1;

    const auto res = auto_calibrate(plant, opt);
    for (const auto& p : res.probes)
        std::cout << "amplitude " << p.amplitude << "  span "
                  << (p.span ? fmt(*p.span / kTwoPi, 4) + " x 2pi" : std::string("-")) << "  "
                  << to_string(p.response) << '\n';
    std::cout << "s_min = " << res.s_min << ", s_max = " << res.s_max << ", gain = " << fmt(res.gain_estimate, 6)
              << " rad/AU\n";

    auto out = open_out(out_path);
    write_calibration_record(out, CalibrationRecord{res.s_min, res.s_max, res.gain_estimate, utc_timestamp(), cfg.seed});
    return 0;
}

// ---- run ------------------------------------------------------------------

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, std::string out_path)
{
    auto cfg = load_config(config_path);
    if (seed)
        cfg.seed = *seed;
    if (out_path.empty())
        out_path = cfg.output;
    const auto log = run_experiment(cfg);
    save_timeseries_csv(out_path, log);
    auto echo = open_out(out_path + ".config");
    echo << serialize_config(cfg);
    std::cout << "wrote " << log.size() << " ticks to " << out_path << '\n';
    return 0;
}

// ---- compare --------------------------------------------------------------

int cmd_compare(const std::string& config_path, std::size_t n_seeds, const std::string& dir)
{
    const auto cfg = load_config(config_path);
    fs::create_directories(dir);
    std::vector<std::uint64_t> seeds(n_seeds);
    std::iota(seeds.begin(), seeds.end(), cfg.seed);

    const auto rep = compare_algorithms(cfg, seeds, [&](std::uint64_t seed, const PairedRuns& runs) {
        const auto stem = (fs::path(dir) / ("seed_" + std::to_string(seed))).string();
        save_timeseries_csv(stem + "_classical.csv", runs.a);
        save_timeseries_csv(stem + "_adaptive.csv", runs.b);
    });

    {
        auto out = open_out((fs::path(dir) / "comparison.csv").string());
        write_comparison_csv(out, rep);
    }
    {
        auto out = open_out((fs::path(dir) / "summary.txt").string());
        write_comparison_summary(out, rep);
    }
    {
        auto out = open_out((fs::path(dir) / "config.txt").string());
        out << serialize_config(cfg);
    }
    write_comparison_summary(std::cout, rep);
    return 0;
}

// ---- metrics --------------------------------------------------------------

enum class MetricKind
{
    Noise,
    Transition,
    Fringe,
    Locked,
};

struct MetricRequest
{
    MetricKind kind = MetricKind::Noise;
    FeedbackTarget channel = FeedbackTarget::TgD1;
    IntervalSpec interval;
    std::string text;
};

MetricRequest parse_request(const std::string& item)
{
    // kind:channel:start-end
    std::vector<std::string> parts;
    std::stringstream ss(item);
    for (std::string p; std::getline(ss, p, ':');)
        parts.push_back(p);
    auto bad = [&](const std::string& why) { return std::invalid_argument("interval '" + item + "': " + why); };
    if (parts.size() != 3)
        throw bad("expected kind:channel:start-end");

    MetricRequest r;
    r.text = item;
    if (parts[0] == "noise")
        r.kind = MetricKind::Noise;
    else if (parts[0] == "transition")
        r.kind = MetricKind::Transition;
    else if (parts[0] == "fringe")
        r.kind = MetricKind::Fringe;
    else if (parts[0] == "locked")
        r.kind = MetricKind::Locked;
    else
        throw bad("kind must be noise, transition, fringe or locked");
    try
    {
        r.channel = parse_target(parts[1]);
    }
    catch (const ContractError&)
    {
        throw bad("channel must be TgD1 or TgD2");
    }
    const auto dash = parts[2].find('-');
    if (dash == std::string::npos)
        throw bad("range must be start-end");
    try
    {
        r.interval.t_start = std::stoll(parts[2].substr(0, dash));
        r.interval.t_end = std::stoll(parts[2].substr(dash + 1));
    }
    catch (const std::logic_error&)
    {
        throw bad("range must be start-end");
    }
    return r;
}

std::vector<MetricRequest> parse_requests(const std::string& spec)
{
    std::string text = spec;
    if (fs::is_regular_file(spec))
    {
        std::ifstream in(spec);
        std::ostringstream os;
        os << in.rdbuf();
        text = os.str();
    }
    std::vector<MetricRequest> out;
    std::string item;
    auto flush = [&] {
        const auto a = item.find_first_not_of(" \t\r");
        const auto b = item.find_last_not_of(" \t\r");
        if (a != std::string::npos && item[a] != '#')
            out.push_back(parse_request(item.substr(a, b - a + 1)));
        item.clear();
    };
    for (char c : text)
    {
        if (c == ',' || c == ';' || c == '\n')
            flush();
        else
            item += c;
    }
    flush();
    if (out.empty())
        throw std::invalid_argument("no intervals given");
    return out;
}

int cmd_metrics(const std::string& input, const std::string& spec, const std::string& out_path)
{
    const auto records = load_timeseries_csv(input);
    if (records.empty())
        throw std::runtime_error("'" + input + "' has no records");
    const auto requests = parse_requests(spec);
    const std::int64_t t0 = records.front().t;
    const auto d1 = channel_series(records, FeedbackTarget::TgD1);
    const auto d2 = channel_series(records, FeedbackTarget::TgD2);
    auto series = [&](FeedbackTarget c) -> const std::vector<double>& { return c == FeedbackTarget::TgD1 ? d1 : d2; };

    auto out = open_out(out_path);
    out << "kind,channel,t_start,t_end,mean,std,sigma_p,cv,t10,t90,duration,visibility\n";
    std::printf("%-34s %10s %10s %8s %7s %9s %9s %9s %7s\n", "interval", "mean", "std", "sigma_P", "CV", "t10",
                "t90", "t_rise", "V");

    for (const auto& r : requests)
    {
        const auto& x = series(r.channel);
        const auto samples = detail::slice(x, r.interval, t0);
        const auto stats = noise_stats(samples);
        double t10 = NAN, t90 = NAN, dur = NAN, vis = NAN;
        const char* kind = "noise";
        switch (r.kind)
        {
        case MetricKind::Noise: break;
        case MetricKind::Transition:
        {
            kind = "transition";
            try
            {
                const auto tr = rise_fall_time(x, r.interval, t0);
                t10 = tr.t10, t90 = tr.t90, dur = tr.duration;
            }
            catch (const NoTransitionError& e)
            {
                std::cerr << "warning: " << r.text << ": " << e.what() << '\n';
            }
            break;
        }
        case MetricKind::Fringe:
            kind = "fringe";
            vis = fringe_visibility(samples);
            break;
        case MetricKind::Locked:
            kind = "locked";
            vis = locked_visibility(samples, detail::slice(series(complement(r.channel)), r.interval, t0));
            break;
        }
        const double cv = stats.cv.value_or(NAN);
        out << kind << ',' << to_string(r.channel) << ',' << r.interval.t_start << ',' << r.interval.t_end << ','
            << fmt(stats.mean, 3) << ',' << fmt(stats.std, 3) << ',' << fmt(stats.sigma_p, 3) << ',' << fmt(cv, 4)
            << ',' << fmt(t10, 3) << ',' << fmt(t90, 3) << ',' << fmt(dur, 3) << ',' << fmt(vis, 4) << '\n';
        std::printf("%-34s %10s %10s %8s %7s %9s %9s %9s %7s\n", r.text.c_str(), fmt(stats.mean, 3).c_str(),
                    fmt(stats.std, 3).c_str(), fmt(stats.sigma_p, 3).c_str(), fmt(cv, 3).c_str(),
                    fmt(t10, 2).c_str(), fmt(t90, 2).c_str(), fmt(dur, 2).c_str(), fmt(vis, 4).c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Phase-stabilization simulator for a correlated-photon interferometer"};
    app.require_subcommand(1);

    std::string config_path, out_path, input, intervals;
    std::optional<std::uint64_t> seed;
    std::size_t n_seeds = 20;
    bool with_drift = false;
    int offset = 0, period = 64, ramps = 8;

    auto* cal = app.add_subcommand("calibrate", "Find s_min/s_max with the sawtooth sweep");
    cal->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
    cal->add_option("--out", out_path, "Calibration record to write")->required();
    cal->add_option("--seed", seed, "Override the config seed");
    cal->add_option("--offset", offset, "Lower word of the sweep")->check(CLI::Range(0, 4095));
    cal->add_option("--period", period, "Ticks per ramp")->check(CLI::Range(8, 4096));
    cal->add_option("--ramps", ramps, "Ramps per probe")->check(CLI::Range(2, 1000));
    cal->add_flag("--with-drift", with_drift, "Keep the environmental phase noise on during the sweep");

    auto* run = app.add_subcommand("run", "Run one closed-loop experiment");
    run->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "Override the config seed");
    run->add_option("--out", out_path, "Time-series CSV (default: config output)");

    auto* cmp = app.add_subcommand("compare", "Classical vs adaptive over paired seeds");
    cmp->add_option("--config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
    cmp->add_option("--seeds", n_seeds, "Number of seeds, starting at the config seed")->check(CLI::Range(2, 100000));
    cmp->add_option("--out", out_path, "Output directory")->required();

    auto* met = app.add_subcommand("metrics", "Interval statistics of a time-series CSV");
    met->add_option("--input", input, "Time-series CSV")->required()->check(CLI::ExistingFile);
    met->add_option("--intervals", intervals,
                    "kind:channel:start-end list (kind = noise|transition|fringe|locked), inline or a file")
        ->required();
    met->add_option("--out", out_path, "Metrics CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (app.got_subcommand(cal))
            return cmd_calibrate(config_path, out_path, seed, with_drift, offset, period, ramps);
        if (app.got_subcommand(run))
            return cmd_run(config_path, seed, out_path);
        if (app.got_subcommand(cmp))
            return cmd_compare(config_path, n_seeds, out_path);
        if (app.got_subcommand(met))
            return cmd_metrics(input, intervals, out_path);
    }
    catch (const ConfigError& e)
    {
        std::cerr << "config error [" << e.field() << "]: " << e.what() << '\n';
        return 2;
    }
    catch (const CalibrationError& e)
    {
        std::cerr << "calibration failed: " << e.what() << " (last probes: " << e.below().amplitude << " "
                  << to_string(e.below().response) << ", " << e.above().amplitude << " "
                  << to_string(e.above().response) << ")\n";
        return 3;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
