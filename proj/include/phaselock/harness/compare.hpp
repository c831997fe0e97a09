#pragma once

// Per-run metrics and the paired-seed comparison of the two controllers.

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "phaselock/harness/config.hpp"
#include "phaselock/harness/experiment.hpp"
#include "phaselock/metrics.hpp"

namespace phaselock
{

struct WindowMetrics
{
    ChannelWindow window;
    NoiseStats stats;
    double visibility = 0; ///< locked port against its complement
};

struct RunMetrics
{
    std::optional<Transition> transition;
    std::vector<WindowMetrics> steady;

    double mean_std() const { return average([](const WindowMetrics& w) { return w.stats.std; }); }
    double mean_cv() const { return average([](const WindowMetrics& w) { return w.stats.cv.value_or(NAN); }); }
    double mean_visibility() const { return average([](const WindowMetrics& w) { return w.visibility; }); }

  private:
    template<class F>
    double average(F f) const
    {
        if (steady.empty())
            return NAN;
        double s = 0;
        for (const auto& w : steady)
            s += f(w);
        return s / static_cast<double>(steady.size());
    }
};

inline RunMetrics analyze_run(const std::vector<TimeSeriesRecord>& records, const AnalysisConfig& analysis)
{
    if (records.empty())
        throw ContractError("cannot analyze an empty run");
    const std::int64_t t0 = records.front().t;
    const auto d1 = channel_series(records, FeedbackTarget::TgD1);
    const auto d2 = channel_series(records, FeedbackTarget::TgD2);
    auto series = [&](FeedbackTarget c) -> const std::vector<double>& { return c == FeedbackTarget::TgD1 ? d1 : d2; };

    RunMetrics m;
    try
    {
        m.transition = rise_fall_time(series(analysis.transition.channel), analysis.transition.interval, t0);
    }
    catch (const NoTransitionError&)
    {
        m.transition.reset();
    }
    for (const auto& w : analysis.steady)
    {
        WindowMetrics wm;
        wm.window = w;
        wm.stats = noise_stats(series(w.channel), w.interval, t0);
        const auto locked = detail::slice(series(w.channel), w.interval, t0);
        const auto dark = detail::slice(series(complement(w.channel)), w.interval, t0);
        wm.visibility = locked_visibility(locked, dark);
        m.steady.push_back(wm);
    }
    return m;
}

/// One paired seed: both controllers faced the same phase trajectory.
struct SeedComparison
{
    std::uint64_t seed = 0;
    RunMetrics classical;
    RunMetrics adaptive;
    bool same_phase_noise = false;

    std::optional<double> delta_t_percent() const
    {
        if (!classical.transition || !adaptive.transition || !(classical.transition->duration > 0))
            return std::nullopt;
        return percent_decrease_time(classical.transition->duration, adaptive.transition->duration);
    }

    /// Mean over the steady windows of the per-window noise decrease.
    double delta_sigma_percent() const
    {
        double s = 0;
        for (std::size_t i = 0; i < classical.steady.size(); ++i)
            s += percent_decrease_noise(classical.steady[i].stats.std, adaptive.steady[i].stats.std);
        return s / static_cast<double>(classical.steady.size());
    }
};

struct MeanStd
{
    double mean = NAN;
    double std = NAN;
    std::size_t n = 0;
};

inline MeanStd mean_std(const std::vector<double>& v)
{
    MeanStd r;
    r.n = v.size();
    if (!v.empty())
        r.mean = mean_of(v);
    if (v.size() > 1)
        r.std = sample_std(v);
    return r;
}

struct ComparisonReport
{
    std::vector<SeedComparison> seeds;

    MeanStd transition_classical;
    MeanStd transition_adaptive;
    MeanStd cv_classical;
    MeanStd cv_adaptive;
    MeanStd visibility_classical;
    MeanStd visibility_adaptive;
    MeanStd delta_t;       ///< mean of per-seed percentages
    double delta_t_of_means = NAN;
    MeanStd delta_sigma;

    double frac_faster = 0;        ///< adaptive transition strictly shorter
    double frac_quieter = 0;       ///< per-seed delta sigma > 0
    double frac_lower_cv = 0;
    double frac_visibility = 0;    ///< adaptive visibility >= classical
    bool paired_noise = true;      ///< phase trajectories identical for every seed
};

inline ComparisonReport aggregate(std::vector<SeedComparison> seeds)
{
    ComparisonReport rep;
    std::vector<double> tc, ta, cvc, cva, vc, va, dt, ds;
    std::size_t faster = 0, quieter = 0, lower_cv = 0, vis = 0;
    for (const auto& s : seeds)
    {
        if (s.classical.transition)
            tc.push_back(s.classical.transition->duration);
        if (s.adaptive.transition)
            ta.push_back(s.adaptive.transition->duration);
        if (s.classical.transition && s.adaptive.transition &&
            s.adaptive.transition->duration < s.classical.transition->duration)
            ++faster;
        if (auto d = s.delta_t_percent())
            dt.push_back(*d);
        const double dsig = s.delta_sigma_percent();
        ds.push_back(dsig);
        quieter += dsig > 0;
        cvc.push_back(s.classical.mean_cv());
        cva.push_back(s.adaptive.mean_cv());
        lower_cv += s.adaptive.mean_cv() < s.classical.mean_cv();
        vc.push_back(s.classical.mean_visibility());
        va.push_back(s.adaptive.mean_visibility());
        vis += s.adaptive.mean_visibility() >= s.classical.mean_visibility();
        rep.paired_noise = rep.paired_noise && s.same_phase_noise;
    }
    const double n = static_cast<double>(seeds.size());
    rep.transition_classical = mean_std(tc);
    rep.transition_adaptive = mean_std(ta);
    rep.cv_classical = mean_std(cvc);
    rep.cv_adaptive = mean_std(cva);
    rep.visibility_classical = mean_std(vc);
    rep.visibility_adaptive = mean_std(va);
    rep.delta_t = mean_std(dt);
    if (!tc.empty() && !ta.empty() && rep.transition_classical.mean > 0)
        rep.delta_t_of_means = percent_decrease_time(rep.transition_classical.mean, rep.transition_adaptive.mean);
    rep.delta_sigma = mean_std(ds);
    if (n > 0)
    {
        rep.frac_faster = static_cast<double>(faster) / n;
        rep.frac_quieter = static_cast<double>(quieter) / n;
        rep.frac_lower_cv = static_cast<double>(lower_cv) / n;
        rep.frac_visibility = static_cast<double>(vis) / n;
    }
    rep.seeds = std::move(seeds);
    return rep;
}

struct PairedRuns
{
    std::vector<TimeSeriesRecord> a;
    std::vector<TimeSeriesRecord> b;
};

inline bool same_phase_noise(const std::vector<TimeSeriesRecord>& a, const std::vector<TimeSeriesRecord>& b)
{
    if (a.size() != b.size())
        return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].phi_noise != b[i].phi_noise)
            return false;
    return true;
}

/// Runs two configurations on every seed and compares them, `reference`
/// playing the role of the classical controller.
template<class OnRun>
ComparisonReport compare_configs(const ExperimentConfig& reference, const ExperimentConfig& candidate,
                                 const std::vector<std::uint64_t>& seeds, OnRun&& on_run)
{
    if (seeds.size() < 2)
        throw ContractError("comparison needs at least two seeds");
    std::vector<SeedComparison> out;
    for (auto seed : seeds)
    {
        auto ref = reference;
        auto cand = candidate;
        ref.seed = cand.seed = seed;
        PairedRuns runs{run_experiment(ref), run_experiment(cand)};
        on_run(seed, runs);
        SeedComparison sc;
        sc.seed = seed;
        sc.classical = analyze_run(runs.a, reference.analysis);
        sc.adaptive = analyze_run(runs.b, reference.analysis);
        sc.same_phase_noise = same_phase_noise(runs.a, runs.b);
        out.push_back(std::move(sc));
    }
    return aggregate(std::move(out));
}

inline ComparisonReport compare_configs(const ExperimentConfig& reference, const ExperimentConfig& candidate,
                                        const std::vector<std::uint64_t>& seeds)
{
    return compare_configs(reference, candidate, seeds, [](std::uint64_t, const PairedRuns&) {});
}

/// Classical against adaptive on identical environments; the controller is
/// the only difference between the two arms.
template<class OnRun>
ComparisonReport compare_algorithms(const ExperimentConfig& base, const std::vector<std::uint64_t>& seeds,
                                    OnRun&& on_run)
{
    auto classical = base;
    auto adaptive = base;
    classical.controller = ControllerKind::Classical;
    adaptive.controller = ControllerKind::Adaptive;
    return compare_configs(classical, adaptive, seeds, std::forward<OnRun>(on_run));
}

inline ComparisonReport compare_algorithms(const ExperimentConfig& base, const std::vector<std::uint64_t>& seeds)
{
    return compare_algorithms(base, seeds, [](std::uint64_t, const PairedRuns&) {});
}

namespace detail
{

inline std::string num(double v, int prec = 3)
{
    if (std::isnan(v))
        return "";
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

} // namespace detail

inline void write_comparison_csv(std::ostream& os, const ComparisonReport& rep)
{
    os << "seed,t_po,t_adaptive,delta_t_percent,std_po,std_adaptive,delta_sigma_percent,cv_po,cv_adaptive,"
          "visibility_po,visibility_adaptive,paired_noise\n";
    using detail::num;
    for (const auto& s : rep.seeds)
    {
        const auto tc = s.classical.transition ? s.classical.transition->duration : NAN;
        const auto ta = s.adaptive.transition ? s.adaptive.transition->duration : NAN;
        os << s.seed << ',' << num(tc) << ',' << num(ta) << ',' << num(s.delta_t_percent().value_or(NAN), 2) << ','
           << num(s.classical.mean_std()) << ',' << num(s.adaptive.mean_std()) << ','
           << num(s.delta_sigma_percent(), 2) << ',' << num(s.classical.mean_cv(), 4) << ','
           << num(s.adaptive.mean_cv(), 4) << ',' << num(s.classical.mean_visibility(), 4) << ','
           << num(s.adaptive.mean_visibility(), 4) << ',' << (s.same_phase_noise ? 1 : 0) << '\n';
    }
}

inline void write_comparison_summary(std::ostream& os, const ComparisonReport& rep)
{
    using detail::num;
    auto pm = [](const MeanStd& m, int prec = 3) { return num(m.mean, prec) + " +/- " + num(m.std, prec); };
    os << "Paired seeds: " << rep.seeds.size() << (rep.paired_noise ? " (identical phase noise per seed)" : "")
       << "\n\n";
    os << "Transition time (10-90%) [s]\n"
       << "  P&O       " << pm(rep.transition_classical, 2) << '\n'
       << "  Adaptive  " << pm(rep.transition_adaptive, 2) << '\n'
       << "  delta_t%  mean of per-seed values: " << pm(rep.delta_t, 1) << '\n'
       << "            from mean times:          " << num(rep.delta_t_of_means, 1) << '\n'
       << "  adaptive faster in " << num(100 * rep.frac_faster, 0) << "% of seeds\n\n";
    os << "Steady-state noise\n"
       << "  CV P&O       " << pm(rep.cv_classical, 4) << '\n'
       << "  CV Adaptive  " << pm(rep.cv_adaptive, 4) << '\n'
       << "  delta_sigma% " << pm(rep.delta_sigma, 1) << '\n'
       << "  adaptive quieter in " << num(100 * rep.frac_quieter, 0) << "% of seeds, lower CV in "
       << num(100 * rep.frac_lower_cv, 0) << "%\n\n";
    os << "Locked visibility\n"
       << "  P&O       " << pm(rep.visibility_classical, 4) << '\n'
       << "  Adaptive  " << pm(rep.visibility_adaptive, 4) << '\n'
       << "  adaptive >= P&O in " << num(100 * rep.frac_visibility, 0) << "% of seeds\n";
}

} // namespace phaselock
