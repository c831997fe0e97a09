#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "phaselock/phaselock.hpp"

using namespace phaselock;

namespace
{

ExperimentConfig short_config()
{
    ExperimentConfig cfg;
    cfg.duration = 120;
    cfg.schedule = {{40, ScheduleEvent::Kind::Target, FeedbackTarget::TgD2, 0},
                    {90, ScheduleEvent::Kind::ControlOff, FeedbackTarget::TgD1, 0}};
    cfg.analysis.transition = {{35, 70}, FeedbackTarget::TgD2};
    cfg.analysis.steady = {{{10, 39}, FeedbackTarget::TgD1}, {{60, 89}, FeedbackTarget::TgD2}};
    return cfg;
}

std::string tmp_path(const std::string& name)
{
    return (std::filesystem::temp_directory_path() / ("phaselock_test_" + name)).string();
}

} // namespace

TEST(Config, DefaultsMatchScenario)
{
    const ExperimentConfig cfg;
    EXPECT_EQ(cfg.plant.c0, 1500);
    EXPECT_EQ(cfg.plant.visibility, 0.9);
    EXPECT_EQ(cfg.classical.p, 50);
    EXPECT_EQ(cfg.adaptive.beta, 50);
    EXPECT_EQ(cfg.adaptive.shift, 3);
    EXPECT_EQ(cfg.adaptive.i_max, 3000);
    EXPECT_EQ(cfg.duration, 700);
    EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, MinimalConfigTakesDefaults)
{
    const auto cfg = parse_config("seed = 9\n");
    ExperimentConfig want;
    want.seed = 9;
    EXPECT_EQ(cfg, want);
}

TEST(Config, RoundTrip)
{
    auto cfg = short_config();
    cfg.seed = 123456789012345ull;
    cfg.plant.gain2 = 0.123456789012345678;
    cfg.plant.noise.diffusion = 1.0 / 3.0;
    cfg.controller = ControllerKind::Classical;
    cfg.i_max_mode = IMaxMode::Running;
    cfg.actuate_stretcher1 = true;
    cfg.schedule.push_back({100, ScheduleEvent::Kind::Burst, FeedbackTarget::TgD1, -1.25});
    cfg.schedule.push_back({110, ScheduleEvent::Kind::ControlOn, FeedbackTarget::TgD1, 0});
    EXPECT_EQ(parse_config(serialize_config(cfg)), cfg);

    auto none = short_config();
    none.schedule.clear();
    EXPECT_EQ(parse_config(serialize_config(none)), none);
}

TEST(Config, ErrorsNameTheField)
{
    auto field_of = [](const std::string& text) {
        try
        {
            parse_config(text);
        }
        catch (const ConfigError& e)
        {
            return e.field();
        }
        return std::string("<none>");
    };
    EXPECT_EQ(field_of("[adaptive]\ns_max = 5000\n"), "adaptive.s_max");
    EXPECT_EQ(field_of("[plant]\nc0 = abc\n"), "plant.c0");
    EXPECT_EQ(field_of("[plant]\nwobble = 1\n"), "plant.wobble");
    EXPECT_EQ(field_of("[classical]\np = 0\n"), "classical.p");
    EXPECT_EQ(field_of("duration = 100\n[schedule]\nat = 500 control off\n"), "schedule.at");
    EXPECT_EQ(field_of("[schedule]\nat = 10 jump\n"), "schedule.at");
}

TEST(Config, ParsesSectionsAndComments)
{
    const auto cfg = parse_config("# comment\nseed = 4\ncontroller = classical\n\n[noise]\ndiffusion = 0.2\n"
                                  "[schedule]\nat = 5 burst 1.5\nat = 6 control off\n"
                                  "[analysis]\ntransition = 1-50 TgD1\nsteady = 100-200 TgD2\n");
    EXPECT_EQ(cfg.seed, 4u);
    EXPECT_EQ(cfg.controller, ControllerKind::Classical);
    EXPECT_EQ(cfg.plant.noise.diffusion, 0.2);
    ASSERT_EQ(cfg.schedule.size(), 2u);
    EXPECT_EQ(cfg.schedule[0].kind, ScheduleEvent::Kind::Burst);
    EXPECT_EQ(cfg.schedule[0].radians, 1.5);
    ASSERT_EQ(cfg.analysis.steady.size(), 1u);
    EXPECT_EQ(cfg.analysis.steady[0].channel, FeedbackTarget::TgD2);
}

TEST(CalibrationRecord, RoundTripAndMissingFile)
{
    const CalibrationRecord rec{0, 1703, kTwoPi / 1703, "2026-01-01T00:00:00Z", 7};
    std::stringstream ss;
    write_calibration_record(ss, rec);
    const auto back = read_calibration_record(ss);
    EXPECT_EQ(back.s_max, 1703);
    EXPECT_EQ(back.gain_estimate, rec.gain_estimate);
    EXPECT_EQ(back.seed, 7u);
    try
    {
        load_calibration_record("/nonexistent/calib.txt");
        FAIL();
    }
    catch (const ConfigError& e)
    {
        EXPECT_EQ(e.field(), "calibration_file");
    }
}

TEST(Experiment, CalibrationFileSetsBounds)
{
    const auto path = tmp_path("calib.txt");
    {
        std::ofstream out(path);
        write_calibration_record(out, CalibrationRecord{10, 1500, kTwoPi / 1490, "now", 1});
    }
    auto cfg = short_config();
    cfg.calibration_file = path;
    const auto resolved = resolve_calibration(cfg);
    EXPECT_EQ(resolved.adaptive.s_min, 10);
    EXPECT_EQ(resolved.adaptive.s_max, 1500);
    for (const auto& r : run_experiment(cfg))
    {
        ASSERT_GE(r.s_ctrl2, 10);
        ASSERT_LE(r.s_ctrl2, 1500);
    }
    std::remove(path.c_str());
}

TEST(Experiment, Deterministic)
{
    const auto cfg = short_config();
    EXPECT_EQ(run_experiment(cfg), run_experiment(cfg));
    auto other = cfg;
    other.seed = 2;
    EXPECT_NE(run_experiment(cfg), run_experiment(other));
}

TEST(Experiment, LogShape)
{
    const auto log = run_experiment(short_config());
    ASSERT_EQ(log.size(), 120u);
    for (std::size_t i = 0; i < log.size(); ++i)
    {
        EXPECT_EQ(log[i].t, static_cast<std::int64_t>(i + 1));
        EXPECT_EQ(log[i].s_ctrl1, 0);
    }
}

TEST(Experiment, TargetSwitchChangesFeedbackChannel)
{
    const auto log = run_experiment(short_config());
    for (const auto& r : log)
        EXPECT_EQ(r.target, r.t < 40 ? FeedbackTarget::TgD1 : FeedbackTarget::TgD2);
    // Locked on D1 before the switch and on D2 after it.
    double d1 = 0, d2 = 0;
    for (int t = 20; t < 39; ++t)
        d1 += log[t].cc_tg_d1, d2 += log[t].cc_tg_d2;
    EXPECT_GT(d1, 3 * d2);
    d1 = d2 = 0;
    for (int t = 70; t < 89; ++t)
        d1 += log[t].cc_tg_d1, d2 += log[t].cc_tg_d2;
    EXPECT_GT(d2, 3 * d1);
}

TEST(Experiment, NoControllerStepWhileDisabled)
{
    for (auto kind : {ControllerKind::Classical, ControllerKind::Adaptive})
    {
        auto cfg = short_config();
        cfg.controller = kind;
        const auto log = run_experiment(cfg);
        for (std::size_t i = 89; i < log.size(); ++i)
        {
            EXPECT_FALSE(log[i].en_control);
            EXPECT_EQ(log[i].dp, 0);
            if (i > 89)
            {
                EXPECT_EQ(log[i].s_ctrl2, log[i - 1].s_ctrl2);
            }
        }
    }
}

TEST(Experiment, ControlCanBeReenabled)
{
    auto cfg = short_config();
    cfg.schedule = {{20, ScheduleEvent::Kind::ControlOff, FeedbackTarget::TgD1, 0},
                    {40, ScheduleEvent::Kind::ControlOn, FeedbackTarget::TgD1, 0}};
    const auto log = run_experiment(cfg);
    EXPECT_FALSE(log[25].en_control);
    EXPECT_TRUE(log[45].en_control);
    EXPECT_GT(log[45].dp, 0);
}

TEST(Experiment, ControllersShareThePhaseTrajectory)
{
    auto a = short_config();
    auto b = a;
    a.controller = ControllerKind::Classical;
    b.controller = ControllerKind::Adaptive;
    EXPECT_TRUE(same_phase_noise(run_experiment(a), run_experiment(b)));
}

TEST(Experiment, DpFollowsController)
{
    auto cfg = short_config();
    cfg.controller = ControllerKind::Classical;
    for (const auto& r : run_experiment(cfg))
        if (r.en_control)
        {
            ASSERT_EQ(r.dp, 50);
        }
    cfg.controller = ControllerKind::Adaptive;
    for (const auto& r : run_experiment(cfg))
        if (r.en_control)
        {
            ASSERT_GE(r.dp, 50);
            ASSERT_LE(r.dp, 425);
        }
}

TEST(Experiment, InitialWordOutsideAdaptiveBounds)
{
    auto cfg = short_config();
    cfg.initial_word = 2000;
    try
    {
        run_experiment(cfg);
        FAIL();
    }
    catch (const ConfigError& e)
    {
        EXPECT_EQ(e.field(), "actuators.initial_word");
    }
}

TEST(TimeSeriesCsv, HeaderAndRoundTrip)
{
    const auto log = run_experiment(short_config());
    std::stringstream ss;
    write_timeseries_csv(ss, log);
    std::string first;
    std::getline(ss, first);
    EXPECT_EQ(first, "t,cc_tg_d1,cc_tg_d2,s_ctrl1,s_ctrl2,dp,en_control,target,phi_noise");
    ss.seekg(0);
    const auto back = read_timeseries_csv(ss);
    ASSERT_EQ(back.size(), log.size());
    for (std::size_t i = 0; i < log.size(); ++i)
    {
        EXPECT_EQ(back[i].cc_tg_d1, log[i].cc_tg_d1);
        EXPECT_EQ(back[i].target, log[i].target);
        EXPECT_NEAR(back[i].phi_noise, log[i].phi_noise, 1e-9);
    }
    EXPECT_EQ(ss.str().find('\r'), std::string::npos);
}

TEST(TimeSeriesCsv, RejectsWrongHeader)
{
    std::istringstream in("t,cc1,cc2\n1,2,3\n");
    EXPECT_THROW(read_timeseries_csv(in), ContractError);
}

TEST(Compare, SelfComparisonIsZero)
{
    auto cfg = short_config();
    cfg.controller = ControllerKind::Adaptive;
    const auto rep = compare_configs(cfg, cfg, {1, 2, 3});
    EXPECT_TRUE(rep.paired_noise);
    for (const auto& s : rep.seeds)
    {
        EXPECT_EQ(s.delta_sigma_percent(), 0.0);
        if (auto d = s.delta_t_percent())
        {
            EXPECT_EQ(*d, 0.0);
        }
    }
    EXPECT_EQ(rep.frac_faster, 0.0);
    EXPECT_EQ(rep.frac_quieter, 0.0);
    EXPECT_EQ(rep.frac_visibility, 1.0);
}

TEST(Compare, NeedsTwoSeeds)
{
    EXPECT_THROW(compare_algorithms(short_config(), {1}), ContractError);
}

TEST(Compare, AlgorithmsPairedAndReported)
{
    std::size_t runs = 0;
    const auto rep = compare_algorithms(short_config(), {5, 6},
                                        [&](std::uint64_t, const PairedRuns& r) {
                                            ++runs;
                                            EXPECT_EQ(r.a.size(), r.b.size());
                                        });
    EXPECT_EQ(runs, 2u);
    EXPECT_TRUE(rep.paired_noise);
    std::ostringstream csv, summary;
    write_comparison_csv(csv, rep);
    write_comparison_summary(summary, rep);
    EXPECT_EQ(csv.str().substr(0, 5), "seed,");
    EXPECT_NE(summary.str().find("Paired seeds: 2"), std::string::npos);
}

TEST(Analyze, WindowsAndTransition)
{
    const auto log = run_experiment(short_config());
    const auto m = analyze_run(log, short_config().analysis);
    ASSERT_EQ(m.steady.size(), 2u);
    EXPECT_GT(m.steady[0].stats.mean, 1000);
    EXPECT_GT(m.steady[0].visibility, 0.3);
    ASSERT_TRUE(m.transition.has_value());
    EXPECT_GT(m.transition->steady, m.transition->baseline);
}

TEST(Config, GainAsFringePeriod)
{
    const auto cfg = parse_config("[plant]\ngain2 = 2pi/850\n");
    EXPECT_DOUBLE_EQ(cfg.plant.gain2, kTwoPi / 850);
    EXPECT_THROW(parse_config("[plant]\ngain2 = 2pi/0\n"), ConfigError);
    EXPECT_THROW(parse_config("[plant]\ngain2 = 2pi/x\n"), ConfigError);
}

TEST(Config, SampleConfigsLoad)
{
    const std::string dir = PHASELOCK_CONFIG_DIR;
    EXPECT_EQ(load_config(dir + "/default.cfg"), ExperimentConfig{});
    EXPECT_EQ(load_config(dir + "/classical.cfg").controller, ControllerKind::Classical);
    EXPECT_EQ(load_config(dir + "/bursts.cfg").schedule.size(), 3u);
    EXPECT_EQ(load_config(dir + "/calibrated.cfg").calibration_file, "calib.txt");
}
