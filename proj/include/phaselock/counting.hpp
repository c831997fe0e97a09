#pragma once

// Event-level model of the acquisition fabric: per-channel delay lines,
// 8-bit time-of-arrival tagging, 24-bit singles counters and pairwise
// coincidence counters.

#include <algorithm>
#include <array>
#include <cstdint>
#include <deque>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "phaselock/error.hpp"

namespace phaselock
{

enum class Channel : std::uint8_t
{
    Tg = 0,
    D1 = 1,
    D2 = 2,
};

inline constexpr std::int64_t kFineSlots = 256;
inline constexpr unsigned kCounterBits = 24;
inline constexpr std::uint32_t kCounterMask = (1u << kCounterBits) - 1u;

inline const char* to_string(Channel c)
{
    switch (c)
    {
    case Channel::Tg: return "Tg";
    case Channel::D1: return "D1";
    case Channel::D2: return "D2";
    }
    return "?";
}

inline Channel parse_channel(const std::string& s)
{
    if (s == "Tg")
        return Channel::Tg;
    if (s == "D1")
        return Channel::D1;
    if (s == "D2")
        return Channel::D2;
    throw ContractError("unknown channel '" + s + "'");
}

/// One detector pulse as seen after the ToA stage.
struct PulseEvent
{
    Channel channel = Channel::Tg;
    std::uint64_t cycle = 0; ///< coarse clock cycle
    std::uint8_t toa = 0;    ///< fine arrival slot, 8 bits

    std::int64_t time() const { return static_cast<std::int64_t>(cycle) * kFineSlots + toa; }

    static PulseEvent at(Channel ch, std::int64_t t)
    {
        return PulseEvent{ch, static_cast<std::uint64_t>(t / kFineSlots),
                          static_cast<std::uint8_t>(t % kFineSlots)};
    }

    friend bool operator==(const PulseEvent&, const PulseEvent&) = default;
};

/// Per-window counter snapshot. Every counter carries 24-bit wrap semantics.
struct CountReport
{
    std::uint32_t singles_tg = 0;
    std::uint32_t singles_d1 = 0;
    std::uint32_t singles_d2 = 0;
    std::uint32_t cc_tg_d1 = 0;
    std::uint32_t cc_tg_d2 = 0;
    std::uint32_t cc_d1_d2 = 0;
    std::uint64_t window_index = 0;

    friend bool operator==(const CountReport&, const CountReport&) = default;
};

/// Adds `n` to a 24-bit hardware counter.
inline constexpr std::uint32_t counter_add(std::uint32_t counter, std::uint64_t n)
{
    return static_cast<std::uint32_t>((counter + n) & kCounterMask);
}

struct DelayConfig
{
    std::int64_t delay_tg = 0;
    std::int64_t delay_d1 = 0;
    std::int64_t delay_d2 = 0;

    std::int64_t of(Channel c) const
    {
        switch (c)
        {
        case Channel::Tg: return delay_tg;
        case Channel::D1: return delay_d1;
        case Channel::D2: return delay_d2;
        }
        return 0;
    }
};

struct DelayResult
{
    std::vector<PulseEvent> events;
    std::size_t dropped = 0; ///< events shifted before t = 0
};

inline bool is_time_sorted(std::span<const PulseEvent> events)
{
    return std::is_sorted(events.begin(), events.end(),
                          [](const PulseEvent& a, const PulseEvent& b) { return a.time() < b.time(); });
}

/// Shifts every event by its channel delay, carrying fine time into the cycle
/// count. The result is stably re-sorted by combined time.
inline DelayResult apply_delay(std::span<const PulseEvent> events, const DelayConfig& cfg)
{
    DelayResult out;
    out.events.reserve(events.size());
    for (const auto& e : events)
    {
        const std::int64_t t = e.time() + cfg.of(e.channel);
        if (t < 0)
        {
            ++out.dropped;
            continue;
        }
        out.events.push_back(PulseEvent::at(e.channel, t));
    }
    std::stable_sort(out.events.begin(), out.events.end(),
                     [](const PulseEvent& a, const PulseEvent& b) { return a.time() < b.time(); });
    return out;
}

namespace detail
{

// Greedy earliest-first matcher for one channel pair. Events of `a` and `b`
// wait in FIFO queues; an arriving event takes the oldest waiting partner of
// the other channel that is still inside the window.
class PairMatcher
{
  public:
    PairMatcher(Channel a, Channel b, std::int64_t window) : a_(a), b_(b), window_(window) {}

    bool involves(Channel c) const { return c == a_ || c == b_; }

    void feed(Channel c, std::int64_t t)
    {
        auto& mine = (c == a_) ? pending_a_ : pending_b_;
        auto& other = (c == a_) ? pending_b_ : pending_a_;
        while (!other.empty() && other.front() < t - window_)
            other.pop_front();
        if (!other.empty())
        {
            other.pop_front();
            ++matches_;
        }
        else
        {
            mine.push_back(t);
        }
    }

    std::uint64_t matches() const { return matches_; }

  private:
    Channel a_;
    Channel b_;
    std::int64_t window_;
    std::deque<std::int64_t> pending_a_;
    std::deque<std::int64_t> pending_b_;
    std::uint64_t matches_ = 0;
};

} // namespace detail

/// Counts singles and pairwise coincidences in a time-sorted event stream.
///
/// Two events of different channels coincide when their combined times differ
/// by at most `window` fine slots (inclusive). Each event is used at most once
/// per pair type; pairing is greedy, earliest first.
inline CountReport count_coincidences(std::span<const PulseEvent> events, std::int64_t window = 1)
{
    if (window < 0)
        throw ContractError("coincidence window must be >= 0");
    if (!is_time_sorted(events))
        throw ContractError("count_coincidences requires time-sorted events");

    std::array<std::uint64_t, 3> singles{};
    detail::PairMatcher tg_d1(Channel::Tg, Channel::D1, window);
    detail::PairMatcher tg_d2(Channel::Tg, Channel::D2, window);
    detail::PairMatcher d1_d2(Channel::D1, Channel::D2, window);

    for (const auto& e : events)
    {
        const auto t = e.time();
        ++singles[static_cast<std::size_t>(e.channel)];
        for (auto* m : {&tg_d1, &tg_d2, &d1_d2})
            if (m->involves(e.channel))
                m->feed(e.channel, t);
    }

    CountReport r;
    r.singles_tg = counter_add(0, singles[0]);
    r.singles_d1 = counter_add(0, singles[1]);
    r.singles_d2 = counter_add(0, singles[2]);
    r.cc_tg_d1 = counter_add(0, tg_d1.matches());
    r.cc_tg_d2 = counter_add(0, tg_d2.matches());
    r.cc_d1_d2 = counter_add(0, d1_d2.matches());
    return r;
}

/// Sync-gated integration of counter increments. `close_window` hands out the
/// totals of the finished window and restarts from zero.
class WindowIntegrator
{
  public:
    void add(const CountReport& r)
    {
        acc_.singles_tg = counter_add(acc_.singles_tg, r.singles_tg);
        acc_.singles_d1 = counter_add(acc_.singles_d1, r.singles_d1);
        acc_.singles_d2 = counter_add(acc_.singles_d2, r.singles_d2);
        acc_.cc_tg_d1 = counter_add(acc_.cc_tg_d1, r.cc_tg_d1);
        acc_.cc_tg_d2 = counter_add(acc_.cc_tg_d2, r.cc_tg_d2);
        acc_.cc_d1_d2 = counter_add(acc_.cc_d1_d2, r.cc_d1_d2);
    }

    void add_events(std::span<const PulseEvent> events, std::int64_t window = 1)
    {
        add(count_coincidences(events, window));
    }

    const CountReport& pending() const { return acc_; }

    CountReport close_window()
    {
        CountReport out = acc_;
        out.window_index = index_;
        acc_ = CountReport{};
        ++index_;
        return out;
    }

    std::uint64_t window_index() const { return index_; }

  private:
    CountReport acc_{};
    std::uint64_t index_ = 0;
};

/// Expected per-window rates that drive the synthetic event source.
struct EventRates
{
    double pairs_tg_d1 = 0; ///< heralded pairs landing on D1
    double pairs_tg_d2 = 0; ///< heralded pairs landing on D2
    double background_tg = 0;
    double background_d1 = 0;
    double background_d2 = 0;
};

/// Synthesizes the pulse stream of one feedback window. A window spans
/// `cycles_per_window` coarse cycles of 256 fine slots. Heralded pairs put a
/// trigger and a detector pulse on the same fine slot; background pulses are
/// independent and uniform.
class EventSource
{
  public:
    explicit EventSource(std::uint64_t seed, std::uint64_t cycles_per_window = 1u << 16)
        : rng_(seed), cycles_(cycles_per_window)
    {
    }

    struct Tally
    {
        std::uint64_t tg = 0;
        std::uint64_t d1 = 0;
        std::uint64_t d2 = 0;
        std::uint64_t pairs_d1 = 0;
        std::uint64_t pairs_d2 = 0;
    };

    std::vector<PulseEvent> window(std::uint64_t index, const EventRates& rates)
    {
        const std::int64_t span = static_cast<std::int64_t>(cycles_) * kFineSlots;
        const std::int64_t base = static_cast<std::int64_t>(index) * span;
        std::uniform_int_distribution<std::int64_t> when(0, span - 1);
        std::vector<PulseEvent> out;

        auto emit = [&](Channel c, std::int64_t t, std::uint64_t& counter) {
            out.push_back(PulseEvent::at(c, base + t));
            ++counter;
        };
        const auto n1 = draw(rates.pairs_tg_d1);
        for (std::uint64_t i = 0; i < n1; ++i)
        {
            const auto t = when(rng_);
            emit(Channel::Tg, t, tally_.tg);
            emit(Channel::D1, t, tally_.d1);
        }
        tally_.pairs_d1 += n1;
        const auto n2 = draw(rates.pairs_tg_d2);
        for (std::uint64_t i = 0; i < n2; ++i)
        {
            const auto t = when(rng_);
            emit(Channel::Tg, t, tally_.tg);
            emit(Channel::D2, t, tally_.d2);
        }
        tally_.pairs_d2 += n2;
        for (auto [rate, ch, counter] : {std::tuple{rates.background_tg, Channel::Tg, &tally_.tg},
                                         std::tuple{rates.background_d1, Channel::D1, &tally_.d1},
                                         std::tuple{rates.background_d2, Channel::D2, &tally_.d2}})
        {
            const auto n = draw(rate);
            for (std::uint64_t i = 0; i < n; ++i)
                emit(ch, when(rng_), *counter);
        }
        std::stable_sort(out.begin(), out.end(),
                         [](const PulseEvent& a, const PulseEvent& b) { return a.time() < b.time(); });
        return out;
    }

    const Tally& tally() const { return tally_; }

  private:
    std::uint64_t draw(double mean)
    {
        if (mean <= 0)
            return 0;
        return std::poisson_distribution<std::uint64_t>(mean)(rng_);
    }

    std::mt19937_64 rng_;
    std::uint64_t cycles_;
    Tally tally_;
};

/// Writes events as `channel,cycle,toa` CSV.
inline void write_events_csv(std::ostream& os, std::span<const PulseEvent> events)
{
    os << "channel,cycle,toa\n";
    for (const auto& e : events)
        os << to_string(e.channel) << ',' << e.cycle << ',' << static_cast<unsigned>(e.toa) << '\n';
}

inline std::vector<PulseEvent> read_events_csv(std::istream& is)
{
    std::string line;
    if (!std::getline(is, line) || line != "channel,cycle,toa")
        throw ContractError("event CSV must start with header 'channel,cycle,toa'");
    std::vector<PulseEvent> out;
    std::size_t lineno = 1;
    while (std::getline(is, line))
    {
        ++lineno;
        if (line.empty())
            continue;
        std::istringstream ss(line);
        std::string ch, cycle, toa;
        if (!std::getline(ss, ch, ',') || !std::getline(ss, cycle, ',') || !std::getline(ss, toa))
            throw ContractError("event CSV line " + std::to_string(lineno) + ": expected 3 fields");
        unsigned long long c = 0;
        unsigned long t = 0;
        try
        {
            c = std::stoull(cycle);
            t = std::stoul(toa);
        }
        catch (const std::exception&)
        {
            throw ContractError("event CSV line " + std::to_string(lineno) + ": bad number");
        }
        if (t >= static_cast<unsigned long>(kFineSlots))
            throw ContractError("event CSV line " + std::to_string(lineno) + ": toa exceeds 8 bits");
        out.push_back(PulseEvent{parse_channel(ch), c, static_cast<std::uint8_t>(t)});
    }
    return out;
}

} // namespace phaselock
