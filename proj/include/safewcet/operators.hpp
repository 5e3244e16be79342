#pragma once

#include <utility>
#include <vector>

#include "safewcet/test_case.hpp"

namespace safewcet {

/// Crossover slots in fixed order: the three context-switch times, then one
/// slot per aperiodic task holding its whole arrival sequence.
inline std::size_t crossover_slot_count(const SystemSpec& spec) {
    std::size_t n = 3;
    for (const auto& t : spec.tasks) n += !t.periodic();
    return n;
}

/// Swaps slots 0..point (inclusive) between the two test cases.
inline void swap_prefix(const SystemSpec& spec, TestCase& p, TestCase& q, std::size_t point) {
    std::swap(p.startup, q.startup);
    if (point >= 1) std::swap(p.exit, q.exit);
    if (point >= 2) std::swap(p.ipi, q.ipi);
    std::size_t slot = 3;
    for (std::size_t i = 0; i < spec.tasks.size() && slot <= point; ++i) {
        if (spec.tasks[i].periodic()) continue;
        std::swap(p.arrivals[i], q.arrivals[i]);
        ++slot;
    }
}

/// Picks a crossover point uniformly over the slots and exchanges everything
/// at and before it. Periodic arrivals are identical in both parents and are
/// never touched.
inline std::pair<TestCase, TestCase> crossover(const SystemSpec& spec, const TestCase& p, const TestCase& q, Rng& rng) {
    std::pair<TestCase, TestCase> kids{p, q};
    swap_prefix(spec, kids.first, kids.second, uniform_index(rng, crossover_slot_count(spec)));
    return kids;
}

/// Replaces arrival k of an aperiodic sequence with `moved` and repairs the
/// tail: a still-valid successor is kept as is, otherwise the later arrivals
/// shift with it, those at or past the horizon drop, and fresh arrivals refill
/// up to the horizon.
inline void move_arrival(std::vector<Time>& seq, std::size_t k, Time moved, const TimeRange& gap, Time horizon, Time res,
                         Rng& rng) {
    const Time delta = moved - seq[k];
    seq[k] = moved;
    if (k + 1 < seq.size() && gap.contains(seq[k + 1] - moved)) return;
    for (std::size_t j = k + 1; j < seq.size(); ++j) seq[j] += delta;
    while (!seq.empty() && seq.back() >= horizon) seq.pop_back();
    extend_arrivals(seq, gap, horizon, res, rng);
}

inline TestCase mutate(const SystemSpec& spec, const TestCase& tc, double pm, Rng& rng) {
    TestCase out = tc;
    const Time res = spec.scheduler.resolution;
    const Time horizon = spec.horizon();
    const auto& cs = spec.context_switch;
    auto flip = [&] { return uniform01(rng) < pm; };
    if (flip()) out.startup = sample_in(cs.startup, res, rng);
    if (flip()) out.exit = sample_in(cs.exit, res, rng);
    if (flip()) out.ipi = sample_in(cs.ipi, res, rng);
    for (std::size_t i = 0; i < spec.tasks.size(); ++i) {
        const Task& t = spec.tasks[i];
        if (t.periodic()) continue;
        auto& seq = out.arrivals[i];
        for (std::size_t k = 0; k < seq.size(); ++k) {
            if (!flip()) continue;
            const Time prev = k == 0 ? Time{} : seq[k - 1];
            const Time hi = min(t.inter_arrival.hi, horizon - res - prev);
            move_arrival(seq, k, prev + uniform_time(rng, t.inter_arrival.lo, hi, res), t.inter_arrival, horizon, res, rng);
        }
    }
    return out;
}

}  // namespace safewcet
