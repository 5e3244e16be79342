#pragma once

#include <cmath>
#include <filesystem>
#include <numeric>
#include <optional>
#include <string>

#include "safewcet/safewcet.hpp"

namespace testsupport {

using namespace safewcet;

inline std::filesystem::path source_path(const std::string& rel) { return std::filesystem::path(SAFEWCET_SOURCE_DIR) / rel; }

inline Time ms(double v) { return Time::from_ms(v); }

inline Task periodic(const std::string& id, double period, double c_lo, double c_hi, int prio, double offset = 0) {
    Task t;
    t.id = id;
    t.kind = TaskKind::periodic;
    t.period = ms(period);
    t.offset = ms(offset);
    t.wcet = {ms(c_lo), ms(c_hi)};
    t.deadline = ms(period);
    t.priority = prio;
    t.partition = "P1";
    return t;
}

inline Task aperiodic(const std::string& id, double gap_lo, double gap_hi, double c_lo, double c_hi, int prio) {
    Task t;
    t.id = id;
    t.kind = TaskKind::aperiodic;
    t.inter_arrival = {ms(gap_lo), ms(gap_hi)};
    t.wcet = {ms(c_lo), ms(c_hi)};
    t.deadline = ms(gap_lo);
    t.priority = prio;
    t.partition = "P1";
    return t;
}

/// One core, one full partition, zero context switch cost, every task a target.
inline SystemSpec single_core(std::vector<Task> tasks, std::optional<double> horizon = std::nullopt) {
    SystemSpec s;
    s.tasks = std::move(tasks);
    s.partitions = {{"P1", 100.0}};
    s.cores = 1;
    for (const auto& t : s.tasks) s.target_tasks.push_back(t.id);
    if (horizon) s.sim_horizon = ms(*horizon);
    return s;
}

inline TestCase zero_ctx_case(const SystemSpec& spec) {
    Rng rng(0);
    return random_test_case(spec, rng);
}

// Reference scheduler for one core, one partition, no context switch cost:
// advance one quantum at a time and run the head job of the highest-priority
// task with pending work.
inline std::vector<std::vector<Time>> tick_reference(const SystemSpec& spec, const TestCase& tc, const WcetAssignment& w, Time q) {
    const std::size_t n = spec.tasks.size();
    std::vector<std::vector<Time>> ends(n);
    std::vector<std::size_t> next(n, 0), done(n, 0);
    std::vector<Time::rep> left(n, 0);
    std::size_t total = 0, finished = 0;
    for (std::size_t i = 0; i < n; ++i) {
        total += tc.arrivals[i].size();
        ends[i].resize(tc.arrivals[i].size());
    }
    for (Time::rep tick = 0; finished < total; ++tick) {
        const Time now = Time::from_units(tick * q.units());
        for (std::size_t i = 0; i < n; ++i)
            while (next[i] < tc.arrivals[i].size() && tc.arrivals[i][next[i]] <= now) ++next[i];
        std::optional<std::size_t> run;
        for (std::size_t i = 0; i < n; ++i) {
            if (done[i] == next[i]) continue;
            if (!run || spec.tasks[i].priority > spec.tasks[*run].priority) run = i;
        }
        if (!run) continue;
        const std::size_t i = *run;
        if (left[i] == 0) left[i] = w[i].units() / q.units();
        if (--left[i] == 0) {
            ends[i][done[i]++] = now + q;
            ++finished;
        }
    }
    return ends;
}

// Dense scan over x on a grid; for each x the border is the first y above
// lo[1] where the (quadratic in y) predictor reaches L, solved in closed form.
// Up to three periodic tasks on the 0.25 ms grid with distinct priorities.
inline SystemSpec tick_system(Rng& rng) {
    const int periods[] = {1, 2, 3, 4, 5, 6, 8, 10, 12};
    const std::size_t n = 1 + uniform_index(rng, 3);
    std::vector<int> prio(n);
    std::iota(prio.begin(), prio.end(), 1);
    for (std::size_t k = n; k > 1; --k) std::swap(prio[k - 1], prio[uniform_index(rng, k)]);
    std::vector<Task> tasks;
    for (std::size_t i = 0; i < n; ++i) {
        const int period = periods[uniform_index(rng, 9)];
        const double c = 0.25 * static_cast<double>(1 + uniform_index(rng, static_cast<std::uint64_t>(period * 4)));
        const double off = 0.25 * static_cast<double>(uniform_index(rng, 13));
        tasks.push_back(periodic("t" + std::to_string(i), period, c, c, prio[i], off));
    }
    return single_core(tasks);
}

inline double grid_best_volume(const RsmModel& m, double L, const Box& box, int steps) {
    double best = 0;
    for (int k = 1; k <= steps; ++k) {
        const double x = box.lo[0] + (box.hi[0] - box.lo[0]) * k / steps;
        const double e0 = m.linear_predictor({x, box.lo[1]});
        if (e0 >= L) continue;
        // eta(x, y) = c + b*y + a*y^2 along the vertical line.
        const double e1 = m.linear_predictor({x, box.lo[1] + 1.0}), em = m.linear_predictor({x, box.lo[1] - 1.0});
        const double a = 0.5 * (e1 + em) - e0, b = 0.5 * (e1 - em), c = e0 - L;
        std::optional<double> first;
        if (std::abs(a) < 1e-14) {
            if (b > 0) first = -c / b;
        } else {
            const double disc = b * b - 4 * a * c;
            if (disc >= 0)
                for (double r : {(-b - std::sqrt(disc)) / (2 * a), (-b + std::sqrt(disc)) / (2 * a)})
                    if (r > 0 && (!first || r < *first)) first = r;
        }
        if (!first || box.lo[1] + *first > box.hi[1]) continue;
        best = std::max(best, (x - box.lo[0]) * *first);
    }
    return best;
}

}  // namespace testsupport
