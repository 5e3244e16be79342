#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "safewcet/dataset.hpp"
#include "safewcet/parallel.hpp"

namespace safewcet {

/// Product of (upper_i - C^min_i) over the given range tasks, in
/// ms^(task count). `upper` follows the order of `tasks`.
inline double hyperbox_volume(const SystemSpec& spec, const std::vector<std::size_t>& tasks, const std::vector<Time>& upper) {
    double v = 1.0;
    for (std::size_t k = 0; k < tasks.size(); ++k) v *= std::max(0.0, (upper[k] - spec.tasks[tasks[k]].wcet.lo).ms());
    return v;
}

inline bool all_leq(const std::vector<Time>& a, const std::vector<Time>& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] > b[i]) return false;
    return true;
}

struct SafeHyperbox {
    std::size_t row;           // dataset row whose WCETs span the box
    std::vector<Time> upper;   // per dataset column
    double volume;
};

/// Among safe rows, the one spanning the largest box [C^min, W] that holds no
/// unsafe row (coordinate-wise <=). Unsafe rows are first reduced to their
/// minimal elements, since any unsafe row inside a box dominates one of them.
inline SafeHyperbox max_safe_hyperbox(const SystemSpec& spec, const LabeledDataset& d) {
    std::vector<std::size_t> unsafe;
    for (std::size_t r = 0; r < d.rows.size(); ++r)
        if (d.rows[r].label == Label::unsafe) unsafe.push_back(r);
    auto total = [&](std::size_t r) {
        Time::rep s = 0;
        for (Time c : d.rows[r].wcet) s += c.units();
        return s;
    };
    std::stable_sort(unsafe.begin(), unsafe.end(), [&](std::size_t a, std::size_t b) { return total(a) < total(b); });
    std::vector<std::size_t> minimal;
    for (std::size_t r : unsafe) {
        bool covered = false;
        for (std::size_t m : minimal)
            if (all_leq(d.rows[m].wcet, d.rows[r].wcet)) {
                covered = true;
                break;
            }
        if (!covered) minimal.push_back(r);
    }

    std::vector<std::pair<double, std::size_t>> safe;
    for (std::size_t r = 0; r < d.rows.size(); ++r)
        if (d.rows[r].label == Label::safe) safe.push_back({hyperbox_volume(spec, d.tasks, d.rows[r].wcet), r});
    std::stable_sort(safe.begin(), safe.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [vol, r] : safe) {
        bool clean = true;
        for (std::size_t m : minimal)
            if (all_leq(d.rows[m].wcet, d.rows[r].wcet)) {
                clean = false;
                break;
            }
        if (clean) return {r, d.rows[r].wcet, vol};
    }
    throw std::runtime_error("no safe hyperbox");
}

struct EmpiricalResult {
    std::size_t runs = 0;
    std::size_t violations = 0;
    double probability = 0.0;
    std::vector<std::uint8_t> unsafe;  // per-run verdict
};

/// Share of runs violating some (m,K) constraint when each run draws a fresh
/// random test case and WCETs uniformly inside [C^min, upper] for the given
/// range tasks (other tasks over their declared ranges).
inline EmpiricalResult empirical_probability(const SystemSpec& spec, const std::vector<std::size_t>& tasks,
                                             const std::vector<Time>& upper, std::size_t runs, std::uint64_t seed, int jobs = 1) {
    const auto targets = spec.target_indices();
    const Time res = spec.scheduler.resolution;
    EmpiricalResult out;
    out.runs = runs;
    out.unsafe.assign(runs, 0);
    parallel_for(runs, jobs, [&](std::size_t r) {
        Rng rng(derive_seed(seed, {r}));
        const TestCase tc = random_test_case(spec, rng);
        WcetAssignment w = sample_wcet(spec, rng);
        for (std::size_t k = 0; k < tasks.size(); ++k) {
            const TimeRange& range = spec.tasks[tasks[k]].wcet;
            w[tasks[k]] = uniform_time(rng, range.lo, std::clamp(upper[k], range.lo, range.hi), res);
        }
        out.unsafe[r] = label(spec, simulate(spec, tc, w), targets) == Label::unsafe;
    });
    out.violations = static_cast<std::size_t>(std::count(out.unsafe.begin(), out.unsafe.end(), 1));
    out.probability = runs ? static_cast<double>(out.violations) / static_cast<double>(runs) : 0.0;
    return out;
}

struct Summary {
    double max = 0, median = 0, min = 0, mean = 0;
};

inline Summary summarize(std::vector<double> v) {
    if (v.empty()) throw std::invalid_argument("summary of an empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    Summary s;
    s.min = v.front();
    s.max = v.back();
    s.median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
    return s;
}

}  // namespace safewcet
