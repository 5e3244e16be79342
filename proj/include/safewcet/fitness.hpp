#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "safewcet/rng.hpp"
#include "safewcet/schedulability.hpp"

namespace safewcet {

inline constexpr std::size_t kInfiniteInterval = std::numeric_limits<std::size_t>::max();

/// Distance (in arrivals) from miss k to the next miss; 0 when arrival k met
/// its deadline and kInfiniteInterval when no later miss exists.
inline std::size_t mu_interval(const MuPattern& mu, std::size_t k) {
    if (!mu.at(k)) return 0;
    for (std::size_t j = k + 1; j < mu.size(); ++j)
        if (mu[j]) return j - k;
    return kInfiniteInterval;
}

/// Consecutiveness degree of arrival k: 10^(1/interval) for a miss, with
/// 10^(1/inf) = 1; zero for a hit.
inline double consec(const MuPattern& mu, std::size_t k) {
    const std::size_t iv = mu_interval(mu, k);
    if (iv == 0) return 0.0;
    if (iv == kInfiniteInterval) return 1.0;
    return std::pow(10.0, 1.0 / static_cast<double>(iv));
}

/// Sum of consec over all arrivals, in one backward pass.
inline double consec_sum(const MuPattern& mu) {
    double total = 0.0;
    std::size_t next_miss = kInfiniteInterval;
    for (std::size_t k = mu.size(); k-- > 0;) {
        if (!mu[k]) continue;
        total += next_miss == kInfiniteInterval ? 1.0 : std::pow(10.0, 1.0 / static_cast<double>(next_miss - k));
        next_miss = k;
    }
    return total;
}

struct FitnessPair {
    double fd = 0.0;  ///< mean over runs of the largest deadline distance (ms)
    double fc = 0.0;  ///< mean over runs of the largest per-task consecutiveness sum
    friend bool operator==(const FitnessPair&, const FitnessPair&) = default;
};

/// Per-run contributions to both objectives plus the run's label.
struct RunOutcome {
    double max_dist = 0.0;
    double max_consec = 0.0;
    Label label = Label::safe;
};

inline RunOutcome assess(const SystemSpec& spec, const ScheduleScenario& s, const std::vector<std::size_t>& targets) {
    RunOutcome out;
    out.max_dist = -std::numeric_limits<double>::infinity();
    bool violated = false;
    for (std::size_t task : targets) {
        for (std::size_t k = 0; k < s.by_task[task].size(); ++k) out.max_dist = std::max(out.max_dist, dist(spec, s, task, k).ms());
        const MuPattern mu = mu_pattern(spec, s, task);
        out.max_consec = std::max(out.max_consec, consec_sum(mu));
        violated = violated || first_violating_window(mu, spec.tasks[task].constraint).has_value();
    }
    // A target without arrivals contributes nothing to the distance.
    if (!std::isfinite(out.max_dist)) out.max_dist = 0.0;
    out.label = violated ? Label::unsafe : Label::safe;
    return out;
}

inline FitnessPair mean_fitness(const std::vector<RunOutcome>& runs) {
    FitnessPair f;
    if (runs.empty()) return f;
    for (const auto& r : runs) {
        f.fd += r.max_dist;
        f.fc += r.max_consec;
    }
    f.fd /= static_cast<double>(runs.size());
    f.fc /= static_cast<double>(runs.size());
    return f;
}

/// One simulation run of a test case with a WCET assignment sampled from the
/// run's own stream.
struct SampledRun {
    WcetAssignment wcet;
    RunOutcome outcome;
    std::uint64_t seed;
};

inline SampledRun sampled_run(const SystemSpec& spec, const TestCase& tc, const std::vector<std::size_t>& targets,
                              std::uint64_t seed) {
    Rng rng(seed);
    SampledRun run{sample_wcet(spec, rng), {}, seed};
    run.outcome = assess(spec, simulate(spec, tc, run.wcet), targets);
    return run;
}

/// Mean magnitude objective over ns runs with independently sampled WCETs.
inline double fitness_fd(const SystemSpec& spec, const TestCase& tc, std::size_t ns, std::uint64_t seed) {
    std::vector<RunOutcome> runs;
    const auto targets = spec.target_indices();
    for (std::size_t h = 0; h < ns; ++h) runs.push_back(sampled_run(spec, tc, targets, derive_seed(seed, {h})).outcome);
    return mean_fitness(runs).fd;
}

/// Mean consecutiveness objective over ns runs with independently sampled WCETs.
inline double fitness_fc(const SystemSpec& spec, const TestCase& tc, std::size_t ns, std::uint64_t seed) {
    std::vector<RunOutcome> runs;
    const auto targets = spec.target_indices();
    for (std::size_t h = 0; h < ns; ++h) runs.push_back(sampled_run(spec, tc, targets, derive_seed(seed, {h})).outcome);
    return mean_fitness(runs).fc;
}

}  // namespace safewcet
