#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "safewcet/simulator.hpp"

namespace safewcet {

/// Miss (1) / hit (0) per arrival of one task.
using MuPattern = std::vector<std::uint8_t>;

/// Signed distance between completion and absolute deadline of arrival k
/// (0-based). Positive iff the arrival missed its deadline.
inline Time dist(const SystemSpec& spec, const ScheduleScenario& s, std::size_t task, std::size_t k) {
    if (task >= s.by_task.size() || k >= s.by_task[task].size()) throw std::out_of_range("no such arrival in scenario");
    const JobRecord& r = s.by_task[task][k];
    return r.end - (r.arrival + spec.tasks[task].deadline);
}

inline MuPattern mu_pattern(const SystemSpec& spec, const ScheduleScenario& s, std::size_t task) {
    MuPattern mu;
    mu.reserve(s.by_task[task].size());
    for (std::size_t k = 0; k < s.by_task[task].size(); ++k) mu.push_back(dist(spec, s, task, k) > Time{} ? 1 : 0);
    return mu;
}

struct Violation {
    std::size_t task;
    std::size_t window_start;  // 0-based index of the first offending window
    friend bool operator==(const Violation&, const Violation&) = default;
};

/// First window of K consecutive arrivals holding more than m consecutive
/// misses, or nullopt. Patterns shorter than K form a single window.
inline std::optional<std::size_t> first_violating_window(const MuPattern& mu, DeadlineConstraint c) {
    std::size_t run = 0;
    for (std::size_t j = 0; j < mu.size(); ++j) {
        run = mu[j] ? run + 1 : 0;
        if (run > static_cast<std::size_t>(c.m)) {
            const std::size_t K = static_cast<std::size_t>(c.K);
            return j + 1 >= K ? j + 1 - K : 0;
        }
    }
    return std::nullopt;
}

/// Checks the (m,K) constraints of the given target tasks; returns the first
/// violation in target order, or nullopt when the scenario is schedulable.
inline std::optional<Violation> check_schedulability(const SystemSpec& spec, const ScheduleScenario& s,
                                                     const std::vector<std::size_t>& targets) {
    for (std::size_t task : targets) {
        if (task >= spec.tasks.size() || task >= s.by_task.size()) throw std::out_of_range("unknown target task");
        if (auto w = first_violating_window(mu_pattern(spec, s, task), spec.tasks[task].constraint))
            return Violation{task, *w};
    }
    return std::nullopt;
}

enum class Label : std::uint8_t { safe = 0, unsafe = 1 };

inline const char* label_name(Label l) { return l == Label::safe ? "safe" : "unsafe"; }

inline Label label(const SystemSpec& spec, const ScheduleScenario& s, const std::vector<std::size_t>& targets) {
    return check_schedulability(spec, s, targets) ? Label::unsafe : Label::safe;
}

}  // namespace safewcet
