#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "safewcet/time.hpp"

namespace safewcet {

/// Malformed input document.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Well-formed input that breaks a domain invariant.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TimeRange {
    Time lo;
    Time hi;

    Time width() const { return hi - lo; }
    bool contains(Time t) const { return lo <= t && t <= hi; }
    bool degenerate() const { return lo == hi; }
    friend bool operator==(const TimeRange&, const TimeRange&) = default;
};

enum class TaskKind { periodic, aperiodic };
enum class Policy { preemptive, fifo, round_robin };

struct DeadlineConstraint {
    int m = 0;  ///< tolerated consecutive misses; 0 is a hard deadline
    int K = 1;  ///< window length in arrivals
    friend bool operator==(const DeadlineConstraint&, const DeadlineConstraint&) = default;
};

struct Task {
    std::string id;
    TaskKind kind = TaskKind::periodic;
    Time offset;             // periodic only
    Time period;             // periodic only
    TimeRange inter_arrival; // aperiodic only
    TimeRange wcet;
    Time deadline;
    int priority = 0;  // larger value = higher priority
    Policy policy = Policy::preemptive;
    DeadlineConstraint constraint;
    std::string partition;
    std::optional<int> core_affinity;

    bool periodic() const { return kind == TaskKind::periodic; }
    bool has_wcet_range() const { return wcet.lo < wcet.hi; }
    friend bool operator==(const Task&, const Task&) = default;
};

struct PartitionSpec {
    std::string id;
    double budget_percent = 100.0;
    friend bool operator==(const PartitionSpec&, const PartitionSpec&) = default;
};

struct ContextSwitchRanges {
    TimeRange startup;
    TimeRange exit;
    TimeRange ipi;
    friend bool operator==(const ContextSwitchRanges&, const ContextSwitchRanges&) = default;
};

struct SchedulerConfig {
    Time partition_window = Time::from_ms_int(100);
    Time rr_timeslice = Time::from_ms_int(4);
    Time tick = Time::from_ms_int(1);
    Time resolution = Time::from_units(1);  // 0.001 ms
    friend bool operator==(const SchedulerConfig&, const SchedulerConfig&) = default;
};

struct SystemSpec {
    std::vector<Task> tasks;
    std::vector<PartitionSpec> partitions;
    int cores = 1;
    ContextSwitchRanges context_switch;
    SchedulerConfig scheduler;
    std::vector<std::string> target_tasks;
    std::optional<Time> sim_horizon;  // explicit override

    std::size_t task_index(const std::string& id) const {
        for (std::size_t i = 0; i < tasks.size(); ++i)
            if (tasks[i].id == id) return i;
        throw ValidationError("unknown task id '" + id + "'");
    }
    std::size_t partition_index(const std::string& id) const {
        for (std::size_t i = 0; i < partitions.size(); ++i)
            if (partitions[i].id == id) return i;
        throw ValidationError("unknown partition id '" + id + "'");
    }
    std::vector<std::size_t> target_indices() const {
        std::vector<std::size_t> out;
        for (const auto& id : target_tasks) out.push_back(task_index(id));
        return out;
    }
    /// Indices of tasks whose WCET is a proper range (the learnable features).
    std::vector<std::size_t> range_task_indices() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < tasks.size(); ++i)
            if (tasks[i].has_wcet_range()) out.push_back(i);
        return out;
    }
    Time horizon() const;

    friend bool operator==(const SystemSpec&, const SystemSpec&) = default;
};

/// Simulation horizon derived from the task set: the LCM of the periods, or,
/// with aperiodic tasks, the larger of that LCM and the largest maximum
/// inter-arrival time.
inline Time compute_sim_horizon(const SystemSpec& spec) {
    std::optional<Time> periodic_lcm;
    Time aperiodic_max;
    for (const auto& t : spec.tasks) {
        if (t.periodic())
            periodic_lcm = periodic_lcm ? lcm(*periodic_lcm, t.period) : t.period;
        else
            aperiodic_max = max(aperiodic_max, t.inter_arrival.hi);
    }
    return max(periodic_lcm.value_or(Time{}), aperiodic_max);
}

inline Time SystemSpec::horizon() const { return sim_horizon ? *sim_horizon : compute_sim_horizon(*this); }

namespace detail {
inline void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
}
}  // namespace detail

/// Checks every type invariant; throws ValidationError naming the violated
/// rule and the offending task.
inline void validate(const SystemSpec& spec) {
    using detail::require;
    const Time res = spec.scheduler.resolution;
    require(res.units() > 0, "time resolution must be positive");
    require(spec.cores >= 1, "number of cores must be positive");
    require(!spec.tasks.empty(), "system has no tasks");
    require(!spec.partitions.empty(), "system has no partitions");

    auto on_grid = [&](Time t, const std::string& what) {
        require(t.is_multiple_of(res), what + " " + t.str() + " is not a multiple of the time resolution " + res.str());
    };

    std::set<std::string> partition_ids;
    double budget_sum = 0.0;
    for (const auto& p : spec.partitions) {
        require(partition_ids.insert(p.id).second, "duplicate partition id '" + p.id + "'");
        require(p.budget_percent > 0.0 && p.budget_percent <= 100.0,
                "partition '" + p.id + "': budget must be in (0, 100]");
        budget_sum += p.budget_percent;
    }
    require(std::abs(budget_sum - 100.0) <= 1e-9, "partition budgets must sum to 100");

    std::set<std::string> ids;
    std::map<std::string, int> tasks_per_partition;
    std::map<int, std::vector<const Task*>> by_priority;
    for (const auto& t : spec.tasks) {
        const std::string who = "task '" + t.id + "': ";
        require(!t.id.empty(), "task with empty id");
        require(ids.insert(t.id).second, "duplicate task id '" + t.id + "'");
        require(t.wcet.lo > Time{}, who + "minimum WCET must be positive");
        require(t.wcet.lo <= t.wcet.hi, who + "minimum WCET exceeds maximum WCET");
        require(t.deadline >= t.wcet.hi, who + "deadline < max WCET");
        on_grid(t.wcet.lo, who + "WCET");
        on_grid(t.wcet.hi, who + "WCET");
        on_grid(t.deadline, who + "deadline");
        if (t.periodic()) {
            require(t.period > Time{}, who + "period must be positive");
            require(t.offset >= Time{}, who + "offset must be non-negative");
            on_grid(t.period, who + "period");
            on_grid(t.offset, who + "offset");
        } else {
            require(t.inter_arrival.lo > Time{}, who + "minimum inter-arrival time must be positive");
            require(t.inter_arrival.lo <= t.inter_arrival.hi, who + "minimum inter-arrival time exceeds maximum");
            require(t.offset == Time{}, who + "aperiodic tasks cannot have an offset");
            on_grid(t.inter_arrival.lo, who + "inter-arrival time");
            on_grid(t.inter_arrival.hi, who + "inter-arrival time");
        }
        require(t.constraint.m >= 0 && t.constraint.m < t.constraint.K, who + "(m,K) constraint requires 0 <= m < K");
        require(partition_ids.count(t.partition) == 1, who + "unknown partition '" + t.partition + "'");
        ++tasks_per_partition[t.partition];
        if (t.core_affinity)
            require(*t.core_affinity >= 0 && *t.core_affinity < spec.cores, who + "core affinity out of range");
        by_priority[t.priority].push_back(&t);
    }
    for (const auto& p : spec.partitions)
        require(tasks_per_partition[p.id] >= 1, "partition '" + p.id + "' has no task");
    for (const auto& [prio, group] : by_priority) {
        if (group.size() < 2) continue;
        for (const Task* t : group)
            require(t->policy != Policy::preemptive && t->policy == group.front()->policy,
                    "task '" + t->id + "': equal priority " + std::to_string(prio) +
                        " is only allowed among tasks sharing a FIFO or round-robin policy");
    }

    const auto& cs = spec.context_switch;
    for (const auto* r : {&cs.startup, &cs.exit, &cs.ipi}) {
        require(r->lo >= Time{} && r->lo <= r->hi, "context switch range must satisfy 0 <= min <= max");
        on_grid(r->lo, "context switch time");
        on_grid(r->hi, "context switch time");
    }
    require(spec.scheduler.partition_window > Time{}, "partition window must be positive");
    require(spec.scheduler.rr_timeslice > Time{}, "round-robin timeslice must be positive");
    require(spec.scheduler.tick > Time{}, "tick must be positive");
    require(spec.scheduler.partition_window.units() % spec.scheduler.tick.units() == 0,
            "partition window must be a multiple of the tick");

    require(!spec.target_tasks.empty(), "no target tasks");
    std::set<std::string> targets;
    for (const auto& id : spec.target_tasks) {
        require(ids.count(id) == 1, "unknown target task '" + id + "'");
        require(targets.insert(id).second, "duplicate target task '" + id + "'");
    }
    if (spec.sim_horizon) {
        require(*spec.sim_horizon > Time{}, "simulation horizon must be positive");
        on_grid(*spec.sim_horizon, "simulation horizon");
    }
    require(spec.horizon() < Time::max(), "simulation horizon overflows; set sim_horizon explicitly");
}

}  // namespace safewcet
