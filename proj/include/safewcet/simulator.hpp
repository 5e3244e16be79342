#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "safewcet/task_model.hpp"
#include "safewcet/test_case.hpp"

namespace safewcet {

struct JobRecord {
    Time arrival;
    Time end;
    friend bool operator==(const JobRecord&, const JobRecord&) = default;
};

/// Arrival and completion time of every job, grouped per task in arrival order.
struct ScheduleScenario {
    std::vector<std::vector<JobRecord>> by_task;

    std::size_t job_count() const {
        std::size_t n = 0;
        for (const auto& v : by_task) n += v.size();
        return n;
    }
    friend bool operator==(const ScheduleScenario&, const ScheduleScenario&) = default;
};

enum class SegmentKind { startup, execute, exit };

/// A contiguous interval during which a core was busy with one job.
struct Segment {
    int core;
    std::size_t task;
    std::size_t job;  // arrival index within the task, 0-based
    SegmentKind kind;
    Time start;
    Time end;
};

struct SimulationTrace {
    std::vector<Segment> segments;
};

namespace detail {

/// Event-driven model of an adaptive-partitioning, priority-preemptive
/// multi-core scheduler. One instance performs one run.
class ApsKernel {
public:
    ApsKernel(const SystemSpec& spec, const TestCase& tc, const WcetAssignment& wcet, SimulationTrace* trace)
        : spec_(spec), tc_(tc), trace_(trace), partitioned_(spec.partitions.size() > 1) {
        const std::size_t n = spec.tasks.size();
        tasks_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Task& t = spec.tasks[i];
            tasks_[i].priority = t.priority;
            tasks_[i].policy = t.policy;
            tasks_[i].partition = spec.partition_index(t.partition);
            tasks_[i].affinity = t.core_affinity ? *t.core_affinity : -1;
            tasks_[i].wcet = wcet[i];
            for (std::size_t k = 0; k < tc.arrivals[i].size(); ++k) arrivals_.push_back({tc.arrivals[i][k], i, k});
        }
        std::sort(arrivals_.begin(), arrivals_.end(), [](const Arrival& a, const Arrival& b) {
            return std::tie(a.time, a.task) < std::tie(b.time, b.task);
        });
        scenario_.by_task.resize(n);
        for (std::size_t i = 0; i < n; ++i) scenario_.by_task[i].resize(tc.arrivals[i].size());
        cores_.resize(static_cast<std::size_t>(spec.cores));
        if (partitioned_) {
            buckets_per_window_ = spec.scheduler.partition_window.units() / spec.scheduler.tick.units();
            ledgers_.resize(spec.partitions.size());
            for (std::size_t p = 0; p < spec.partitions.size(); ++p) {
                ledgers_[p].buckets.assign(static_cast<std::size_t>(buckets_per_window_), 0);
                ledgers_[p].budget = spec.partitions[p].budget_percent / 100.0 *
                                     static_cast<double>(spec.scheduler.partition_window.units()) * spec.cores;
            }
        }
    }

    ScheduleScenario run() {
        std::size_t guard = 0;
        while (true) {
            settle();
            if (next_arrival_ == arrivals_.size() && done_ == arrivals_.size()) break;
            const Time next = next_event_time();
            if (next <= now_ || next == Time::max())
                throw std::logic_error("scheduler kernel made no progress");
            advance_to(next);
            if (++guard > 100'000'000) throw std::logic_error("scheduler kernel exceeded its event budget");
        }
        return std::move(scenario_);
    }

private:
    enum class JobState { waiting, ready, on_core, exiting, done };
    enum class Phase { idle, startup, execute, exit };

    struct Arrival {
        Time time;
        std::size_t task;
        std::size_t k;
    };
    struct TaskInfo {
        int priority;
        Policy policy;
        std::size_t partition;
        int affinity;
        Time wcet;
        std::deque<std::size_t> pending;  // job ids, FIFO
    };
    struct Job {
        std::size_t task;
        std::size_t k;
        Time remaining;
        JobState state = JobState::waiting;
        int core = -1;
        int last_core = -1;
        bool started = false;
        bool rr_yield = false;
        std::uint64_t seq = 0;
    };
    struct Core {
        Phase phase = Phase::idle;
        std::size_t job = 0;
        Time phase_start;
        Time phase_end;   // startup / exit
        Time slice_end;   // round-robin
        bool completing = false;
    };
    struct Ledger {
        std::vector<std::int64_t> buckets;
        std::int64_t sum = 0;
        double budget = 0;
        int busy = 0;
    };

    // -- bookkeeping ---------------------------------------------------------

    void record(int c, SegmentKind kind, Time start, Time end) {
        if (trace_ && end > start) {
            const Job& j = jobs_[cores_[c].job];
            trace_->segments.push_back({c, j.task, j.k, kind, start, end});
        }
    }

    bool exhausted(std::size_t partition) const {
        return partitioned_ && static_cast<double>(ledgers_[partition].sum) >= ledgers_[partition].budget;
    }

    /// Scheduling rank: unexhausted partitions first, then priority.
    std::pair<int, int> rank(const Job& j) const {
        const TaskInfo& t = tasks_[j.task];
        return {exhausted(t.partition) ? 1 : 0, -t.priority};
    }
    bool before(std::size_t a, std::size_t b) const {
        const Job& ja = jobs_[a];
        const Job& jb = jobs_[b];
        return std::tuple(rank(ja), ja.seq, ja.task) < std::tuple(rank(jb), jb.seq, jb.task);
    }
    bool can_preempt(std::size_t challenger, std::size_t occupant) const {
        const auto rc = rank(jobs_[challenger]);
        const auto ro = rank(jobs_[occupant]);
        if (rc < ro) return true;
        return rc == ro && jobs_[occupant].rr_yield && jobs_[challenger].seq < jobs_[occupant].seq;
    }
    bool allowed(std::size_t job, int core) const {
        const int a = tasks_[jobs_[job].task].affinity;
        return a < 0 || a == core;
    }

    void make_ready(std::size_t id) {
        jobs_[id].state = JobState::ready;
        jobs_[id].seq = next_seq_++;
    }

    void begin_exit(int c, bool completing) {
        Core& core = cores_[c];
        Job& j = jobs_[core.job];
        core.phase = Phase::exit;
        core.phase_start = now_;
        core.phase_end = now_ + tc_.exit;
        core.completing = completing;
        j.state = completing ? JobState::on_core : JobState::exiting;
        j.last_core = c;
    }

    void dispatch(std::size_t id, int c) {
        Core& core = cores_[c];
        Job& j = jobs_[id];
        const bool migrates = j.started && j.last_core != c;
        core.phase = Phase::startup;
        core.job = id;
        core.phase_start = now_;
        core.phase_end = now_ + tc_.startup + (migrates ? tc_.ipi : Time{});
        core.completing = false;
        j.state = JobState::on_core;
        j.core = c;
        j.last_core = c;
        j.started = true;
        j.rr_yield = false;
        if (partitioned_) ++ledgers_[tasks_[j.task].partition].busy;
    }

    void release_core(int c) {
        Core& core = cores_[c];
        if (partitioned_) --ledgers_[tasks_[jobs_[core.job].task].partition].busy;
        core.phase = Phase::idle;
        jobs_[core.job].core = -1;
    }

    // -- instantaneous transitions at now_ ------------------------------------

    bool process_instant() {
        bool changed = false;
        while (next_arrival_ < arrivals_.size() && arrivals_[next_arrival_].time == now_) {
            const Arrival& a = arrivals_[next_arrival_++];
            const std::size_t id = jobs_.size();
            jobs_.push_back({a.task, a.k, tasks_[a.task].wcet});
            scenario_.by_task[a.task][a.k].arrival = a.time;
            auto& pending = tasks_[a.task].pending;
            pending.push_back(id);
            if (pending.size() == 1) make_ready(id);
            changed = true;
        }
        for (int c = 0; c < static_cast<int>(cores_.size()); ++c) {
            Core& core = cores_[c];
            if (core.phase == Phase::startup && core.phase_end == now_) {
                record(c, SegmentKind::startup, core.phase_start, now_);
                core.phase = Phase::execute;
                core.phase_start = now_;
                core.slice_end = now_ + spec_.scheduler.rr_timeslice;
                changed = true;
            }
            if (core.phase == Phase::execute && jobs_[core.job].remaining == Time{}) {
                record(c, SegmentKind::execute, core.phase_start, now_);
                begin_exit(c, true);
                changed = true;
            }
            if (core.phase == Phase::exit && core.phase_end == now_) {
                record(c, SegmentKind::exit, core.phase_start, now_);
                const std::size_t id = core.job;
                const bool completing = core.completing;
                release_core(c);
                Job& j = jobs_[id];
                if (completing) {
                    j.state = JobState::done;
                    scenario_.by_task[j.task][j.k].end = now_;
                    ++done_;
                    auto& pending = tasks_[j.task].pending;
                    pending.pop_front();
                    if (!pending.empty()) make_ready(pending.front());
                } else {
                    j.state = JobState::ready;  // keeps its place among equals
                }
                changed = true;
            }
            if (core.phase == Phase::execute && tasks_[jobs_[core.job].task].policy == Policy::round_robin &&
                core.slice_end == now_) {
                Job& j = jobs_[core.job];
                bool contender = false;
                for (const auto& t : tasks_) {
                    if (t.pending.empty()) continue;
                    const Job& o = jobs_[t.pending.front()];
                    if (o.state == JobState::ready && rank(o) == rank(j)) contender = true;
                }
                if (contender) {
                    j.seq = next_seq_++;
                    j.rr_yield = true;
                    changed = true;
                }
                core.slice_end = now_ + spec_.scheduler.rr_timeslice;
            }
        }
        return changed;
    }

    // -- scheduling decision -------------------------------------------------

    bool decide() {
        candidates_.clear();
        for (const auto& t : tasks_) {
            if (t.pending.empty()) continue;
            const std::size_t id = t.pending.front();
            const Job& j = jobs_[id];
            if (j.state == JobState::ready || (j.state == JobState::on_core && !cores_[j.core].completing))
                candidates_.push_back(id);
        }
        std::sort(candidates_.begin(), candidates_.end(), [this](std::size_t a, std::size_t b) { return before(a, b); });

        const int ncores = static_cast<int>(cores_.size());
        constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
        claims_.assign(cores_.size(), kNone);
        // Cores finishing a completed job are not available for claiming yet
        // but will free up; treat them like exiting cores.
        for (std::size_t id : candidates_) {
            const Job& j = jobs_[id];
            if (j.state == JobState::on_core) {
                if (claims_[j.core] == kNone) claims_[j.core] = id;
                continue;
            }
            int pick = -1;
            auto prefer = [&](Phase phase) {
                if (j.last_core >= 0 && claims_[j.last_core] == kNone && cores_[j.last_core].phase == phase &&
                    allowed(id, j.last_core))
                    return j.last_core;
                for (int c = 0; c < ncores; ++c)
                    if (claims_[c] == kNone && cores_[c].phase == phase && allowed(id, c)) return c;
                return -1;
            };
            pick = prefer(Phase::idle);
            if (pick < 0) pick = prefer(Phase::exit);
            if (pick < 0) {
                for (int c = 0; c < ncores; ++c) {
                    if (claims_[c] != kNone || cores_[c].phase != Phase::execute || !allowed(id, c)) continue;
                    if (!can_preempt(id, cores_[c].job)) continue;
                    if (pick < 0 || before(cores_[pick].job, cores_[c].job)) pick = c;
                }
            }
            if (pick >= 0) claims_[pick] = id;
        }

        bool changed = false;
        for (int c = 0; c < ncores; ++c) {
            Core& core = cores_[c];
            if (core.phase == Phase::execute && claims_[c] != core.job) {
                record(c, SegmentKind::execute, core.phase_start, now_);
                begin_exit(c, false);
                changed = true;
            }
        }
        for (int c = 0; c < ncores; ++c) {
            if (claims_[c] == kNone || cores_[c].phase != Phase::idle) continue;
            if (jobs_[claims_[c]].state != JobState::ready) continue;
            dispatch(claims_[c], c);
            changed = true;
        }
        return changed;
    }

    void settle() {
        for (int rounds = 0;; ++rounds) {
            bool changed = process_instant();
            changed |= decide();
            if (!changed) break;
            if (rounds > 1'000'000) throw std::logic_error("scheduler kernel failed to settle");
        }
    }

    // -- time advance --------------------------------------------------------

    Time next_tick() const { return spec_.scheduler.tick * (bucket_ + 1); }

    Time next_event_time() const {
        Time next = Time::max();
        if (next_arrival_ < arrivals_.size()) next = arrivals_[next_arrival_].time;
        for (const Core& core : cores_) {
            switch (core.phase) {
                case Phase::idle: break;
                case Phase::startup:
                case Phase::exit: next = min(next, core.phase_end); break;
                case Phase::execute:
                    next = min(next, now_ + jobs_[core.job].remaining);
                    if (tasks_[jobs_[core.job].task].policy == Policy::round_robin) next = min(next, core.slice_end);
                    break;
            }
        }
        if (partitioned_) {
            bool busy = false;
            for (std::size_t p = 0; p < ledgers_.size(); ++p) {
                const Ledger& l = ledgers_[p];
                if (l.busy > 0 || l.sum > 0) busy = true;
                if (l.busy == 0 || exhausted(p)) continue;
                const double left = (l.budget - static_cast<double>(l.sum)) / l.busy;
                const auto units = std::max<Time::rep>(1, static_cast<Time::rep>(std::ceil(left)));
                next = min(next, now_ + Time::from_units(units));
            }
            if (busy) next = min(next, next_tick());
        }
        return next;
    }

    void advance_to(Time next) {
        const Time dt = next - now_;
        for (const Core& core : cores_) {
            if (core.phase == Phase::execute) jobs_[core.job].remaining -= dt;
        }
        if (partitioned_) {
            const auto b = static_cast<std::size_t>(bucket_ % buckets_per_window_);
            for (auto& l : ledgers_) {
                l.buckets[b] += dt.units() * l.busy;
                l.sum += dt.units() * l.busy;
            }
            const Time::rep new_bucket = next.units() / spec_.scheduler.tick.units();
            for (Time::rep idx = bucket_ + 1; idx <= new_bucket; ++idx) {
                if (idx - bucket_ > buckets_per_window_) break;
                const auto slot = static_cast<std::size_t>(idx % buckets_per_window_);
                for (auto& l : ledgers_) {
                    l.sum -= l.buckets[slot];
                    l.buckets[slot] = 0;
                }
            }
            bucket_ = new_bucket;
        }
        now_ = next;
    }

    const SystemSpec& spec_;
    const TestCase& tc_;
    SimulationTrace* trace_;
    bool partitioned_;

    std::vector<TaskInfo> tasks_;
    std::vector<Arrival> arrivals_;
    std::vector<Job> jobs_;
    std::vector<Core> cores_;
    std::vector<Ledger> ledgers_;
    std::vector<std::size_t> candidates_;
    std::vector<std::size_t> claims_;
    ScheduleScenario scenario_;

    Time now_;
    std::size_t next_arrival_ = 0;
    std::size_t done_ = 0;
    std::uint64_t next_seq_ = 0;
    Time::rep bucket_ = 0;
    Time::rep buckets_per_window_ = 1;
};

}  // namespace detail

/// Runs one deterministic simulation. Jobs arriving before the horizon that
/// are still running at the horizon are followed until they complete.
inline ScheduleScenario simulate(const SystemSpec& spec, const TestCase& tc, const WcetAssignment& wcet,
                                 SimulationTrace* trace = nullptr) {
    if (tc.arrivals.size() != spec.tasks.size() || wcet.size() != spec.tasks.size())
        throw ValidationError("test case or WCET assignment does not match the system");
    return detail::ApsKernel(spec, tc, wcet, trace).run();
}

/// Line-oriented dump: `task_id,a,e,missed`.
inline void write_trace(std::ostream& os, const SystemSpec& spec, const ScheduleScenario& s) {
    for (std::size_t i = 0; i < s.by_task.size(); ++i)
        for (const auto& r : s.by_task[i])
            os << spec.tasks[i].id << ',' << r.arrival << ',' << r.end << ','
               << (r.end > r.arrival + spec.tasks[i].deadline ? 1 : 0) << '\n';
}

}  // namespace safewcet
