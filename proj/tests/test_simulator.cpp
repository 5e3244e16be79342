#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "support.hpp"

using namespace testsupport;

TEST(Simulator, MatchesTickReferenceOnRandomSingleCoreSystems) {
    const Time q = ms(0.25);
    Rng rng(2024);
    for (int sys = 0; sys < 200; ++sys) {
        const SystemSpec spec = tick_system(rng);
        const std::size_t n = spec.tasks.size();
        ASSERT_NO_THROW(validate(spec));
        const TestCase tc = zero_ctx_case(spec);
        const WcetAssignment w = max_wcet(spec);
        const auto s = simulate(spec, tc, w);
        const auto ref = tick_reference(spec, tc, w, q);
        for (std::size_t i = 0; i < n; ++i) {
            ASSERT_EQ(s.by_task[i].size(), ref[i].size());
            for (std::size_t k = 0; k < ref[i].size(); ++k) {
                EXPECT_EQ(s.by_task[i][k].arrival, tc.arrivals[i][k]);
                ASSERT_EQ(s.by_task[i][k].end, ref[i][k]) << "system " << sys << " task " << i << " job " << k;
            }
        }
    }
}

TEST(Simulator, TwoCoreTraceMatchesGolden) {
    const SystemSpec spec = load_system(source_path("data/fixtures/two_core_mk_system.json"));
    const TestCase tc =
        test_case_from_json(spec, nlohmann::json::parse(read_text_file(source_path("data/fixtures/two_core_mk_testcase.json"))));
    validate_test_case(spec, tc);
    WcetAssignment w = {ms(2), ms(3), ms(3), ms(3.9)};
    std::ostringstream os;
    write_trace(os, spec, simulate(spec, tc, w));
    EXPECT_EQ(os.str(), read_text_file(source_path("tests/golden/two_core_mk_trace.csv")));
    // The tuples the fixture was built around.
    const std::string trace = os.str();
    EXPECT_NE(trace.find("t1,40,42.05,"), std::string::npos);
    EXPECT_NE(trace.find("t2,41,44.075,"), std::string::npos);
    EXPECT_NE(trace.find("t4,40,50.3,"), std::string::npos);
}

TEST(Simulator, IsDeterministic) {
    const SystemSpec spec = load_system(source_path("data/fixtures/two_core_mk_system.json"));
    Rng a(7), b(7);
    const TestCase ta = random_test_case(spec, a), tb = random_test_case(spec, b);
    EXPECT_EQ(ta, tb);
    const auto w = sample_wcet(spec, a);
    EXPECT_EQ(simulate(spec, ta, w), simulate(spec, tb, w));
}

TEST(Simulator, TwoCoresRunInParallelUnlessPinned) {
    SystemSpec spec = single_core({periodic("a", 20, 5, 5, 2), periodic("b", 20, 5, 5, 1)});
    spec.cores = 2;
    const TestCase tc = zero_ctx_case(spec);
    auto s = simulate(spec, tc, max_wcet(spec));
    EXPECT_EQ(s.by_task[0][0].end, ms(5));
    EXPECT_EQ(s.by_task[1][0].end, ms(5));
    spec.tasks[0].core_affinity = 0;
    spec.tasks[1].core_affinity = 0;
    s = simulate(spec, tc, max_wcet(spec));
    EXPECT_EQ(s.by_task[0][0].end, ms(5));
    EXPECT_EQ(s.by_task[1][0].end, ms(10));
}

TEST(Simulator, ExhaustedPartitionYieldsToOneWithBudget) {
    SystemSpec spec = single_core({periodic("hog", 400, 200, 200, 2), periodic("low", 400, 10, 10, 1)});
    spec.tasks[1].partition = "P2";
    spec.partitions = {{"P1", 50.0}, {"P2", 50.0}};
    const TestCase tc = zero_ctx_case(spec);
    const auto s = simulate(spec, tc, max_wcet(spec));
    // hog burns its 50 ms share of the 100 ms window, then low runs 50..60.
    EXPECT_EQ(s.by_task[1][0].end, ms(60));
    // Idle budget is not wasted: hog resumes and finishes all its work.
    EXPECT_EQ(s.by_task[0][0].end, ms(210));
}

TEST(Simulator, SinglePartitionIgnoresBudgets) {
    SystemSpec spec = single_core({periodic("hog", 400, 200, 200, 2), periodic("low", 400, 10, 10, 1)});
    const auto s = simulate(spec, zero_ctx_case(spec), max_wcet(spec));
    EXPECT_EQ(s.by_task[1][0].end, ms(210));
}

TEST(Simulator, RoundRobinAlternatesOnTimeslice) {
    SystemSpec spec = single_core({periodic("a", 40, 6, 6, 1), periodic("b", 40, 6, 6, 1)});
    spec.tasks[0].policy = spec.tasks[1].policy = Policy::round_robin;
    const auto s = simulate(spec, zero_ctx_case(spec), max_wcet(spec));
    EXPECT_EQ(s.by_task[0][0].end, ms(10));
    EXPECT_EQ(s.by_task[1][0].end, ms(12));
}

TEST(Simulator, FifoRunsEqualPriorityToCompletion) {
    SystemSpec spec = single_core({periodic("a", 40, 6, 6, 1), periodic("b", 40, 6, 6, 1)});
    spec.tasks[0].policy = spec.tasks[1].policy = Policy::fifo;
    const auto s = simulate(spec, zero_ctx_case(spec), max_wcet(spec));
    EXPECT_EQ(s.by_task[0][0].end, ms(6));
    EXPECT_EQ(s.by_task[1][0].end, ms(12));
}

TEST(Simulator, ContextSwitchCostsAreCharged) {
    SystemSpec spec = single_core({periodic("a", 20, 5, 5, 1)});
    spec.context_switch = {{ms(0.5), ms(0.5)}, {ms(0.25), ms(0.25)}, {ms(0.1), ms(0.1)}};
    Rng rng(1);
    const auto s = simulate(spec, random_test_case(spec, rng), max_wcet(spec));
    EXPECT_EQ(s.by_task[0][0].end, ms(5.75));
}

TEST(Simulator, PreemptionChargesStartupAndExitAgain) {
    SystemSpec spec = single_core({periodic("hi", 40, 1, 1, 2, 2), periodic("lo", 40, 5, 5, 1)});
    spec.context_switch = {{ms(0.1), ms(0.1)}, {ms(0.1), ms(0.1)}, {ms(0), ms(0)}};
    Rng rng(1);
    SimulationTrace trace;
    const auto s = simulate(spec, random_test_case(spec, rng), max_wcet(spec), &trace);
    // lo: startup 0..0.1, runs to 2, exit 2..2.1; hi 2.1..3.3; lo again
    // startup 3.3..3.4, remaining 3.1 ms, exit.
    EXPECT_EQ(s.by_task[0][0].end, ms(3.3));
    EXPECT_EQ(s.by_task[1][0].end, ms(6.6));
    Time busy;
    for (const auto& seg : trace.segments) busy += seg.end - seg.start;
    EXPECT_EQ(busy, ms(6.6));
}

TEST(Simulator, RejectsMismatchedInputs) {
    const SystemSpec spec = single_core({periodic("a", 10, 1, 2, 1)});
    TestCase tc = zero_ctx_case(spec);
    EXPECT_THROW(simulate(spec, tc, {}), ValidationError);
    tc.arrivals.clear();
    EXPECT_THROW(simulate(spec, tc, max_wcet(spec)), ValidationError);
}

namespace {

SystemSpec random_single_core(Rng& rng, bool with_ctx) {
    const std::size_t n = 2 + uniform_index(rng, 3);
    std::vector<Task> tasks;
    for (std::size_t i = 0; i < n; ++i) {
        const double gap = 2.0 + static_cast<double>(uniform_index(rng, 10));
        const double c = uniform_real(rng, 0.1, gap * 0.6);
        tasks.push_back(i % 2 ? aperiodic("t" + std::to_string(i), gap, gap * 1.5, c / 2, c, static_cast<int>(n - i))
                              : periodic("t" + std::to_string(i), gap, c / 2, c, static_cast<int>(n - i)));
    }
    SystemSpec s = single_core(tasks, 60);
    if (with_ctx) s.context_switch = {{ms(0.01), ms(0.05)}, {ms(0.01), ms(0.05)}, {ms(0), ms(0)}};
    return s;
}

std::vector<std::pair<Time, Time>> merged(std::vector<std::pair<Time, Time>> v) {
    std::sort(v.begin(), v.end());
    std::vector<std::pair<Time, Time>> out;
    for (const auto& iv : v) {
        if (!out.empty() && iv.first <= out.back().second) out.back().second = std::max(out.back().second, iv.second);
        else out.push_back(iv);
    }
    return out;
}

}  // namespace

TEST(SimulatorProperties, LongerWcetNeverFinishesAJobEarlier) {
    Rng rng(31);
    for (int trial = 0; trial < 150; ++trial) {
        const SystemSpec spec = random_single_core(rng, false);
        const TestCase tc = random_test_case(spec, rng);
        WcetAssignment w = sample_wcet(spec, rng);
        const auto before = simulate(spec, tc, w);
        const std::size_t grow = uniform_index(rng, spec.tasks.size());
        w[grow] = uniform_time(rng, w[grow], spec.tasks[grow].wcet.hi, spec.scheduler.resolution);
        const auto after = simulate(spec, tc, w);
        for (std::size_t i = 0; i < spec.tasks.size(); ++i)
            for (std::size_t k = 0; k < before.by_task[i].size(); ++k)
                ASSERT_GE(after.by_task[i][k].end, before.by_task[i][k].end) << "trial " << trial;
    }
}

TEST(SimulatorProperties, CoresAndJobsAreSinglyOccupiedAndWorkIsConserved) {
    Rng rng(47);
    const SystemSpec multi = load_system(source_path("data/fixtures/multicore_system.json"));
    for (int trial = 0; trial < 120; ++trial) {
        const bool single = trial % 2 == 0;
        const SystemSpec spec = single ? random_single_core(rng, true) : multi;
        const TestCase tc = random_test_case(spec, rng);
        const WcetAssignment w = sample_wcet(spec, rng);
        SimulationTrace trace;
        const auto s = simulate(spec, tc, w, &trace);

        std::map<int, std::vector<std::pair<Time, Time>>> per_core;
        std::map<std::pair<std::size_t, std::size_t>, std::vector<std::pair<Time, Time>>> per_job;
        std::map<std::pair<std::size_t, std::size_t>, Time> executed;
        for (const auto& seg : trace.segments) {
            per_core[seg.core].push_back({seg.start, seg.end});
            per_job[{seg.task, seg.job}].push_back({seg.start, seg.end});
            if (seg.kind == SegmentKind::execute) executed[{seg.task, seg.job}] += seg.end - seg.start;
        }
        auto disjoint = [](std::vector<std::pair<Time, Time>> v) {
            std::sort(v.begin(), v.end());
            for (std::size_t k = 1; k < v.size(); ++k)
                if (v[k].first < v[k - 1].second) return false;
            return true;
        };
        for (const auto& [core, v] : per_core) ASSERT_TRUE(disjoint(v)) << "core " << core << " trial " << trial;
        for (const auto& [job, v] : per_job) ASSERT_TRUE(disjoint(v)) << "trial " << trial;
        for (std::size_t i = 0; i < spec.tasks.size(); ++i)
            for (std::size_t k = 0; k < s.by_task[i].size(); ++k) {
                EXPECT_EQ(executed[std::pair(i, k)], w[i]);
                EXPECT_EQ(per_job[std::pair(i, k)].back().second, s.by_task[i][k].end);
            }
        if (!single) continue;
        // One core, one partition: the core never idles while work is pending.
        const auto busy = merged(per_core[0]);
        for (std::size_t i = 0; i < spec.tasks.size(); ++i)
            for (const auto& job : s.by_task[i]) {
                const auto it = std::find_if(busy.begin(), busy.end(), [&](const auto& iv) { return iv.second > job.arrival; });
                ASSERT_NE(it, busy.end());
                EXPECT_LE(it->first, job.arrival);
                EXPECT_GE(it->second, job.end);
            }
    }
}
