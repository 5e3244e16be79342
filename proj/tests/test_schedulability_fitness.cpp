#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace testsupport;

namespace {

// Scans every window of K consecutive arrivals (a single window for shorter
// patterns) and reports the first one holding a run of more than m misses.
std::optional<std::size_t> window_scan(const MuPattern& mu, int m, int K) {
    const std::size_t n = mu.size(), k = static_cast<std::size_t>(K);
    const std::size_t windows = n <= k ? 1 : n - k + 1;
    for (std::size_t s = 0; s < windows; ++s) {
        int run = 0, worst = 0;
        for (std::size_t j = s; j < std::min(n, s + k); ++j) {
            run = mu[j] ? run + 1 : 0;
            worst = std::max(worst, run);
        }
        if (worst > m) return s;
    }
    return std::nullopt;
}

double consec_oracle(const MuPattern& mu) {
    double total = 0;
    for (std::size_t k = 0; k < mu.size(); ++k) {
        if (!mu[k]) continue;
        std::size_t j = k + 1;
        while (j < mu.size() && !mu[j]) ++j;
        total += j < mu.size() ? std::pow(10.0, 1.0 / static_cast<double>(j - k)) : 1.0;
    }
    return total;
}

}  // namespace

TEST(WeaklyHard, ExhaustivePatternsAgreeWithWindowScanner) {
    std::size_t checked = 0, mismatches = 0;
    for (std::size_t len = 0; len <= 8; ++len)
        for (std::uint32_t bits = 0; bits < (1u << len); ++bits) {
            MuPattern mu(len);
            for (std::size_t j = 0; j < len; ++j) mu[j] = (bits >> j) & 1u;
            for (int K = 1; K <= 8; ++K)
                for (int m = 0; m < K; ++m) {
                    ++checked;
                    if (first_violating_window(mu, {m, K}) != window_scan(mu, m, K)) ++mismatches;
                }
        }
    EXPECT_EQ(mismatches, 0u);
    EXPECT_GT(checked, 10000u);
}

TEST(WeaklyHard, TwoConsecutiveMissesOfFixtureTask) {
    SystemSpec spec = load_system(source_path("data/fixtures/two_core_mk_system.json"));
    const TestCase tc =
        test_case_from_json(spec, nlohmann::json::parse(read_text_file(source_path("data/fixtures/two_core_mk_testcase.json"))));
    const auto s = simulate(spec, tc, {ms(2), ms(3), ms(3), ms(3.9)});
    const std::size_t t4 = spec.task_index("t4");
    const MuPattern mu = mu_pattern(spec, s, t4);
    EXPECT_EQ(mu, (MuPattern{0, 0, 0, 0, 0, 1, 1, 0}));
    EXPECT_TRUE(first_violating_window(mu, {1, 4}).has_value());
    EXPECT_FALSE(first_violating_window(mu, {2, 4}).has_value());
    EXPECT_EQ(label(spec, s, {t4}), Label::unsafe);
    spec.tasks[t4].constraint = {2, 4};
    EXPECT_EQ(label(spec, s, {t4}), Label::safe);
}

TEST(WeaklyHard, DistanceSignMatchesMiss) {
    const SystemSpec spec = load_system(source_path("data/fixtures/two_core_mk_system.json"));
    Rng rng(5);
    for (int k = 0; k < 20; ++k) {
        const auto s = simulate(spec, random_test_case(spec, rng), sample_wcet(spec, rng));
        for (std::size_t i = 0; i < spec.tasks.size(); ++i) {
            const auto mu = mu_pattern(spec, s, i);
            for (std::size_t j = 0; j < mu.size(); ++j) EXPECT_EQ(mu[j] == 1, dist(spec, s, i, j) > Time{});
        }
    }
}

TEST(Fitness, WorkedConsecutivenessExample) {
    const MuPattern mu = {1, 1, 0, 0, 1, 0};
    EXPECT_DOUBLE_EQ(consec(mu, 0), 10.0);
    EXPECT_NEAR(consec(mu, 1), std::cbrt(10.0), 1e-12);
    EXPECT_EQ(consec(mu, 2), 0.0);
    EXPECT_EQ(consec(mu, 4), 1.0);
    EXPECT_NEAR(consec_sum(mu), 11.0 + std::cbrt(10.0), 1e-9);
}

TEST(Fitness, BackwardPassMatchesDirectSumOnAllShortPatterns) {
    for (std::size_t len = 0; len <= 10; ++len)
        for (std::uint32_t bits = 0; bits < (1u << len); ++bits) {
            MuPattern mu(len);
            for (std::size_t j = 0; j < len; ++j) mu[j] = (bits >> j) & 1u;
            ASSERT_NEAR(consec_sum(mu), consec_oracle(mu), 1e-12);
            double direct = 0;
            for (std::size_t j = 0; j < len; ++j) direct += consec(mu, j);
            ASSERT_NEAR(consec_sum(mu), direct, 1e-12);
        }
}

TEST(Fitness, AssessTakesMaximaOverTargets) {
    const SystemSpec spec = load_system(source_path("data/fixtures/two_core_mk_system.json"));
    const TestCase tc =
        test_case_from_json(spec, nlohmann::json::parse(read_text_file(source_path("data/fixtures/two_core_mk_testcase.json"))));
    const auto s = simulate(spec, tc, {ms(2), ms(3), ms(3), ms(3.9)});
    const auto out = assess(spec, s, spec.target_indices());
    // t4 misses at 40 (ends 50.3) and 48 (ends 58.575).
    EXPECT_NEAR(out.max_dist, 58.575 - 56.0, 1e-12);
    EXPECT_NEAR(out.max_consec, 10.0 + 1.0, 1e-12);
    EXPECT_EQ(out.label, Label::unsafe);
}

TEST(Fitness, SampledRunsAreReproducible) {
    const SystemSpec spec = load_system(source_path("data/fixtures/two_core_mk_system.json"));
    Rng rng(8);
    const TestCase tc = random_test_case(spec, rng);
    const auto targets = spec.target_indices();
    const auto a = sampled_run(spec, tc, targets, 42), b = sampled_run(spec, tc, targets, 42);
    EXPECT_EQ(a.wcet, b.wcet);
    EXPECT_EQ(a.outcome.max_dist, b.outcome.max_dist);
    EXPECT_EQ(fitness_fd(spec, tc, 5, 9), fitness_fd(spec, tc, 5, 9));
    EXPECT_NO_THROW(validate_wcet(spec, a.wcet));
}
