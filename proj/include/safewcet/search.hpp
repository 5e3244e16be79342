#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <tuple>
#include <vector>

#include "safewcet/dataset.hpp"
#include "safewcet/fitness.hpp"
#include "safewcet/operators.hpp"
#include "safewcet/parallel.hpp"

namespace safewcet {

struct Individual {
    std::uint64_t id = 0;
    TestCase tc;
    FitnessPair fit;
    std::size_t rank = 0;
    double crowding = 0.0;
};

/// a dominates b when it is no worse on both (maximized) objectives and
/// strictly better on one.
inline bool dominates(const FitnessPair& a, const FitnessPair& b) {
    return a.fd >= b.fd && a.fc >= b.fc && (a.fd > b.fd || a.fc > b.fc);
}

/// Fast non-dominated sorting; returns the front index of every point (0 = best).
inline std::vector<std::size_t> pareto_ranks(const std::vector<FitnessPair>& f) {
    const std::size_t n = f.size();
    std::vector<std::vector<std::size_t>> dominated(n);
    std::vector<std::size_t> count(n, 0), rank(n, 0), front;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (dominates(f[i], f[j])) dominated[i].push_back(j);
            else if (dominates(f[j], f[i])) ++count[i];
        }
        if (count[i] == 0) front.push_back(i);
    }
    for (std::size_t r = 0; !front.empty(); ++r) {
        std::vector<std::size_t> next;
        for (std::size_t i : front) {
            rank[i] = r;
            for (std::size_t j : dominated[i])
                if (--count[j] == 0) next.push_back(j);
        }
        front = std::move(next);
    }
    return rank;
}

/// Crowding distance of each member of one front (indices into f); boundary
/// points get +inf.
inline std::vector<double> crowding_distances(const std::vector<FitnessPair>& f, const std::vector<std::size_t>& front) {
    const std::size_t n = front.size();
    std::vector<double> d(n, 0.0);
    if (n <= 2) {
        std::fill(d.begin(), d.end(), std::numeric_limits<double>::infinity());
        return d;
    }
    for (double FitnessPair::*obj : {&FitnessPair::fd, &FitnessPair::fc}) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[front[a]].*obj < f[front[b]].*obj; });
        const double lo = f[front[order.front()]].*obj, hi = f[front[order.back()]].*obj;
        d[order.front()] = d[order.back()] = std::numeric_limits<double>::infinity();
        if (hi <= lo) continue;
        for (std::size_t k = 1; k + 1 < n; ++k)
            d[order[k]] += (f[front[order[k + 1]]].*obj - f[front[order[k - 1]]].*obj) / (hi - lo);
    }
    return d;
}

/// Ordering used for truncation and tournaments: lower rank, then sparser,
/// then older.
inline bool better(const Individual& a, const Individual& b) {
    if (a.rank != b.rank) return a.rank < b.rank;
    if (a.crowding != b.crowding) return a.crowding > b.crowding;
    return a.id < b.id;
}

/// Ranks the pool, assigns crowding per front and keeps the best np.
inline std::vector<Individual> select_archive(std::vector<Individual> pool, std::size_t np) {
    std::vector<FitnessPair> f;
    for (const auto& ind : pool) f.push_back(ind.fit);
    const auto rank = pareto_ranks(f);
    const std::size_t fronts = pool.empty() ? 0 : *std::max_element(rank.begin(), rank.end()) + 1;
    for (std::size_t r = 0; r < fronts; ++r) {
        std::vector<std::size_t> front;
        for (std::size_t i = 0; i < pool.size(); ++i)
            if (rank[i] == r) front.push_back(i);
        const auto d = crowding_distances(f, front);
        for (std::size_t k = 0; k < front.size(); ++k) {
            pool[front[k]].rank = r;
            pool[front[k]].crowding = d[k];
        }
    }
    std::sort(pool.begin(), pool.end(), better);
    if (pool.size() > np) pool.resize(np);
    return pool;
}

inline const Individual& tournament(const std::vector<Individual>& archive, Rng& rng) {
    const Individual& a = archive[uniform_index(rng, archive.size())];
    const Individual& b = archive[uniform_index(rng, archive.size())];
    return better(a, b) ? a : b;
}

struct SearchParams {
    std::size_t np = 10;
    std::size_t ns = 20;
    std::size_t iterations = 1000;
    double pc = 0.7;
    double pm = 0.2;
    int jobs = 1;
    bool keep_evaluated = false;  // retain every evaluated test case (by id)
};

inline void validate(const SearchParams& p) {
    if (p.np == 0 || p.ns == 0 || p.iterations == 0) throw ValidationError("search: pop, ns and iterations must be positive");
    if (!(p.pc >= 0.0 && p.pc <= 1.0) || !(p.pm >= 0.0 && p.pm <= 1.0)) throw ValidationError("search: pc and pm must lie in [0,1]");
}

struct SearchResult {
    std::vector<Individual> archive;
    LabeledDataset dataset;
    std::vector<TestCase> evaluated;  // indexed by individual id when kept
};

// Seed-stream tags; each (tag, generation, individual, run) cell gets its own stream.
inline constexpr std::uint64_t kInitStream = 1, kBreedStream = 2, kRunStream = 3;

/// Evaluates a generation: every individual gets ns runs; the dataset grows by
/// np*ns rows in (individual, run) order regardless of the worker count.
inline void evaluate_generation(const SystemSpec& spec, std::vector<Individual>& pop, std::size_t ns, std::uint64_t seed,
                                std::uint64_t gen, std::uint64_t stream, int jobs, LabeledDataset& dataset) {
    const auto targets = spec.target_indices();
    std::vector<SampledRun> runs(pop.size() * ns);
    parallel_for(runs.size(), jobs, [&](std::size_t cell) {
        const std::size_t i = cell / ns, h = cell % ns;
        runs[cell] = sampled_run(spec, pop[i].tc, targets, derive_seed(seed, {stream, gen, i, h}));
    });
    for (std::size_t i = 0; i < pop.size(); ++i) {
        std::vector<RunOutcome> outcomes;
        for (std::size_t h = 0; h < ns; ++h) {
            const SampledRun& r = runs[i * ns + h];
            outcomes.push_back(r.outcome);
            dataset.append(r.wcet, r.outcome.label, pop[i].id, r.seed);
        }
        pop[i].fit = mean_fitness(outcomes);
    }
}

/// Multi-objective search for stress test cases: evaluate, merge into the
/// archive, truncate by rank and crowding, breed the next population.
inline SearchResult nsga2_search(const SystemSpec& spec, const SearchParams& params, std::uint64_t seed) {
    validate(params);
    SearchResult res{{}, LabeledDataset::for_spec(spec), {}};
    std::uint64_t next_id = 0;
    auto adopt = [&](TestCase tc) {
        if (params.keep_evaluated) res.evaluated.push_back(tc);
        return Individual{next_id++, std::move(tc), {}, 0, 0.0};
    };
    std::vector<Individual> pop;
    Rng init(derive_seed(seed, {kInitStream}));
    for (std::size_t i = 0; i < params.np; ++i) pop.push_back(adopt(random_test_case(spec, init)));

    for (std::size_t gen = 0; gen < params.iterations; ++gen) {
        evaluate_generation(spec, pop, params.ns, seed, gen, kRunStream, params.jobs, res.dataset);
        std::vector<Individual> pool = std::move(res.archive);
        pool.insert(pool.end(), pop.begin(), pop.end());
        res.archive = select_archive(std::move(pool), params.np);
        if (gen + 1 == params.iterations) break;

        Rng rng(derive_seed(seed, {kBreedStream, gen}));
        pop.clear();
        while (pop.size() < params.np) {
            TestCase a = tournament(res.archive, rng).tc;
            TestCase b = tournament(res.archive, rng).tc;
            if (uniform01(rng) < params.pc) std::tie(a, b) = crossover(spec, a, b, rng);
            pop.push_back(adopt(mutate(spec, a, params.pm, rng)));
            if (pop.size() < params.np) pop.push_back(adopt(mutate(spec, b, params.pm, rng)));
        }
    }
    return res;
}

/// Plain random search: every generation is fresh random test cases, scored
/// and labeled exactly like the evolutionary search.
inline SearchResult random_search(const SystemSpec& spec, const SearchParams& params, std::uint64_t seed) {
    validate(params);
    SearchResult res{{}, LabeledDataset::for_spec(spec), {}};
    std::uint64_t next_id = 0;
    for (std::size_t gen = 0; gen < params.iterations; ++gen) {
        Rng rng(derive_seed(seed, {kInitStream, gen}));
        std::vector<Individual> pop;
        for (std::size_t i = 0; i < params.np; ++i) {
            pop.push_back(Individual{next_id++, random_test_case(spec, rng), {}, 0, 0.0});
            if (params.keep_evaluated) res.evaluated.push_back(pop.back().tc);
        }
        evaluate_generation(spec, pop, params.ns, seed, gen, kRunStream, params.jobs, res.dataset);
        std::vector<Individual> pool = std::move(res.archive);
        pool.insert(pool.end(), pop.begin(), pop.end());
        res.archive = select_archive(std::move(pool), params.np);
    }
    return res;
}

inline ojson archive_to_json(const SystemSpec& spec, const std::vector<Individual>& archive) {
    ojson arr = ojson::array();
    for (const auto& ind : archive) {
        ojson j;
        j["id"] = ind.id;
        j["rank"] = ind.rank;
        j["crowding"] = std::isfinite(ind.crowding) ? ojson(ind.crowding) : ojson(nullptr);
        j["fd"] = ind.fit.fd;
        j["fc"] = ind.fit.fc;
        j["testcase"] = test_case_to_json(spec, ind.tc);
        arr.push_back(std::move(j));
    }
    ojson doc;
    doc["archive"] = std::move(arr);
    return doc;
}

inline std::vector<Individual> archive_from_json(const SystemSpec& spec, const nlohmann::json& doc) {
    std::vector<Individual> out;
    try {
        for (const auto& j : doc.at("archive")) {
            Individual ind;
            ind.id = j.at("id").get<std::uint64_t>();
            ind.rank = j.at("rank").get<std::size_t>();
            ind.crowding = j.at("crowding").is_null() ? std::numeric_limits<double>::infinity() : j.at("crowding").get<double>();
            ind.fit = {j.at("fd").get<double>(), j.at("fc").get<double>()};
            ind.tc = test_case_from_json(spec, j.at("testcase"));
            validate_test_case(spec, ind.tc);
            out.push_back(std::move(ind));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("archive: ") + e.what());
    }
    return out;
}

}  // namespace safewcet
