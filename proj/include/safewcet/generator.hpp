#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "safewcet/rng.hpp"
#include "safewcet/system_io.hpp"

namespace safewcet {

struct GenerationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GenConfig {
    int n = 25;
    double utilization = 0.9;  // total target utilization u^t, at most `cores`
    Time t_min = Time::from_ms_int(10);
    Time t_max = Time::from_ms_int(1000);
    Time granularity = Time::from_ms_int(10);
    Time max_offset;
    double gamma = 0.5;          // share of tasks turned aperiodic
    double mu = 0.25;            // inter-arrival range factor
    int omega = 2;               // tasks with WCET ranges
    std::optional<double> lambda = 0.25;  // WCET range factor; per-task log-uniform when absent
    int partitions = 1;
    DeadlineConstraint mk{2, 5};
    int nw = 5;                  // weakly hard tasks, taken from the lowest priorities
    int cores = 1;
    TimeRange ctx{Time::parse("0.012"), Time::parse("0.022")};
    std::optional<Time> horizon = Time::from_ms_int(5000);
    std::uint64_t seed = 0;
};

inline void validate(const GenConfig& c) {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ValidationError(std::string("generator config: ") + what);
    };
    require(c.n >= 1, "n must be at least 1");
    require(c.cores >= 1, "cores must be at least 1");
    require(c.utilization > 0 && c.utilization <= c.cores, "utilization must lie in (0, cores]");
    require(c.utilization < c.n, "utilization must be below n");
    require(c.t_min > Time{} && c.t_min <= c.t_max, "need 0 < t_min <= t_max");
    require(c.granularity > Time{}, "granularity must be positive");
    require(c.max_offset >= Time{}, "max_offset must be non-negative");
    require(c.gamma >= 0 && c.gamma <= 1, "gamma must lie in [0,1]");
    require(c.mu > 0 && c.mu < 1, "mu must lie in (0,1)");
    require(c.omega >= 0 && c.omega <= c.n, "omega must lie in [0,n]");
    require(!c.lambda || (*c.lambda > 0 && *c.lambda < 1), "lambda must lie in (0,1)");
    require(c.partitions >= 1 && c.partitions <= c.n, "partitions must lie in [1,n]");
    require(c.mk.m >= 0 && c.mk.m < c.mk.K, "need 0 <= m < K");
    require(c.nw >= 0 && c.nw <= c.n, "nw must lie in [0,n]");
    require(c.ctx.lo >= Time{} && c.ctx.lo <= c.ctx.hi, "context switch range invalid");
}

/// n utilizations summing to `total`, each in (0,1); draws with any value
/// outside that interval are discarded and redrawn.
inline std::vector<double> uunifast_discard(int n, double total, Rng& rng, std::size_t max_draws = 1000000) {
    if (n < 1 || total <= 0 || total >= n) throw GenerationError("UUniFast-Discard: infeasible utilization " + std::to_string(total) + " for " + std::to_string(n) + " tasks");
    std::vector<double> u(n);
    for (std::size_t draw = 0; draw < max_draws; ++draw) {
        double sum = total;
        for (int i = 0; i + 1 < n; ++i) {
            const double next = sum * std::pow(uniform01(rng), 1.0 / (n - 1 - i));
            u[i] = sum - next;
            sum = next;
        }
        u[n - 1] = sum;
        if (std::all_of(u.begin(), u.end(), [](double x) { return x > 0 && x < 1; })) return u;
    }
    throw GenerationError("UUniFast-Discard: no valid draw");
}

/// log x uniform on [log lo, log hi].
inline double log_uniform(Rng& rng, double lo, double hi) { return std::exp(uniform_real(rng, std::log(lo), std::log(hi))); }

inline Time round_to_grid(double ms, Time grid) {
    const double k = std::round(ms * Time::kUnitsPerMs / static_cast<double>(grid.units()));
    return Time::from_units(static_cast<Time::rep>(k) * grid.units());
}

/// Period drawn log-uniformly, rounded to the nearest multiple of g and
/// clamped to the multiples of g inside [t_min, t_max].
inline Time sample_period(const GenConfig& c, Rng& rng) {
    const Time::rep g = c.granularity.units();
    const Time lo = Time::from_units((c.t_min.units() + g - 1) / g * g);
    const Time hi = Time::from_units(c.t_max.units() / g * g);
    if (lo > hi) throw GenerationError("no multiple of the granularity lies in [t_min, t_max]");
    return std::clamp(round_to_grid(log_uniform(rng, c.t_min.ms(), c.t_max.ms()), c.granularity), lo, hi);
}

/// Budgets split evenly in whole percent, the remainder going to the first
/// partitions: 3 partitions give 34/33/33.
inline std::vector<double> even_budgets(int rho) {
    std::vector<double> b(rho, static_cast<double>(100 / rho));
    for (int i = 0; i < 100 % rho; ++i) b[i] += 1;
    return b;
}

namespace detail {

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

inline std::optional<SystemSpec> try_generate(const GenConfig& c, Rng& rng) {
    const Time res = Time::from_units(1);
    const auto U = uunifast_discard(c.n, c.utilization, rng);
    std::vector<Time> T(c.n), C(c.n);
    for (int i = 0; i < c.n; ++i) T[i] = sample_period(c, rng);
    for (int i = 0; i < c.n; ++i) C[i] = std::max(res, Time::from_ms(U[i] * T[i].ms()));

    SystemSpec s;
    s.cores = c.cores;
    s.context_switch = {c.ctx, c.ctx, c.ctx};
    s.sim_horizon = c.horizon;
    for (int i = 0; i < c.n; ++i) {
        Task t;
        t.id = "t" + std::to_string(i + 1);
        t.kind = TaskKind::periodic;
        t.period = T[i];
        t.offset = c.max_offset > Time{} ? uniform_time(rng, Time{}, Time::from_units(c.max_offset.units() / c.granularity.units() * c.granularity.units()), c.granularity) : Time{};
        t.wcet = {C[i], C[i]};
        t.deadline = T[i];
        t.constraint = {0, c.mk.K};
        s.tasks.push_back(std::move(t));
    }
    // Rate monotonic: shorter period, higher priority; ties by index.
    std::vector<int> by_rate(c.n);
    std::iota(by_rate.begin(), by_rate.end(), 0);
    std::stable_sort(by_rate.begin(), by_rate.end(), [&](int a, int b) { return T[a] < T[b]; });
    for (int r = 0; r < c.n; ++r) s.tasks[by_rate[r]].priority = c.n - r;
    for (int r = c.n - c.nw; r < c.n; ++r) s.tasks[by_rate[r]].constraint = c.mk;

    std::vector<int> order(c.n);
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    const int aperiodic = static_cast<int>(std::floor(c.gamma * c.n + 1e-9));
    for (int k = 0; k < aperiodic; ++k) {
        Task& t = s.tasks[order[k]];
        t.kind = TaskKind::aperiodic;
        t.inter_arrival = {Time::from_ms(t.period.ms() * (1 - c.mu)), Time::from_ms(t.period.ms() * (1 + c.mu))};
        t.offset = Time{};
        if (t.inter_arrival.lo <= Time{}) return std::nullopt;
    }

    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    for (int k = 0; k < c.omega; ++k) {
        Task& t = s.tasks[order[k]];
        const double base = t.wcet.lo.ms();
        bool ok = false;
        for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
            const double lam = c.lambda ? *c.lambda : log_uniform(rng, 0.01, 1.0);
            const Time lo = Time::from_ms(base * (1 - lam)), hi = Time::from_ms(base * (1 + lam));
            ok = lo > Time{} && hi < t.deadline && lo < hi;
            if (ok) t.wcet = {lo, hi};
            if (c.lambda) break;
        }
        if (!ok) return std::nullopt;
    }

    const auto budgets = even_budgets(c.partitions);
    for (int p = 0; p < c.partitions; ++p) s.partitions.push_back({"P" + std::to_string(p + 1), budgets[p]});
    std::iota(order.begin(), order.end(), 0);
    shuffle(order, rng);
    for (int k = 0; k < c.n; ++k)
        s.tasks[order[k]].partition = s.partitions[k < c.partitions ? k : uniform_index(rng, c.partitions)].id;
    for (const auto& t : s.tasks) s.target_tasks.push_back(t.id);
    return s;
}

}  // namespace detail

/// Synthetic weakly hard system: UUniFast-Discard utilizations, log-uniform
/// periods, rate-monotonic priorities, (m,K) on the lowest-priority tasks,
/// aperiodic conversion, WCET ranges and evenly budgeted partitions.
/// Invalid draws are regenerated from derived seeds, up to 100 attempts.
inline SystemSpec generate_system(const GenConfig& c) {
    validate(c);
    std::string last_error = "invalid WCET range or inter-arrival range";
    for (std::uint64_t attempt = 0; attempt < 100; ++attempt) {
        Rng rng(derive_seed(c.seed, {attempt}));
        auto s = detail::try_generate(c, rng);
        if (!s) continue;
        try {
            validate(*s);
            return *s;
        } catch (const ValidationError& e) {
            last_error = e.what();
        }
    }
    throw GenerationError("generation failed after 100 attempts: " + last_error);
}

/// Parameters a suite may sweep, with their default value grids.
inline std::vector<double> default_sweep_values(const std::string& param) {
    std::vector<double> v;
    if (param == "n") for (int k = 5; k <= 50; k += 5) v.push_back(k);
    else if (param == "gamma") for (int k = 1; k <= 10; ++k) v.push_back(0.05 * k);
    else if (param == "omega" || param == "cores" || param == "partitions") for (int k = 1; k <= 10; ++k) v.push_back(k);
    else if (param == "horizon") for (int k = 5000; k <= 50000; k += 5000) v.push_back(k);
    else throw ValidationError("unknown sweep parameter '" + param + "'");
    return v;
}

inline GenConfig with_param(GenConfig c, const std::string& param, double v) {
    if (param == "n") c.n = static_cast<int>(v);
    else if (param == "gamma") c.gamma = v;
    else if (param == "omega") c.omega = static_cast<int>(v);
    else if (param == "cores") {
        c.utilization = c.utilization / c.cores * v;
        c.cores = static_cast<int>(v);
    } else if (param == "partitions") c.partitions = static_cast<int>(v);
    else if (param == "horizon") c.horizon = Time::from_ms(v);
    else throw ValidationError("unknown sweep parameter '" + param + "'");
    if (param == "n") c.nw = std::min(c.nw, c.n), c.omega = std::min(c.omega, c.n), c.partitions = std::min(c.partitions, c.n);
    return c;
}

struct SuiteEntry {
    std::string param;
    double value = 0;
    std::size_t replicate = 0;
    GenConfig config;
    SystemSpec spec;
};

/// One system per (value, replicate) with seeds derived from the base seed.
/// An empty sweep yields the base system alone.
inline std::vector<SuiteEntry> generate_experiment_suite(const GenConfig& base, const std::string& param,
                                                         const std::vector<double>& values, std::size_t replicates) {
    if (param.empty() || values.empty()) return {SuiteEntry{"", 0, 0, base, generate_system(base)}};
    std::vector<SuiteEntry> out;
    for (std::size_t vi = 0; vi < values.size(); ++vi)
        for (std::size_t r = 0; r < replicates; ++r) {
            GenConfig c = with_param(base, param, values[vi]);
            c.seed = derive_seed(base.seed, {vi, r});
            out.push_back({param, values[vi], r, c, generate_system(c)});
        }
    return out;
}

inline GenConfig gen_config_from_json(const nlohmann::json& j) {
    GenConfig c;
    try {
        c.n = j.value("n", c.n);
        c.utilization = j.value("utilization", c.utilization);
        if (j.contains("t_min")) c.t_min = io::time_field(j, "t_min");
        if (j.contains("t_max")) c.t_max = io::time_field(j, "t_max");
        if (j.contains("granularity")) c.granularity = io::time_field(j, "granularity");
        if (j.contains("max_offset")) c.max_offset = io::time_field(j, "max_offset");
        c.gamma = j.value("gamma", c.gamma);
        c.mu = j.value("mu", c.mu);
        c.omega = j.value("omega", c.omega);
        if (j.contains("lambda")) c.lambda = j["lambda"].is_null() ? std::nullopt : std::optional<double>(j["lambda"].get<double>());
        c.partitions = j.value("partitions", c.partitions);
        if (j.contains("mk")) c.mk = {j["mk"].at(0).get<int>(), j["mk"].at(1).get<int>()};
        c.nw = j.value("nw", c.nw);
        c.cores = j.value("cores", c.cores);
        if (j.contains("context_switch")) c.ctx = io::range_field(j, "context_switch");
        if (j.contains("sim_horizon")) c.horizon = j["sim_horizon"].is_null() ? std::nullopt : std::optional<Time>(io::time_field(j, "sim_horizon"));
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("generator config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ParseError(std::string("generator config: ") + e.what());
    }
    return c;
}

inline ojson gen_config_to_json(const GenConfig& c) {
    ojson j;
    j["n"] = c.n;
    j["utilization"] = c.utilization;
    j["t_min"] = c.t_min.str();
    j["t_max"] = c.t_max.str();
    j["granularity"] = c.granularity.str();
    j["max_offset"] = c.max_offset.str();
    j["gamma"] = c.gamma;
    j["mu"] = c.mu;
    j["omega"] = c.omega;
    j["lambda"] = c.lambda ? ojson(*c.lambda) : ojson(nullptr);
    j["partitions"] = c.partitions;
    j["mk"] = {c.mk.m, c.mk.K};
    j["nw"] = c.nw;
    j["cores"] = c.cores;
    j["context_switch"] = io::range_json(c.ctx);
    j["sim_horizon"] = c.horizon ? ojson(c.horizon->str()) : ojson(nullptr);
    j["seed"] = c.seed;
    return j;
}

}  // namespace safewcet
