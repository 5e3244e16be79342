#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>

#include "safewcet/artifacts.hpp"
#include "safewcet/generator.hpp"

namespace safewcet {

/// A failure inside a named pipeline stage; partial outputs stay on disk.
struct StageError : std::runtime_error {
    std::string stage;
    StageError(std::string s, const std::string& what) : std::runtime_error("stage '" + s + "': " + what), stage(std::move(s)) {}
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    int jobs = 0;  // 0: all available cores
    ojson system;  // inline system description
    SearchParams search;
    LearnConfig learn;
    bool baseline = false;
    SearchParams baseline_search{10, 20, 0, 0.0, 0.0, 1, false};  // iterations 0: match the label budget
    bool evaluate = false;
    std::size_t eval_runs = 40000;
};

/// Baseline generations giving the same number of labels as the search plus
/// the full refinement budget.
inline std::size_t matched_baseline_iterations(const PipelineConfig& c) {
    const std::size_t labels = c.search.np * c.search.ns * c.search.iterations +
                               c.learn.max_updates * c.learn.samples * c.learn.refine_testcases;
    const std::size_t per_gen = c.baseline_search.np * c.baseline_search.ns;
    return (labels + per_gen - 1) / per_gen;
}

namespace detail {

template <class T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace detail

/// Parses a pipeline config document. The system comes from "system" (path,
/// relative to base_dir, or inline object) or from a "generate" section.
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    PipelineConfig c;
    try {
        c.seed = detail::get_or<std::uint64_t>(j, "seed", 0);
        c.jobs = detail::get_or<int>(j, "jobs", 0);
        if (j.contains("system") && j["system"].is_string()) {
            std::filesystem::path p = j["system"].get<std::string>();
            if (p.is_relative()) p = base_dir / p;
            c.system = system_to_json(load_system(p));
        } else if (j.contains("system")) {
            c.system = system_to_json(system_from_json(j["system"]));
        } else if (j.contains("generate")) {
            c.system = system_to_json(generate_system(gen_config_from_json(j["generate"])));
        } else {
            throw ParseError("config needs a 'system' or a 'generate' section");
        }
        validate(system_from_json(c.system));
        const auto s = j.value("search", nlohmann::json::object());
        c.search.np = detail::get_or<std::size_t>(s, "pop", c.search.np);
        c.search.ns = detail::get_or<std::size_t>(s, "ns", c.search.ns);
        c.search.iterations = detail::get_or<std::size_t>(s, "iters", c.search.iterations);
        c.search.pc = detail::get_or<double>(s, "pc", c.search.pc);
        c.search.pm = detail::get_or<double>(s, "pm", c.search.pm);
        validate(c.search);
        const auto l = j.value("learn", nlohmann::json::object());
        c.learn.max_updates = detail::get_or<std::size_t>(l, "updates", c.learn.max_updates);
        c.learn.samples = detail::get_or<std::size_t>(l, "samples", c.learn.samples);
        c.learn.kfold = detail::get_or<std::size_t>(l, "kfold", c.learn.kfold);
        c.learn.refine_testcases = detail::get_or<std::size_t>(l, "testcases", c.learn.refine_testcases);
        c.learn.target_precision = detail::get_or<double>(l, "target_precision", c.learn.target_precision);
        c.learn.forest.trees = detail::get_or<std::size_t>(l, "trees", c.learn.forest.trees);
        c.learn.starts = detail::get_or<std::size_t>(l, "starts", c.learn.starts);
        if (c.learn.kfold < 2) throw ValidationError("learn: kfold must be at least 2");
        const auto b = j.value("baseline", nlohmann::json::object());
        c.baseline = detail::get_or<bool>(b, "enabled", false);
        c.baseline_search.np = detail::get_or<std::size_t>(b, "pop", c.baseline_search.np);
        c.baseline_search.ns = detail::get_or<std::size_t>(b, "ns", c.baseline_search.ns);
        c.baseline_search.iterations = detail::get_or<std::size_t>(b, "iters", 0);
        if (c.baseline_search.iterations == 0) c.baseline_search.iterations = matched_baseline_iterations(c);
        validate(c.baseline_search);
        const auto e = j.value("evaluate", nlohmann::json::object());
        c.evaluate = detail::get_or<bool>(e, "enabled", false);
        c.eval_runs = detail::get_or<std::size_t>(e, "runs", c.eval_runs);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("pipeline config: ") + e.what());
    }
    return c;
}

/// Fully resolved config (defaults filled, system inline); replaying it
/// reproduces the run.
inline ojson pipeline_config_to_json(const PipelineConfig& c) {
    ojson j;
    j["seed"] = c.seed;
    j["jobs"] = c.jobs;
    j["system"] = c.system;
    j["search"] = {{"pop", c.search.np}, {"ns", c.search.ns}, {"iters", c.search.iterations}, {"pc", c.search.pc}, {"pm", c.search.pm}};
    j["learn"] = {{"updates", c.learn.max_updates}, {"samples", c.learn.samples}, {"kfold", c.learn.kfold},
                  {"testcases", c.learn.refine_testcases}, {"target_precision", c.learn.target_precision},
                  {"trees", c.learn.forest.trees}, {"starts", c.learn.starts}};
    j["baseline"] = {{"enabled", c.baseline}, {"pop", c.baseline_search.np}, {"ns", c.baseline_search.ns},
                     {"iters", c.baseline_search.iterations}};
    j["evaluate"] = {{"enabled", c.evaluate}, {"runs", c.eval_runs}};
    return j;
}

/// Runs one stage, wrapping any failure with the stage name.
template <class Fn>
auto run_stage(const std::string& name, std::ostream& log, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            log << name << ": " << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";
        } else {
            auto r = fn();
            log << name << ": " << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s\n";
            return r;
        }
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

/// search -> learn (with best-size point) -> optional baseline -> optional
/// evaluation. Every artifact is hashed into manifest.json; stage seeds come
/// from the global seed and the stage name, so worker count never matters.
inline ojson run_pipeline(const PipelineConfig& c, const std::filesystem::path& out, std::ostream& log) {
    ArtifactWriter w(out);
    const SystemSpec spec = system_from_json(c.system);
    const int jobs = c.jobs;
    w.write("system.json", serialize_system(spec));

    SearchParams sp = c.search;
    sp.jobs = jobs;
    const auto search = run_stage("search", log, [&] {
        auto r = nsga2_search(spec, sp, stage_seed(c.seed, "search"));
        w.write_json("search/archive.json", archive_to_json(spec, r.archive));
        w.write("search/dataset.csv", dataset_csv(spec, r.dataset));
        return r;
    });

    LabeledDataset data = search.dataset;
    LearnConfig lc = c.learn;
    lc.jobs = jobs;
    const auto border = run_stage("learn", log, [&] {
        auto b = learn_safe_border(spec, data, search.archive, lc, stage_seed(c.seed, "learn"));
        w.write_json("learn/border.json", border_to_json(spec, data, b));
        w.write("learn/dataset.csv", dataset_csv(spec, data));
        return b;
    });

    std::optional<SafeHyperbox> bestbox;
    if (c.baseline) {
        SearchParams bp = c.baseline_search;
        bp.jobs = jobs;
        bestbox = run_stage("baseline", log, [&] {
            const auto r = random_search(spec, bp, stage_seed(c.seed, "baseline"));
            w.write("baseline/dataset.csv", dataset_csv(spec, r.dataset));
            auto box = max_safe_hyperbox(spec, r.dataset);
            w.write_json("baseline/bestbox.json", box_json(spec, r.dataset.tasks, box.upper));
            return box;
        });
    }

    if (c.evaluate) {
        run_stage("evaluate", log, [&] {
            const auto tasks = spec.range_task_indices();
            const std::uint64_t es = stage_seed(c.seed, "evaluate");
            const auto r = empirical_probability(spec, tasks, border_box(spec, data, border), c.eval_runs, es, jobs);
            ojson j = empirical_json(r);
            j["model_p_s"] = border.p_s;
            w.write_json("evaluate/border.json", j);
            w.write("evaluate/border_runs.csv", verdicts_csv(r));
            if (bestbox) {
                const auto rb = empirical_probability(spec, tasks, bestbox->upper, c.eval_runs, es, jobs);
                w.write_json("evaluate/baseline.json", empirical_json(rb));
                w.write("evaluate/baseline_runs.csv", verdicts_csv(rb));
            }
        });
    }

    ojson manifest;
    manifest["config"] = pipeline_config_to_json(c);
    manifest["stage_seeds"] = {{"search", stage_seed(c.seed, "search")}, {"learn", stage_seed(c.seed, "learn")},
                               {"baseline", stage_seed(c.seed, "baseline")}, {"evaluate", stage_seed(c.seed, "evaluate")}};
    ojson hashes = ojson::object();
    for (const auto& [path, h] : w.hashes()) hashes[path] = h;
    manifest["artifacts"] = std::move(hashes);
    write_text_file(out / "manifest.json", manifest.dump(2) + "\n");
    return manifest;
}

/// Re-runs a manifest's config into `out` and lists artifacts whose hash
/// differs from the recorded one (empty when the replay is byte-identical).
inline std::vector<std::string> replay_manifest(const nlohmann::json& manifest, const std::filesystem::path& out, std::ostream& log,
                                                int jobs_override = -1) {
    PipelineConfig c = pipeline_config_from_json(manifest.at("config"), {});
    if (jobs_override >= 0) c.jobs = jobs_override;
    const ojson fresh = run_pipeline(c, out, log);
    std::vector<std::string> mismatched;
    const ojson recorded = ojson::parse(manifest.at("artifacts").dump());
    for (auto it = recorded.begin(); it != recorded.end(); ++it)
        if (!fresh["artifacts"].contains(it.key()) || fresh["artifacts"][it.key()] != it.value()) mismatched.push_back(it.key());
    for (auto it = fresh["artifacts"].begin(); it != fresh["artifacts"].end(); ++it)
        if (!recorded.contains(it.key())) mismatched.push_back(it.key());
    return mismatched;
}

}  // namespace safewcet
