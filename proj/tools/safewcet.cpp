// Command-line front end: one subcommand per analysis step plus the full
// pipeline. Exit codes: 0 success, 2 invalid input, 3 stage failure.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "safewcet/pipeline.hpp"
#include "safewcet/safewcet.hpp"

using namespace safewcet;
namespace fs = std::filesystem;

namespace {

struct Globals {
    std::uint64_t seed = 0;
    int jobs = 0;
    std::string out;
};

nlohmann::json read_json(const fs::path& p) {
    try {
        return nlohmann::json::parse(read_text_file(p));
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(p.string() + ": " + e.what());
    }
}

std::string require_out(const Globals& g, const char* what) {
    if (g.out.empty()) throw ValidationError(std::string("--out is required (") + what + ")");
    return g.out;
}

std::vector<double> read_column(const fs::path& p) {
    std::istringstream is(read_text_file(p));
    std::vector<double> v;
    std::string line;
    while (std::getline(is, line)) {
        const auto cell = line.substr(0, line.find(','));
        if (cell.empty()) continue;
        try {
            std::size_t used = 0;
            const double x = std::stod(cell, &used);
            if (used == cell.size()) v.push_back(x);
        } catch (const std::invalid_argument&) {
            // header or label line
        }
    }
    if (v.empty()) throw ParseError(p.string() + ": no numeric values");
    return v;
}

WcetAssignment read_wcet(const SystemSpec& spec, const std::string& arg) {
    WcetAssignment w = max_wcet(spec);
    if (arg.empty() || arg == "max") return w;
    const auto j = read_json(arg);
    for (auto it = j.begin(); it != j.end(); ++it) w[spec.task_index(it.key())] = Time::parse(it.value().get<std::string>());
    validate_wcet(spec, w);
    return w;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stress-test search and safe WCET range inference for weakly hard multicore systems"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--seed", g.seed, "Global random seed");
    app.add_option("--jobs", g.jobs, "Worker threads (0: all cores)");
    app.add_option("--out", g.out, "Output directory or file");

    std::string system, dataset, archive, box, config, replay, testcase, wcet, sweep, features;
    std::size_t pop = 10, ns = 20, iters = 1000, updates = 100, samples = 100, kfold = 5, trees = 100, runs = 40000, replicates = 1,
                steps = 101, testcases = 10;
    double pc = 0.7, pm = 0.2, target_precision = 0.99;
    bool trace = false;
    std::vector<std::string> compare_files;

    auto* gen = app.add_subcommand("generate", "Generate synthetic systems")->fallthrough();
    gen->add_option("--config", config, "Generator config (JSON)")->required();
    gen->add_option("--replicates", replicates, "Systems per sweep value");
    gen->add_option("--sweep", sweep, "param=v1,v2,... or param=default");

    auto* search = app.add_subcommand("search", "Evolutionary stress test search")->fallthrough();
    search->add_option("--system", system)->required();
    search->add_option("--pop", pop);
    search->add_option("--ns", ns);
    search->add_option("--iters", iters);
    search->add_option("--pc", pc);
    search->add_option("--pm", pm);

    auto* base = app.add_subcommand("baseline", "Random search and largest safe hyperbox")->fallthrough();
    base->add_option("--system", system)->required();
    base->add_option("--pop", pop);
    base->add_option("--ns", ns);
    auto* base_iters = base->add_option("--iters", iters);

    auto* learn = app.add_subcommand("learn", "Learn the safe WCET border")->fallthrough();
    learn->add_option("--system", system)->required();
    learn->add_option("--dataset", dataset)->required();
    learn->add_option("--archive", archive)->required();
    learn->add_option("--updates", updates);
    learn->add_option("--samples", samples);
    learn->add_option("--kfold", kfold);
    learn->add_option("--trees", trees);
    learn->add_option("--testcases", testcases, "Archive test cases used to label refinement samples");
    learn->add_option("--target-precision", target_precision);

    auto* eval = app.add_subcommand("evaluate", "Empirical violation probability inside a box")->fallthrough();
    eval->add_option("--system", system)->required();
    eval->add_option("--box", box, "border.json or bestbox.json")->required();
    eval->add_option("--runs", runs);

    auto* cmp = app.add_subcommand("compare", "Mann-Whitney U and A12 over two value columns")->fallthrough();
    cmp->add_option("files", compare_files)->expected(2)->required();

    auto* pipe = app.add_subcommand("pipeline", "Run search, learning, baseline and evaluation from one config")->fallthrough();
    pipe->add_option("--config", config);
    pipe->add_option("--replay", replay, "Manifest to reproduce; fails unless every artifact hash matches");

    auto* report = app.add_subcommand("report", "Probability grid over two border features")->fallthrough();
    report->add_option("--system", system)->required();
    report->add_option("--border", box)->required();
    report->add_option("--features", features, "a,b (default: first two features)");
    report->add_option("--steps", steps);

    auto* sim = app.add_subcommand("simulate", "Simulate one test case")->fallthrough();
    sim->add_option("--system", system)->required();
    sim->add_option("--testcase", testcase, "Test case JSON (default: random from --seed)");
    sim->add_option("--wcet", wcet, "JSON map task -> WCET, or 'max'");
    sim->add_flag("--trace", trace, "Print task,arrival,end,missed lines");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*gen) {
            const fs::path out = require_out(g, "directory");
            GenConfig base_cfg = gen_config_from_json(read_json(config));
            if (app.get_subcommand("generate")->count("--seed") || app.count("--seed")) base_cfg.seed = g.seed;
            std::string param;
            std::vector<double> values;
            if (!sweep.empty()) {
                const auto eq = sweep.find('=');
                param = sweep.substr(0, eq);
                const std::string list = eq == std::string::npos ? "default" : sweep.substr(eq + 1);
                if (list == "default") values = default_sweep_values(param);
                else {
                    std::istringstream is(list);
                    for (std::string v; std::getline(is, v, ',');) values.push_back(std::stod(v));
                }
            }
            ArtifactWriter w(out);
            ojson entries = ojson::array();
            for (const auto& e : generate_experiment_suite(base_cfg, param, values, replicates)) {
                std::string name = "system";
                if (!e.param.empty()) {
                    std::ostringstream os;
                    os << "system_" << e.param << '_' << e.value << "_r" << e.replicate;
                    name = os.str();
                }
                w.write(name + ".json", serialize_system(e.spec));
                entries.push_back({{"file", name + ".json"}, {"param", e.param}, {"value", e.value}, {"replicate", e.replicate},
                                   {"config", gen_config_to_json(e.config)}});
            }
            ojson m;
            m["systems"] = std::move(entries);
            ojson hashes = ojson::object();
            for (const auto& [p, h] : w.hashes()) hashes[p] = h;
            m["artifacts"] = std::move(hashes);
            write_text_file(out / "manifest.json", m.dump(2) + "\n");
            std::cout << "generated " << m["systems"].size() << " system(s) in " << out.string() << "\n";
        } else if (*search || *base) {
            const fs::path out = require_out(g, "directory");
            const SystemSpec spec = load_system(system);
            SearchParams p{pop, ns, iters, pc, pm, g.jobs, false};
            ArtifactWriter w(out);
            if (*search) {
                const auto r = run_stage("search", std::cerr, [&] { return nsga2_search(spec, p, g.seed); });
                w.write_json("archive.json", archive_to_json(spec, r.archive));
                w.write("dataset.csv", dataset_csv(spec, r.dataset));
                std::cout << "archive " << r.archive.size() << ", dataset " << r.dataset.rows.size() << " rows ("
                          << r.dataset.count(Label::unsafe) << " unsafe)\n";
            } else {
                if (!base_iters->count()) p.iterations = 1500;
                const auto r = run_stage("baseline", std::cerr, [&] { return random_search(spec, p, g.seed); });
                w.write("dataset.csv", dataset_csv(spec, r.dataset));
                const auto hb = run_stage("hyperbox", std::cerr, [&] { return max_safe_hyperbox(spec, r.dataset); });
                w.write_json("bestbox.json", box_json(spec, r.dataset.tasks, hb.upper));
                std::cout << "dataset " << r.dataset.rows.size() << " rows, best box volume " << hb.volume << "\n";
            }
        } else if (*learn) {
            const fs::path out = require_out(g, "border file");
            const SystemSpec spec = load_system(system);
            LabeledDataset data = load_dataset(dataset, spec);
            const auto arch = archive_from_json(spec, read_json(archive));
            LearnConfig lc;
            lc.max_updates = updates;
            lc.samples = samples;
            lc.kfold = kfold;
            lc.forest.trees = trees;
            lc.refine_testcases = testcases;
            lc.target_precision = target_precision;
            lc.jobs = g.jobs;
            const auto b = run_stage("learn", std::cerr, [&] { return learn_safe_border(spec, data, arch, lc, g.seed); });
            write_text_file(out, border_to_json(spec, data, b).dump(2) + "\n");
            std::cout << "features " << b.feature_ids.size() << ", p_s " << b.p_s << ", precision " << b.precision << ", updates "
                      << b.updates << "\n";
        } else if (*eval) {
            const fs::path out = require_out(g, "directory");
            const SystemSpec spec = load_system(system);
            const auto upper = box_from_json(spec, read_json(box));
            const auto r = run_stage("evaluate", std::cerr, [&] {
                return empirical_probability(spec, spec.range_task_indices(), upper, runs, g.seed, g.jobs);
            });
            ArtifactWriter w(out);
            ojson j = empirical_json(r);
            j["volume"] = hyperbox_volume(spec, spec.range_task_indices(), upper);
            w.write_json("summary.json", j);
            w.write("runs.csv", verdicts_csv(r));
            std::cout << r.violations << " / " << r.runs << " runs violated (" << r.probability << ")\n";
        } else if (*cmp) {
            const auto a = read_column(compare_files[0]), b = read_column(compare_files[1]);
            const auto c = compare_samples(a, b);
            ojson j;
            j["n_a"] = a.size();
            j["n_b"] = b.size();
            j["u"] = c.u;
            j["p_value"] = c.p_value;
            j["a12"] = c.a12;
            j["exact"] = c.exact;
            for (const auto& [key, v] : {std::pair{"a", &a}, std::pair{"b", &b}}) {
                const auto s = summarize(*v);
                j[std::string("summary_") + key] = {{"max", s.max}, {"median", s.median}, {"min", s.min}, {"mean", s.mean}};
            }
            const std::string text = j.dump(2) + "\n";
            if (!g.out.empty()) write_text_file(g.out, text);
            std::cout << text;
        } else if (*pipe) {
            const fs::path out = require_out(g, "directory");
            if (!replay.empty()) {
                const auto bad = replay_manifest(read_json(replay), out, std::cerr, app.count("--jobs") ? g.jobs : -1);
                for (const auto& f : bad) std::cerr << "mismatch: " << f << "\n";
                if (!bad.empty()) return 3;
                std::cout << "replay identical\n";
            } else {
                if (config.empty()) throw ValidationError("pipeline needs --config or --replay");
                if (!fs::exists(config)) throw ParseError("stage 'config': cannot open '" + config + "'");
                PipelineConfig c = [&] {
                    try {
                        return pipeline_config_from_json(read_json(config), fs::path(config).parent_path());
                    } catch (const ParseError& e) {
                        throw ParseError(std::string("stage 'system': ") + e.what());
                    }
                }();
                if (app.count("--seed")) c.seed = g.seed;
                if (app.count("--jobs")) c.jobs = g.jobs;
                const auto m = run_pipeline(c, out, std::cerr);
                std::cout << "wrote " << m["artifacts"].size() << " artifacts and manifest.json to " << out.string() << "\n";
            }
        } else if (*report) {
            const fs::path out = require_out(g, "csv file");
            const SystemSpec spec = load_system(system);
            const auto b = border_from_json(spec, read_json(box));
            std::size_t fa = 0, fb = b.features.size() > 1 ? 1 : 0;
            if (!features.empty()) {
                const auto comma = features.find(',');
                auto find = [&](const std::string& id) {
                    const auto it = std::find(b.feature_ids.begin(), b.feature_ids.end(), id);
                    if (it == b.feature_ids.end()) throw ValidationError("'" + id + "' is not a border feature");
                    return static_cast<std::size_t>(it - b.feature_ids.begin());
                };
                fa = find(features.substr(0, comma));
                fb = find(comma == std::string::npos ? features : features.substr(comma + 1));
            }
            write_text_file(out, contour_csv(b, fa, fb, steps));
        } else if (*sim) {
            const SystemSpec spec = load_system(system);
            TestCase tc;
            if (testcase.empty()) {
                Rng rng(g.seed);
                tc = random_test_case(spec, rng);
            } else {
                tc = test_case_from_json(spec, read_json(testcase));
            }
            validate_test_case(spec, tc);
            const auto w = read_wcet(spec, wcet);
            const auto s = simulate(spec, tc, w);
            if (trace) write_trace(std::cout, spec, s);
            const auto v = check_schedulability(spec, s, spec.target_indices());
            if (v) std::cout << "unsafe: task " << spec.tasks[v->task].id << " violates its constraint in window " << v->window_start << "\n";
            else std::cout << "safe\n";
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
