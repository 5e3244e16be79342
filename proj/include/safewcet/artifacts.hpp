#pragma once

#include <filesystem>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "safewcet/evaluation.hpp"
#include "safewcet/safe_border.hpp"
#include "safewcet/search.hpp"

namespace safewcet {

inline std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
    return os.str();
}

/// Writes output files under one root and remembers each file's hash.
class ArtifactWriter {
public:
    explicit ArtifactWriter(std::filesystem::path root) : root_(std::move(root)) {}

    void write(const std::string& rel, const std::string& text) {
        const auto path = root_ / rel;
        if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
        write_text_file(path, text);
        hashes_[rel] = sha256_hex(text);
    }
    void write_json(const std::string& rel, const ojson& j) { write(rel, j.dump(2) + "\n"); }

    const std::filesystem::path& root() const { return root_; }
    const std::map<std::string, std::string>& hashes() const { return hashes_; }

private:
    std::filesystem::path root_;
    std::map<std::string, std::string> hashes_;
};

inline std::string dataset_csv(const SystemSpec& spec, const LabeledDataset& d) {
    std::ostringstream os;
    write_dataset_csv(os, spec, d);
    return os.str();
}

/// JSON for a safe box: upper bound of every range task plus its volume.
inline ojson box_json(const SystemSpec& spec, const std::vector<std::size_t>& tasks, const std::vector<Time>& upper) {
    ojson u = ojson::object();
    for (std::size_t k = 0; k < tasks.size(); ++k) u[spec.tasks[tasks[k]].id] = upper[k].str();
    ojson j;
    j["upper"] = std::move(u);
    j["volume"] = hyperbox_volume(spec, tasks, upper);
    return j;
}

/// Reads the "upper" map of a border or bestbox file, in range-task order.
/// Range tasks missing from the map keep C^max.
inline std::vector<Time> box_from_json(const SystemSpec& spec, const nlohmann::json& j) {
    std::vector<Time> upper;
    try {
        const auto& u = j.at("upper");
        for (std::size_t t : spec.range_task_indices()) {
            const auto& task = spec.tasks[t];
            upper.push_back(u.contains(task.id) ? Time::parse(u.at(task.id).get<std::string>()) : task.wcet.hi);
            if (!task.wcet.contains(upper.back()))
                throw ValidationError("box bound for task '" + task.id + "' lies outside its WCET range");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("box file: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ParseError(std::string("box file: ") + e.what());
    }
    return upper;
}

inline ojson border_to_json(const SystemSpec& spec, const LabeledDataset& data, const SafeBorderModel& b) {
    ojson j;
    j["features"] = b.feature_ids;
    ojson imp = ojson::object();
    for (std::size_t c = 0; c < data.tasks.size(); ++c) imp[spec.tasks[data.tasks[c]].id] = b.importance[c];
    j["importance"] = std::move(imp);
    ojson terms = ojson::array(), coef = ojson::array(), active = ojson::array();
    for (std::size_t k = 0; k < b.model.terms.size(); ++k) {
        terms.push_back(term_name(b.model.terms[k], b.feature_ids));
        coef.push_back(b.model.coef[k]);
        active.push_back(b.model.active[k] != 0);
    }
    j["terms"] = std::move(terms);
    j["coefficients"] = std::move(coef);
    j["selected_terms"] = std::move(active);
    j["ridge_fallback"] = b.model.ridge;
    j["aic"] = b.model.aic;
    j["p_u"] = b.p_u;
    j["p_u_degenerate"] = b.p_u_degenerate;
    j["p_s"] = b.p_s;
    ojson ranges = ojson::object();
    for (std::size_t f = 0; f < b.features.size(); ++f) {
        ojson r;
        r["min"] = b.range.lo[f];
        r["max"] = b.range.hi[f];
        r["reduced_max"] = b.reduced[f];
        ranges[b.feature_ids[f]] = std::move(r);
    }
    j["ranges"] = std::move(ranges);
    ojson best = ojson::object();
    for (std::size_t f = 0; f < b.features.size(); ++f) best[b.feature_ids[f]] = b.best.point[f];
    j["best_size_point"] = std::move(best);
    j["unconstrained"] = b.best.unconstrained;
    j["infeasible"] = b.best.infeasible;
    const ojson box = box_json(spec, data.tasks, border_box(spec, data, b));
    j["upper"] = box["upper"];
    j["volume"] = box["volume"];
    j["precision"] = b.precision;
    j["updates"] = b.updates;
    j["rows"] = {{"initial", b.initial_rows}, {"pruned", b.pruned_rows}, {"final", b.final_rows}};
    return j;
}

/// Rebuilds the parts of a border needed for prediction and reporting.
inline SafeBorderModel border_from_json(const SystemSpec& spec, const nlohmann::json& j) {
    SafeBorderModel b;
    try {
        const auto range_tasks = spec.range_task_indices();
        for (const auto& id : j.at("features")) {
            const std::size_t t = spec.task_index(id.get<std::string>());
            const auto it = std::find(range_tasks.begin(), range_tasks.end(), t);
            if (it == range_tasks.end()) throw ValidationError("border feature '" + id.get<std::string>() + "' is not a range task");
            b.features.push_back(static_cast<std::size_t>(it - range_tasks.begin()));
            b.feature_ids.push_back(id.get<std::string>());
            b.range.lo.push_back(j.at("ranges").at(b.feature_ids.back()).at("min").get<double>());
            b.range.hi.push_back(j.at("ranges").at(b.feature_ids.back()).at("max").get<double>());
            b.reduced.push_back(j.at("ranges").at(b.feature_ids.back()).at("reduced_max").get<double>());
            b.best.point.push_back(j.at("best_size_point").at(b.feature_ids.back()).get<double>());
        }
        b.model.dims = static_cast<int>(b.features.size());
        b.model.terms = full_rsm_terms(b.model.dims);
        b.model.coef = j.at("coefficients").get<std::vector<double>>();
        for (bool a : j.at("selected_terms").get<std::vector<bool>>()) b.model.active.push_back(a);
        if (b.model.coef.size() != b.model.terms.size()) throw ValidationError("border coefficient count does not match its features");
        b.model.ridge = j.at("ridge_fallback").get<bool>();
        b.p_u = j.at("p_u").get<double>();
        b.p_s = j.at("p_s").get<double>();
        b.precision = j.at("precision").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("border file: ") + e.what());
    }
    return b;
}

/// Plot-ready grid of model probabilities over two features (others at
/// their minimum): header "a,b,p", steps x steps rows.
inline std::string contour_csv(const SafeBorderModel& b, std::size_t fa, std::size_t fb, std::size_t steps) {
    std::ostringstream os;
    os << b.feature_ids[fa] << ',' << b.feature_ids[fb] << ",p\n";
    os << std::setprecision(10);
    std::vector<double> x = b.range.lo;
    for (std::size_t i = 0; i < steps; ++i)
        for (std::size_t k = 0; k < steps; ++k) {
            const double den = static_cast<double>(std::max<std::size_t>(steps - 1, 1));
            x[fa] = b.range.lo[fa] + (b.range.hi[fa] - b.range.lo[fa]) * static_cast<double>(i) / den;
            x[fb] = b.range.lo[fb] + (b.range.hi[fb] - b.range.lo[fb]) * static_cast<double>(k) / den;
            os << x[fa] << ',' << x[fb] << ',' << b.model.predict(x) << '\n';
        }
    return os.str();
}

inline ojson empirical_json(const EmpiricalResult& r) {
    ojson j;
    j["runs"] = r.runs;
    j["violations"] = r.violations;
    j["probability"] = r.probability;
    return j;
}

inline std::string verdicts_csv(const EmpiricalResult& r) {
    std::ostringstream os;
    os << "run,unsafe\n";
    for (std::size_t k = 0; k < r.unsafe.size(); ++k) os << k << ',' << int(r.unsafe[k]) << '\n';
    return os.str();
}

}  // namespace safewcet
