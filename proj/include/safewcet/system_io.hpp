#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "safewcet/task_model.hpp"

namespace safewcet {

using ojson = nlohmann::ordered_json;

namespace io {

inline Time time_field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw ParseError(std::string("missing key '") + key + "'");
    const auto& v = j.at(key);
    if (!v.is_string()) throw ParseError(std::string("key '") + key + "' must be a decimal string");
    try {
        return Time::parse(v.get<std::string>());
    } catch (const std::invalid_argument& e) {
        throw ParseError(std::string(key) + ": " + e.what());
    }
}

inline TimeRange range_field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw ParseError(std::string("missing key '") + key + "'");
    const auto& v = j.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_string() || !v[1].is_string())
        throw ParseError(std::string("key '") + key + "' must be a [min, max] pair of decimal strings");
    try {
        return {Time::parse(v[0].get<std::string>()), Time::parse(v[1].get<std::string>())};
    } catch (const std::invalid_argument& e) {
        throw ParseError(std::string(key) + ": " + e.what());
    }
}

inline ojson range_json(const TimeRange& r) { return ojson::array({r.lo.str(), r.hi.str()}); }

inline Policy parse_policy(const std::string& s) {
    if (s == "preemptive") return Policy::preemptive;
    if (s == "fifo") return Policy::fifo;
    if (s == "round_robin") return Policy::round_robin;
    throw ParseError("unknown policy '" + s + "'");
}

inline const char* policy_name(Policy p) {
    switch (p) {
        case Policy::preemptive: return "preemptive";
        case Policy::fifo: return "fifo";
        case Policy::round_robin: return "round_robin";
    }
    return "preemptive";
}

}  // namespace io

/// Builds a SystemSpec from a parsed JSON document. Does not validate.
inline SystemSpec system_from_json(const nlohmann::json& doc) {
    using namespace io;
    SystemSpec spec;
    try {
        for (const char* key : {"tasks", "partitions", "cores", "context_switch", "scheduler", "target_tasks"})
            if (!doc.contains(key)) throw ParseError(std::string("missing top-level key '") + key + "'");

        for (const auto& jt : doc.at("tasks")) {
            Task t;
            t.id = jt.at("id").get<std::string>();
            const auto kind = jt.at("kind").get<std::string>();
            if (kind == "periodic") {
                t.kind = TaskKind::periodic;
                t.period = time_field(jt, "period");
                t.offset = jt.contains("offset") ? time_field(jt, "offset") : Time{};
                t.deadline = jt.contains("deadline") ? time_field(jt, "deadline") : t.period;
            } else if (kind == "aperiodic") {
                t.kind = TaskKind::aperiodic;
                t.inter_arrival = range_field(jt, "inter_arrival");
                t.offset = jt.contains("offset") ? time_field(jt, "offset") : Time{};
                t.deadline = jt.contains("deadline") ? time_field(jt, "deadline") : t.inter_arrival.lo;
            } else {
                throw ParseError("task '" + t.id + "': unknown kind '" + kind + "'");
            }
            t.wcet = range_field(jt, "wcet");
            t.priority = jt.at("priority").get<int>();
            t.policy = jt.contains("policy") ? parse_policy(jt.at("policy").get<std::string>()) : Policy::preemptive;
            if (jt.contains("mk")) {
                const auto& mk = jt.at("mk");
                if (!mk.is_array() || mk.size() != 2) throw ParseError("task '" + t.id + "': mk must be [m, K]");
                t.constraint = {mk[0].get<int>(), mk[1].get<int>()};
            }
            t.partition = jt.at("partition").get<std::string>();
            if (jt.contains("core_affinity") && !jt.at("core_affinity").is_null())
                t.core_affinity = jt.at("core_affinity").get<int>();
            spec.tasks.push_back(std::move(t));
        }
        for (const auto& jp : doc.at("partitions"))
            spec.partitions.push_back({jp.at("id").get<std::string>(), jp.at("budget_percent").get<double>()});
        spec.cores = doc.at("cores").get<int>();
        const auto& cs = doc.at("context_switch");
        spec.context_switch = {range_field(cs, "startup"), range_field(cs, "exit"), range_field(cs, "ipi")};
        const auto& sc = doc.at("scheduler");
        if (sc.contains("partition_window")) spec.scheduler.partition_window = time_field(sc, "partition_window");
        if (sc.contains("rr_timeslice")) spec.scheduler.rr_timeslice = time_field(sc, "rr_timeslice");
        if (sc.contains("tick")) spec.scheduler.tick = time_field(sc, "tick");
        if (sc.contains("resolution")) spec.scheduler.resolution = time_field(sc, "resolution");
        spec.target_tasks = doc.at("target_tasks").get<std::vector<std::string>>();
        if (doc.contains("sim_horizon") && !doc.at("sim_horizon").is_null())
            spec.sim_horizon = time_field(doc, "sim_horizon");
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("system document: ") + e.what());
    }
    return spec;
}

/// Canonical JSON form; key order and formatting are fixed.
inline ojson system_to_json(const SystemSpec& spec) {
    using namespace io;
    ojson doc;
    ojson tasks = ojson::array();
    for (const auto& t : spec.tasks) {
        ojson jt;
        jt["id"] = t.id;
        jt["kind"] = t.periodic() ? "periodic" : "aperiodic";
        if (t.periodic()) {
            jt["offset"] = t.offset.str();
            jt["period"] = t.period.str();
        } else {
            jt["inter_arrival"] = range_json(t.inter_arrival);
        }
        jt["wcet"] = range_json(t.wcet);
        jt["deadline"] = t.deadline.str();
        jt["priority"] = t.priority;
        jt["policy"] = policy_name(t.policy);
        jt["mk"] = ojson::array({t.constraint.m, t.constraint.K});
        jt["partition"] = t.partition;
        if (t.core_affinity) jt["core_affinity"] = *t.core_affinity;
        tasks.push_back(std::move(jt));
    }
    doc["tasks"] = std::move(tasks);
    ojson parts = ojson::array();
    for (const auto& p : spec.partitions) parts.push_back({{"id", p.id}, {"budget_percent", p.budget_percent}});
    doc["partitions"] = std::move(parts);
    doc["cores"] = spec.cores;
    doc["context_switch"] = {{"startup", range_json(spec.context_switch.startup)},
                             {"exit", range_json(spec.context_switch.exit)},
                             {"ipi", range_json(spec.context_switch.ipi)}};
    doc["scheduler"] = {{"partition_window", spec.scheduler.partition_window.str()},
                        {"rr_timeslice", spec.scheduler.rr_timeslice.str()},
                        {"tick", spec.scheduler.tick.str()},
                        {"resolution", spec.scheduler.resolution.str()}};
    doc["target_tasks"] = spec.target_tasks;
    if (spec.sim_horizon) doc["sim_horizon"] = spec.sim_horizon->str();
    return doc;
}

inline std::string serialize_system(const SystemSpec& spec) { return system_to_json(spec).dump(2) + "\n"; }

inline SystemSpec parse_system(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed system file: ") + e.what());
    }
    SystemSpec spec = system_from_json(doc);
    validate(spec);
    return spec;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
}

/// Loads and validates a system description file.
inline SystemSpec load_system(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ParseError("system file '" + path.string() + "' does not exist");
    return parse_system(read_text_file(path));
}

inline void save_system(const SystemSpec& spec, const std::filesystem::path& path) {
    write_text_file(path, serialize_system(spec));
}

}  // namespace safewcet
