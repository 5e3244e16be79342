#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "safewcet/schedulability.hpp"
#include "safewcet/system_io.hpp"
#include "safewcet/test_case.hpp"

namespace safewcet {

/// One (W, label) tuple. `wcet` holds only the range tasks' values, in the
/// dataset's feature order; provenance is the test case id and run seed.
struct DataRow {
    std::vector<Time> wcet;
    Label label = Label::safe;
    std::uint64_t testcase = 0;
    std::uint64_t seed = 0;
    friend bool operator==(const DataRow&, const DataRow&) = default;
};

struct LabeledDataset {
    std::vector<std::size_t> tasks;  // range-task indices into SystemSpec::tasks
    std::vector<DataRow> rows;

    static LabeledDataset for_spec(const SystemSpec& spec) { return {spec.range_task_indices(), {}}; }

    std::size_t count(Label l) const {
        std::size_t n = 0;
        for (const auto& r : rows) n += r.label == l;
        return n;
    }

    void append(const WcetAssignment& w, Label l, std::uint64_t testcase, std::uint64_t seed) {
        DataRow row{{}, l, testcase, seed};
        row.wcet.reserve(tasks.size());
        for (std::size_t t : tasks) row.wcet.push_back(w[t]);
        rows.push_back(std::move(row));
    }

    /// Row values of the given dataset columns, in milliseconds.
    std::vector<double> values(std::size_t row, const std::vector<std::size_t>& columns) const {
        std::vector<double> out;
        out.reserve(columns.size());
        for (std::size_t c : columns) out.push_back(rows[row].wcet[c].ms());
        return out;
    }

    /// Full WCET assignment of a row: range tasks from the row, fixed tasks at
    /// their point value.
    WcetAssignment assignment(const SystemSpec& spec, std::size_t row) const {
        WcetAssignment w = max_wcet(spec);
        for (std::size_t c = 0; c < tasks.size(); ++c) w[tasks[c]] = rows[row].wcet[c];
        return w;
    }
};

inline void write_dataset_csv(std::ostream& os, const SystemSpec& spec, const LabeledDataset& d) {
    for (std::size_t t : d.tasks) os << spec.tasks[t].id << ',';
    os << "label,testcase,seed\n";
    for (const auto& r : d.rows) {
        for (Time c : r.wcet) os << c.str() << ',';
        os << label_name(r.label) << ',' << r.testcase << ',' << r.seed << '\n';
    }
}

inline void save_dataset(const std::string& path, const SystemSpec& spec, const LabeledDataset& d) {
    std::ostringstream os;
    write_dataset_csv(os, spec, d);
    write_text_file(path, os.str());
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline LabeledDataset read_dataset_csv(std::istream& is, const SystemSpec& spec) {
    LabeledDataset d = LabeledDataset::for_spec(spec);
    std::string line;
    if (!std::getline(is, line)) throw ParseError("dataset: empty file");
    const auto header = split_csv_line(line);
    if (header.size() != d.tasks.size() + 3) throw ParseError("dataset: header does not match the system's range tasks");
    for (std::size_t c = 0; c < d.tasks.size(); ++c)
        if (header[c] != spec.tasks[d.tasks[c]].id) throw ParseError("dataset: unexpected column '" + header[c] + "'");
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) throw ParseError("dataset: wrong cell count on line " + std::to_string(lineno));
        DataRow r;
        try {
            for (std::size_t c = 0; c < d.tasks.size(); ++c) r.wcet.push_back(Time::parse(cells[c]));
            const std::string& l = cells[d.tasks.size()];
            if (l != "safe" && l != "unsafe") throw ParseError("bad label '" + l + "'");
            r.label = l == "safe" ? Label::safe : Label::unsafe;
            r.testcase = std::stoull(cells[d.tasks.size() + 1]);
            r.seed = std::stoull(cells[d.tasks.size() + 2]);
        } catch (const std::exception& e) {
            throw ParseError("dataset line " + std::to_string(lineno) + ": " + e.what());
        }
        d.rows.push_back(std::move(r));
    }
    return d;
}

inline LabeledDataset load_dataset(const std::string& path, const SystemSpec& spec) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open dataset '" + path + "'");
    return read_dataset_csv(in, spec);
}

}  // namespace safewcet
