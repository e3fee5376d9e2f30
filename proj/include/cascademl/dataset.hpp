#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cascademl/errors.hpp"
#include "cascademl/format.hpp"
#include "cascademl/matrix.hpp"
#include "cascademl/rng.hpp"

namespace cml {

/// Numeric feature table with integer labels. Labels are dense in
/// [0, n_classes); class_names maps a label back to its original text.
struct TabularDataset {
    Matrix x;
    std::vector<int> y;
    std::vector<std::string> feature_names;
    std::vector<std::string> class_names;
    std::string label_name;

    std::size_t n_classes() const { return class_names.size(); }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) {
        // trim surrounding blanks and a stray carriage return
        std::size_t b = cell.find_first_not_of(" \t\r");
        std::size_t e = cell.find_last_not_of(" \t\r");
        cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

} // namespace detail

/// Read a headered CSV; every column except `label_column` must be numeric.
/// Labels become dense integers in first-appearance order.
inline TabularDataset load_csv(const std::string& path, const std::string& label_column) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot read csv file: " + path);

    std::string line;
    if (!std::getline(in, line)) throw io_error(path + ": empty file");
    const std::vector<std::string> header = detail::split_csv_line(line);
    std::size_t label_idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == label_column) { label_idx = i; break; }
    if (label_idx == header.size())
        throw validation_error(path + ": label column not found: " + label_column);

    std::vector<std::string> feature_names;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (i != label_idx) feature_names.push_back(header[i]);
    if (feature_names.empty())
        throw validation_error(path + ": no feature columns");

    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    std::vector<std::string> class_names;
    std::map<std::string, int> class_ids;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const std::vector<std::string> cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw io_error(path + ": ragged row " + std::to_string(line_no) + " (" +
                           std::to_string(cells.size()) + " cells, expected " +
                           std::to_string(header.size()) + ")");
        std::vector<double> row;
        row.reserve(feature_names.size());
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i == label_idx) continue;
            double value = 0.0;
            bool ok = true;
            try {
                value = parse_double(cells[i]);
            } catch (const io_error&) {
                ok = false;
            }
            if (!ok || !std::isfinite(value))
                throw io_error(path + ": row " + std::to_string(line_no) + ", column '" +
                               header[i] + "': not a number: '" + cells[i] + "'");
            row.push_back(value);
        }
        const std::string& label = cells[label_idx];
        auto [it, inserted] = class_ids.emplace(label, int(class_names.size()));
        if (inserted) class_names.push_back(label);
        labels.push_back(it->second);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw io_error(path + ": no data rows");

    TabularDataset ds{Matrix::from_rows(rows), std::move(labels), std::move(feature_names),
                      std::move(class_names), label_column};
    return ds;
}

/// Write the dataset back to CSV; the label column goes last. Numbers use
/// the shortest round-trip decimal form.
inline void save_csv(const TabularDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write csv file: " + path);
    for (const std::string& name : ds.feature_names) out << name << ",";
    out << ds.label_name << "\n";
    for (std::size_t r = 0; r < ds.x.rows(); ++r) {
        for (std::size_t c = 0; c < ds.x.cols(); ++c)
            out << format_double(ds.x(r, c)) << ",";
        out << ds.class_names[std::size_t(ds.y[r])] << "\n";
    }
    if (!out) throw io_error("failed writing csv file: " + path);
}

/// Per-class split: floor(test_fraction * n_c) samples of every class go to
/// test after a seeded shuffle; row order follows the shuffle.
inline std::pair<TabularDataset, TabularDataset> stratified_split(const TabularDataset& ds,
                                                                  double test_fraction,
                                                                  std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw validation_error("test_fraction must be in (0,1)");

    std::vector<std::vector<std::size_t>> per_class(ds.n_classes());
    for (std::size_t i = 0; i < ds.y.size(); ++i)
        per_class[std::size_t(ds.y[i])].push_back(i);

    Rng rng(seed);
    std::vector<std::size_t> train_rows, test_rows;
    for (auto& members : per_class) {
        if (members.empty()) continue;
        rng.shuffle(members);
        const std::size_t n_test =
            static_cast<std::size_t>(std::floor(test_fraction * double(members.size())));
        for (std::size_t i = 0; i < members.size(); ++i)
            (i < n_test ? test_rows : train_rows).push_back(members[i]);
    }
    if (train_rows.empty() || test_rows.empty())
        throw validation_error("degenerate split: a part would be empty");

    auto take = [&ds](const std::vector<std::size_t>& idx) {
        Matrix x(idx.size(), ds.x.cols());
        std::vector<int> y(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            for (std::size_t c = 0; c < ds.x.cols(); ++c) x(i, c) = ds.x(idx[i], c);
            y[i] = ds.y[idx[i]];
        }
        return TabularDataset{std::move(x), std::move(y), ds.feature_names, ds.class_names,
                              ds.label_name};
    };
    return {take(train_rows), take(test_rows)};
}

/// One-hot targets (n x n_classes).
inline Matrix one_hot(const std::vector<int>& y, std::size_t n_classes) {
    Matrix out(y.size(), n_classes);
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < 0 || std::size_t(y[i]) >= n_classes)
            throw validation_error("label out of range");
        out(i, std::size_t(y[i])) = 1.0;
    }
    return out;
}

/// Single-column {0,1} targets for binary tasks.
inline Matrix binary_targets(const std::vector<int>& y) {
    Matrix out(y.size(), 1);
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] != 0 && y[i] != 1)
            throw validation_error("binary targets need labels in {0,1}");
        out(i, 0) = double(y[i]);
    }
    return out;
}

} // namespace cml
