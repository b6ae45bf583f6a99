#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace omt {

// Numeric CSV with a single header row. Values are written with enough
// digits to round-trip doubles exactly.

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) f << ',';
        f << header[i];
    }
    f << '\n';
    char buf[40];
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw std::invalid_argument("csv row width does not match header");
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) f << ',';
            std::snprintf(buf, sizeof buf, "%.17g", row[i]);
            f << buf;
        }
        f << '\n';
    }
    if (!f) throw std::runtime_error("short write: " + path);
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    CsvTable t;
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("empty csv: " + path);
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) t.header.push_back(cell);
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() != t.header.size())
            throw std::runtime_error("ragged csv row in " + path);
        t.rows.push_back(std::move(row));
    }
    return t;
}

} // namespace omt
