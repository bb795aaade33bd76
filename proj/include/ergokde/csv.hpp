#pragma once

// CSV with 17-significant-digit decimal floats: every written value reparses
// to the identical bit pattern, so reruns can be compared byte for byte.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ergokde/errors.hpp"

namespace ergokde {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline std::string to_csv_text(const CsvTable& table) {
    std::ostringstream os;
    for (std::size_t i = 0; i < table.header.size(); ++i)
        os << (i ? "," : "") << table.header[i];
    os << "\n";
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size())
            throw ValidationError("write_csv: row width does not match header");
        for (std::size_t i = 0; i < row.size(); ++i)
            os << (i ? "," : "") << format_double(row[i]);
        os << "\n";
    }
    return os.str();
}

inline void write_csv(const std::string& path, const CsvTable& table) {
    std::ofstream out(path, std::ios::binary);  // keep \n endings everywhere
    if (!out) throw NumericError("write_csv: cannot open " + path);
    out << to_csv_text(table);
    if (!out) throw NumericError("write_csv: write failed for " + path);
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("read_csv: cannot open " + path);
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("read_csv: missing header in " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) table.header.push_back(cell);
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) {
            std::size_t used = 0;
            row.push_back(std::stod(cell, &used));
            if (used != cell.size())
                throw ValidationError("read_csv: malformed number '" + cell + "' in " + path);
        }
        if (row.size() != table.header.size())
            throw ValidationError("read_csv: ragged row in " + path);
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace ergokde
