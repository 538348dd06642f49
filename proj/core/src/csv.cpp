#include "skylens/csv.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "skylens/errors.hpp"

namespace skylens {

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("open for read: " + path);
    CsvTable t;
    std::string line;
    if (!std::getline(f, line)) throw IoError("empty csv: " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    t.header = split_line(line);
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        t.rows.push_back(split_line(line));
    }
    return t;
}

void write_csv(const CsvTable& table, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("open for write: " + path);
    auto emit_row = [&f](const std::vector<std::string>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) f << ',';
            f << row[i];
        }
        f << '\n';
    };
    emit_row(table.header);
    for (const auto& row : table.rows) emit_row(row);
    if (!f) throw IoError("write: " + path);
}

std::string format_double(double v, int significant_digits) {
    std::ostringstream ss;
    ss.precision(significant_digits);
    ss << v;
    return ss.str();
}

}  // namespace skylens
