#pragma once

#include <string>
#include <vector>

namespace skylens {

// Minimal CSV table: header row plus string cells. Fields in this project
// never contain commas or quotes, so no quoting is implemented.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);
void write_csv(const CsvTable& table, const std::string& path);

std::string format_double(double v, int significant_digits);

}  // namespace skylens
