#pragma once

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace firesale::cli {

using Cell = std::variant<std::string, double, long long, bool>;

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

struct RunReport {
    std::string command;
    std::string digest;
    unsigned long long seed = 0;
    std::vector<std::pair<std::string, Cell>> meta;
    std::vector<Table> tables;
};

enum class Format { table, json, csv };

void emit(const RunReport& report, Format format, std::ostream& out);

// Full command line entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace firesale::cli
