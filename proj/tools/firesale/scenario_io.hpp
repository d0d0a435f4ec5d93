#pragma once

#include "firesale/netmodel.hpp"

#include <string>

namespace firesale::cli {

// Parses the JSON scenario format; errors carry the JSON path or line/column.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);
std::string read_file(const std::string& path);

// FNV-1a over the raw file bytes, hex.
std::string digest(const std::string& text);

}  // namespace firesale::cli
