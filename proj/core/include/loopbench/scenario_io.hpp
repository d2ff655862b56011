#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "loopbench/scene.hpp"

namespace loopbench {

inline constexpr int kScenarioSchemaVersion = 1;

struct LoadOptions {
  bool strict{true};  // unknown fields are errors; otherwise warnings
};

struct LoadReport {
  std::vector<std::string> warnings;
};

/// Parses a scenario document. Syntax errors carry line:column, structural
/// errors the JSON path of the offending field. Short agent logs are extended
/// by holding the last state and flagged.
Scenario parse_scenario(std::string_view text, const LoadOptions& options = {}, LoadReport* report = nullptr);
Scenario load_scenario(const std::filesystem::path& path, const LoadOptions& options = {},
                       LoadReport* report = nullptr);

/// Deterministic field order; doubles are written with round-trip precision.
std::string format_scenario(const Scenario& scenario);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

/// Reads a whole file; throws ParseError if it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);
/// Writes atomically enough for our purposes (truncate + write); throws on I/O failure.
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// Line and column (1-based) of a byte offset.
std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t offset);

}  // namespace loopbench
