#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "sofof/geo.hpp"
#include "sofof/scenario.hpp"

/// YAML scenario files and CSV route files.
namespace sofof::config {

/// Invalid configuration. `key` is the dotted path of the offending entry,
/// `line` its 1-based line (0 when unknown).
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, int line, const std::string& what);

    const std::string& key() const noexcept { return key_; }
    int line() const noexcept { return line_; }

private:
    std::string key_;
    int line_;
};

/// Parses a scenario document. Every key is checked; unknown keys are errors.
scenario::ScenarioConfig parse_scenario(const std::string& text);
scenario::ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Reads `x,y` rows (an optional `x,y` header line is skipped).
geo::Route parse_route_csv(const std::string& text);
geo::Route load_route_csv(const std::filesystem::path& path);

}  // namespace sofof::config
