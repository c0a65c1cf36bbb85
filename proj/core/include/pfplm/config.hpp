#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "pfplm/bench.hpp"
#include "pfplm/dataplane.hpp"
#include "pfplm/endpoint.hpp"
#include "pfplm/simnet.hpp"

// JSON configuration files. Every document carries "schema_version": 1;
// times are milliseconds (fractions allowed); SID lists are comma-separated
// IPv6 addresses in path order. Unknown keys are rejected. See docs/config.md.
namespace pfplm::config {

inline constexpr int kSchemaVersion = 1;

/// All parse_* functions throw ConfigError with a JSON-pointer-like location.
sim::Scenario parse_scenario(std::string_view json_text);
live::EndpointConfig parse_endpoint(std::string_view json_text);
bench::BenchConfig parse_bench(std::string_view json_text);
SrPolicyTable parse_policy_table(std::string_view json_text);

/// Reads a whole file. Throws IoError.
std::string read_file(const std::filesystem::path& path);

}  // namespace pfplm::config
