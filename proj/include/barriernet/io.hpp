#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "barriernet/systems.hpp"

namespace barriernet::io {

/// User or configuration fault; the CLI maps it to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// 17 significant digits: enough for an exact double round-trip.
std::string format_double(double v);

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

Csv read_csv(const std::filesystem::path& path);

/// Machine-parsable one-line event: "event=<name> k=v k=v" on stderr.
void log_kv(const std::string& event,
            const std::vector<std::pair<std::string, std::string>>& fields);

std::vector<std::string> trajectory_csv_header(const Trajectory& traj);
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj);

ScenarioConfig load_scenario_config(const std::filesystem::path& path);

}  // namespace barriernet::io
