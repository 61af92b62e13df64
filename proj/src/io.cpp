#include "barriernet/io.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace barriernet::io {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  for (size_t i = 0; i < header.size(); ++i) {
    if (i) out << ',';
    out << header[i];
  }
  out << '\n';
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << format_double(row[i]);
    }
    out << '\n';
  }
  if (!out) throw ConfigError("write failed: " + path.string());
}

Csv read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open: " + path.string());
  Csv csv;
  std::string line;
  if (!std::getline(in, line)) return csv;
  std::stringstream hs(line);
  std::string field;
  while (std::getline(hs, field, ',')) csv.header.push_back(field);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    while (std::getline(ls, field, ',')) row.push_back(std::strtod(field.c_str(), nullptr));
    csv.rows.push_back(std::move(row));
  }
  return csv;
}

void log_kv(const std::string& event,
            const std::vector<std::pair<std::string, std::string>>& fields) {
  std::ostringstream os;
  os << "event=" << event;
  for (const auto& [k, v] : fields) os << ' ' << k << '=' << v;
  os << '\n';
  std::cerr << os.str();
}

std::vector<std::string> trajectory_csv_header(const Trajectory& traj) {
  std::vector<std::string> header{"t"};
  const Eigen::Index n = traj.states.empty() ? 0 : traj.states.front().size();
  const Eigen::Index d = traj.observations.empty() ? 0 : traj.observations.front().size();
  const Eigen::Index q = traj.controls.empty() ? 0 : traj.controls.front().size();
  const Eigen::Index nb = traj.b_values.empty() ? 0 : traj.b_values.front().size();
  for (Eigen::Index i = 0; i < n; ++i) header.push_back("x" + std::to_string(i));
  for (Eigen::Index i = 0; i < d; ++i) header.push_back("z" + std::to_string(i));
  for (Eigen::Index i = 0; i < q; ++i) header.push_back("u" + std::to_string(i));
  for (Eigen::Index i = 0; i < nb; ++i) header.push_back("b" + std::to_string(i));
  header.push_back("relaxed");
  header.push_back("infeasible");
  return header;
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj) {
  std::vector<std::vector<double>> rows;
  const size_t steps = traj.controls.size();
  const Eigen::Index q =
      traj.controls.empty() ? 0 : traj.controls.front().size();
  for (size_t i = 0; i < traj.states.size(); ++i) {
    std::vector<double> row;
    row.push_back(traj.times[i]);
    for (Eigen::Index j = 0; j < traj.states[i].size(); ++j) row.push_back(traj.states[i](j));
    for (Eigen::Index j = 0; j < traj.observations[i].size(); ++j)
      row.push_back(traj.observations[i](j));
    if (i < steps) {
      for (Eigen::Index j = 0; j < q; ++j) row.push_back(traj.controls[i](j));
    } else {
      // terminal row: no control was applied
      for (Eigen::Index j = 0; j < q; ++j) row.push_back(0.0);
    }
    for (Eigen::Index j = 0; j < traj.b_values[i].size(); ++j) row.push_back(traj.b_values[i](j));
    row.push_back(i < steps ? static_cast<double>(traj.relaxed[i]) : 0.0);
    row.push_back(i < steps ? static_cast<double>(traj.infeasible[i]) : 0.0);
    rows.push_back(std::move(row));
  }
  write_csv(path, trajectory_csv_header(traj), rows);
}

namespace {

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
  return j;
}

Eigen::VectorXd to_vector(const json& j) {
  Eigen::VectorXd v(j.size());
  Eigen::Index i = 0;
  for (const auto& e : j) v(i++) = e.get<double>();
  return v;
}

std::array<double, 2> to_range(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

LeadProfile parse_lead(const json& j) {
  LeadProfile p;
  p.brake_decel = j.value("brake_decel", 0.0);
  p.brake_at = j.value("brake_at", 0.0);
  p.brake_until_speed = j.value("brake_until_speed", 0.0);
  return p;
}

}  // namespace

ScenarioConfig load_scenario_config(const std::filesystem::path& path) {
  const json j = load_json_file(path);
  ScenarioConfig cfg;
  try {
    cfg.kind = scenario_kind_from_string(j.at("scenario").get<std::string>());
    cfg.dt = j.at("dt").get<double>();
    cfg.horizon = j.at("horizon").get<int>();
    cfg.u_min = to_vector(j.at("u_min"));
    cfg.u_max = to_vector(j.at("u_max"));
    if (cfg.dt <= 0.0) throw ConfigError("dt must be positive");

    if (j.contains("obstacle")) {
      cfg.obstacle_center = to_vector(j["obstacle"].at("center"));
      cfg.obstacle_radius = j["obstacle"].at("radius").get<double>();
      if (cfg.obstacle_radius <= 0.0) throw ConfigError("obstacle radius must be positive");
    }
    if (j.contains("destination")) cfg.destination = to_vector(j["destination"]);
    cfg.destination_tolerance = j.value("destination_tolerance", 0.5);
    cfg.safe_start_margin = j.value("safe_start_margin", 1.0);

    if (j.contains("start")) {
      const json& s = j["start"];
      if (s.contains("low")) cfg.start_low = to_vector(s["low"]);
      if (s.contains("high")) cfg.start_high = to_vector(s["high"]);
      if (s.contains("ego_speed")) cfg.ego_speed_range = to_range(s["ego_speed"]);
      if (s.contains("lead_speed")) cfg.lead_speed_range = to_range(s["lead_speed"]);
      if (s.contains("gap")) cfg.gap_range = to_range(s["gap"]);
    }
    if (j.contains("goals")) {
      cfg.goal_radius_range = to_range(j["goals"].at("radius"));
      cfg.goal_angle_deg = j["goals"].value("angle_deg", 12.0);
    }

    cfg.phi = j.value("phi", 1.8);
    cfg.delta = j.value("delta", 0.0);
    cfg.zone_length = j.value("zone_length", 150.0);
    if (cfg.phi <= 0.0) throw ConfigError("phi must be positive");
    if (j.contains("lead_train")) cfg.lead_train = parse_lead(j["lead_train"]);
    if (j.contains("lead_eval")) cfg.lead_eval = parse_lead(j["lead_eval"]);

    if (j.contains("expert")) {
      const json& e = j["expert"];
      if (e.contains("penalties")) cfg.expert.penalties = to_vector(e["penalties"]);
      cfg.expert.heading_gain = e.value("heading_gain", cfg.expert.heading_gain);
      cfg.expert.speed_gain = e.value("speed_gain", cfg.expert.speed_gain);
      cfg.expert.cruise_speed = e.value("cruise_speed", cfg.expert.cruise_speed);
      cfg.expert.slow_radius = e.value("slow_radius", cfg.expert.slow_radius);
      cfg.expert.pos_gain = e.value("pos_gain", cfg.expert.pos_gain);
      cfg.expert.damp_gain = e.value("damp_gain", cfg.expert.damp_gain);
      cfg.expert.target_speed = e.value("target_speed", cfg.expert.target_speed);
      cfg.expert.accel_gain = e.value("accel_gain", cfg.expert.accel_gain);
      cfg.expert.sample_stride = e.value("sample_stride", 1);
      if (cfg.expert.penalties.minCoeff() <= 0.0)
        throw ConfigError("expert penalties must be positive");
    }
    if (j.contains("model")) {
      const json& m = j["model"];
      if (m.contains("hidden")) {
        cfg.hidden_widths.clear();
        for (const auto& w : m["hidden"]) cfg.hidden_widths.push_back(w.get<int>());
      }
      cfg.penalty_cap = m.value("penalty_cap", 10.0);
    }
  } catch (const json::exception& e) {
    throw ConfigError("bad scenario config " + path.string() + ": " + e.what());
  }
  return cfg;
}

}  // namespace barriernet::io
