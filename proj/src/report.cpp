#include "kbl/report.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace kbl {

void ExperimentReport::add_metric(const std::string& name, double value) {
  metrics.emplace_back(name, value);
}

void ExperimentReport::add_flag(const std::string& name, bool value) {
  flags.emplace_back(name, value);
}

double ExperimentReport::metric(const std::string& name) const {
  for (const auto& [k, v] : metrics)
    if (k == name) return v;
  throw std::out_of_range("report has no metric '" + name + "'");
}

bool ExperimentReport::flag(const std::string& name) const {
  for (const auto& [k, v] : flags)
    if (k == name) return v;
  return false;
}

std::string serialize_report(const ExperimentReport& report) {
  nlohmann::ordered_json j;
  j["experiment"] = report.experiment;
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.metrics) {
    if (!std::isfinite(v))
      throw std::invalid_argument("report metric '" + k + "' is not finite");
    metrics[k] = v;
  }
  j["metrics"] = std::move(metrics);
  nlohmann::ordered_json flags = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.flags) flags[k] = v;
  j["flags"] = std::move(flags);
  j["artifacts"] = report.artifacts;
  nlohmann::ordered_json echo = nlohmann::ordered_json::object();
  for (const auto& [k, v] : report.config_echo) echo[k] = v;
  j["config"] = std::move(echo);
  j["timing_seconds"] = report.timing_seconds;
  return j.dump(2) + "\n";
}

ExperimentReport parse_report(const std::string& json_text) {
  const nlohmann::ordered_json j = nlohmann::ordered_json::parse(json_text);
  ExperimentReport report;
  report.experiment = j.at("experiment").get<std::string>();
  for (const auto& [k, v] : j.at("metrics").items())
    report.metrics.emplace_back(k, v.get<double>());
  for (const auto& [k, v] : j.at("flags").items())
    report.flags.emplace_back(k, v.get<bool>());
  for (const auto& v : j.at("artifacts"))
    report.artifacts.push_back(v.get<std::string>());
  for (const auto& [k, v] : j.at("config").items())
    report.config_echo.emplace_back(k, v.get<std::string>());
  report.timing_seconds = j.at("timing_seconds").get<double>();
  return report;
}

void write_report(const std::string& path, const ExperimentReport& report) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << serialize_report(report);
  if (!out) throw std::runtime_error("write failed for " + path);
}

ExperimentReport read_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_report(text.str());
}

}  // namespace kbl
