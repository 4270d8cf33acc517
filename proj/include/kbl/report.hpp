// Experiment result container and its JSON serialization. Field order is
// preserved so that serialize -> parse -> serialize is byte-identical.
#pragma once

#include <string>
#include <utility>
#include <vector>

namespace kbl {

struct ExperimentReport {
  std::string experiment;
  std::vector<std::pair<std::string, double>> metrics;
  std::vector<std::pair<std::string, bool>> flags;
  std::vector<std::string> artifacts;
  std::vector<std::pair<std::string, std::string>> config_echo;
  double timing_seconds = 0.0;

  void add_metric(const std::string& name, double value);
  void add_flag(const std::string& name, bool value);
  double metric(const std::string& name) const;  // throws if absent
  bool flag(const std::string& name) const;      // false if absent
};

// Pretty-printed JSON. Every metric must be finite.
std::string serialize_report(const ExperimentReport& report);

ExperimentReport parse_report(const std::string& json_text);

void write_report(const std::string& path, const ExperimentReport& report);
ExperimentReport read_report(const std::string& path);

}  // namespace kbl
