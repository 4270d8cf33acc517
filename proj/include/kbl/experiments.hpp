// The three experiment studies wired end to end: generate synthetic data, fit
// the corresponding model across a regularization sweep, compare against the
// reference method, and emit a metrics report plus plot-ready artifacts.
#pragma once

#include <string>

#include "kbl/config.hpp"
#include "kbl/report.hpp"
#include "kbl/synthetic.hpp"

namespace kbl {

enum class OutputFormat { Csv, Json };

// When out_dir is non-empty the artifacts (matrix grids, sweep tables) and a
// report.json are written there; the returned report lists the paths.
ExperimentReport run_cartography(const CartographyConfig& config,
                                 const std::string& out_dir = "",
                                 OutputFormat format = OutputFormat::Csv);

ExperimentReport run_completion_experiment(const CompletionExperimentConfig& config,
                                           const std::string& out_dir = "",
                                           OutputFormat format = OutputFormat::Csv);

ExperimentReport run_traffic_experiment(const TrafficExperimentConfig& config,
                                        const std::string& out_dir = "",
                                        OutputFormat format = OutputFormat::Csv);

// Key = value config readers. Getters mark the keys they touch; callers
// should finish with cfg.reject_unknown().
CartographyConfig cartography_config_from(Config& cfg);
CompletionExperimentConfig completion_config_from(Config& cfg);
TrafficExperimentConfig traffic_config_from(Config& cfg);

}  // namespace kbl
