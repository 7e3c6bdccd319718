#pragma once

#include <optional>
#include <string>

#include "koopctl/config.hpp"

namespace koopctl {

// Pipeline stages behind the CLI subcommands. Each stage reads its inputs
// from (and writes its artifacts to) the configured output directory; they
// throw ConfigError / NumericError / IoError, which the CLI maps to exit
// codes 1 / 2 / 3.

void cmd_generate(const ExperimentConfig& cfg);
void cmd_identify(const ExperimentConfig& cfg);
void cmd_synthesize(const ExperimentConfig& cfg);
void cmd_simulate(const ExperimentConfig& cfg);
void cmd_report(const ExperimentConfig& cfg);

// File naming shared by the stages (and by tests).
std::string data_path(const ExperimentConfig& cfg, double sigma);
std::string snapshots_csv_path(const ExperimentConfig& cfg, double sigma);
std::string model_path(const ExperimentConfig& cfg, double sigma);
std::string fit_report_path(const ExperimentConfig& cfg, double sigma);
std::string bounds_path(const ExperimentConfig& cfg, double sigma);
std::string gains_path(const ExperimentConfig& cfg, double sigma);
std::string controller_path(const ExperimentConfig& cfg, double sigma);
std::string synthesis_report_path(const ExperimentConfig& cfg, double sigma);
std::string run_csv_path(const ExperimentConfig& cfg, double sigma, std::uint64_t seed,
                         const std::string& controller);
std::string metrics_path(const ExperimentConfig& cfg);

json snapshot_to_json(const SnapshotData& data);
SnapshotData snapshot_from_json(const json& j);

// Overrides from the command line (--out, --seed).
ExperimentConfig apply_overrides(ExperimentConfig cfg, const std::optional<std::string>& out,
                                 const std::optional<std::uint64_t>& seed);

}  // namespace koopctl
