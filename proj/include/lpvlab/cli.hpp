#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpvlab/analysis.hpp"
#include "lpvlab/lpvmodel.hpp"

// Config ingestion, experiment orchestration and report/CSV/SVG emission.
// Everything written to disk is bitwise reproducible for a given config;
// wall-clock time is printed to stdout only.

namespace lpvlab::cli {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AnalysisConfig {
  analysis::GridSpec xi_grid;
  lpvmodel::Box w_box;
  std::vector<int> w_points;  // S-hat / Xi-bar input grid points per axis
  std::vector<int> r_points;  // coarser input grid for the R protocol
  std::vector<double> alphas;
  double margin = 0.0;
};

struct SimConfig {
  double horizon = 100.0;
  double atol = 1e-9;
  double rtol = 1e-7;
  double dt_out = 0.01;
  double reference = 0.0;
  std::vector<double> disturbances;
};

struct FreqConfig {
  double omega_min = 1e-4;
  double omega_max = 1e3;
  int n_points = 400;
  std::vector<double> rho_values;
};

struct ExperimentConfig {
  lpvmodel::AffineLpvSS plant;
  lpvmodel::AffineLpvSS controller;
  lpvmodel::SchedulingMap scheduling;
  lpvmodel::Wiring wiring;
  lpvmodel::TransferFunction w_r, w_d, w_e;
  AnalysisConfig analysis;
  SimConfig sim;
  FreqConfig freq;
  std::string hash;  // FNV-1a of the raw config bytes

  lpvmodel::ClosedLoopLpv closed_loop() const;
  lpvmodel::ClosedLoopLpv weighted_closed_loop() const;
  lpvmodel::NlClosedLoop nonlinear() const;
};

// Parses and validates the JSON config; throws ConfigError with a message
// naming the offending field.
ExperimentConfig load_config(const std::string& path);

// 64-bit FNV-1a, lower-case hex.
std::string fnv1a_hex(const std::string& bytes);

struct CmdOptions {
  std::string out_dir = "out";
  bool weighted = false;
  std::string verify_x_path;                  // stability
  std::optional<double> margin;               // sets override
  std::optional<std::vector<double>> alphas;  // sets override
};

struct RunReport {
  std::string command;
  std::string config_hash;
  double wall_time_s = 0.0;  // not serialized
  std::string summary;
  std::vector<std::string> output_paths;
  int exit_code = 0;  // 0 ok, 1 usage/config, 2 negative result, 3 numerical
};

RunReport cmd_stability(const ExperimentConfig& cfg, const CmdOptions& opts);
RunReport cmd_l2gain(const ExperimentConfig& cfg, const CmdOptions& opts);
RunReport cmd_simulate(const ExperimentConfig& cfg, const CmdOptions& opts);
RunReport cmd_sets(const ExperimentConfig& cfg, const CmdOptions& opts);
RunReport cmd_bode(const ExperimentConfig& cfg, const CmdOptions& opts);

// Checks an emitted report file against the documented schema for `command`.
bool validate_report_file(const std::string& path, const std::string& command);

// Full argument parsing and dispatch; returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace lpvlab::cli
