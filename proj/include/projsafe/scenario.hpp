#pragma once

// Config-driven scenario runner behind the command-line tool: simulate,
// learn and sweep over the Segway benchmark.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "projsafe/dynamics.hpp"
#include "projsafe/learning.hpp"
#include "projsafe/pssf.hpp"

namespace projsafe::scenario {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 2,
  kExitEarlyTermination = 3,
  kExitCertificateFailure = 4,
};

struct SystemBlock {
  dynamics::SegwayParams params;
  dynamics::PerturbationSpec perturbation = dynamics::PerturbationSpec::benchmark();
};

struct BarrierBlock {
  double theta_max = 0.3;
  double omega_max = 1.0;
  double k = 1.0;
};

/// u_des = kp (theta - theta_ref) + kd (theta' - theta_ref') with
/// theta_ref(t) = offset + amplitude sin(2 pi frequency t).
struct ControllerBlock {
  double kp = 150.0;
  double kd = 40.0;
  double ref_amplitude = 0.2;
  double ref_frequency = 0.5;
  double ref_offset = 0.0;
  double excitation_amplitude = 5.0;
  double excitation_hold = 0.05;
  /// Actuator saturation |u| <= u_max applied after the filter; 0 disables it.
  double u_max = 0.0;
};

struct LearningBlock {
  bool enabled = true;
  int episodes = 5;
  double episode_duration = 10.0;
  double x0_spread = 0.05;
  learning::FeatureSpec features;
  double ridge_lambda = 1e-4;
  std::vector<double> lambda_schedule;
  double noise_std = 0.0;
};

struct RunBlock {
  double duration = 10.0;
  double dt = 1e-3;
  std::uint64_t seed = 0;
  std::vector<double> x0{0.0, 0.0, 0.0, 0.0};
};

struct ScenarioConfig {
  SystemBlock system;
  BarrierBlock barrier;
  ControllerBlock controller;
  LearningBlock learning;
  RunBlock run;

  /// Missing keys keep their defaults; unknown keys and invalid values throw
  /// ConfigError.
  static ScenarioConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

ScenarioConfig load_config(const std::filesystem::path& path);
nlohmann::json load_json(const std::filesystem::path& path);

barrier::BarrierFunction make_barrier(const ScenarioConfig& cfg);
dynamics::Controller make_desired_controller(const ControllerBlock& c);
learning::Scenario make_scenario(const ScenarioConfig& cfg);
learning::EpisodicConfig make_episodic_config(const ScenarioConfig& cfg);

struct ModeResult {
  dynamics::Trajectory trajectory;
  pssf::DeltaTrace delta;
  pssf::PssfCertificate certificate;
  pssf::CertificateReport report;
};

/// Rollout of the filtered controller (with the residual when given) on the
/// true system, its delta trace and the verified certificate.
ModeResult run_mode(const ScenarioConfig& cfg, const learning::ResidualModel* model);

struct SimulateOutcome {
  int exit_code = kExitOk;
  ModeResult no_learning;
  std::optional<ModeResult> learned;
  nlohmann::json summary;
};

/// Writes resolved_config.json, trajectory_*.csv, delta_*.csv,
/// certificate_*.json and summary.json into out_dir.
SimulateOutcome cmd_simulate(const ScenarioConfig& cfg, const learning::ResidualModel* model,
                             const std::filesystem::path& out_dir);

struct LearnOutcome {
  int exit_code = kExitOk;
  learning::TrainingOutcome training;
};

/// Writes resolved_config.json, model.json, metrics.csv, dataset.csv and
/// learn_summary.json into out_dir.
LearnOutcome cmd_learn(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);

/// Sets the numeric leaf at a dotted path (e.g. "run.dt") of a raw config.
nlohmann::json with_parameter(const nlohmann::json& raw, const std::string& dotted_path,
                              double value);

/// One cmd_simulate per value in out_dir/run_<i>; writes sweep.csv with
/// `value,delta_bar_no_learning,delta_bar_learned,floor_no_learning,
/// floor_learned,min_h_no_learning,min_h_learned,exit_code,error`. Per-run
/// failures are recorded in their row.
int cmd_sweep(const nlohmann::json& raw_config, const std::string& dotted_path,
              const std::vector<double>& values, const learning::ResidualModel* model,
              const std::filesystem::path& out_dir);

}  // namespace projsafe::scenario
