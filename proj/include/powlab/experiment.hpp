#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "powlab/chain_sim.hpp"
#include "powlab/controllers.hpp"
#include "powlab/estimators.hpp"
#include "powlab/training.hpp"

namespace powlab {

struct AnalysisSpec {
  double target_time = 0.0;
  std::vector<std::int64_t> windows{2000, 5000, 50000};
  std::vector<HeightInterval> periods;
  /// Stretches of abnormal (beyond +-20%) rate used for the suppression comparison.
  std::vector<HeightInterval> abnormal_windows;
  double convergence_band = 0.05;
  std::int64_t moving_average = 1000;

  ConvergenceSpec convergence() const { return {target_time, convergence_band, moving_average}; }
};

/// A fully validated experiment. `resolved` echoes every setting with
/// defaults applied and solved parameters filled in, for report provenance.
struct ExperimentConfig {
  HashRateScenario scenario;
  ControllerSpec controller;
  SimulationConfig simulation;
  double initial_difficulty = 0.0;
  AnalysisSpec analysis;
  nlohmann::json resolved;
};

/// Parse and validate. Relative model paths resolve against base_dir.
/// Throws ConfigError naming the offending field; unknown keys are rejected.
ExperimentConfig parse_experiment(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// Controller block of an experiment file; `resolved` receives the echo.
ControllerSpec parse_controller(const nlohmann::json& doc, const std::filesystem::path& base_dir, double target_time,
                                nlohmann::json& resolved);

/// Classifier training settings; every key is optional.
struct TrainingSetup {
  TrainingConfig training;
  FeatureConfig features;
};
TrainingSetup parse_training(const nlohmann::json& doc);
TrainingSetup load_training(const std::filesystem::path& path);

/// Injection/withdrawal schedule of the reference replication: +20% at 50k,
/// back at 100k, +40% at 150k and 200k, back at 155k and 250k; 300k blocks.
HashRateScenario injection_scenario(double base_rate = 1.455e14, double scale = 1.0);
std::vector<HeightInterval> injection_periods(double scale = 1.0);
std::vector<HeightInterval> injection_abnormal_windows(double scale = 1.0);

nlohmann::json to_json(const HashRateScenario& s);
nlohmann::json to_json(const HeightInterval& p);

}  // namespace powlab
