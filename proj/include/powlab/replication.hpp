#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "powlab/chain_sim.hpp"
#include "powlab/estimators.hpp"
#include "powlab/training.hpp"

namespace powlab {

/// Injection/withdrawal experiment comparing the Ethereum rule with the
/// arctan rule gated by the neural indicator.
struct ReplicationConfig {
  /// Multiplies every scenario and period height; 0.1 gives the quick run.
  double scale = 1.0;
  std::uint64_t seed = 1;
  double base_rate = 1.455e14;
  /// A, B, C of the proposed rule. D is solved so that the proposed rule
  /// drifts to the same mean block time as the Ethereum rule.
  ArctanUpdate proposed{1e-3, 5e-2, 11.0, 0.0};
  FeatureConfig features;
  std::int64_t indicator_stride = 1;
  TrainingConfig training;
  /// Pre-trained classifier; trained from `training` when empty.
  std::shared_ptr<const MlpModel> model;
  double convergence_band = 0.05;
  std::int64_t moving_average = 1000;

  void validate() const;
};

struct ControllerRun {
  std::string name;
  std::vector<ChainRecord> records;
  /// I_k applied after block k; 0 while the controller warms up and holds.
  std::vector<double> indicators;
  std::vector<PeriodMetrics> periods;
  std::vector<PeriodMetrics> abnormal;
  std::vector<double> period_mean_indicator;
  std::vector<double> abnormal_mean_indicator;
  double abnormal_mean_abs_change = 0.0;  // pooled over every abnormal window
  double abnormal_pooled_indicator = 0.0;
};

struct ReplicationResult {
  HashRateScenario scenario;
  std::vector<HeightInterval> periods;
  std::vector<HeightInterval> abnormal_windows;
  double target_time = 0.0;
  ArctanUpdate proposed_update;
  MlpModel model;
  std::optional<TrainingReport> training;
  ControllerRun original;
  ControllerRun proposed;
  nlohmann::json report;
};

/// Simulate one controller over the scenario and collect the metrics above.
ControllerRun run_controller(const std::string& name, const ControllerSpec& spec, const HashRateScenario& scenario,
                             const SimulationConfig& sim, double initial_difficulty,
                             const std::vector<HeightInterval>& periods,
                             const std::vector<HeightInterval>& abnormal_windows, const ConvergenceSpec& convergence);

ReplicationResult run_replication(const ReplicationConfig& cfg);

/// Traces, indicator series, plot CSVs, model and report into `dir`.
void write_replication(const ReplicationResult& result, const std::filesystem::path& dir);

}  // namespace powlab
