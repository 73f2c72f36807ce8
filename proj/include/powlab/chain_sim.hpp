#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "powlab/controllers.hpp"
#include "powlab/rng.hpp"

namespace powlab {

/// One block of a trace. Times in seconds, difficulty dimensionless.
/// scheduled_rate is the nominal hash rate that produced the block (0 when unknown, e.g. real data).
struct ChainRecord {
  std::int64_t height = 0;
  double timestamp = 0.0;
  double block_time = 0.0;
  double difficulty = 0.0;
  double scheduled_rate = 0.0;

  bool operator==(const ChainRecord&) const = default;
};

/// Absolute nominal rate that takes effect for every block after `height`.
struct RateEvent {
  std::int64_t height = 0;
  double rate = 0.0;
};

/// Piecewise-constant nominal hash rate. A change at height c first affects block c+1.
struct HashRateScenario {
  double initial_rate = 1.455e14;
  std::vector<RateEvent> events;
  std::int64_t length = 0;

  void validate() const;
  double rate_at(std::int64_t height) const;
};

struct SimulationConfig {
  std::uint64_t seed = 1;
  double propagation_delay = 0.0;
  double min_difficulty = 1.0;
  /// Report whole-second timestamps, kept strictly increasing as block headers require.
  bool integer_timestamps = false;

  void validate() const;
};

/// Inverse-transform draw: -(difficulty/rate) * ln(u) + delay, u in (0, 1].
double sample_block_time(double difficulty, double rate, double delay, double u);
double sample_block_time(double difficulty, double rate, double delay, Rng& rng);

/// Called after each block with the new record and the controller that has just consumed it.
using StepObserver = std::function<void(const ChainRecord&, const Controller&)>;

/// Produce scenario.length blocks at heights 1..length, starting from t_0 = 0.
std::vector<ChainRecord> run_simulation(const HashRateScenario& scenario, const ControllerSpec& controller,
                                        const SimulationConfig& config, double initial_difficulty,
                                        const StepObserver& observer = {});

}  // namespace powlab
