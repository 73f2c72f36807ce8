#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "powlab/chain_sim.hpp"

namespace powlab {

/// Windowed nominal hash rate H_k = sum(D over W blocks) / sum(T over W blocks).
/// rates[i] belongs to records[i]; entries before the first full window are empty.
struct HashRateEstimate {
  std::int64_t window = 0;
  std::vector<std::optional<double>> rates;

  /// Defined values only, in height order.
  std::vector<double> defined() const;
};

/// O(1) per block via prefix sums. A window whose block times sum to zero
/// yields an empty entry. Throws std::domain_error if W < 1 or records.size() < W.
HashRateEstimate nominal_hash_rate(const std::vector<ChainRecord>& records, std::int64_t window);

/// Reference path: direct summation per window.
HashRateEstimate nominal_hash_rate_naive(const std::vector<ChainRecord>& records, std::int64_t window);

struct FiveNumberSummary {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

/// Quartiles by linear interpolation between order statistics. Requires a non-empty sample.
FiveNumberSummary five_number_summary(std::vector<double> values);

/// Period averages of the nominal rate over disjoint W-blocks and their successive changes.
struct PeriodicHashRate {
  std::int64_t window = 0;
  std::vector<double> period_means;  // one per full period
  std::vector<double> per_block;     // period_means expanded to every block of its period
  std::vector<double> deltas;        // period_means[n] - period_means[n-1]
  FiveNumberSummary delta_summary;
  double delta_mean = 0.0;
};

/// Throws std::domain_error when fewer than two full periods are available.
PeriodicHashRate periodic_hash_rate(const std::vector<double>& rates, std::int64_t window);

/// Half-open block-height interval [begin, end).
struct HeightInterval {
  std::string name;
  std::int64_t begin = 0;
  std::int64_t end = 0;
  /// Scheduled change the period follows; convergence is measured from it (defaults to begin).
  std::optional<std::int64_t> change_height;
};

struct ConvergenceSpec {
  double target_time = 0.0;
  double band = 0.05;
  std::int64_t moving_average = 1000;
};

struct PeriodMetrics {
  HeightInterval period;
  std::size_t blocks = 0;
  double mean_difficulty = 0.0;
  double mse = 0.0;  // mean squared deviation of difficulty about the period mean
  double mean_block_time = 0.0;
  double mean_abs_relative_change = 0.0;  // mean |D_k / D_{k-1} - 1| inside the period
  /// Blocks after the preceding change until the trailing moving-average
  /// block time is back within target*(1 +- band); nullopt if it never re-enters.
  std::optional<std::int64_t> convergence_blocks;
};

/// Metrics over the records whose height lies in the period. Throws std::domain_error for an empty period.
PeriodMetrics period_metrics(const std::vector<ChainRecord>& records, const HeightInterval& period,
                             const ConvergenceSpec& convergence);

/// Blocks from `from_height` until the trailing moving average of block times
/// re-enters the band after leaving it. 0 when it stays inside for a full
/// moving-average window after from_height; nullopt when it never comes back.
std::optional<std::int64_t> convergence_time(const std::vector<ChainRecord>& records, std::int64_t from_height,
                                             const ConvergenceSpec& convergence);

/// Percentage by which `candidate` lowers `baseline`: 100 * (1 - candidate / baseline).
double reduction_percent(double baseline, double candidate);

}  // namespace powlab
