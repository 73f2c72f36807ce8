#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "powlab/estimators.hpp"
#include "powlab/features.hpp"
#include "powlab/training.hpp"
#include "powlab/update_fn.hpp"

namespace powlab {

nlohmann::json to_json(const FiveNumberSummary& s);
nlohmann::json to_json(const PeriodMetrics& m);
nlohmann::json to_json(const AccuracyReport& a);
nlohmann::json to_json(const TrainingReport& r);
nlohmann::json to_json(const QuadratureResult& q);
nlohmann::json to_json(const TPreviousDistribution& d);
nlohmann::json to_json(const TrainingConfig& cfg, const FeatureConfig& features);

/// Solved arctan parameters, Condition-1 residual and quadrature diagnostics.
nlohmann::json calibration_report(const ArctanUpdate& solved, const TPreviousDistribution& dist);

/// Hash-rate statistics of one trace: per-W delta summaries of the periodic rate.
/// Windows with fewer than two full periods are reported with an "error" entry.
nlohmann::json hash_rate_report(const std::vector<ChainRecord>& records, const std::vector<std::int64_t>& windows);

/// Per-period metrics of every trace plus reductions of each trace against the first.
nlohmann::json comparison_report(const std::vector<std::string>& names,
                                 const std::vector<std::vector<ChainRecord>>& traces,
                                 const std::vector<HeightInterval>& periods, const ConvergenceSpec& convergence);

/// Pretty-printed with a trailing newline. Throws DataError when the file cannot be written.
void write_json(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace powlab
