#include "powlab/reports.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "powlab/errors.hpp"
#include "powlab/experiment.hpp"

namespace powlab {

using nlohmann::json;

json to_json(const FiveNumberSummary& s) {
  return {{"min", s.min}, {"q1", s.q1}, {"median", s.median}, {"q3", s.q3}, {"max", s.max}};
}

json to_json(const PeriodMetrics& m) {
  json j = {{"period", to_json(m.period)},
            {"blocks", m.blocks},
            {"mean_difficulty", m.mean_difficulty},
            {"mse", m.mse},
            {"mean_block_time", m.mean_block_time},
            {"mean_abs_relative_change", m.mean_abs_relative_change}};
  j["convergence_blocks"] = m.convergence_blocks ? json(*m.convergence_blocks) : json(nullptr);
  return j;
}

json to_json(const AccuracyReport& a) {
  return {{"blocks_since_change", a.blocks_since_change},
          {"examples", a.examples},
          {"overall", a.overall},
          {"per_class", {{"no_change", a.per_class[0]}, {"normal", a.per_class[1]}, {"abnormal", a.per_class[2]}}}};
}

json to_json(const TrainingReport& r) {
  json held = json::array();
  for (const auto& a : r.held_out) held.push_back(to_json(a));
  return {{"epochs_run", r.epochs_run},
          {"train_loss", r.train_loss},
          {"validation_loss", r.validation_loss},
          {"training_accuracy", to_json(r.training_accuracy)},
          {"held_out", held}};
}

json to_json(const QuadratureResult& q) {
  return {{"value", q.value},         {"error_estimate", q.error_estimate}, {"l1_norm", q.l1_norm},
          {"lower", q.lower},         {"upper", q.upper},                   {"tail_mass", q.tail_mass},
          {"segments", q.segments}};
}

json to_json(const TPreviousDistribution& d) {
  return {{"dist", d.kind_name()}, {"beta", d.beta}, {"shape", d.shape}, {"mean", d.mean()}};
}

json to_json(const TrainingConfig& cfg, const FeatureConfig& features) {
  return {{"base_rate", cfg.base_rate},
          {"target_block_time", cfg.target_block_time.value_or(ethereum_zero_drift_mean())},
          {"change_range", {cfg.change_min, cfg.change_max}},
          {"anomaly_bound", cfg.anomaly_bound},
          {"samples_per_class", cfg.samples_per_class},
          {"change_height", cfg.resolved_change_height(features)},
          {"post_change_offsets", cfg.resolved_post_offsets(features)},
          {"case1_from_unchanged_chain", cfg.case1_from_unchanged_chain},
          {"hidden", cfg.hidden},
          {"learning_rate", cfg.learning_rate},
          {"momentum", cfg.momentum},
          {"max_epochs", cfg.max_epochs},
          {"eval_every", cfg.eval_every},
          {"patience", cfg.patience},
          {"validation_fraction", cfg.validation_fraction},
          {"test_samples_per_class", cfg.test_samples_per_class},
          {"eval_offsets", cfg.eval_offsets},
          {"seed", cfg.seed},
          {"features", {{"s", features.s}, {"q", features.q}, {"l", features.l}}}};
}

json calibration_report(const ArctanUpdate& solved, const TPreviousDistribution& dist) {
  const QuadratureResult q = condition1(solved, dist);
  return {{"A", solved.a},
          {"B", solved.b},
          {"C", solved.c},
          {"D", solved.d},
          {"sup_abs_f", solved.a * (1.5707963267948966 + std::abs(solved.d))},
          {"target", to_json(dist)},
          {"condition1_residual", q.value},
          {"quadrature", to_json(q)},
          {"tolerance", {{"absolute", kQuadratureAbsTolerance}, {"tail_mass_bound", kTailMassBound}}}};
}

json hash_rate_report(const std::vector<ChainRecord>& records, const std::vector<std::int64_t>& windows) {
  json out = json::array();
  for (const auto w : windows) {
    json entry = {{"W", w}};
    try {
      const HashRateEstimate est = nominal_hash_rate(records, w);
      const std::vector<double> rates = est.defined();
      const PeriodicHashRate p = periodic_hash_rate(rates, w);
      entry["periods"] = p.period_means.size();
      entry["delta_mean"] = p.delta_mean;
      entry["delta_summary"] = to_json(p.delta_summary);
      entry["rate_summary"] = to_json(five_number_summary(rates));
    } catch (const std::domain_error& e) {
      entry["error"] = e.what();
    }
    out.push_back(entry);
  }
  return out;
}

json comparison_report(const std::vector<std::string>& names, const std::vector<std::vector<ChainRecord>>& traces,
                       const std::vector<HeightInterval>& periods, const ConvergenceSpec& convergence) {
  if (names.size() != traces.size()) throw std::invalid_argument("comparison_report: names/traces mismatch");
  std::vector<std::vector<PeriodMetrics>> metrics(traces.size());
  json per_trace = json::array();
  for (std::size_t t = 0; t < traces.size(); ++t) {
    json rows = json::array();
    for (const auto& p : periods) {
      metrics[t].push_back(period_metrics(traces[t], p, convergence));
      rows.push_back(to_json(metrics[t].back()));
    }
    per_trace.push_back({{"name", names[t]}, {"blocks", traces[t].size()}, {"periods", rows}});
  }
  json reductions = json::array();
  for (std::size_t t = 1; t < traces.size(); ++t) {
    for (std::size_t p = 0; p < periods.size(); ++p) {
      const PeriodMetrics& base = metrics[0][p];
      const PeriodMetrics& cand = metrics[t][p];
      reductions.push_back({{"baseline", names[0]},
                            {"candidate", names[t]},
                            {"period", periods[p].name},
                            {"mse_reduction_percent", reduction_percent(base.mse, cand.mse)},
                            {"mean_difference_percent", 100.0 * (cand.mean_difficulty / base.mean_difficulty - 1.0)},
                            {"abs_change_reduction_percent",
                             reduction_percent(base.mean_abs_relative_change, cand.mean_abs_relative_change)}});
    }
  }
  return {{"convergence",
           {{"target_time", convergence.target_time},
            {"band", convergence.band},
            {"moving_average", convergence.moving_average}}},
          {"traces", per_trace},
          {"reductions", reductions}};
}

void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace powlab
