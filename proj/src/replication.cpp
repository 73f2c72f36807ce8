#include "powlab/replication.hpp"

#include <cmath>

#include "powlab/errors.hpp"
#include "powlab/experiment.hpp"
#include "powlab/model_io.hpp"
#include "powlab/reports.hpp"
#include "powlab/trace_io.hpp"

namespace powlab {

using nlohmann::json;

namespace {

double mean_over(const std::vector<double>& series, const HeightInterval& w) {
  double sum = 0.0;
  std::int64_t n = 0;
  for (std::int64_t h = w.begin; h < w.end && h <= static_cast<std::int64_t>(series.size()); ++h) {
    if (h < 1) continue;
    sum += series[static_cast<std::size_t>(h - 1)];
    ++n;
  }
  return n ? sum / static_cast<double>(n) : std::nan("");
}

json run_json(const ControllerRun& run) {
  json periods = json::array();
  for (std::size_t i = 0; i < run.periods.size(); ++i) {
    json p = to_json(run.periods[i]);
    p["mean_indicator"] = run.period_mean_indicator[i];
    periods.push_back(p);
  }
  json abnormal = json::array();
  for (std::size_t i = 0; i < run.abnormal.size(); ++i) {
    json p = to_json(run.abnormal[i]);
    p["mean_indicator"] = run.abnormal_mean_indicator[i];
    abnormal.push_back(p);
  }
  return {{"name", run.name},
          {"blocks", run.records.size()},
          {"periods", periods},
          {"abnormal_windows", abnormal},
          {"abnormal_mean_abs_relative_change", run.abnormal_mean_abs_change},
          {"abnormal_mean_indicator", run.abnormal_pooled_indicator}};
}

// The classifier is trained for the same base rate and block time the chains run at.
TrainingConfig training_config(const ReplicationConfig& cfg, double target_time) {
  TrainingConfig tc = cfg.training;
  tc.base_rate = cfg.base_rate;
  tc.target_block_time = target_time;
  tc.seed = cfg.seed;
  return tc;
}

}  // namespace

void ReplicationConfig::validate() const {
  if (!(scale > 0.0 && scale <= 1.0)) throw ConfigError("replicate: scale must be in (0, 1]");
  if (!(base_rate > 0.0)) throw ConfigError("replicate: base_rate must be > 0");
  if (!(proposed.a > 0.0) || !(proposed.b > 0.0)) throw ConfigError("replicate: arctan A and B must be > 0");
  features.validate();
  if (indicator_stride < 1) throw ConfigError("replicate: indicator stride must be >= 1");
  if (!(convergence_band > 0.0) || moving_average < 1)
    throw ConfigError("replicate: convergence band must be > 0 and moving average >= 1");
  if (!model) training.validate(features);
}

ControllerRun run_controller(const std::string& name, const ControllerSpec& spec, const HashRateScenario& scenario,
                             const SimulationConfig& sim, double initial_difficulty,
                             const std::vector<HeightInterval>& periods,
                             const std::vector<HeightInterval>& abnormal_windows, const ConvergenceSpec& convergence) {
  ControllerRun run;
  run.name = name;
  run.indicators.reserve(static_cast<std::size_t>(scenario.length));
  run.records = run_simulation(scenario, spec, sim, initial_difficulty, [&](const ChainRecord&, const Controller& c) {
    run.indicators.push_back(c.last_indicator().value_or(0.0));
  });
  for (const auto& p : periods) {
    run.periods.push_back(period_metrics(run.records, p, convergence));
    run.period_mean_indicator.push_back(mean_over(run.indicators, p));
  }
  double change_sum = 0.0;
  double indicator_sum = 0.0;
  std::int64_t blocks = 0;
  for (const auto& w : abnormal_windows) {
    run.abnormal.push_back(period_metrics(run.records, w, convergence));
    run.abnormal_mean_indicator.push_back(mean_over(run.indicators, w));
    for (std::int64_t h = std::max<std::int64_t>(w.begin, 2); h < w.end && h <= scenario.length; ++h) {
      const auto i = static_cast<std::size_t>(h - 1);
      change_sum += std::abs(run.records[i].difficulty / run.records[i - 1].difficulty - 1.0);
      indicator_sum += run.indicators[i];
      ++blocks;
    }
  }
  if (blocks > 0) {
    run.abnormal_mean_abs_change = change_sum / static_cast<double>(blocks);
    run.abnormal_pooled_indicator = indicator_sum / static_cast<double>(blocks);
  }
  return run;
}

ReplicationResult run_replication(const ReplicationConfig& cfg) {
  cfg.validate();
  ReplicationResult out;
  out.target_time = ethereum_zero_drift_mean();
  out.scenario = injection_scenario(cfg.base_rate, cfg.scale);
  out.periods = injection_periods(cfg.scale);
  out.abnormal_windows = injection_abnormal_windows(cfg.scale);

  if (cfg.model) {
    out.model = *cfg.model;
  } else {
    TrainingResult trained = train_and_evaluate(training_config(cfg, out.target_time), cfg.features);
    out.model = std::move(trained.model);
    out.training = std::move(trained.report);
  }
  const auto model = std::make_shared<const MlpModel>(out.model);

  const TPreviousDistribution target = TPreviousDistribution::exponential(out.target_time);
  out.proposed_update = cfg.proposed;
  out.proposed_update.d = solve_shift(cfg.proposed.a, cfg.proposed.b, cfg.proposed.c, target);
  out.proposed_update.validate();

  SimulationConfig sim;
  sim.seed = cfg.seed;
  const double d0 = cfg.base_rate * out.target_time;
  const ConvergenceSpec convergence{out.target_time, cfg.convergence_band, cfg.moving_average};
  // Both controllers see the same random stream, so the comparison is paired.
  out.original = run_controller("original", ControllerSpec::ethereum(), out.scenario, sim, d0, out.periods,
                                out.abnormal_windows, convergence);
  out.proposed = run_controller("proposed",
                                ControllerSpec::proposed(model, cfg.features, out.proposed_update, cfg.indicator_stride),
                                out.scenario, sim, d0, out.periods, out.abnormal_windows, convergence);

  json comparison = json::array();
  for (std::size_t i = 0; i < out.periods.size(); ++i) {
    const auto& a = out.original.periods[i];
    const auto& b = out.proposed.periods[i];
    comparison.push_back({{"period", out.periods[i].name},
                          {"mse_original", a.mse},
                          {"mse_proposed", b.mse},
                          {"mse_reduction_percent", reduction_percent(a.mse, b.mse)},
                          {"mean_original", a.mean_difficulty},
                          {"mean_proposed", b.mean_difficulty},
                          {"mean_difference_percent", 100.0 * (b.mean_difficulty / a.mean_difficulty - 1.0)}});
  }
  const double period1_indicator = out.proposed.period_mean_indicator.empty()
                                       ? std::nan("")
                                       : out.proposed.period_mean_indicator.front();
  const ArctanUpdate table_arctan{1e-3, 1e-2, 11.0, 0.0};

  json periods = json::array();
  for (const auto& p : out.periods) periods.push_back(to_json(p));
  json abnormal = json::array();
  for (const auto& p : out.abnormal_windows) abnormal.push_back(to_json(p));
  out.report = {
      {"seed", cfg.seed},
      {"config",
       {{"scale", cfg.scale},
        {"base_rate", cfg.base_rate},
        {"target_time", out.target_time},
        {"initial_difficulty", d0},
        {"scenario", to_json(out.scenario)},
        {"periods", periods},
        {"abnormal_windows", abnormal},
        {"features", {{"s", cfg.features.s}, {"q", cfg.features.q}, {"l", cfg.features.l}}},
        {"indicator_stride", cfg.indicator_stride},
        {"convergence_band", cfg.convergence_band},
        {"moving_average", cfg.moving_average},
        {"model_source", cfg.model ? "supplied" : "trained"}}},
      {"proposed_update", calibration_report(out.proposed_update, target)},
      {"original", run_json(out.original)},
      {"proposed", run_json(out.proposed)},
      {"comparison", comparison},
      {"suppression",
       {{"original_abnormal_mean_abs_relative_change", out.original.abnormal_mean_abs_change},
        {"proposed_abnormal_mean_abs_relative_change", out.proposed.abnormal_mean_abs_change},
        {"proposed_abnormal_mean_indicator", out.proposed.abnormal_pooled_indicator},
        {"proposed_period1_mean_indicator", period1_indicator},
        {"changes_damped", out.proposed.abnormal_mean_abs_change < out.original.abnormal_mean_abs_change},
        {"indicator_lowered", out.proposed.abnormal_pooled_indicator < period1_indicator}}},
      {"amplitude_ratio",
       {{"table_arctan", amplitude_ratio(EthereumUpdate{}, table_arctan)},
        {"proposed_update", amplitude_ratio(EthereumUpdate{}, out.proposed_update)},
        {"note", "the rounded closed form is about 99/pi"}}},
  };
  if (!cfg.model) {
    out.report["training"] = {{"config", to_json(training_config(cfg, out.target_time), cfg.features)}, {"report", to_json(*out.training)}};
  }
  return out;
}

void write_replication(const ReplicationResult& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_trace_csv(dir / "trace_original.csv", r.original.records);
  write_trace_csv(dir / "trace_proposed.csv", r.proposed.records);

  const std::size_t n = r.original.records.size();
  std::vector<double> height(n), rate(n), d_orig(n), d_prop(n);
  for (std::size_t i = 0; i < n; ++i) {
    height[i] = static_cast<double>(r.original.records[i].height);
    rate[i] = r.original.records[i].scheduled_rate;
    d_orig[i] = r.original.records[i].difficulty;
    d_prop[i] = r.proposed.records[i].difficulty;
  }
  write_columns_csv(dir / "plot_difficulty.csv", {"height", "scheduled_rate", "difficulty_original", "difficulty_proposed"},
                    {height, rate, d_orig, d_prop});
  write_columns_csv(dir / "plot_indicator.csv", {"height", "indicator"}, {height, r.proposed.indicators});
  if (r.training) {
    std::vector<double> blocks, overall, c1, c2, c3;
    for (const auto& a : r.training->held_out) {
      blocks.push_back(static_cast<double>(a.blocks_since_change));
      overall.push_back(a.overall);
      c1.push_back(a.per_class[0]);
      c2.push_back(a.per_class[1]);
      c3.push_back(a.per_class[2]);
    }
    write_columns_csv(dir / "plot_accuracy.csv",
                      {"blocks_since_change", "overall", "no_change", "normal", "abnormal"},
                      {blocks, overall, c1, c2, c3});
  }
  save_model(dir / "model.bin", r.model);
  write_json(dir / "report.json", r.report);
}

}  // namespace powlab
