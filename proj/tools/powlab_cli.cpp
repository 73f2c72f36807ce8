// powlab: simulate, calibrate, train, analyze and replicate from one binary.
// Data goes to files or stdout, progress to stderr.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "powlab/chain_sim.hpp"
#include "powlab/errors.hpp"
#include "powlab/estimators.hpp"
#include "powlab/experiment.hpp"
#include "powlab/model_io.hpp"
#include "powlab/replication.hpp"
#include "powlab/reports.hpp"
#include "powlab/trace_io.hpp"
#include "powlab/training.hpp"
#include "powlab/update_fn.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace powlab;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

void log(const std::string& msg) { std::cerr << "powlab: " << msg << '\n'; }

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

void print_metrics(const std::string& label, const PeriodMetrics& m) {
  std::cout << label << ' ' << m.period.name << " [" << m.period.begin << ", " << m.period.end
            << "): mean difficulty " << fmt(m.mean_difficulty) << ", MSE " << fmt(m.mse) << ", mean block time "
            << fmt(m.mean_block_time, 5) << " s, convergence "
            << (m.convergence_blocks ? std::to_string(*m.convergence_blocks) + " blocks" : std::string("n/a"))
            << '\n';
}

bool covers(const std::vector<ChainRecord>& trace, const HeightInterval& p) {
  return !trace.empty() && p.begin >= trace.front().height && p.begin <= trace.back().height;
}

std::vector<std::int64_t> parse_int_list(const std::string& text, const char* flag) {
  std::vector<std::int64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError(std::string(flag) + ": '" + item + "' is not a positive integer");
    }
  }
  return out;
}

// "injection", "none", or comma-separated name:begin:end[:change] entries.
std::vector<HeightInterval> parse_periods(const std::string& text) {
  if (text == "injection") return injection_periods();
  if (text == "none" || text.empty()) return {};
  std::vector<HeightInterval> out;
  std::stringstream ss(text);
  std::string entry;
  while (std::getline(ss, entry, ',')) {
    std::vector<std::string> parts;
    std::stringstream es(entry);
    std::string part;
    while (std::getline(es, part, ':')) parts.push_back(part);
    if (parts.size() != 3 && parts.size() != 4)
      throw ConfigError("--periods: expected name:begin:end[:change], got '" + entry + "'");
    try {
      HeightInterval p{parts[0], std::stoll(parts[1]), std::stoll(parts[2]), std::nullopt};
      if (parts.size() == 4) p.change_height = std::stoll(parts[3]);
      if (p.end <= p.begin) throw ConfigError("--periods: end must exceed begin in '" + entry + "'");
      out.push_back(p);
    } catch (const std::logic_error&) {
      throw ConfigError("--periods: bad number in '" + entry + "'");
    }
  }
  return out;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string config;
  std::string out;
  std::string report;
  std::optional<std::int64_t> seed;
};

int run_simulate(const SimulateArgs& a) {
  ExperimentConfig cfg = load_experiment(a.config);
  if (a.seed) {
    if (*a.seed < 0) throw ConfigError("--seed must be >= 0");
    cfg.simulation.seed = static_cast<std::uint64_t>(*a.seed);
    cfg.resolved["simulation"]["seed"] = cfg.simulation.seed;
  }
  log("simulating " + std::to_string(cfg.scenario.length) + " blocks (seed " + std::to_string(cfg.simulation.seed) +
      ")");
  Stopwatch clock;
  const auto trace = run_simulation(cfg.scenario, cfg.controller, cfg.simulation, cfg.initial_difficulty);
  log("simulation took " + fmt(clock.seconds(), 3) + " s");
  write_trace_csv(a.out, trace);
  log("wrote " + a.out);

  double total = 0.0;
  for (const auto& r : trace) total += r.block_time;
  const double mean_bt = trace.empty() ? 0.0 : total / static_cast<double>(trace.size());
  std::cout << "blocks " << trace.size() << ", mean block time " << fmt(mean_bt, 6) << " s (target "
            << fmt(cfg.analysis.target_time, 6) << " s)\n";

  json periods = json::array();
  for (const auto& p : cfg.analysis.periods) {
    if (!covers(trace, p)) continue;
    const PeriodMetrics m = period_metrics(trace, p, cfg.analysis.convergence());
    print_metrics("period", m);
    periods.push_back(to_json(m));
  }
  if (!a.report.empty()) {
    write_json(a.report, {{"config", cfg.resolved},
                          {"seed", cfg.simulation.seed},
                          {"blocks", trace.size()},
                          {"mean_block_time", mean_bt},
                          {"periods", periods}});
    log("wrote " + a.report);
  }
  return 0;
}

// --------------------------------------------------------------- calibrate

struct CalibrateArgs {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  std::string dist = "exponential";
  std::string beta = "ethereum";
  std::int64_t shape = 0;
  std::string unit = "s";
  std::string out;
};

int run_calibrate(const CalibrateArgs& a) {
  if (!(a.a > 0.0)) throw ConfigError("--A must be > 0");
  if (!(a.b > 0.0)) throw ConfigError("--B must be > 0");
  if (a.unit != "s" && a.unit != "min") throw ConfigError("--unit must be s or min");
  const double scale = a.unit == "min" ? 60.0 : 1.0;
  const double b = a.b / scale;
  const double c = a.c * scale;
  std::int64_t shape = 1;
  if (a.dist == "erlang") {
    shape = a.shape > 0 ? a.shape : 2016;
  } else if (a.dist != "exponential") {
    throw ConfigError("--dist must be exponential or erlang");
  } else if (a.shape > 1) {
    throw ConfigError("--shape only applies to --dist erlang");
  }

  double beta = 0.0;
  std::string beta_source;
  if (a.beta == "ethereum") {
    beta = ethereum_zero_drift_mean();
    beta_source = "zero-drift mean of the Ethereum rule";
  } else if (a.beta == "star") {
    if (!(c > 0.0)) throw ConfigError("--beta star needs --C > 0");
    const double centre = c / static_cast<double>(shape);
    beta = zero_drift_mean(ArctanUpdate{a.a, b, c, 0.0}, shape, centre * 1e-2, centre * 1e2);
    beta_source = "zero-drift mean of the unshifted arctan rule";
  } else {
    try {
      std::size_t used = 0;
      beta = std::stod(a.beta, &used) * scale;
      if (used != a.beta.size()) throw std::invalid_argument(a.beta);
    } catch (const std::logic_error&) {
      throw ConfigError("--beta must be a number, 'ethereum' or 'star'");
    }
    beta_source = "given";
  }
  const TPreviousDistribution dist =
      shape == 1 && a.dist == "exponential" ? TPreviousDistribution::exponential(beta)
                                            : TPreviousDistribution::erlang(shape, beta);
  dist.validate();
  log("solving D for " + dist.kind_name() + " T_previous with mean " + fmt(dist.mean(), 10) + " s");
  ArctanUpdate solved{a.a, b, c, solve_shift(a.a, b, c, dist)};
  json report = calibration_report(solved, dist);
  report["beta_source"] = beta_source;
  report["input_unit"] = a.unit;
  report["inputs"] = {{"A", a.a}, {"B", a.b}, {"C", a.c}, {"beta", a.beta}};
  std::cout << "D = " << fmt(solved.d, 12) << "  residual = " << fmt(report["condition1_residual"].get<double>(), 3)
            << "  (beta = " << fmt(beta, 12) << " s)\n";
  if (!a.out.empty()) {
    write_json(a.out, report);
    log("wrote " + a.out);
  }
  return 0;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string config;
  std::string out;
  std::string report;
  std::optional<std::int64_t> samples;
  std::optional<std::int64_t> test_samples;
  std::optional<std::int64_t> seed;
};

int run_train(const TrainArgs& a) {
  TrainingSetup setup = a.config.empty() ? TrainingSetup{} : load_training(a.config);
  if (a.samples) setup.training.samples_per_class = *a.samples;
  if (a.test_samples) setup.training.test_samples_per_class = *a.test_samples;
  if (a.seed) {
    if (*a.seed < 0) throw ConfigError("--seed must be >= 0");
    setup.training.seed = static_cast<std::uint64_t>(*a.seed);
  }
  setup.training.validate(setup.features);
  log("training on " + std::to_string(3 * setup.training.samples_per_class) + " examples (seed " +
      std::to_string(setup.training.seed) + ")");
  Stopwatch clock;
  const TrainingResult result = train_and_evaluate(setup.training, setup.features);
  log("training took " + fmt(clock.seconds(), 3) + " s, " + std::to_string(result.report.epochs_run) + " epochs");
  save_model(a.out, result.model);
  log("wrote " + a.out);
  for (const auto& h : result.report.held_out)
    std::cout << "accuracy at " << h.blocks_since_change << " blocks after change: " << fmt(h.overall, 4) << '\n';
  if (!a.report.empty()) {
    write_json(a.report, {{"config", to_json(setup.training, setup.features)},
                          {"seed", setup.training.seed},
                          {"report", to_json(result.report)}});
    log("wrote " + a.report);
  }
  return 0;
}

// ----------------------------------------------------------------- analyze

struct AnalyzeArgs {
  std::vector<std::string> traces;
  std::vector<std::string> names;
  std::string periods = "injection";
  std::string windows = "2000,5000,50000";
  std::string target = "ethereum";
  double band = 0.05;
  std::int64_t moving_average = 1000;
  std::string out;
};

int run_analyze(const AnalyzeArgs& a) {
  if (!a.names.empty() && a.names.size() != a.traces.size())
    throw ConfigError("--name must be given once per --trace or not at all");
  double target = 0.0;
  if (a.target == "ethereum") {
    target = ethereum_zero_drift_mean();
  } else {
    try {
      target = std::stod(a.target);
    } catch (const std::logic_error&) {
      throw ConfigError("--target must be a number of seconds or 'ethereum'");
    }
  }
  if (!(target > 0.0)) throw ConfigError("--target must be > 0");
  if (!(a.band > 0.0) || a.moving_average < 1) throw ConfigError("--band must be > 0 and --ma >= 1");
  const auto windows = parse_int_list(a.windows, "--W");
  std::vector<HeightInterval> periods = parse_periods(a.periods);

  std::vector<std::vector<ChainRecord>> traces;
  std::vector<std::string> names;
  json hash_rates = json::array();
  for (std::size_t i = 0; i < a.traces.size(); ++i) {
    traces.push_back(load_chain_csv(a.traces[i]));
    names.push_back(a.names.empty() ? fs::path(a.traces[i]).stem().string() : a.names[i]);
    log("loaded " + std::to_string(traces.back().size()) + " blocks from " + a.traces[i]);
    const json hr = hash_rate_report(traces.back(), windows);
    hash_rates.push_back({{"name", names.back()}, {"windows", hr}});
    for (const auto& w : hr) {
      if (w.contains("error")) {
        log("W = " + std::to_string(w["W"].get<std::int64_t>()) + ": " + w["error"].get<std::string>());
        continue;
      }
      const auto& s = w["delta_summary"];
      std::cout << names.back() << " W=" << w["W"].get<std::int64_t>() << " delta H*: min " << fmt(s["min"])
                << ", q1 " << fmt(s["q1"]) << ", median " << fmt(s["median"]) << ", q3 " << fmt(s["q3"])
                << ", max " << fmt(s["max"]) << ", mean " << fmt(w["delta_mean"]) << '\n';
    }
  }

  std::vector<HeightInterval> usable;
  for (const auto& p : periods) {
    bool ok = true;
    for (const auto& t : traces) ok = ok && covers(t, p);
    if (ok) {
      usable.push_back(p);
    } else {
      log("skipping period '" + p.name + "': not covered by every trace");
    }
  }
  const ConvergenceSpec convergence{target, a.band, a.moving_average};
  json report = {{"inputs", {{"traces", a.traces}, {"names", names}}},
                 {"windows", windows},
                 {"hash_rate", hash_rates}};
  if (!usable.empty()) {
    report["comparison"] = comparison_report(names, traces, usable, convergence);
    for (const auto& r : report["comparison"]["reductions"])
      std::cout << r["candidate"].get<std::string>() << " vs " << r["baseline"].get<std::string>() << ", "
                << r["period"].get<std::string>() << ": MSE reduced by " << fmt(r["mse_reduction_percent"], 4)
                << "%, mean differs by " << fmt(r["mean_difference_percent"], 3) << "%\n";
  }
  if (!a.out.empty()) {
    write_json(a.out, report);
    log("wrote " + a.out);
  }
  return 0;
}

// --------------------------------------------------------------- replicate

struct ReplicateArgs {
  std::string out;
  bool quick = false;
  std::optional<std::int64_t> seed;
  std::string model;
  std::optional<std::int64_t> samples;
  double a = 1e-3;
  double b = 5e-2;
  double c = 11.0;
  std::int64_t stride = 1;
};

int run_replicate(const ReplicateArgs& a) {
  ReplicationConfig cfg;
  if (a.quick) {
    cfg.scale = 0.1;
    cfg.training.samples_per_class = 1000;
    cfg.training.test_samples_per_class = 200;
  }
  if (a.seed) {
    if (*a.seed < 0) throw ConfigError("--seed must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(*a.seed);
  }
  if (a.samples) cfg.training.samples_per_class = *a.samples;
  cfg.proposed = ArctanUpdate{a.a, a.b, a.c, 0.0};
  cfg.indicator_stride = a.stride;
  if (!a.model.empty()) {
    cfg.model = std::make_shared<const MlpModel>(load_model(a.model));
    log("using model " + a.model);
  } else {
    log("training the classifier (" + std::to_string(3 * cfg.training.samples_per_class) + " examples)");
  }
  Stopwatch clock;
  const ReplicationResult r = run_replication(cfg);
  log("replication took " + fmt(clock.seconds(), 3) + " s");
  write_replication(r, a.out);
  log("wrote outputs to " + a.out);

  for (const auto& c : r.report["comparison"])
    std::cout << c["period"].get<std::string>() << ": MSE " << fmt(c["mse_original"]) << " -> "
              << fmt(c["mse_proposed"]) << " (reduced by " << fmt(c["mse_reduction_percent"], 4) << "%), mean "
              << fmt(c["mean_original"]) << " vs " << fmt(c["mean_proposed"]) << '\n';
  const auto& s = r.report["suppression"];
  std::cout << "abnormal windows: mean |dD/D| " << fmt(s["original_abnormal_mean_abs_relative_change"]) << " -> "
            << fmt(s["proposed_abnormal_mean_abs_relative_change"]) << ", mean I "
            << fmt(s["proposed_abnormal_mean_indicator"], 4) << " (Period 1: "
            << fmt(s["proposed_period1_mean_indicator"], 4) << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proof-of-work difficulty control laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "powlab 1.0");
  const char* seed_help = "RNG seed (integer >= 0); overrides the config";

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run one controller over a hash-rate scenario and export the trace");
  simulate->add_option("--config", sim.config, "Experiment JSON (scenario, controller, simulation, analysis)")
      ->required()
      ->envname("POWLAB_CONFIG");
  simulate->add_option("--out", sim.out, "Trace CSV: height,timestamp,block_time,difficulty,scheduled_rate")
      ->required()
      ->envname("POWLAB_OUT");
  simulate->add_option("--report", sim.report, "Optional JSON report with the resolved config and period metrics")
      ->envname("POWLAB_REPORT");
  simulate->add_option("--seed", sim.seed, seed_help)->envname("POWLAB_SEED");

  CalibrateArgs cal;
  auto* calibrate = app.add_subcommand("calibrate", "Solve the arctan shift D so the update has zero stationary drift");
  calibrate->add_option("--A", cal.a, "Amplitude A (> 0)")->required();
  calibrate->add_option("--B", cal.b, "Slope B, 1/unit (> 0)")->required();
  calibrate->add_option("--C", cal.c, "Centre C, in --unit")->required();
  calibrate->add_option("--dist", cal.dist, "T_previous law: exponential or erlang")->capture_default_str();
  calibrate->add_option("--beta", cal.beta,
                        "Mean block time in --unit, 'ethereum' (zero-drift mean of the Ethereum rule) or 'star' "
                        "(zero-drift mean of the arctan rule with D = 0)")
      ->capture_default_str();
  calibrate->add_option("--shape", cal.shape, "Erlang shape N (default 2016 for erlang)");
  calibrate->add_option("--unit", cal.unit, "Time unit of B, C and a numeric --beta: s or min")->capture_default_str();
  calibrate->add_option("--out", cal.out, "Calibration report JSON")->envname("POWLAB_REPORT");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train the change classifier and report held-out accuracy");
  train_cmd->add_option("--config", tr.config, "Training JSON; built-in defaults when omitted")
      ->envname("POWLAB_CONFIG");
  train_cmd->add_option("--out", tr.out, "Model file (binary, little-endian)")->required()->envname("POWLAB_MODEL");
  train_cmd->add_option("--report", tr.report, "Training report JSON")->envname("POWLAB_REPORT");
  train_cmd->add_option("--samples", tr.samples, "Training samples per class (default 3000)");
  train_cmd->add_option("--test-samples", tr.test_samples, "Held-out samples per class and checkpoint (default 500)");
  train_cmd->add_option("--seed", tr.seed, seed_help)->envname("POWLAB_SEED");

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Nominal hash rate statistics and controller comparison of traces");
  analyze->add_option("--trace", an.traces, "Chain CSV (repeatable; the first is the baseline)")->required();
  analyze->add_option("--name", an.names, "Label per trace (default: file stem)");
  analyze->add_option("--periods", an.periods,
                      "'injection', 'none', or name:begin:end[:change],... half-open block-height intervals")
      ->capture_default_str();
  analyze->add_option("--W", an.windows, "Comma-separated window lengths in blocks")->capture_default_str();
  analyze->add_option("--target", an.target, "Target block time in seconds or 'ethereum'")->capture_default_str();
  analyze->add_option("--band", an.band, "Convergence band as a fraction of target")->capture_default_str();
  analyze->add_option("--ma", an.moving_average, "Convergence moving-average length in blocks")->capture_default_str();
  analyze->add_option("--out", an.out, "Comparison report JSON")->envname("POWLAB_REPORT");

  ReplicateArgs rep;
  auto* replicate = app.add_subcommand("replicate", "Injection/withdrawal experiment: Ethereum rule vs proposed rule");
  replicate->add_option("--out", rep.out, "Output directory")->required()->envname("POWLAB_OUT");
  replicate->add_flag("--quick", rep.quick, "1/10-scale heights and a smaller training set");
  replicate->add_option("--seed", rep.seed, "RNG seed for training and both simulations (default 1)")
      ->envname("POWLAB_SEED");
  replicate->add_option("--model", rep.model, "Pre-trained model; trains one when omitted")->envname("POWLAB_MODEL");
  replicate->add_option("--samples", rep.samples, "Training samples per class");
  replicate->add_option("--A", rep.a, "Arctan amplitude of the proposed rule")->capture_default_str();
  replicate->add_option("--B", rep.b, "Arctan slope of the proposed rule, 1/s")->capture_default_str();
  replicate->add_option("--C", rep.c, "Arctan centre of the proposed rule, s")->capture_default_str();
  replicate->add_option("--stride", rep.stride, "Consult the indicator every n blocks")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*simulate) return run_simulate(sim);
    if (*calibrate) return run_calibrate(cal);
    if (*train_cmd) return run_train(tr);
    if (*analyze) return run_analyze(an);
    if (*replicate) return run_replicate(rep);
  } catch (const ConfigError& e) {
    log(std::string("configuration error: ") + e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    log(std::string("data error: ") + e.what());
    return kExitData;
  } catch (const NumericalError& e) {
    log(std::string("numerical failure: ") + e.what());
    return kExitNumerical;
  } catch (const std::domain_error& e) {
    log(std::string("invalid input: ") + e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    log(std::string("invalid input: ") + e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    log(std::string("error: ") + e.what());
    return 1;
  }
  return 0;
}
