#include "powlab/experiment.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>

#include "powlab/errors.hpp"
#include "powlab/model_io.hpp"
#include "powlab/training.hpp"
#include "powlab/update_fn.hpp"

namespace powlab {

using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError("'" + where + "' must be an object");
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  require_object(j, where);
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw ConfigError("unknown key '" + where + "." + key + "'");
}

double number(const json& j, const char* key, const std::string& where, std::optional<double> fallback = {}) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError("missing field '" + where + "." + key + "'");
  }
  if (!j.at(key).is_number()) throw ConfigError("field '" + where + "." + key + "' must be a number");
  return j.at(key).get<double>();
}

std::int64_t integer(const json& j, const char* key, const std::string& where,
                     std::optional<std::int64_t> fallback = {}) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError("missing field '" + where + "." + key + "'");
  }
  const json& v = j.at(key);
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>())
    return static_cast<std::int64_t>(v.get<double>());
  throw ConfigError("field '" + where + "." + key + "' must be an integer");
}

std::string text(const json& j, const char* key, const std::string& where, std::optional<std::string> fallback = {}) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError("missing field '" + where + "." + key + "'");
  }
  if (!j.at(key).is_string()) throw ConfigError("field '" + where + "." + key + "' must be a string");
  return j.at(key).get<std::string>();
}

// A number, or the string "ethereum_zero_drift" for the Ethereum rule's equilibrium block time.
double time_value(const json& j, const char* key, const std::string& where, double fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (v.is_string() && v.get<std::string>() == "ethereum_zero_drift") return ethereum_zero_drift_mean();
  if (!v.is_number()) throw ConfigError("field '" + where + "." + key + "' must be a number or \"ethereum_zero_drift\"");
  return v.get<double>();
}

std::vector<std::int64_t> integers(const json& j, const char* key, const std::string& where,
                                   std::vector<std::int64_t> fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_array()) throw ConfigError("field '" + where + "." + key + "' must be an array of integers");
  std::vector<std::int64_t> out;
  for (const auto& x : v) {
    if (!x.is_number_integer()) throw ConfigError("field '" + where + "." + key + "' must be an array of integers");
    out.push_back(x.get<std::int64_t>());
  }
  return out;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
}

TPreviousDistribution parse_distribution(const json& j, const std::string& where, double default_beta,
                                         json& resolved) {
  check_keys(j, {"dist", "beta", "shape"}, where);
  const std::string kind = text(j, "dist", where, "exponential");
  const double beta = time_value(j, "beta", where, default_beta);
  TPreviousDistribution dist;
  if (kind == "exponential") {
    dist = TPreviousDistribution::exponential(beta);
  } else if (kind == "erlang") {
    dist = TPreviousDistribution::erlang(integer(j, "shape", where), beta);
  } else {
    throw ConfigError("field '" + where + ".dist' must be \"exponential\" or \"erlang\"");
  }
  dist.validate();
  resolved = {{"dist", dist.kind_name()}, {"beta", dist.beta}, {"shape", dist.shape}};
  return dist;
}

UpdateFunction parse_update(const json& j, const std::string& where, double target_time, json& resolved) {
  require_object(j, where);
  const std::string kind = text(j, "kind", where);
  if (kind == "ethereum") {
    check_keys(j, {"kind"}, where);
    resolved = {{"kind", "ethereum"}};
    return EthereumUpdate{};
  }
  if (kind == "bitcoin") {
    check_keys(j, {"kind", "n", "beta"}, where);
    BitcoinUpdate u{integer(j, "n", where, 2016), number(j, "beta", where, 600.0)};
    if (u.n < 1 || !(u.beta > 0.0)) throw ConfigError("'" + where + "': bitcoin update needs n >= 1 and beta > 0");
    resolved = {{"kind", "bitcoin"}, {"n", u.n}, {"beta", u.beta}};
    return u;
  }
  if (kind == "arctan") {
    check_keys(j, {"kind", "A", "B", "C", "D", "target"}, where);
    ArctanUpdate u{number(j, "A", where), number(j, "B", where), number(j, "C", where), 0.0};
    if (!(u.a > 0.0) || !(u.b > 0.0)) throw ConfigError("'" + where + "': A and B must be > 0");
    resolved = {{"kind", "arctan"}, {"A", u.a}, {"B", u.b}, {"C", u.c}};
    const json d = j.value("D", json(0.0));
    if (d.is_string() && d.get<std::string>() == "solve") {
      json target_resolved;
      const TPreviousDistribution dist =
          parse_distribution(j.value("target", json::object()), where + ".target", target_time, target_resolved);
      u.d = solve_shift(u.a, u.b, u.c, dist);
      resolved["D"] = u.d;
      resolved["D_solved_for"] = target_resolved;
      resolved["condition1_residual"] = condition1_residual(u, dist);
    } else if (d.is_number()) {
      if (j.contains("target")) throw ConfigError("'" + where + ".target' only applies when D is \"solve\"");
      u.d = d.get<double>();
      resolved["D"] = u.d;
    } else {
      throw ConfigError("field '" + where + ".D' must be a number or \"solve\"");
    }
    u.validate();
    return u;
  }
  throw ConfigError("field '" + where + ".kind' must be ethereum, bitcoin or arctan");
}

IndicatorPolicy parse_indicator(const json& j, const std::string& where, const std::filesystem::path& base_dir,
                                json& resolved) {
  require_object(j, where);
  const std::string kind = text(j, "kind", where);
  if (kind == "constant") {
    check_keys(j, {"kind", "value"}, where);
    const double v = number(j, "value", where, 1.0);
    resolved = {{"kind", "constant"}, {"value", v}};
    return ConstantIndicator{v};
  }
  if (kind == "every_n") {
    check_keys(j, {"kind", "n"}, where);
    const auto n = integer(j, "n", where);
    resolved = {{"kind", "every_n"}, {"n", n}};
    return EveryNIndicator{n};
  }
  if (kind == "neural") {
    check_keys(j, {"kind", "model", "s", "q", "l", "stride"}, where);
    std::filesystem::path model_path = text(j, "model", where);
    if (model_path.is_relative() && !base_dir.empty()) model_path = base_dir / model_path;
    if (!std::filesystem::exists(model_path))
      throw ConfigError("field '" + where + ".model': file " + model_path.string() + " does not exist");
    FeatureConfig fc{integer(j, "s", where, 200), integer(j, "q", where, 11), integer(j, "l", where, 2000)};
    fc.validate();
    auto model = std::make_shared<const MlpModel>(load_model(model_path));
    const auto stride = integer(j, "stride", where, 1);
    resolved = {{"kind", "neural"}, {"model", model_path.string()}, {"s", fc.s},
                {"q", fc.q},        {"l", fc.l},                    {"stride", stride}};
    return NeuralIndicator{std::move(model), fc, stride};
  }
  throw ConfigError("field '" + where + ".kind' must be constant, every_n or neural");
}

HeightInterval parse_interval(const json& j, const std::string& where) {
  check_keys(j, {"name", "begin", "end", "change_height"}, where);
  HeightInterval p{text(j, "name", where, ""), integer(j, "begin", where), integer(j, "end", where), std::nullopt};
  if (j.contains("change_height")) p.change_height = integer(j, "change_height", where);
  if (p.end <= p.begin) throw ConfigError("'" + where + "': end must exceed begin");
  return p;
}

std::vector<HeightInterval> parse_intervals(const json& doc, const char* key, const std::string& where,
                                            std::vector<HeightInterval> fallback) {
  if (!doc.contains(key)) return fallback;
  if (!doc.at(key).is_array()) throw ConfigError("field '" + where + "." + key + "' must be an array");
  std::vector<HeightInterval> out;
  for (std::size_t i = 0; i < doc.at(key).size(); ++i)
    out.push_back(parse_interval(doc.at(key)[i], where + "." + key + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace

json to_json(const HashRateScenario& s) {
  json events = json::array();
  for (const auto& e : s.events) events.push_back({{"height", e.height}, {"rate", e.rate}});
  return {{"initial_rate", s.initial_rate}, {"length", s.length}, {"events", events}};
}

json to_json(const HeightInterval& p) {
  json j = {{"name", p.name}, {"begin", p.begin}, {"end", p.end}};
  if (p.change_height) j["change_height"] = *p.change_height;
  return j;
}

HashRateScenario injection_scenario(double base_rate, double scale) {
  auto h = [scale](double v) { return static_cast<std::int64_t>(std::llround(v * scale)); };
  HashRateScenario s;
  s.initial_rate = base_rate;
  s.length = h(300000);
  s.events = {{h(50000), base_rate * 1.2}, {h(100000), base_rate},       {h(150000), base_rate * 1.4},
              {h(155000), base_rate},       {h(200000), base_rate * 1.4}, {h(250000), base_rate}};
  return s;
}

std::vector<HeightInterval> injection_periods(double scale) {
  auto h = [scale](double v) { return static_cast<std::int64_t>(std::llround(v * scale)); };
  return {{"Period 1", h(55000), h(100000), h(50000)}, {"Period 2", h(105000), h(150000), h(100000)}};
}

std::vector<HeightInterval> injection_abnormal_windows(double scale) {
  auto h = [scale](double v) { return static_cast<std::int64_t>(std::llround(v * scale)); };
  return {{"Period 3", h(150000), h(155000), h(150000)},
          {"Period 4", h(200000), h(250000), h(200000)},
          {"Period 5", h(250000), h(300000), h(250000)}};
}

ControllerSpec parse_controller(const json& doc, const std::filesystem::path& base_dir, double target_time,
                                json& resolved) {
  const std::string where = "controller";
  check_keys(doc, {"preset", "indicator", "update", "t_previous_window", "min_difficulty"}, where);
  ControllerSpec spec;
  const std::string preset = text(doc, "preset", where, "ethereum");
  if (preset == "ethereum") {
    spec = ControllerSpec::ethereum();
  } else if (preset == "bitcoin") {
    spec = ControllerSpec::bitcoin();
  } else if (preset == "identity") {
    spec = ControllerSpec::identity();
  } else {
    throw ConfigError("field 'controller.preset' must be ethereum, bitcoin or identity");
  }
  resolved = json::object();
  resolved["preset"] = preset;
  json sub;
  if (doc.contains("update")) {
    spec.update = parse_update(doc.at("update"), where + ".update", target_time, sub);
    resolved["update"] = sub;
  }
  if (doc.contains("indicator")) {
    spec.indicator = parse_indicator(doc.at("indicator"), where + ".indicator", base_dir, sub);
    resolved["indicator"] = sub;
    if (const auto* e = std::get_if<EveryNIndicator>(&spec.indicator); e && !doc.contains("t_previous_window"))
      spec.t_previous_window = e->n;
  }
  spec.t_previous_window = integer(doc, "t_previous_window", where, spec.t_previous_window);
  spec.min_difficulty = number(doc, "min_difficulty", where, spec.min_difficulty);
  resolved["t_previous_window"] = spec.t_previous_window;
  resolved["min_difficulty"] = spec.min_difficulty;
  resolved["description"] = describe(spec.update);
  spec.validate();
  return spec;
}

ExperimentConfig parse_experiment(const json& doc, const std::filesystem::path& base_dir) {
  check_keys(doc, {"scenario", "controller", "simulation", "analysis"}, "config");
  if (!doc.contains("scenario")) throw ConfigError("missing field 'scenario'");
  ExperimentConfig cfg;

  const json& sj = doc.at("scenario");
  check_keys(sj, {"initial_rate", "length", "events"}, "scenario");
  cfg.scenario.initial_rate = number(sj, "initial_rate", "scenario", 1.455e14);
  cfg.scenario.length = integer(sj, "length", "scenario");
  if (sj.contains("events")) {
    if (!sj.at("events").is_array()) throw ConfigError("field 'scenario.events' must be an array");
    for (std::size_t i = 0; i < sj.at("events").size(); ++i) {
      const std::string where = "scenario.events[" + std::to_string(i) + "]";
      const json& ej = sj.at("events")[i];
      check_keys(ej, {"height", "rate"}, where);
      cfg.scenario.events.push_back({integer(ej, "height", where), number(ej, "rate", where)});
    }
  }
  cfg.scenario.validate();

  const json aj = doc.value("analysis", json::object());
  check_keys(aj, {"target_time", "windows", "periods", "abnormal_windows", "convergence_band", "moving_average"},
             "analysis");
  cfg.analysis.target_time = time_value(aj, "target_time", "analysis", ethereum_zero_drift_mean());
  if (!(cfg.analysis.target_time > 0.0)) throw ConfigError("field 'analysis.target_time' must be > 0");
  if (aj.contains("windows")) {
    if (!aj.at("windows").is_array()) throw ConfigError("field 'analysis.windows' must be an array");
    cfg.analysis.windows.clear();
    for (const auto& w : aj.at("windows")) {
      if (!w.is_number_integer() || w.get<std::int64_t>() < 1)
        throw ConfigError("field 'analysis.windows' must hold positive integers");
      cfg.analysis.windows.push_back(w.get<std::int64_t>());
    }
  }
  cfg.analysis.periods = parse_intervals(aj, "periods", "analysis", injection_periods());
  cfg.analysis.abnormal_windows = parse_intervals(aj, "abnormal_windows", "analysis", injection_abnormal_windows());
  cfg.analysis.convergence_band = number(aj, "convergence_band", "analysis", 0.05);
  cfg.analysis.moving_average = integer(aj, "moving_average", "analysis", 1000);
  if (!(cfg.analysis.convergence_band > 0.0) || cfg.analysis.moving_average < 1)
    throw ConfigError("analysis: convergence_band must be > 0 and moving_average >= 1");

  json controller_resolved;
  cfg.controller = parse_controller(doc.value("controller", json::object()), base_dir, cfg.analysis.target_time,
                                    controller_resolved);

  const json simj = doc.value("simulation", json::object());
  check_keys(simj, {"seed", "propagation_delay", "min_difficulty", "integer_timestamps", "initial_difficulty"},
             "simulation");
  const auto seed = integer(simj, "seed", "simulation", 1);
  if (seed < 0) throw ConfigError("field 'simulation.seed' must be >= 0");
  cfg.simulation.seed = static_cast<std::uint64_t>(seed);
  cfg.simulation.propagation_delay = number(simj, "propagation_delay", "simulation", 0.0);
  cfg.simulation.min_difficulty = number(simj, "min_difficulty", "simulation", 1.0);
  if (simj.contains("integer_timestamps")) {
    if (!simj.at("integer_timestamps").is_boolean())
      throw ConfigError("field 'simulation.integer_timestamps' must be a boolean");
    cfg.simulation.integer_timestamps = simj.at("integer_timestamps").get<bool>();
  }
  cfg.simulation.validate();
  cfg.initial_difficulty = number(simj, "initial_difficulty", "simulation",
                                  cfg.scenario.initial_rate * cfg.analysis.target_time);
  if (!(cfg.initial_difficulty >= cfg.simulation.min_difficulty))
    throw ConfigError("field 'simulation.initial_difficulty' must be >= min_difficulty");

  json periods = json::array();
  for (const auto& p : cfg.analysis.periods) periods.push_back(to_json(p));
  json abnormal = json::array();
  for (const auto& p : cfg.analysis.abnormal_windows) abnormal.push_back(to_json(p));
  cfg.resolved = {
      {"scenario", to_json(cfg.scenario)},
      {"controller", controller_resolved},
      {"simulation",
       {{"seed", cfg.simulation.seed},
        {"propagation_delay", cfg.simulation.propagation_delay},
        {"min_difficulty", cfg.simulation.min_difficulty},
        {"integer_timestamps", cfg.simulation.integer_timestamps},
        {"initial_difficulty", cfg.initial_difficulty}}},
      {"analysis",
       {{"target_time", cfg.analysis.target_time},
        {"windows", cfg.analysis.windows},
        {"periods", periods},
        {"abnormal_windows", abnormal},
        {"convergence_band", cfg.analysis.convergence_band},
        {"moving_average", cfg.analysis.moving_average}}},
  };
  return cfg;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  return parse_experiment(read_json(path), path.parent_path());
}

TrainingSetup parse_training(const json& doc) {
  const std::string where = "training";
  check_keys(doc, {"base_rate", "target_block_time", "change_min", "change_max", "anomaly_bound",
                   "samples_per_class", "change_height", "post_change_offsets", "case1_from_unchanged_chain",
                   "hidden", "learning_rate", "momentum", "max_epochs", "eval_every", "patience",
                   "validation_fraction", "test_samples_per_class", "eval_offsets", "seed", "features"},
             where);
  TrainingSetup setup;
  TrainingConfig& t = setup.training;
  t.base_rate = number(doc, "base_rate", where, t.base_rate);
  if (doc.contains("target_block_time")) t.target_block_time = time_value(doc, "target_block_time", where, 0.0);
  t.change_min = number(doc, "change_min", where, t.change_min);
  t.change_max = number(doc, "change_max", where, t.change_max);
  t.anomaly_bound = number(doc, "anomaly_bound", where, t.anomaly_bound);
  t.samples_per_class = integer(doc, "samples_per_class", where, t.samples_per_class);
  t.change_height = integer(doc, "change_height", where, t.change_height);
  t.post_change_offsets = integers(doc, "post_change_offsets", where, t.post_change_offsets);
  if (doc.contains("case1_from_unchanged_chain")) {
    if (!doc.at("case1_from_unchanged_chain").is_boolean())
      throw ConfigError("field 'training.case1_from_unchanged_chain' must be a boolean");
    t.case1_from_unchanged_chain = doc.at("case1_from_unchanged_chain").get<bool>();
  }
  const auto hidden = integer(doc, "hidden", where, static_cast<std::int64_t>(t.hidden));
  if (hidden < 1) throw ConfigError("field 'training.hidden' must be >= 1");
  t.hidden = static_cast<std::size_t>(hidden);
  t.learning_rate = number(doc, "learning_rate", where, t.learning_rate);
  t.momentum = number(doc, "momentum", where, t.momentum);
  t.max_epochs = integer(doc, "max_epochs", where, t.max_epochs);
  t.eval_every = integer(doc, "eval_every", where, t.eval_every);
  t.patience = integer(doc, "patience", where, t.patience);
  t.validation_fraction = number(doc, "validation_fraction", where, t.validation_fraction);
  t.test_samples_per_class = integer(doc, "test_samples_per_class", where, t.test_samples_per_class);
  t.eval_offsets = integers(doc, "eval_offsets", where, t.eval_offsets);
  const auto seed = integer(doc, "seed", where, static_cast<std::int64_t>(t.seed));
  if (seed < 0) throw ConfigError("field 'training.seed' must be >= 0");
  t.seed = static_cast<std::uint64_t>(seed);
  if (doc.contains("features")) {
    const json& fj = doc.at("features");
    check_keys(fj, {"s", "q", "l"}, where + ".features");
    setup.features.s = integer(fj, "s", where + ".features", setup.features.s);
    setup.features.q = integer(fj, "q", where + ".features", setup.features.q);
    setup.features.l = integer(fj, "l", where + ".features", setup.features.l);
  }
  t.validate(setup.features);
  return setup;
}

TrainingSetup load_training(const std::filesystem::path& path) { return parse_training(read_json(path)); }

}  // namespace powlab
