#include <cmath>
#include <filesystem>
#include <sstream>

#include "doctest.h"

#include "powlab/errors.hpp"
#include "powlab/experiment.hpp"
#include "powlab/model_io.hpp"
#include "powlab/rng.hpp"
#include "powlab/trace_io.hpp"

using namespace powlab;
using nlohmann::json;

namespace {

const std::filesystem::path kConfigs = POWLAB_CONFIG_DIR;

std::vector<ChainRecord> parse_csv(const std::string& text) {
  std::istringstream in(text);
  return load_chain_csv(in);
}

}  // namespace

TEST_CASE("chain CSV derives block times") {
  const auto r = parse_csv("height,timestamp,difficulty\n1,0,5\n2,13,6\n3,27,7\n");
  REQUIRE(r.size() == 2);
  CHECK(r[0].block_time == 13.0);
  CHECK(r[1].block_time == 14.0);
  CHECK(r[0].height == 2);
  CHECK(r[1].difficulty == 7.0);
  // Column order is free and CRLF line ends are tolerated.
  const auto s = parse_csv("difficulty,height,timestamp\r\n5,10,100\r\n6,11,112\r\n");
  REQUIRE(s.size() == 1);
  CHECK(s[0].block_time == 12.0);
}

TEST_CASE("chain CSV validation") {
  CHECK_THROWS_AS(parse_csv("height,timestamp,difficulty\n1,0,5\n2,13,6\n3,10,7\n"), DataError);
  CHECK_THROWS_AS(parse_csv("height,timestamp,difficulty\n1,0,5\n3,13,6\n"), DataError);
  CHECK_THROWS_AS(parse_csv("height,timestamp\n1,0\n"), DataError);
  CHECK_THROWS_AS(parse_csv(""), DataError);
  CHECK_THROWS_AS(parse_csv("height,timestamp,difficulty\n1,0,-5\n"), DataError);
  CHECK_THROWS_AS(parse_csv("height,timestamp,difficulty,block_time\n1,0,5,0\n2,13,6,12\n"), DataError);

  try {
    parse_csv("height,timestamp,difficulty\n1,0,5\n2,abc,6\n");
    FAIL("expected a parse error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  try {
    parse_csv("height,timestamp,difficulty\n1,0,5\n2,13,6\n3,10,7\n4,11,7\n5,9,7\n");
    FAIL("expected a validation error");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find('3') != std::string::npos);
    CHECK(msg.find('5') != std::string::npos);
  }
}

TEST_CASE("trace CSV round trip") {
  HashRateScenario s{1.455e14, {{500, 2e14}}, 2000};
  const auto trace = run_simulation(s, ControllerSpec::ethereum(), {.seed = 12}, 1.455e14 * 13.0);
  std::stringstream buf;
  write_trace_csv(buf, trace);
  const auto back = load_chain_csv(buf);
  CHECK(back == trace);
}

TEST_CASE("17-digit rendering round-trips") {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double v = std::exp(60.0 * (rng.uniform() - 0.5));
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("model round trip is bit-exact") {
  MlpModel m = MlpModel::random(11, 25, 9);
  Rng rng(4);
  for (std::size_t i = 0; i < m.inputs; ++i) {
    m.feature_mean[i] = rng.normal();
    m.feature_std[i] = 0.1 + rng.uniform();
  }
  for (double& b : m.b2) b = rng.normal();
  std::stringstream buf;
  save_model(buf, m);
  const std::string bytes = buf.str();
  CHECK(bytes.size() == 8 + 4 * 4 + 8 * (2 * 11 + m.parameter_count()));
  const MlpModel back = load_model(buf);
  CHECK(back.inputs == 11);
  CHECK(back.hidden == 25);
  CHECK(back.flatten() == m.flatten());
  CHECK(back.feature_mean == m.feature_mean);
  CHECK(back.feature_std == m.feature_std);

  std::stringstream again;
  save_model(again, back);
  CHECK(again.str() == bytes);

  std::string bad = bytes;
  bad[0] = 'X';
  std::istringstream bad_magic(bad);
  CHECK_THROWS_AS(load_model(bad_magic), DataError);
  std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_model(truncated), DataError);
  std::istringstream trailing(bytes + "x");
  CHECK_THROWS_AS(load_model(trailing), DataError);
  std::string wrong_version = bytes;
  wrong_version[8] = 7;
  std::istringstream version(wrong_version);
  CHECK_THROWS_AS(load_model(version), DataError);
}

TEST_CASE("minimal experiment config gets defaults") {
  const ExperimentConfig cfg = load_experiment(kConfigs / "minimal.json");
  CHECK(cfg.scenario.length == 20000);
  CHECK(cfg.scenario.events.empty());
  CHECK(cfg.simulation.seed == 1);
  CHECK(cfg.simulation.propagation_delay == 0.0);
  CHECK(cfg.simulation.min_difficulty == 1.0);
  CHECK_FALSE(cfg.simulation.integer_timestamps);
  CHECK(cfg.analysis.target_time == doctest::Approx(9.0 / std::log(2.0)).epsilon(1e-10));
  CHECK(cfg.initial_difficulty == doctest::Approx(1.455e14 * 9.0 / std::log(2.0)).epsilon(1e-10));
  CHECK(cfg.analysis.windows == std::vector<std::int64_t>{2000, 5000, 50000});
  CHECK(cfg.analysis.periods.size() == 2);
  CHECK(std::holds_alternative<EthereumUpdate>(cfg.controller.update));
  CHECK(cfg.resolved["simulation"]["seed"] == 1);
  CHECK(cfg.resolved["controller"]["preset"] == "ethereum");
  CHECK(cfg.resolved["analysis"]["convergence_band"] == 0.05);
}

TEST_CASE("shipped replication config lists six rate events") {
  const ExperimentConfig cfg = load_experiment(kConfigs / "injection_ethereum.json");
  CHECK(cfg.scenario.length == 300000);
  REQUIRE(cfg.scenario.events.size() == 6);
  const std::int64_t heights[] = {50000, 100000, 150000, 155000, 200000, 250000};
  for (std::size_t i = 0; i < 6; ++i) CHECK(cfg.scenario.events[i].height == heights[i]);
  CHECK(cfg.scenario.events[0].rate == doctest::Approx(1.455e14 * 1.2));
  CHECK(cfg.scenario.events[2].rate == doctest::Approx(1.455e14 * 1.4));

  // Same schedule as the built-in one.
  const HashRateScenario builtin = injection_scenario();
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(builtin.events[i].height == heights[i]);
    CHECK(builtin.events[i].rate == doctest::Approx(cfg.scenario.events[i].rate).epsilon(1e-12));
  }
}

TEST_CASE("arctan config solves its shift") {
  const ExperimentConfig cfg = load_experiment(kConfigs / "injection_arctan.json");
  const auto& f = std::get<ArctanUpdate>(cfg.controller.update);
  CHECK(f.a == 1e-3);
  CHECK(std::abs(condition1_residual(f, TPreviousDistribution::exponential(cfg.analysis.target_time))) < 1e-10);
  CHECK(cfg.resolved["controller"]["update"]["D"] == f.d);
}

TEST_CASE("bitcoin config pairs window and epoch") {
  const ExperimentConfig cfg = load_experiment(kConfigs / "bitcoin.json");
  CHECK(cfg.controller.t_previous_window == 2016);
  CHECK(std::get<EveryNIndicator>(cfg.controller.indicator).n == 2016);
}

TEST_CASE("config errors") {
  const json base = {{"scenario", {{"length", 10}}}};
  CHECK_NOTHROW(parse_experiment(base));

  json unknown = base;
  unknown["scenario"]["lenght"] = 3;
  try {
    parse_experiment(unknown);
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("lenght") != std::string::npos);
  }
  json top = base;
  top["extra"] = true;
  CHECK_THROWS_AS(parse_experiment(top), ConfigError);

  CHECK_THROWS_AS(parse_experiment(json::object()), ConfigError);
  CHECK_THROWS_AS(parse_experiment({{"scenario", {{"length", -1}}}}), ConfigError);
  CHECK_THROWS_AS(parse_experiment({{"scenario", {{"length", "ten"}}}}), ConfigError);
  CHECK_THROWS_AS(parse_experiment({{"scenario", {{"length", 10}}}, {"controller", {{"preset", "litecoin"}}}}),
                  ConfigError);
  CHECK_THROWS_AS(parse_experiment({{"scenario", {{"length", 10}}},
                                    {"controller", {{"update", {{"kind", "arctan"}, {"A", -1.0}}}}}}),
                  ConfigError);
  CHECK_THROWS_AS(parse_experiment({{"scenario", {{"length", 10}}},
                                    {"controller",
                                     {{"indicator", {{"kind", "neural"}, {"model", "no_such_model.bin"}}}}}}),
                  ConfigError);
  CHECK_THROWS_AS(load_experiment(kConfigs / "does_not_exist.json"), ConfigError);
}

TEST_CASE("training config") {
  const TrainingSetup t = load_training(kConfigs / "training.json");
  CHECK(t.features.s == 200);
  CHECK(t.features.q == 11);
  CHECK(t.features.l == 2000);
  CHECK(t.training.anomaly_bound == 0.2);
  CHECK(t.training.hidden == 25);

  const TrainingSetup d = parse_training(json::object());
  CHECK(d.training.samples_per_class == TrainingConfig{}.samples_per_class);
  CHECK(parse_training({{"seed", 9}, {"features", {{"l", 100}}}}).features.l == 100);
  CHECK_THROWS_AS(parse_training({{"sampels", 9}}), ConfigError);
  CHECK_THROWS_AS(parse_training({{"anomaly_bound", 0.9}}), ConfigError);
}
