#include <cmath>

#include "doctest.h"

#include "powlab/errors.hpp"
#include "powlab/training.hpp"

using namespace powlab;

namespace {

const FeatureConfig kSmall{10, 4, 50};

TrainingConfig small_config() {
  TrainingConfig cfg;
  cfg.samples_per_class = 60;
  cfg.test_samples_per_class = 20;
  cfg.post_change_offsets = {30, 60};
  return cfg;
}

}  // namespace

TEST_CASE("labels follow the closed anomaly bound") {
  CHECK(label_for_change(0.15, 0.2) == ChangeCase::normal);
  CHECK(label_for_change(-0.15, 0.2) == ChangeCase::normal);
  CHECK(label_for_change(0.45, 0.2) == ChangeCase::abnormal);
  CHECK(label_for_change(-0.45, 0.2) == ChangeCase::abnormal);
  CHECK(label_for_change(0.20, 0.2) == ChangeCase::normal);
  CHECK(label_for_change(-0.20, 0.2) == ChangeCase::normal);
  CHECK(label_for_change(0.2000001, 0.2) == ChangeCase::abnormal);
}

TEST_CASE("training set is balanced and consistent") {
  const TrainingConfig cfg = small_config();
  const Dataset d = generate_training_set(cfg, kSmall);
  CHECK(d.inputs == 4);
  CHECK(d.size() == 180);
  CHECK(d.features.size() == 180 * 4);
  const auto counts = d.class_counts();
  CHECK(counts[0] == 60);
  CHECK(counts[1] == 60);
  CHECK(counts[2] == 60);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double c = d.changes[i];
    CHECK(c >= cfg.change_min);
    CHECK(c <= cfg.change_max);
    if (d.labels[i] == 0) {
      CHECK(c == 0.0);
      CHECK(d.offsets[i] == 0);
    } else {
      CHECK(static_cast<int>(label_for_change(c, cfg.anomaly_bound)) == d.labels[i]);
      CHECK((d.offsets[i] == 30 || d.offsets[i] == 60));
    }
  }
  for (double v : d.features) {
    CHECK(std::isfinite(v));
    CHECK(v > 0.0);
  }
}

TEST_CASE("training set generation is deterministic") {
  TrainingConfig cfg = small_config();
  const Dataset a = generate_training_set(cfg, kSmall);
  const Dataset b = generate_training_set(cfg, kSmall);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);
  cfg.seed = 2;
  CHECK(generate_training_set(cfg, kSmall).features != a.features);
}

TEST_CASE("unchanged-chain case 1 option stays balanced") {
  TrainingConfig cfg = small_config();
  cfg.case1_from_unchanged_chain = true;
  const auto counts = generate_training_set(cfg, kSmall).class_counts();
  CHECK(counts[0] == 60);
  CHECK(counts[1] == 60);
  CHECK(counts[2] == 60);
}

TEST_CASE("evaluation set uses a single offset") {
  const TrainingConfig cfg = small_config();
  const Dataset d = generate_evaluation_set(cfg, kSmall, 77, 5);
  CHECK(d.size() == 60);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK((d.offsets[i] == 0 || d.offsets[i] == 77));
}

TEST_CASE("resolved defaults") {
  TrainingConfig cfg;
  const FeatureConfig paper{200, 11, 2000};
  CHECK(cfg.resolved_change_height(paper) == 4001);
  cfg.post_change_offsets.clear();
  CHECK(cfg.resolved_post_offsets(paper) == std::vector<std::int64_t>{2000});
}

TEST_CASE("training config validation") {
  const TrainingConfig good = small_config();
  CHECK_NOTHROW(good.validate(kSmall));
  auto broken = [&](auto edit) {
    TrainingConfig c = good;
    edit(c);
    return c;
  };
  CHECK_THROWS_AS(broken([](auto& c) { c.anomaly_bound = 0.7; }).validate(kSmall), ConfigError);
  CHECK_THROWS_AS(broken([](auto& c) { c.change_min = 0.1; }).validate(kSmall), ConfigError);
  CHECK_THROWS_AS(broken([](auto& c) { c.samples_per_class = 0; }).validate(kSmall), ConfigError);
  CHECK_THROWS_AS(broken([](auto& c) { c.change_height = 50; }).validate(kSmall), ConfigError);
  CHECK_THROWS_AS(broken([](auto& c) { c.post_change_offsets = {0}; }).validate(kSmall), ConfigError);
  CHECK_THROWS_AS(broken([](auto& c) { c.learning_rate = 0.0; }).validate(kSmall), ConfigError);
  CHECK_THROWS_AS(broken([](auto& c) { c.momentum = 1.0; }).validate(kSmall), ConfigError);
  CHECK_THROWS_AS(broken([](auto& c) { c.validation_fraction = 1.0; }).validate(kSmall), ConfigError);
}

TEST_CASE("small end-to-end training run") {
  TrainingConfig cfg = small_config();
  cfg.max_epochs = 200;
  cfg.eval_offsets = {30, 60};
  const TrainingResult r = train_and_evaluate(cfg, kSmall);
  CHECK(r.report.epochs_run >= 1);
  CHECK(std::isfinite(r.report.train_loss));
  REQUIRE(r.report.held_out.size() == 2);
  CHECK(r.report.held_out[0].blocks_since_change == 30);
  CHECK(r.report.held_out[1].examples == 60);
  // Better than the 1/3 of guessing even at this toy scale.
  CHECK(r.report.training_accuracy.overall > 0.4);
}
