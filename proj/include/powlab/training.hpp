#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "powlab/features.hpp"
#include "powlab/mlp.hpp"

namespace powlab {

/// Monte-Carlo training protocol for the change classifier.
///
/// Every sample is a chain at constant difficulty tuned to the target block
/// time under base_rate; after block change_height the rate jumps by a
/// fraction drawn from [change_min, change_max]. Changes within
/// +-anomaly_bound (closed) are normal, larger ones abnormal.
struct TrainingConfig {
  double base_rate = 1.455e14;
  /// Steady-state block time used to set the constant difficulty; nullopt
  /// means the zero-drift mean of the Ethereum rule.
  std::optional<double> target_block_time;
  double change_min = -0.60;
  double change_max = 0.60;
  double anomaly_bound = 0.20;
  std::int64_t samples_per_class = 3000;
  /// Height of the last block mined at the old rate; 0 picks history_required() + 1.
  std::int64_t change_height = 0;
  /// Blocks elapsed since the change at which post-change examples are cut,
  /// cycled over the samples. Empty means the single offset s*(q-1).
  std::vector<std::int64_t> post_change_offsets{250, 500, 1000, 2000, 3000, 4000, 5000};
  /// Draw case-1 examples from chains with no injected change instead of the pre-change window.
  bool case1_from_unchanged_chain = false;

  std::size_t hidden = kDefaultHidden;
  double learning_rate = 0.3;
  double momentum = 0.9;
  std::int64_t max_epochs = 10000;
  std::int64_t eval_every = 25;
  std::int64_t patience = 12;
  double validation_fraction = 0.2;

  /// Held-out evaluation: examples per class and blocks-since-change checkpoints.
  std::int64_t test_samples_per_class = 500;
  std::vector<std::int64_t> eval_offsets{1000, 5000};

  std::uint64_t seed = 1;

  void validate(const FeatureConfig& features) const;
  std::int64_t resolved_change_height(const FeatureConfig& features) const;
  std::vector<std::int64_t> resolved_post_offsets(const FeatureConfig& features) const;
};

/// Label of a post-change example given the applied change fraction.
ChangeCase label_for_change(double change, double anomaly_bound);

/// Raw variance features with labels, row-major (one row of q values per example).
struct Dataset {
  std::size_t inputs = 0;
  std::vector<double> features;
  std::vector<int> labels;
  std::vector<double> changes;
  std::vector<std::int64_t> offsets;  // blocks since change; 0 for case-1 rows

  std::size_t size() const { return labels.size(); }
  std::array<std::size_t, kNumClasses> class_counts() const;
};

/// Balanced training set. Sample i simulates its own chain from derive_seed(seed, i).
Dataset generate_training_set(const TrainingConfig& cfg, const FeatureConfig& features);

/// Balanced set whose post-change rows are all cut `offset` blocks after the change.
Dataset generate_evaluation_set(const TrainingConfig& cfg, const FeatureConfig& features, std::int64_t offset,
                                std::uint64_t seed);

struct AccuracyReport {
  std::int64_t blocks_since_change = 0;
  std::size_t examples = 0;
  double overall = 0.0;
  std::array<double, kNumClasses> per_class{};
};

AccuracyReport evaluate_accuracy(const MlpModel& model, const Dataset& data, std::int64_t blocks_since_change = 0);

struct TrainingReport {
  std::int64_t epochs_run = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  AccuracyReport training_accuracy;
  std::vector<AccuracyReport> held_out;
};

struct TrainingResult {
  MlpModel model;
  TrainingReport report;
};

/// Fit standardization on the training split, then minimise cross-entropy by
/// full-batch gradient descent with momentum, keeping the parameters with the
/// best validation loss. Throws NumericalError if the loss becomes non-finite.
TrainingResult train(const Dataset& data, const TrainingConfig& cfg);

/// train() followed by held-out evaluation at each cfg.eval_offsets checkpoint.
TrainingResult train_and_evaluate(const TrainingConfig& cfg, const FeatureConfig& features);

/// Zero-drift mean block time of the Ethereum rule under exponential block times.
double ethereum_zero_drift_mean();

}  // namespace powlab
