#include "powlab/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "powlab/chain_sim.hpp"
#include "powlab/errors.hpp"
#include "powlab/rng.hpp"
#include "powlab/update_fn.hpp"

namespace powlab {

namespace {

constexpr std::uint64_t kUnchangedStream = 0x5bd1e9955bd1e995ULL;
constexpr std::uint64_t kInitStream = 0x2545f4914f6cdd1dULL;
constexpr std::uint64_t kSplitStream = 0x9fb21c651e98df25ULL;

struct SampleWindows {
  std::vector<double> pre;
  std::vector<double> post;
};

// Block times at heights 1..change_height follow the base rate, later ones the changed rate.
SampleWindows simulate_sample(const TrainingConfig& cfg, const FeatureConfig& fcfg, double difficulty, double change,
                              std::int64_t change_height, std::int64_t offset, Rng& rng) {
  FeatureState state(fcfg);
  SampleWindows out;
  const double changed_rate = cfg.base_rate * (1.0 + change);
  const std::int64_t last = change_height + offset;
  for (std::int64_t k = 1; k <= last; ++k) {
    const double rate = k <= change_height ? cfg.base_rate : changed_rate;
    state.push(sample_block_time(difficulty, rate, 0.0, rng));
    if (k == change_height - 1) out.pre = *state.features();
  }
  out.post = *state.features();
  return out;
}

double draw_change(Rng& rng, const TrainingConfig& cfg, ChangeCase wanted) {
  const double u = rng.uniform();
  if (wanted == ChangeCase::normal) return -cfg.anomaly_bound + 2.0 * cfg.anomaly_bound * u;
  const double below = -cfg.anomaly_bound - cfg.change_min;
  const double above = cfg.change_max - cfg.anomaly_bound;
  const double x = u * (below + above);
  return x < below ? cfg.change_min + x : cfg.anomaly_bound + (x - below);
}

void append(Dataset& d, const std::vector<double>& row, ChangeCase label, double change, std::int64_t offset) {
  d.features.insert(d.features.end(), row.begin(), row.end());
  d.labels.push_back(static_cast<int>(label));
  d.changes.push_back(change);
  d.offsets.push_back(offset);
}

Dataset generate(const TrainingConfig& cfg, const FeatureConfig& fcfg, const std::vector<std::int64_t>& offsets,
                 std::int64_t per_class, std::uint64_t seed) {
  cfg.validate(fcfg);
  const double difficulty = cfg.base_rate * cfg.target_block_time.value_or(ethereum_zero_drift_mean());
  const std::int64_t c = cfg.resolved_change_height(fcfg);

  Dataset d;
  d.inputs = static_cast<std::size_t>(fcfg.q);
  const auto rows = static_cast<std::size_t>(3 * per_class);
  d.features.reserve(rows * d.inputs);
  d.labels.reserve(rows);

  // Even samples carry a normal change, odd ones an abnormal change; the
  // pre-change window of every even sample supplies a case-1 row.
  for (std::int64_t i = 0; i < 2 * per_class; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const ChangeCase wanted = i % 2 == 0 ? ChangeCase::normal : ChangeCase::abnormal;
    const double change = draw_change(rng, cfg, wanted);
    const std::int64_t offset = offsets[static_cast<std::size_t>(i / 2) % offsets.size()];
    const SampleWindows w = simulate_sample(cfg, fcfg, difficulty, change, c, offset, rng);
    append(d, w.post, label_for_change(change, cfg.anomaly_bound), change, offset);
    if (i % 2 != 0) continue;
    if (cfg.case1_from_unchanged_chain) {
      Rng quiet(derive_seed(seed ^ kUnchangedStream, static_cast<std::uint64_t>(i)));
      append(d, simulate_sample(cfg, fcfg, difficulty, 0.0, c, offset, quiet).post, ChangeCase::none, 0.0, 0);
    } else {
      append(d, w.pre, ChangeCase::none, 0.0, 0);
    }
  }
  return d;
}

}  // namespace

void TrainingConfig::validate(const FeatureConfig& features) const {
  features.validate();
  if (!(base_rate > 0.0)) throw ConfigError("training: base_rate must be > 0");
  if (target_block_time && !(*target_block_time > 0.0)) throw ConfigError("training: target_block_time must be > 0");
  if (!(change_min < 0.0 && change_max > 0.0 && change_min > -1.0))
    throw ConfigError("training: change range must straddle 0 and stay above -100%");
  if (!(anomaly_bound > 0.0 && -anomaly_bound > change_min && anomaly_bound < change_max))
    throw ConfigError("training: anomaly_bound must lie inside the change range");
  if (samples_per_class < 1 || test_samples_per_class < 1) throw ConfigError("training: sample counts must be >= 1");
  if (change_height != 0 && change_height <= features.history_required())
    throw ConfigError("training: change_height must exceed (q-1)*s + l");
  for (auto o : post_change_offsets)
    if (o < 1) throw ConfigError("training: post_change_offsets must be >= 1");
  for (auto o : eval_offsets)
    if (o < 1) throw ConfigError("training: eval_offsets must be >= 1");
  if (hidden < 1) throw ConfigError("training: hidden width must be >= 1");
  if (!(learning_rate > 0.0) || !(momentum >= 0.0 && momentum < 1.0))
    throw ConfigError("training: learning_rate > 0 and momentum in [0, 1) required");
  if (max_epochs < 1 || eval_every < 1 || patience < 1) throw ConfigError("training: epoch settings must be >= 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw ConfigError("training: validation_fraction must be in (0, 1)");
}

std::int64_t TrainingConfig::resolved_change_height(const FeatureConfig& features) const {
  return change_height != 0 ? change_height : features.history_required() + 1;
}

std::vector<std::int64_t> TrainingConfig::resolved_post_offsets(const FeatureConfig& features) const {
  if (!post_change_offsets.empty()) return post_change_offsets;
  return {features.s * (features.q - 1)};
}

ChangeCase label_for_change(double change, double anomaly_bound) {
  return std::abs(change) <= anomaly_bound ? ChangeCase::normal : ChangeCase::abnormal;
}

std::array<std::size_t, kNumClasses> Dataset::class_counts() const {
  std::array<std::size_t, kNumClasses> counts{};
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

Dataset generate_training_set(const TrainingConfig& cfg, const FeatureConfig& features) {
  return generate(cfg, features, cfg.resolved_post_offsets(features), cfg.samples_per_class, cfg.seed);
}

Dataset generate_evaluation_set(const TrainingConfig& cfg, const FeatureConfig& features, std::int64_t offset,
                                std::uint64_t seed) {
  return generate(cfg, features, {offset}, cfg.test_samples_per_class, seed);
}

AccuracyReport evaluate_accuracy(const MlpModel& model, const Dataset& data, std::int64_t blocks_since_change) {
  AccuracyReport r;
  r.blocks_since_change = blocks_since_change;
  r.examples = data.size();
  std::array<std::size_t, kNumClasses> hits{};
  const auto counts = data.class_counts();
  for (std::size_t e = 0; e < data.size(); ++e) {
    const auto p = classify(model, std::span<const double>(&data.features[e * data.inputs], data.inputs));
    const auto guess = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    if (guess == data.labels[e]) ++hits[static_cast<std::size_t>(guess)];
  }
  std::size_t total = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    r.per_class[c] = counts[c] ? static_cast<double>(hits[c]) / static_cast<double>(counts[c]) : 0.0;
    total += hits[c];
  }
  r.overall = data.size() ? static_cast<double>(total) / static_cast<double>(data.size()) : 0.0;
  return r;
}

TrainingResult train(const Dataset& data, const TrainingConfig& cfg) {
  const std::size_t n = data.size();
  const std::size_t q = data.inputs;
  if (n < 3) throw ConfigError("training: dataset too small");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle(derive_seed(cfg.seed, kSplitStream));
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[shuffle.next_u64() % (i + 1)]);
  const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(cfg.validation_fraction * n)));
  const std::size_t n_train = n - n_val;

  MlpModel model = MlpModel::random(q, cfg.hidden, derive_seed(cfg.seed, kInitStream));

  // Standardization statistics come from the training split only.
  for (std::size_t i = 0; i < q; ++i) {
    double sum = 0.0;
    for (std::size_t t = 0; t < n_train; ++t) sum += std::log(std::max(data.features[order[t] * q + i], 1e-300));
    const double mean = sum / static_cast<double>(n_train);
    double m2 = 0.0;
    for (std::size_t t = 0; t < n_train; ++t) {
      const double z = std::log(std::max(data.features[order[t] * q + i], 1e-300)) - mean;
      m2 += z * z;
    }
    model.feature_mean[i] = mean;
    model.feature_std[i] = std::max(std::sqrt(m2 / static_cast<double>(n_train)), 1e-12);
  }

  auto build = [&](std::size_t from, std::size_t to, std::vector<double>& x, std::vector<int>& y) {
    for (std::size_t t = from; t < to; ++t) {
      const auto row = standardize(model, std::span<const double>(&data.features[order[t] * q], q));
      x.insert(x.end(), row.begin(), row.end());
      y.push_back(data.labels[order[t]]);
    }
  };
  std::vector<double> x_train, x_val;
  std::vector<int> y_train, y_val;
  build(0, n_train, x_train, y_train);
  build(n_train, n, x_val, y_val);

  std::vector<double> params = model.flatten();
  std::vector<double> velocity(params.size(), 0.0);
  std::vector<double> best = params;
  double best_val = mean_loss(model, x_val, y_val);
  double best_train = mean_loss(model, x_train, y_train);
  std::int64_t stall = 0;
  std::int64_t epoch = 0;

  for (epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const LossGradient lg = loss_and_gradient(model, x_train, y_train);
    if (!std::isfinite(lg.loss)) {
      std::ostringstream os;
      os << "training diverged at epoch " << epoch << " (loss " << lg.loss << ", learning rate " << cfg.learning_rate
         << ")";
      throw NumericalError(os.str());
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
      velocity[p] = cfg.momentum * velocity[p] - cfg.learning_rate * lg.gradient[p];
      params[p] += velocity[p];
    }
    model.unflatten(params);

    if (epoch % cfg.eval_every != 0) continue;
    const double val = mean_loss(model, x_val, y_val);
    if (!std::isfinite(val)) throw NumericalError("training diverged: non-finite validation loss");
    if (val < best_val - 1e-7) {
      best_val = val;
      best_train = lg.loss;
      best = params;
      stall = 0;
    } else if (++stall >= cfg.patience) {
      break;
    }
  }

  model.unflatten(best);
  TrainingResult result{model, {}};
  result.report.epochs_run = std::min(epoch, cfg.max_epochs);
  result.report.train_loss = best_train;
  result.report.validation_loss = best_val;
  result.report.training_accuracy = evaluate_accuracy(model, data);
  return result;
}

TrainingResult train_and_evaluate(const TrainingConfig& cfg, const FeatureConfig& features) {
  TrainingResult result = train(generate_training_set(cfg, features), cfg);
  for (std::size_t i = 0; i < cfg.eval_offsets.size(); ++i) {
    const std::int64_t offset = cfg.eval_offsets[i];
    const Dataset test = generate_evaluation_set(cfg, features, offset, derive_seed(~cfg.seed, i));
    result.report.held_out.push_back(evaluate_accuracy(result.model, test, offset));
  }
  return result;
}

double ethereum_zero_drift_mean() {
  static const double beta = zero_drift_mean(EthereumUpdate{}, 1, 5.0, 50.0);
  return beta;
}

}  // namespace powlab
