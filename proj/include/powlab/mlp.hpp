#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "powlab/features.hpp"

namespace powlab {

inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::size_t kDefaultHidden = 25;

/// Pattern of the block-time trend. Stored as class index 0..2.
enum class ChangeCase : int { none = 0, normal = 1, abnormal = 2 };

using ClassProbabilities = std::array<double, kNumClasses>;

/// Two-layer classifier: q inputs -> tanh hidden layer -> softmax over the three cases.
///
/// Raw inputs are window variances. They are mapped to log space and z-scored
/// with per-input statistics fitted on the training split before entering the
/// network. Weight matrices are row-major, one row per output unit.
struct MlpModel {
  std::size_t inputs = 0;
  std::size_t hidden = kDefaultHidden;
  std::vector<double> feature_mean;  // log-variance space
  std::vector<double> feature_std;
  std::vector<double> w1;  // hidden x inputs
  std::vector<double> b1;  // hidden
  std::vector<double> w2;  // classes x hidden
  std::vector<double> b2;  // classes

  /// All-zero weights with identity standardization.
  static MlpModel zeros(std::size_t inputs, std::size_t hidden = kDefaultHidden);
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
  static MlpModel random(std::size_t inputs, std::size_t hidden, std::uint64_t seed);

  void validate() const;
  std::size_t parameter_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> params);
};

/// Log-transform and z-score raw variances. Throws std::domain_error on
/// non-finite or negative input.
std::vector<double> standardize(const MlpModel& model, std::span<const double> variances);

/// Network output for already standardized inputs.
ClassProbabilities forward(const MlpModel& model, std::span<const double> standardized);

/// Class probabilities (none, normal, abnormal) for raw variance features.
ClassProbabilities classify(const MlpModel& model, std::span<const double> variances);

/// Probability of a normal change, used as the difficulty indicator. nullopt
/// while the feature state is still warming up.
std::optional<double> indicator(const MlpModel& model, const FeatureState& state);

/// Mean cross-entropy over a batch of standardized inputs (row-major, one row
/// per example) and the gradient with respect to flatten() order.
struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};
LossGradient loss_and_gradient(const MlpModel& model, std::span<const double> inputs, std::span<const int> labels);

double mean_loss(const MlpModel& model, std::span<const double> inputs, std::span<const int> labels);

}  // namespace powlab
