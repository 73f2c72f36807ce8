#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <boost/circular_buffer.hpp>

namespace powlab {

/// Layout of the variance features: q windows of l block times, consecutive
/// windows ending s blocks apart.
struct FeatureConfig {
  std::int64_t s = 200;
  std::int64_t q = 11;
  std::int64_t l = 2000;

  void validate() const;
  /// Block times needed before every feature is defined: (q-1)*s + l.
  std::int64_t history_required() const { return (q - 1) * s + l; }
};

/// Incremental sliding-window variance features.
///
/// Only the newest window (feature 0) is updated per block, in O(1), with a
/// sliding mean/M2 recurrence that is re-synchronised by an exact two-pass
/// pass every l pushes. Older features are read back from the history of
/// feature-0 values, so A_k^(j) == A_{k-s}^(j-1) holds bit for bit. Storage is
/// l block times plus (q-1)*s + 1 past variances.
class FeatureState {
 public:
  explicit FeatureState(FeatureConfig cfg);

  void push(double block_time);

  bool ready() const { return pushes_ >= cfg_.history_required(); }
  std::int64_t pushes() const { return pushes_; }
  const FeatureConfig& config() const { return cfg_; }

  /// Population variance of the newest l block times, if l have been seen.
  std::optional<double> newest_variance() const;

  /// [A^(0), ..., A^(q-1)], or nullopt during warm-up.
  std::optional<std::vector<double>> features() const;

 private:
  void resync();

  FeatureConfig cfg_;
  boost::circular_buffer<double> window_;
  boost::circular_buffer<double> variances_;
  double mean_ = 0.0;
  double m2_ = 0.0;
  std::int64_t pushes_ = 0;
  std::int64_t since_resync_ = 0;
};

/// Two-pass population variance of values[end - l + 1 .. end]; reference path.
double batch_window_variance(const std::vector<double>& values, std::int64_t end, std::int64_t l);

/// Features at index `end` of a complete series, computed window by window.
std::vector<double> batch_features(const std::vector<double>& values, std::int64_t end, const FeatureConfig& cfg);

}  // namespace powlab
