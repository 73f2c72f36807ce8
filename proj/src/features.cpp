#include "powlab/features.hpp"

#include <algorithm>

#include "powlab/errors.hpp"

namespace powlab {

void FeatureConfig::validate() const {
  if (s < 1) throw ConfigError("features: s must be >= 1");
  if (q < 2) throw ConfigError("features: q must be >= 2");
  if (l < 2) throw ConfigError("features: l must be >= 2");
}

FeatureState::FeatureState(FeatureConfig cfg)
    : cfg_(cfg),
      window_(static_cast<std::size_t>(cfg.l)),
      variances_(static_cast<std::size_t>((cfg.q - 1) * cfg.s + 1)) {
  cfg_.validate();
}

void FeatureState::push(double block_time) {
  const auto l = static_cast<double>(cfg_.l);
  if (window_.full()) {
    const double old = window_.front();
    window_.push_back(block_time);
    const double new_mean = mean_ + (block_time - old) / l;
    m2_ += (block_time - old) * (block_time - new_mean + old - mean_);
    mean_ = new_mean;
  } else {
    window_.push_back(block_time);
    const double n = static_cast<double>(window_.size());
    const double delta = block_time - mean_;
    mean_ += delta / n;
    m2_ += delta * (block_time - mean_);
  }
  ++pushes_;
  if (++since_resync_ >= cfg_.l) resync();
  if (window_.full()) variances_.push_back(std::max(0.0, m2_ / l));
}

void FeatureState::resync() {
  double sum = 0.0;
  for (double v : window_) sum += v;
  mean_ = sum / static_cast<double>(window_.size());
  double m2 = 0.0;
  for (double v : window_) m2 += (v - mean_) * (v - mean_);
  m2_ = m2;
  since_resync_ = 0;
}

std::optional<double> FeatureState::newest_variance() const {
  if (variances_.empty()) return std::nullopt;
  return variances_.back();
}

std::optional<std::vector<double>> FeatureState::features() const {
  if (!ready()) return std::nullopt;
  std::vector<double> out(static_cast<std::size_t>(cfg_.q));
  const std::size_t last = variances_.size() - 1;
  for (std::int64_t j = 0; j < cfg_.q; ++j) out[j] = variances_[last - static_cast<std::size_t>(j * cfg_.s)];
  return out;
}

double batch_window_variance(const std::vector<double>& values, std::int64_t end, std::int64_t l) {
  const std::int64_t begin = end - l + 1;
  if (begin < 0 || end >= static_cast<std::int64_t>(values.size()))
    throw std::out_of_range("batch_window_variance: window outside series");
  double sum = 0.0;
  for (std::int64_t i = begin; i <= end; ++i) sum += values[i];
  const double mean = sum / static_cast<double>(l);
  double m2 = 0.0;
  for (std::int64_t i = begin; i <= end; ++i) m2 += (values[i] - mean) * (values[i] - mean);
  return m2 / static_cast<double>(l);
}

std::vector<double> batch_features(const std::vector<double>& values, std::int64_t end, const FeatureConfig& cfg) {
  std::vector<double> out(static_cast<std::size_t>(cfg.q));
  for (std::int64_t j = 0; j < cfg.q; ++j) out[j] = batch_window_variance(values, end - j * cfg.s, cfg.l);
  return out;
}

}  // namespace powlab
