#include "powlab/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace powlab {

namespace {

// Double-double running sum. A window sum is the difference of two prefixes,
// which in plain doubles loses everything below eps * (prefix size); the
// extra word keeps short windows deep in a long chain exact to ~1e-16.
struct Compensated {
  double hi = 0.0;
  double lo = 0.0;

  Compensated plus(double x) const {
    const double s = hi + x;
    const double v = s - hi;
    const double err = (hi - (s - v)) + (x - v);
    return {s, lo + err};
  }
  double minus(const Compensated& other) const { return (hi - other.hi) + (lo - other.lo); }
};

}  // namespace

std::vector<double> HashRateEstimate::defined() const {
  std::vector<double> out;
  out.reserve(rates.size());
  for (const auto& r : rates)
    if (r) out.push_back(*r);
  return out;
}

HashRateEstimate nominal_hash_rate(const std::vector<ChainRecord>& records, std::int64_t window) {
  if (window < 1) throw std::domain_error("nominal_hash_rate: W must be >= 1");
  if (static_cast<std::int64_t>(records.size()) < window)
    throw std::domain_error("nominal_hash_rate: fewer records than W");
  const std::size_t n = records.size();
  const auto w = static_cast<std::size_t>(window);
  std::vector<Compensated> diff_prefix(n + 1);
  std::vector<Compensated> time_prefix(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    diff_prefix[i + 1] = diff_prefix[i].plus(records[i].difficulty);
    time_prefix[i + 1] = time_prefix[i].plus(records[i].block_time);
  }
  HashRateEstimate est{window, std::vector<std::optional<double>>(n)};
  for (std::size_t i = w - 1; i < n; ++i) {
    const double time = time_prefix[i + 1].minus(time_prefix[i + 1 - w]);
    if (time > 0.0) est.rates[i] = diff_prefix[i + 1].minus(diff_prefix[i + 1 - w]) / time;
  }
  return est;
}

HashRateEstimate nominal_hash_rate_naive(const std::vector<ChainRecord>& records, std::int64_t window) {
  if (window < 1) throw std::domain_error("nominal_hash_rate: W must be >= 1");
  if (static_cast<std::int64_t>(records.size()) < window)
    throw std::domain_error("nominal_hash_rate: fewer records than W");
  const auto w = static_cast<std::size_t>(window);
  HashRateEstimate est{window, std::vector<std::optional<double>>(records.size())};
  for (std::size_t i = w - 1; i < records.size(); ++i) {
    double d = 0.0;
    double t = 0.0;
    for (std::size_t j = i + 1 - w; j <= i; ++j) {
      d += records[j].difficulty;
      t += records[j].block_time;
    }
    if (t > 0.0) est.rates[i] = d / t;
  }
  return est;
}

FiveNumberSummary five_number_summary(std::vector<double> values) {
  if (values.empty()) throw std::domain_error("five_number_summary: empty sample");
  std::sort(values.begin(), values.end());
  auto quantile = [&](double p) {
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  return {values.front(), quantile(0.25), quantile(0.5), quantile(0.75), values.back()};
}

PeriodicHashRate periodic_hash_rate(const std::vector<double>& rates, std::int64_t window) {
  if (window < 1) throw std::domain_error("periodic_hash_rate: W must be >= 1");
  const auto w = static_cast<std::size_t>(window);
  const std::size_t periods = rates.size() / w;
  if (periods < 2) throw std::domain_error("periodic_hash_rate: fewer than two full periods");
  PeriodicHashRate out;
  out.window = window;
  for (std::size_t p = 0; p < periods; ++p) {
    double sum = 0.0;
    for (std::size_t i = p * w; i < (p + 1) * w; ++i) sum += rates[i];
    out.period_means.push_back(sum / static_cast<double>(w));
    out.per_block.insert(out.per_block.end(), w, out.period_means.back());
  }
  for (std::size_t p = 1; p < periods; ++p) out.deltas.push_back(out.period_means[p] - out.period_means[p - 1]);
  out.delta_summary = five_number_summary(out.deltas);
  double sum = 0.0;
  for (double d : out.deltas) sum += d;
  out.delta_mean = sum / static_cast<double>(out.deltas.size());
  return out;
}

std::optional<std::int64_t> convergence_time(const std::vector<ChainRecord>& records, std::int64_t from_height,
                                             const ConvergenceSpec& cv) {
  if (cv.moving_average < 1 || !(cv.target_time > 0.0)) return std::nullopt;
  const auto window = static_cast<std::size_t>(cv.moving_average);
  const double lo = cv.target_time * (1.0 - cv.band);
  const double hi = cv.target_time * (1.0 + cv.band);
  double sum = 0.0;
  bool left = false;
  for (std::size_t i = 0; i < records.size(); ++i) {
    sum += records[i].block_time;
    if (i >= window) sum -= records[i - window].block_time;
    if (i + 1 < window || records[i].height < from_height) continue;
    const double avg = sum / static_cast<double>(window);
    const bool inside = avg >= lo && avg <= hi;
    if (!inside) {
      left = true;
    } else if (left) {
      return records[i].height - from_height;
    } else if (records[i].height >= from_height + cv.moving_average) {
      return 0;
    }
  }
  return std::nullopt;
}

PeriodMetrics period_metrics(const std::vector<ChainRecord>& records, const HeightInterval& period,
                             const ConvergenceSpec& convergence) {
  PeriodMetrics m;
  m.period = period;
  double sum_d = 0.0;
  double sum_t = 0.0;
  double sum_change = 0.0;
  std::size_t changes = 0;
  std::vector<double> in_period;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.height < period.begin || r.height >= period.end) continue;
    in_period.push_back(r.difficulty);
    sum_d += r.difficulty;
    sum_t += r.block_time;
    if (i > 0 && records[i - 1].height + 1 == r.height) {
      sum_change += std::abs(r.difficulty / records[i - 1].difficulty - 1.0);
      ++changes;
    }
  }
  if (in_period.empty()) throw std::domain_error("period_metrics: empty period '" + period.name + "'");
  m.blocks = in_period.size();
  const double n = static_cast<double>(m.blocks);
  m.mean_difficulty = sum_d / n;
  double m2 = 0.0;
  for (double d : in_period) m2 += (d - m.mean_difficulty) * (d - m.mean_difficulty);
  m.mse = m2 / n;
  m.mean_block_time = sum_t / n;
  m.mean_abs_relative_change = changes ? sum_change / static_cast<double>(changes) : 0.0;
  m.convergence_blocks = convergence_time(records, period.change_height.value_or(period.begin), convergence);
  return m;
}

double reduction_percent(double baseline, double candidate) {
  if (baseline == 0.0) return candidate == 0.0 ? 0.0 : -INFINITY;
  return 100.0 * (1.0 - candidate / baseline);
}

}  // namespace powlab
