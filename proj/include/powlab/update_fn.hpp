#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace powlab {

/// Ethereum's piecewise rule: (floor(T/9) - 1)/2048 for 0 < T <= 900, 99/2048 above.
struct EthereumUpdate {};

/// Bitcoin's retarget rule 1 - N*beta/T_previous. beta in seconds.
struct BitcoinUpdate {
  std::int64_t n = 2016;
  double beta = 600.0;
};

/// Shifted and scaled arctan: a * (atan(b * (t - c)) + d).
///
/// a sets the volatility, b (1/s) the slope, c (s) the center and d the
/// vertical shift. sup|f| = a * (pi/2 + |d|) must stay below one so that a
/// single update can never drive the difficulty to zero.
struct ArctanUpdate {
  double a = 1e-3;
  double b = 1e-2;
  double c = 11.0;
  double d = 0.0;

  void validate() const;
};

using UpdateFunction = std::variant<EthereumUpdate, BitcoinUpdate, ArctanUpdate>;

double ethereum_update(double block_time);
double bitcoin_update(double t_previous, std::int64_t n, double beta);
double eval_arctan(const ArctanUpdate& f, double t);

double evaluate(const UpdateFunction& f, double t_previous);

/// Least upper bound of f over (0, inf).
double supremum(const UpdateFunction& f);

/// Points where f is discontinuous or changes fastest; used to split quadrature.
std::vector<double> feature_points(const UpdateFunction& f);

std::string describe(const UpdateFunction& f);

/// Law of T_previous under stationary block production.
///
/// Exponential(beta) for single-block windows, Erlang(shape, beta) for sums of
/// `shape` block times. PointMass concentrates all mass at `beta`; it exists
/// for degenerate calibration checks.
struct TPreviousDistribution {
  enum class Kind { exponential, erlang, point_mass };

  Kind kind = Kind::exponential;
  double beta = 1.0;
  std::int64_t shape = 1;

  static TPreviousDistribution exponential(double beta);
  static TPreviousDistribution erlang(std::int64_t shape, double beta);
  static TPreviousDistribution point_mass(double at);

  void validate() const;
  double mean() const;
  std::string kind_name() const;
};

/// Probability density of T_previous at t >= 0. Erlang is evaluated in log space.
double density(const TPreviousDistribution& dist, double t);

/// Result of integrating f * g, with diagnostics for the calibration report.
struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  double l1_norm = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double tail_mass = 0.0;
  std::size_t segments = 0;
};

inline constexpr double kQuadratureAbsTolerance = 1e-10;
inline constexpr double kTailMassBound = 1e-12;

/// E[f(T)] under dist by adaptive Gauss-Kronrod on a truncated range.
///
/// `breaks` lists points where f is discontinuous; `sup_abs_f` bounds the
/// contribution of the truncated tails. Throws NumericalError when the
/// accumulated error estimate exceeds kQuadratureAbsTolerance.
QuadratureResult expectation(const std::function<double(double)>& f, double sup_abs_f,
                             std::span<const double> breaks, const TPreviousDistribution& dist);

/// Drift integral: the stationary mean of f, which must vanish for zero drift.
QuadratureResult condition1(const UpdateFunction& f, const TPreviousDistribution& dist);

inline double condition1_residual(const UpdateFunction& f, const TPreviousDistribution& dist) {
  return condition1(f, dist).value;
}

/// D making condition1_residual(ArctanUpdate{a, b, c, D}, dist) vanish. The
/// residual is affine in D with slope a, so the root is exact.
double solve_shift(double a, double b, double c, const TPreviousDistribution& dist);

/// C making the residual vanish for fixed a, b, d. The residual decreases
/// monotonically in C; solved by bracketing root search.
double solve_center(double a, double b, double d, const TPreviousDistribution& dist);

/// Mean beta of the Erlang(shape, beta) law at which f has zero drift.
/// The residual must change sign on [beta_lo, beta_hi].
double zero_drift_mean(const UpdateFunction& f, std::int64_t shape, double beta_lo, double beta_hi);

/// sup f_old / sup f_new. Throws std::domain_error when sup f_new <= 0.
double amplitude_ratio(const UpdateFunction& f_old, const UpdateFunction& f_new);

}  // namespace powlab
