#include "powlab/update_fn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "powlab/errors.hpp"

namespace powlab {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

constexpr double kPi = std::numbers::pi;

// Uniform pieces laid over the integration range before breakpoints are added,
// so that narrow density peaks are never straddled by a single 15-point rule.
constexpr int kBaseSegments = 64;
constexpr unsigned kMaxDepth = 24;
constexpr double kSegmentRelTolerance = 1e-12;

struct Range {
  double lower;
  double upper;
  double tail_mass;
};

Range integration_range(const TPreviousDistribution& dist) {
  const double target = kTailMassBound * 0.1;
  if (dist.kind == TPreviousDistribution::Kind::exponential) {
    const double upper = dist.beta * -std::log(target);
    return {0.0, upper, std::exp(-upper / dist.beta)};
  }
  const double n = static_cast<double>(dist.shape);
  const double mean = n * dist.beta;
  const double sd = std::sqrt(n) * dist.beta;
  double lower = std::max(0.0, mean - 10.0 * sd);
  double upper = mean + 10.0 * sd;
  using boost::math::gamma_p;
  using boost::math::gamma_q;
  while (gamma_q(n, upper / dist.beta) >= target / 2) upper += sd;
  while (lower > 0.0 && gamma_p(n, lower / dist.beta) >= target / 2) lower = std::max(0.0, lower - sd);
  const double low_tail = lower > 0.0 ? gamma_p(n, lower / dist.beta) : 0.0;
  return {lower, upper, gamma_q(n, upper / dist.beta) + low_tail};
}

}  // namespace

void ArctanUpdate::validate() const {
  if (!(a > 0.0)) throw ConfigError("arctan update: A must be > 0");
  if (!(b > 0.0)) throw ConfigError("arctan update: B must be > 0");
  if (!std::isfinite(c) || !std::isfinite(d)) throw ConfigError("arctan update: C and D must be finite");
  if (!(a * (kPi / 2 + std::abs(d)) < 1.0))
    throw ConfigError("arctan update: sup|f| = A*(pi/2 + |D|) must be < 1");
}

double ethereum_update(double block_time) {
  if (!(block_time > 0.0)) throw std::domain_error("ethereum_update: block time must be > 0");
  if (block_time > 900.0) return 99.0 / 2048.0;
  return (std::floor(block_time / 9.0) - 1.0) / 2048.0;
}

double bitcoin_update(double t_previous, std::int64_t n, double beta) {
  if (!(t_previous > 0.0)) throw std::domain_error("bitcoin_update: T_previous must be > 0");
  return 1.0 - static_cast<double>(n) * beta / t_previous;
}

double eval_arctan(const ArctanUpdate& f, double t) { return f.a * (std::atan(f.b * (t - f.c)) + f.d); }

double evaluate(const UpdateFunction& f, double t_previous) {
  return std::visit(overloaded{
                        [&](const EthereumUpdate&) { return ethereum_update(t_previous); },
                        [&](const BitcoinUpdate& u) { return bitcoin_update(t_previous, u.n, u.beta); },
                        [&](const ArctanUpdate& u) { return eval_arctan(u, t_previous); },
                    },
                    f);
}

double supremum(const UpdateFunction& f) {
  return std::visit(overloaded{
                        [](const EthereumUpdate&) { return 99.0 / 2048.0; },
                        [](const BitcoinUpdate&) { return 1.0; },
                        [](const ArctanUpdate& u) { return u.a * (kPi / 2 + u.d); },
                    },
                    f);
}

std::vector<double> feature_points(const UpdateFunction& f) {
  return std::visit(overloaded{
                        [](const EthereumUpdate&) {
                          std::vector<double> pts;
                          for (int k = 1; k <= 100; ++k) pts.push_back(9.0 * k);
                          return pts;
                        },
                        [](const BitcoinUpdate&) { return std::vector<double>{}; },
                        [](const ArctanUpdate& u) { return std::vector<double>{u.c}; },
                    },
                    f);
}

std::string describe(const UpdateFunction& f) {
  std::ostringstream os;
  os.precision(17);
  std::visit(overloaded{
                 [&](const EthereumUpdate&) { os << "ethereum"; },
                 [&](const BitcoinUpdate& u) { os << "bitcoin(N=" << u.n << ", beta=" << u.beta << ")"; },
                 [&](const ArctanUpdate& u) {
                   os << "arctan(A=" << u.a << ", B=" << u.b << ", C=" << u.c << ", D=" << u.d << ")";
                 },
             },
             f);
  return os.str();
}

TPreviousDistribution TPreviousDistribution::exponential(double beta) { return {Kind::exponential, beta, 1}; }

TPreviousDistribution TPreviousDistribution::erlang(std::int64_t shape, double beta) {
  return {shape == 1 ? Kind::exponential : Kind::erlang, beta, shape};
}

TPreviousDistribution TPreviousDistribution::point_mass(double at) { return {Kind::point_mass, at, 1}; }

void TPreviousDistribution::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("distribution: beta must be > 0");
  if (shape < 1) throw ConfigError("distribution: shape must be >= 1");
  if (kind == Kind::exponential && shape != 1) throw ConfigError("distribution: exponential has shape 1");
}

double TPreviousDistribution::mean() const {
  return kind == Kind::point_mass ? beta : static_cast<double>(shape) * beta;
}

std::string TPreviousDistribution::kind_name() const {
  switch (kind) {
    case Kind::exponential: return "exponential";
    case Kind::erlang: return "erlang";
    case Kind::point_mass: return "point_mass";
  }
  return "unknown";
}

double density(const TPreviousDistribution& dist, double t) {
  if (t < 0.0) throw std::domain_error("density: t must be >= 0");
  switch (dist.kind) {
    case TPreviousDistribution::Kind::exponential:
      return std::exp(-t / dist.beta) / dist.beta;
    case TPreviousDistribution::Kind::erlang: {
      const double n = static_cast<double>(dist.shape);
      if (t == 0.0) return dist.shape == 1 ? 1.0 / dist.beta : 0.0;
      const double log_g = (n - 1.0) * std::log(t) - t / dist.beta - n * std::log(dist.beta) - std::lgamma(n);
      return std::exp(log_g);
    }
    case TPreviousDistribution::Kind::point_mass:
      throw std::domain_error("density: point mass has no density");
  }
  return 0.0;
}

QuadratureResult expectation(const std::function<double(double)>& f, double sup_abs_f,
                             std::span<const double> breaks, const TPreviousDistribution& dist) {
  dist.validate();
  QuadratureResult out;
  if (dist.kind == TPreviousDistribution::Kind::point_mass) {
    out.value = f(dist.beta);
    out.lower = out.upper = dist.beta;
    return out;
  }

  const Range range = integration_range(dist);
  out.lower = range.lower;
  out.upper = range.upper;
  out.tail_mass = range.tail_mass;

  std::vector<double> edges;
  edges.reserve(kBaseSegments + 1 + breaks.size());
  for (int i = 0; i <= kBaseSegments; ++i)
    edges.push_back(range.lower + (range.upper - range.lower) * i / kBaseSegments);
  for (double b : breaks)
    if (b > range.lower && b < range.upper) edges.push_back(b);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  auto integrand = [&](double t) { return f(t) * density(dist, t); };
  using Rule = boost::math::quadrature::gauss_kronrod<double, 15>;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    double err = 0.0;
    double l1 = 0.0;
    out.value += Rule::integrate(integrand, edges[i], edges[i + 1], kMaxDepth, kSegmentRelTolerance, &err, &l1);
    out.error_estimate += err;
    out.l1_norm += l1;
  }
  out.segments = edges.size() - 1;

  if (!std::isfinite(out.value) || out.error_estimate > kQuadratureAbsTolerance) {
    std::ostringstream os;
    os << "quadrature did not converge: value=" << out.value << " error_estimate=" << out.error_estimate
       << " range=[" << out.lower << ", " << out.upper << "] segments=" << out.segments;
    throw NumericalError(os.str());
  }
  if (sup_abs_f * out.tail_mass > kTailMassBound) {
    std::ostringstream os;
    os << "truncated tail contributes up to " << sup_abs_f * out.tail_mass << " (sup|f|=" << sup_abs_f << ")";
    throw NumericalError(os.str());
  }
  return out;
}

QuadratureResult condition1(const UpdateFunction& f, const TPreviousDistribution& dist) {
  const std::vector<double> breaks = feature_points(f);
  double sup_abs = std::visit(overloaded{
                                  [](const EthereumUpdate&) { return 99.0 / 2048.0; },
                                  [&](const BitcoinUpdate& u) {
                                    // Below the truncation point |f| <= N beta / lower; with no lower
                                    // truncation only the upper tail, where |f| < 1, is cut off.
                                    const double lower = integration_range(dist).lower;
                                    return lower > 0.0 ? std::max(1.0, static_cast<double>(u.n) * u.beta / lower)
                                                       : 1.0;
                                  },
                                  [](const ArctanUpdate& u) { return u.a * (kPi / 2 + std::abs(u.d)); },
                              },
                              f);
  if (dist.kind == TPreviousDistribution::Kind::point_mass) sup_abs = 0.0;
  return expectation([&](double t) { return evaluate(f, t); }, sup_abs, breaks, dist);
}

double solve_shift(double a, double b, double c, const TPreviousDistribution& dist) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("solve_shift: A and B must be > 0");
  const double base = condition1(ArctanUpdate{a, b, c, 0.0}, dist).value;
  double shift = -base / a;
  // One correction step absorbs rounding in the affine relation.
  const double residual = condition1(ArctanUpdate{a, b, c, shift}, dist).value;
  shift -= residual / a;
  return shift;
}

double solve_center(double a, double b, double d, const TPreviousDistribution& dist) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::domain_error("solve_center: A and B must be > 0");
  auto residual = [&](double c) { return condition1(ArctanUpdate{a, b, c, d}, dist).value; };
  const double mean = dist.mean();
  double width = std::max(mean, 1.0 / b);
  double lo = mean - width;
  double hi = mean + width;
  for (int i = 0; i < 60 && !(residual(lo) > 0.0 && residual(hi) < 0.0); ++i) {
    width *= 2.0;
    lo = mean - width;
    hi = mean + width;
  }
  if (!(residual(lo) > 0.0 && residual(hi) < 0.0))
    throw NumericalError("solve_center: no sign change; |D| must be below pi/2");
  boost::uintmax_t iterations = 200;
  const auto [left, right] =
      boost::math::tools::toms748_solve(residual, lo, hi, boost::math::tools::eps_tolerance<double>(50), iterations);
  return 0.5 * (left + right);
}

double zero_drift_mean(const UpdateFunction& f, std::int64_t shape, double beta_lo, double beta_hi) {
  auto residual = [&](double beta) {
    return condition1(f, TPreviousDistribution::erlang(shape, beta)).value;
  };
  const double r_lo = residual(beta_lo);
  const double r_hi = residual(beta_hi);
  if (!(r_lo * r_hi < 0.0)) {
    std::ostringstream os;
    os << "zero_drift_mean: residual does not change sign on [" << beta_lo << ", " << beta_hi << "] (" << r_lo
       << ", " << r_hi << ")";
    throw NumericalError(os.str());
  }
  boost::uintmax_t iterations = 200;
  const auto [left, right] = boost::math::tools::toms748_solve(
      residual, beta_lo, beta_hi, r_lo, r_hi, boost::math::tools::eps_tolerance<double>(52), iterations);
  return 0.5 * (left + right);
}

double amplitude_ratio(const UpdateFunction& f_old, const UpdateFunction& f_new) {
  const double top_new = supremum(f_new);
  if (!(top_new > 0.0)) throw std::domain_error("amplitude_ratio: sup f_new must be > 0");
  return supremum(f_old) / top_new;
}

}  // namespace powlab
