#include "powlab/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "powlab/errors.hpp"
#include "powlab/rng.hpp"

namespace powlab {

namespace {

// Zero-variance windows map to a large negative log rather than -inf.
constexpr double kVarianceFloor = 1e-300;

void softmax_inplace(ClassProbabilities& z) {
  const double top = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : z) v /= total;
}

struct Activations {
  std::vector<double> hidden;
  ClassProbabilities probs{};
};

void forward_into(const MlpModel& m, const double* x, Activations& act) {
  act.hidden.resize(m.hidden);
  for (std::size_t h = 0; h < m.hidden; ++h) {
    double z = m.b1[h];
    const double* row = &m.w1[h * m.inputs];
    for (std::size_t i = 0; i < m.inputs; ++i) z += row[i] * x[i];
    act.hidden[h] = std::tanh(z);
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    double z = m.b2[c];
    const double* row = &m.w2[c * m.hidden];
    for (std::size_t h = 0; h < m.hidden; ++h) z += row[h] * act.hidden[h];
    act.probs[c] = z;
  }
  softmax_inplace(act.probs);
}

}  // namespace

MlpModel MlpModel::zeros(std::size_t inputs, std::size_t hidden) {
  MlpModel m;
  m.inputs = inputs;
  m.hidden = hidden;
  m.feature_mean.assign(inputs, 0.0);
  m.feature_std.assign(inputs, 1.0);
  m.w1.assign(hidden * inputs, 0.0);
  m.b1.assign(hidden, 0.0);
  m.w2.assign(kNumClasses * hidden, 0.0);
  m.b2.assign(kNumClasses, 0.0);
  return m;
}

MlpModel MlpModel::random(std::size_t inputs, std::size_t hidden, std::uint64_t seed) {
  MlpModel m = zeros(inputs, hidden);
  Rng rng(seed);
  const double r1 = 1.0 / std::sqrt(static_cast<double>(inputs));
  const double r2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (double& w : m.w1) w = r1 * (2.0 * rng.uniform() - 1.0);
  for (double& w : m.w2) w = r2 * (2.0 * rng.uniform() - 1.0);
  return m;
}

void MlpModel::validate() const {
  if (inputs == 0 || hidden == 0) throw ConfigError("mlp: dimensions must be positive");
  if (feature_mean.size() != inputs || feature_std.size() != inputs || w1.size() != hidden * inputs ||
      b1.size() != hidden || w2.size() != kNumClasses * hidden || b2.size() != kNumClasses)
    throw ConfigError("mlp: parameter arrays do not match dimensions");
  for (double s : feature_std)
    if (!(s > 0.0)) throw ConfigError("mlp: standardization scale must be > 0");
  for (const auto* v : {&feature_mean, &w1, &b1, &w2, &b2})
    for (double x : *v)
      if (!std::isfinite(x)) throw ConfigError("mlp: non-finite parameter");
}

std::vector<double> MlpModel::flatten() const {
  std::vector<double> p;
  p.reserve(parameter_count());
  p.insert(p.end(), w1.begin(), w1.end());
  p.insert(p.end(), b1.begin(), b1.end());
  p.insert(p.end(), w2.begin(), w2.end());
  p.insert(p.end(), b2.begin(), b2.end());
  return p;
}

void MlpModel::unflatten(std::span<const double> params) {
  if (params.size() != parameter_count()) throw std::invalid_argument("unflatten: size mismatch");
  auto it = params.begin();
  for (auto* v : {&w1, &b1, &w2, &b2}) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(v->size()), v->begin());
    it += static_cast<std::ptrdiff_t>(v->size());
  }
}

std::vector<double> standardize(const MlpModel& model, std::span<const double> variances) {
  if (variances.size() != model.inputs) throw std::domain_error("classify: wrong number of features");
  std::vector<double> x(model.inputs);
  for (std::size_t i = 0; i < model.inputs; ++i) {
    const double v = variances[i];
    if (!std::isfinite(v) || v < 0.0) throw std::domain_error("classify: features must be finite and >= 0");
    x[i] = (std::log(std::max(v, kVarianceFloor)) - model.feature_mean[i]) / model.feature_std[i];
  }
  return x;
}

ClassProbabilities forward(const MlpModel& model, std::span<const double> standardized) {
  Activations act;
  forward_into(model, standardized.data(), act);
  return act.probs;
}

ClassProbabilities classify(const MlpModel& model, std::span<const double> variances) {
  const std::vector<double> x = standardize(model, variances);
  return forward(model, x);
}

std::optional<double> indicator(const MlpModel& model, const FeatureState& state) {
  const auto feats = state.features();
  if (!feats) return std::nullopt;
  return classify(model, *feats)[static_cast<int>(ChangeCase::normal)];
}

LossGradient loss_and_gradient(const MlpModel& m, std::span<const double> inputs, std::span<const int> labels) {
  const std::size_t n = labels.size();
  if (inputs.size() != n * m.inputs) throw std::invalid_argument("loss_and_gradient: shape mismatch");
  LossGradient out;
  out.gradient.assign(m.parameter_count(), 0.0);
  double* g_w1 = out.gradient.data();
  double* g_b1 = g_w1 + m.w1.size();
  double* g_w2 = g_b1 + m.b1.size();
  double* g_b2 = g_w2 + m.w2.size();

  Activations act;
  std::vector<double> delta_hidden(m.hidden);
  for (std::size_t e = 0; e < n; ++e) {
    const double* x = &inputs[e * m.inputs];
    forward_into(m, x, act);
    const int y = labels[e];
    out.loss -= std::log(std::max(act.probs[y], 1e-300));

    ClassProbabilities delta_out = act.probs;
    delta_out[y] -= 1.0;
    std::fill(delta_hidden.begin(), delta_hidden.end(), 0.0);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      g_b2[c] += delta_out[c];
      for (std::size_t h = 0; h < m.hidden; ++h) {
        g_w2[c * m.hidden + h] += delta_out[c] * act.hidden[h];
        delta_hidden[h] += delta_out[c] * m.w2[c * m.hidden + h];
      }
    }
    for (std::size_t h = 0; h < m.hidden; ++h) {
      const double dz = delta_hidden[h] * (1.0 - act.hidden[h] * act.hidden[h]);
      g_b1[h] += dz;
      for (std::size_t i = 0; i < m.inputs; ++i) g_w1[h * m.inputs + i] += dz * x[i];
    }
  }
  const double scale = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  out.loss *= scale;
  for (double& g : out.gradient) g *= scale;
  return out;
}

double mean_loss(const MlpModel& m, std::span<const double> inputs, std::span<const int> labels) {
  Activations act;
  double loss = 0.0;
  for (std::size_t e = 0; e < labels.size(); ++e) {
    forward_into(m, &inputs[e * m.inputs], act);
    loss -= std::log(std::max(act.probs[labels[e]], 1e-300));
  }
  return labels.empty() ? 0.0 : loss / static_cast<double>(labels.size());
}

}  // namespace powlab
