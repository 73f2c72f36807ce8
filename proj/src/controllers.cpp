#include "powlab/controllers.hpp"

#include <algorithm>
#include <cmath>

#include "powlab/errors.hpp"

namespace powlab {

double every_n_indicator(std::int64_t height, std::int64_t n) { return height % n == 0 ? 1.0 : 0.0; }

void ControllerSpec::validate() const {
  if (t_previous_window < 1) throw ConfigError("controller: t_previous_window must be >= 1");
  if (!(min_difficulty > 0.0)) throw ConfigError("controller: min_difficulty must be > 0");
  if (const auto* c = std::get_if<ConstantIndicator>(&indicator)) {
    if (!(c->value >= 0.0 && c->value <= 1.0)) throw ConfigError("controller: constant indicator must be in [0, 1]");
  } else if (const auto* e = std::get_if<EveryNIndicator>(&indicator)) {
    if (e->n < 1) throw ConfigError("controller: every-N indicator needs N >= 1");
    if (t_previous_window != e->n) throw ConfigError("controller: every-N indicator requires t_previous_window == N");
  } else if (const auto* nn = std::get_if<NeuralIndicator>(&indicator)) {
    if (!nn->model) throw ConfigError("controller: neural indicator has no model");
    nn->features.validate();
    nn->model->validate();
    if (nn->model->inputs != static_cast<std::size_t>(nn->features.q))
      throw ConfigError("controller: model input dimension differs from feature count q");
    if (nn->stride < 1) throw ConfigError("controller: neural indicator stride must be >= 1");
  }
  if (const auto* a = std::get_if<ArctanUpdate>(&update)) a->validate();
  if (const auto* b = std::get_if<BitcoinUpdate>(&update)) {
    if (b->n < 1 || !(b->beta > 0.0)) throw ConfigError("controller: bitcoin update needs N >= 1 and beta > 0");
  }
}

ControllerSpec ControllerSpec::identity() { return {ConstantIndicator{0.0}, EthereumUpdate{}, 1, 1.0}; }

ControllerSpec ControllerSpec::ethereum() { return {ConstantIndicator{1.0}, EthereumUpdate{}, 1, 1.0}; }

ControllerSpec ControllerSpec::bitcoin(std::int64_t n, double beta) {
  return {EveryNIndicator{n}, BitcoinUpdate{n, beta}, n, 1.0};
}

ControllerSpec ControllerSpec::arctan(const ArctanUpdate& f) { return {ConstantIndicator{1.0}, f, 1, 1.0}; }

ControllerSpec ControllerSpec::proposed(std::shared_ptr<const MlpModel> model, FeatureConfig features,
                                        const ArctanUpdate& f, std::int64_t stride) {
  return {NeuralIndicator{std::move(model), features, stride}, f, 1, 1.0};
}

Controller::Controller(ControllerSpec spec, double initial_difficulty)
    : spec_(std::move(spec)),
      recent_(static_cast<std::size_t>(std::max<std::int64_t>(spec_.t_previous_window, 1))),
      difficulty_(initial_difficulty),
      floor_(spec_.min_difficulty) {
  spec_.validate();
  if (!(initial_difficulty > 0.0)) throw ConfigError("controller: initial difficulty must be > 0");
  if (const auto* nn = std::get_if<NeuralIndicator>(&spec_.indicator)) features_.emplace(nn->features);
}

void Controller::raise_floor(double floor) { floor_ = std::max(floor_, floor); }

std::optional<double> Controller::current_indicator() {
  if (static_cast<std::int64_t>(recent_.size()) < spec_.t_previous_window) return std::nullopt;
  if (const auto* c = std::get_if<ConstantIndicator>(&spec_.indicator)) return c->value;
  if (const auto* e = std::get_if<EveryNIndicator>(&spec_.indicator)) return every_n_indicator(height_, e->n);
  const auto& nn = std::get<NeuralIndicator>(spec_.indicator);
  const auto p = indicator(*nn.model, *features_);
  if (!p) return std::nullopt;
  return height_ % nn.stride == 0 ? *p : 0.0;
}

double Controller::next_difficulty(double block_time) {
  if (!(block_time >= 0.0)) throw std::domain_error("controller: block time must be >= 0");
  recent_.push_back(block_time);
  if (features_) features_->push(block_time);
  ++height_;

  last_indicator_ = current_indicator();
  if (!last_indicator_ || *last_indicator_ == 0.0) return difficulty_;

  double t_previous = 0.0;
  for (double t : recent_) t_previous += t;
  const double f = evaluate(spec_.update, t_previous);
  difficulty_ = std::max(floor_, difficulty_ - difficulty_ * (*last_indicator_ * f));
  return difficulty_;
}

}  // namespace powlab
