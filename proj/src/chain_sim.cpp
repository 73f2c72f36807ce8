#include "powlab/chain_sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "powlab/errors.hpp"

namespace powlab {

void HashRateScenario::validate() const {
  if (length < 0) throw ConfigError("scenario: length must be >= 0");
  if (!(initial_rate > 0.0) || !std::isfinite(initial_rate)) throw ConfigError("scenario: initial_rate must be > 0");
  std::int64_t previous = 0;
  for (const auto& e : events) {
    if (e.height <= previous) throw ConfigError("scenario: event heights must be strictly increasing and >= 1");
    if (e.height > length) {
      std::ostringstream os;
      os << "scenario: event height " << e.height << " exceeds length " << length;
      throw ConfigError(os.str());
    }
    if (!(e.rate > 0.0) || !std::isfinite(e.rate)) throw ConfigError("scenario: event rates must be > 0");
    previous = e.height;
  }
}

double HashRateScenario::rate_at(std::int64_t height) const {
  double rate = initial_rate;
  for (const auto& e : events) {
    if (e.height >= height) break;
    rate = e.rate;
  }
  return rate;
}

void SimulationConfig::validate() const {
  if (!(propagation_delay >= 0.0)) throw ConfigError("simulation: propagation_delay must be >= 0");
  if (!(min_difficulty > 0.0)) throw ConfigError("simulation: min_difficulty must be > 0");
}

double sample_block_time(double difficulty, double rate, double delay, double u) {
  if (!(difficulty > 0.0)) throw std::domain_error("sample_block_time: difficulty must be > 0");
  if (!(rate > 0.0)) throw std::domain_error("sample_block_time: rate must be > 0");
  if (!(delay >= 0.0)) throw std::domain_error("sample_block_time: delay must be >= 0");
  if (!(u > 0.0 && u <= 1.0)) throw std::domain_error("sample_block_time: u must lie in (0, 1]");
  return -(difficulty / rate) * std::log(u) + delay;
}

double sample_block_time(double difficulty, double rate, double delay, Rng& rng) {
  return sample_block_time(difficulty, rate, delay, rng.uniform());
}

std::vector<ChainRecord> run_simulation(const HashRateScenario& scenario, const ControllerSpec& controller_spec,
                                        const SimulationConfig& config, double initial_difficulty,
                                        const StepObserver& observer) {
  scenario.validate();
  config.validate();
  if (!(initial_difficulty >= config.min_difficulty))
    throw ConfigError("simulation: initial difficulty below min_difficulty");

  Controller controller(controller_spec, initial_difficulty);
  controller.raise_floor(config.min_difficulty);
  Rng rng(config.seed);

  std::vector<ChainRecord> trace;
  trace.reserve(static_cast<std::size_t>(scenario.length));
  std::size_t next_event = 0;
  double rate = scenario.initial_rate;
  double clock = 0.0;
  double previous_stamp = 0.0;

  for (std::int64_t k = 1; k <= scenario.length; ++k) {
    while (next_event < scenario.events.size() && scenario.events[next_event].height < k)
      rate = scenario.events[next_event++].rate;

    ChainRecord rec;
    rec.height = k;
    rec.difficulty = controller.difficulty();
    rec.scheduled_rate = rate;
    const double produce = sample_block_time(rec.difficulty, rate, config.propagation_delay, rng);
    clock += produce;
    if (config.integer_timestamps) {
      rec.timestamp = std::max(std::floor(clock), previous_stamp + 1.0);
      rec.block_time = rec.timestamp - previous_stamp;
    } else {
      rec.timestamp = clock;
      rec.block_time = produce;
    }
    previous_stamp = rec.timestamp;

    controller.next_difficulty(rec.block_time);
    trace.push_back(rec);
    if (observer) observer(trace.back(), controller);
  }
  return trace;
}

}  // namespace powlab
