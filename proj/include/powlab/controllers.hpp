#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <variant>

#include <boost/circular_buffer.hpp>

#include "powlab/features.hpp"
#include "powlab/mlp.hpp"
#include "powlab/update_fn.hpp"

namespace powlab {

/// I_k fixed at `value` for every block. 1 gives Ethereum's pairing, 0 freezes difficulty.
struct ConstantIndicator {
  double value = 1.0;
};

/// I_k = 1 when k mod n == 0, else 0 (Bitcoin's retarget epochs).
struct EveryNIndicator {
  std::int64_t n = 2016;
};

/// I_k = probability of a normal change from the variance classifier.
/// With stride > 1 the indicator is only consulted at heights divisible by stride.
struct NeuralIndicator {
  std::shared_ptr<const MlpModel> model;
  FeatureConfig features;
  std::int64_t stride = 1;
};

using IndicatorPolicy = std::variant<ConstantIndicator, EveryNIndicator, NeuralIndicator>;

double every_n_indicator(std::int64_t height, std::int64_t n);

/// D_k = D_{k-1} - D_{k-1} * I_k * f(T_previous), with T_previous the sum of the
/// last t_previous_window block times.
struct ControllerSpec {
  IndicatorPolicy indicator = ConstantIndicator{};
  UpdateFunction update = EthereumUpdate{};
  std::int64_t t_previous_window = 1;
  double min_difficulty = 1.0;

  void validate() const;

  static ControllerSpec identity();
  static ControllerSpec ethereum();
  static ControllerSpec bitcoin(std::int64_t n = 2016, double beta = 600.0);
  static ControllerSpec arctan(const ArctanUpdate& f);
  static ControllerSpec proposed(std::shared_ptr<const MlpModel> model, FeatureConfig features, const ArctanUpdate& f,
                                 std::int64_t stride = 1);
};

/// Sequential difficulty recursion. Value-copyable; each simulation owns one.
///
/// Heights count pushed block times: after the first push the controller is at
/// height 1. Until t_previous_window block times (and, for the neural policy,
/// the full feature history) are available the difficulty is held.
class Controller {
 public:
  Controller(ControllerSpec spec, double initial_difficulty);

  /// Consume the block time of the block at height()+1 and return the difficulty for the next block.
  double next_difficulty(double block_time);

  double difficulty() const { return difficulty_; }
  std::int64_t height() const { return height_; }
  const ControllerSpec& spec() const { return spec_; }

  /// Indicator used on the last step; nullopt while warming up.
  std::optional<double> last_indicator() const { return last_indicator_; }

  /// Raise the difficulty floor (never lowers the spec's own floor).
  void raise_floor(double floor);
  double floor() const { return floor_; }

 private:
  std::optional<double> current_indicator();

  ControllerSpec spec_;
  boost::circular_buffer<double> recent_;
  std::optional<FeatureState> features_;
  double difficulty_;
  double floor_;
  std::int64_t height_ = 0;
  std::optional<double> last_indicator_;
};

}  // namespace powlab
