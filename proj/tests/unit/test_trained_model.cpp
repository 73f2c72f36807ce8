#include <algorithm>
#include <cmath>
#include <cstdio>

#include "doctest.h"

#include "powlab/chain_sim.hpp"
#include "powlab/training.hpp"

using namespace powlab;

namespace {

const FeatureConfig kFeatures{};  // s = 200, q = 11, l = 2000

const TrainingResult& trained() {
  static const TrainingResult r = [] {
    TrainingConfig cfg;
    TrainingResult out = train_and_evaluate(cfg, kFeatures);
    for (const auto& a : out.report.held_out)
      std::printf("held-out accuracy after %lld blocks: %.4f\n", static_cast<long long>(a.blocks_since_change),
                  a.overall);
    return out;
  }();
  return r;
}

// Constant-difficulty chain whose rate is multiplied by (1 + change) after block `change_at`.
// Returns I_k for every block from the first ready one through `last`.
std::vector<double> indicator_series(double change, std::int64_t change_at, std::int64_t last, std::uint64_t seed) {
  const double rate = 1.455e14;
  const double difficulty = rate * ethereum_zero_drift_mean();
  Rng rng(seed);
  FeatureState st(kFeatures);
  std::vector<double> out;
  for (std::int64_t k = 1; k <= last; ++k) {
    const double h = k <= change_at ? rate : rate * (1.0 + change);
    st.push(sample_block_time(difficulty, h, 0.0, rng));
    if (const auto p = indicator(trained().model, st)) out.push_back(*p);
  }
  return out;
}

}  // namespace

TEST_CASE("abnormal change is recognised after 5000 blocks") {
  const std::int64_t c = kFeatures.history_required() + 1;
  int abnormal = 0;
  const int runs = 500;
  for (int i = 0; i < runs; ++i) {
    const double rate = 1.455e14;
    const double difficulty = rate * ethereum_zero_drift_mean();
    Rng rng(derive_seed(0xabcdef, static_cast<std::uint64_t>(i)));
    FeatureState st(kFeatures);
    for (std::int64_t k = 1; k <= c + 5000; ++k)
      st.push(sample_block_time(difficulty, k <= c ? rate : rate * 1.4, 0.0, rng));
    const auto p = classify(trained().model, *st.features());
    if (std::max_element(p.begin(), p.end()) - p.begin() == static_cast<int>(ChangeCase::abnormal)) ++abnormal;
  }
  const double freq = static_cast<double>(abnormal) / runs;
  MESSAGE("case-3 frequency at +40%: " << freq);
  CHECK(freq >= 0.80);
}

TEST_CASE("steady chain keeps the indicator low") {
  auto series = indicator_series(0.0, 1 << 30, kFeatures.history_required() + 10000, 77);
  REQUIRE(series.size() >= 10000);
  series.resize(10000);
  std::nth_element(series.begin(), series.begin() + 5000, series.end());
  MESSAGE("median indicator on a steady chain: " << series[5000]);
  CHECK(series[5000] < 0.5);
}

TEST_CASE("normal change raises the indicator") {
  const std::int64_t c = kFeatures.history_required() + 1000;
  double changed = 0.0;
  double steady = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    // Ready from block history_required(), so index i holds block history_required() + i.
    const auto a = indicator_series(0.15, c, c + 5000, seed);
    const auto b = indicator_series(0.0, c, c + 5000, seed);
    const std::size_t from = static_cast<std::size_t>(c + 1000 - kFeatures.history_required());
    for (std::size_t i = from; i < a.size(); ++i) {
      changed += a[i];
      steady += b[i];
    }
  }
  MESSAGE("mean indicator after +15%: " << changed << " vs steady " << steady << " (sums)");
  CHECK(changed > steady);
}

TEST_CASE("held-out accuracy improves with time since the change") {
  const auto& held = trained().report.held_out;
  REQUIRE(held.size() == 2);
  CHECK(held[0].blocks_since_change == 1000);
  CHECK(held[1].blocks_since_change == 5000);
  CHECK(held[1].overall >= held[0].overall);
}
