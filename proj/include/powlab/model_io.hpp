#pragma once

#include <filesystem>
#include <iosfwd>

#include "powlab/mlp.hpp"

namespace powlab {

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Flat little-endian binary: 8-byte magic "PWLABMLP", u32 version, u32
/// inputs, u32 hidden, u32 classes, then IEEE-754 doubles in the order
/// feature_mean, feature_std, w1, b1, w2, b2 (matrices row-major).
/// Round-trips bit-exactly.
void save_model(std::ostream& out, const MlpModel& model);
void save_model(const std::filesystem::path& path, const MlpModel& model);

/// Throws DataError on bad magic, unknown version, truncation or trailing bytes.
MlpModel load_model(std::istream& in);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace powlab
