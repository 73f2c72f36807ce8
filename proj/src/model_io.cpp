#include "powlab/model_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "powlab/errors.hpp"

namespace powlab {

namespace {

constexpr std::array<char, 8> kMagic{'P', 'W', 'L', 'A', 'B', 'M', 'L', 'P'};

template <class U>
void put_le(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  out.write(bytes.data(), bytes.size());
}

template <class U>
U get_le(std::istream& in) {
  std::array<unsigned char, sizeof(U)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw DataError("model file truncated");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

void put_doubles(std::ostream& out, const std::vector<double>& v) {
  for (double x : v) put_le(out, std::bit_cast<std::uint64_t>(x));
}

std::vector<double> get_doubles(std::istream& in, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = std::bit_cast<double>(get_le<std::uint64_t>(in));
  return v;
}

}  // namespace

void save_model(std::ostream& out, const MlpModel& model) {
  model.validate();
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kModelFormatVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.inputs));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.hidden));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(kNumClasses));
  for (const auto* v : {&model.feature_mean, &model.feature_std, &model.w1, &model.b1, &model.w2, &model.b2})
    put_doubles(out, *v);
}

void save_model(const std::filesystem::path& path, const MlpModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  save_model(out, model);
  if (!out) throw DataError("failed writing " + path.string());
}

MlpModel load_model(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw DataError("not a model file (bad magic)");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kModelFormatVersion) throw DataError("unsupported model format version " + std::to_string(version));
  const auto inputs = get_le<std::uint32_t>(in);
  const auto hidden = get_le<std::uint32_t>(in);
  const auto classes = get_le<std::uint32_t>(in);
  if (classes != kNumClasses || inputs == 0 || hidden == 0 || inputs > 4096 || hidden > 4096)
    throw DataError("model file has unsupported dimensions");
  MlpModel m;
  m.inputs = inputs;
  m.hidden = hidden;
  m.feature_mean = get_doubles(in, inputs);
  m.feature_std = get_doubles(in, inputs);
  m.w1 = get_doubles(in, std::size_t{hidden} * inputs);
  m.b1 = get_doubles(in, hidden);
  m.w2 = get_doubles(in, kNumClasses * hidden);
  m.b2 = get_doubles(in, kNumClasses);
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("model file has trailing bytes");
  try {
    m.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("invalid model: ") + e.what());
  }
  return m;
}

MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model " + path.string());
  return load_model(in);
}

}  // namespace powlab
