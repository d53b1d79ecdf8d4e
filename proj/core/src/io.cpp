#include "bfl/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <string>

#include "bfl/errors.hpp"

namespace bfl {

namespace {

constexpr std::array<char, 8> kMagic = {'B', 'F', 'L', 'P', 'O', 'S', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in, const std::filesystem::path& path) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw ParseError(path.string() + ": truncated posterior file");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes[i]) << (8 * i);
  return v;
}

std::uint32_t strategy_code(Strategy s) {
  switch (s) {
    case Strategy::transfer_learning: return 0;
    case Strategy::retrain: return 1;
    case Strategy::posterior_continual: return 2;
  }
  return 0;
}

}  // namespace

void save_posterior(const std::filesystem::path& path, const PosteriorFile& file) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const auto& s = file.samples;
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint32_t>(out, strategy_code(file.strategy));
  put_le<std::uint32_t>(out, s.day);
  put_le<std::uint32_t>(out, 0);
  put_le<std::uint64_t>(out, s.num_params());
  put_le<std::uint64_t>(out, s.num_samples());
  put_le<std::uint64_t>(out, s.total_iters);
  put_le<std::uint64_t>(out, s.burn_in);
  put_le<std::uint64_t>(out, s.seed);
  for (double v : s.samples.data()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw IoError("write failed for " + path.string());
}

PosteriorFile load_posterior(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ParseError(path.string() + ": not a posterior file");
  const auto version = get_le<std::uint32_t>(in, path);
  if (version != kVersion) {
    throw ParseError(path.string() + ": unsupported version " + std::to_string(version));
  }
  PosteriorFile file;
  const auto code = get_le<std::uint32_t>(in, path);
  if (code > 2) throw ParseError(path.string() + ": bad strategy code");
  file.strategy = static_cast<Strategy>(code);
  auto& s = file.samples;
  s.day = get_le<std::uint32_t>(in, path);
  (void)get_le<std::uint32_t>(in, path);
  const auto n_params = get_le<std::uint64_t>(in, path);
  const auto n_samples = get_le<std::uint64_t>(in, path);
  s.total_iters = get_le<std::uint64_t>(in, path);
  s.burn_in = get_le<std::uint64_t>(in, path);
  s.seed = get_le<std::uint64_t>(in, path);
  if (n_params > (1u << 28) || n_samples > (1u << 24)) {
    throw ParseError(path.string() + ": implausible dimensions");
  }
  s.samples = Matrix(n_samples, n_params);
  for (double& v : s.samples.data()) v = std::bit_cast<double>(get_le<std::uint64_t>(in, path));
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ParseError(path.string() + ": trailing bytes after sample data");
  }
  return file;
}

}  // namespace bfl
