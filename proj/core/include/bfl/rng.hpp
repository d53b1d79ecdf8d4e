#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace bfl {

/// SplitMix64 finalizer. Used to build independent child seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// FNV-1a over the bytes of a tag string.
constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Child seed for a (purpose, day, node) triple. Depends only on its inputs,
/// never on the order in which streams are created.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                                    std::uint64_t day = 0,
                                    std::uint64_t node = 0) noexcept {
  std::uint64_t s = mix64(master);
  s = mix64(s ^ hash_tag(purpose));
  s = mix64(s ^ day);
  s = mix64(s ^ (node * 0xd1342543de82ef95ULL));
  return s;
}

/// A single deterministic random stream. Every consumer draws from a stream
/// passed to it explicitly; streams are never shared between threads.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  /// Standard normal draw.
  double normal() { return normal_(engine_); }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n) {
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(engine_);
  }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace bfl
