#pragma once

#include <filesystem>

#include "bfl/federation.hpp"
#include "bfl/prior.hpp"

namespace bfl {

/// Binary posterior file. Little-endian header:
///   8 bytes  magic "BFLPOST\0"
///   u32      version (1)
///   u32      strategy (0 transfer, 1 retrain, 2 posterior-continual)
///   u32      day
///   u32      reserved (0)
///   u64      N_p, T_s, T, T_b, seed
/// followed by T_s * N_p IEEE-754 doubles, row-major.
struct PosteriorFile {
  PosteriorSamples samples;
  Strategy strategy = Strategy::retrain;

  friend bool operator==(const PosteriorFile&, const PosteriorFile&) = default;
};

void save_posterior(const std::filesystem::path& path, const PosteriorFile& file);
PosteriorFile load_posterior(const std::filesystem::path& path);

}  // namespace bfl
