#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "bfl/model.hpp"

namespace bfl {

using Point = std::vector<double>;

/// Synthetic drifting classification task: isotropic Gaussian blobs whose
/// centers move by a fixed rigid drift from one day to the next.
struct ShiftSpec {
  std::size_t num_classes = 10;
  std::size_t input_dim = 2;
  /// Day-1 centers. Empty selects num_classes points equally spaced on a
  /// circle of radius `center_radius` in the first two coordinates.
  std::vector<Point> class_centers_day1;
  double center_radius = 3.0;
  /// Rotation about the centroid in the (x0, x1) plane, radians per day.
  double rotation_per_day = 0.1;
  /// Translation per day; empty means zero.
  std::vector<double> translation_per_day;
  double class_noise_std = 0.6;
  std::size_t samples_per_day = 625;
  /// Share of each day's pool held out for validation before sharding.
  double validation_fraction = 0.2;

  void validate() const;
  std::vector<Point> initial_centers() const;
};

/// One application of the daily drift: rotate about the current centroid,
/// then translate.
std::vector<Point> apply_drift(const ShiftSpec& spec, const std::vector<Point>& centers);

/// Day-1 centers with the drift applied (day - 1) times.
std::vector<Point> centers_for_day(const ShiftSpec& spec, std::uint32_t day);

/// Pool of spec.samples_per_day samples for `day`. Labels cycle through the
/// classes so per-class counts differ by at most one.
LabeledBatch gen_day(const ShiftSpec& spec, std::uint32_t day, std::uint64_t seed);

struct ShardAssignment {
  std::vector<std::vector<std::size_t>> shard_indices;
  std::vector<std::size_t> leftover;
};

/// Disjoint uniform random assignment of `per_node` pool rows to each node.
ShardAssignment shard_indices(std::size_t pool_size, std::size_t num_nodes,
                              std::size_t per_node, std::uint64_t seed);

struct ShardedPool {
  std::vector<LabeledBatch> shards;
  LabeledBatch leftover;
};

ShardedPool shard(const LabeledBatch& pool, std::size_t num_nodes, std::size_t per_node,
                  std::uint64_t seed);

/// Training shards and a validation split for one day.
struct DayDataset {
  std::uint32_t day = 1;
  std::vector<LabeledBatch> train_shards;
  LabeledBatch validation;
};

/// Holds out round(validation_fraction * pool size) rows, then shards the rest.
/// Seeds for the split and the sharding are derived from (seed, day).
DayDataset make_day_dataset(const LabeledBatch& pool, std::uint32_t day, double validation_fraction,
                            std::size_t num_nodes, std::size_t per_node, std::uint64_t seed);

struct TabularSchema {
  /// Number of feature columns; 0 infers it from the first line.
  std::size_t num_features = 0;
  std::size_t num_classes = 0;
};

/// Comma-separated, one sample per line, features then an integer label, no
/// header. Throws ParseError naming the line on malformed input or a label
/// outside [0, num_classes).
LabeledBatch load_tabular(const std::filesystem::path& path, const TabularSchema& schema);

/// Writes the format read by load_tabular; doubles use shortest round-trip form.
void save_tabular(const std::filesystem::path& path, const LabeledBatch& pool);

}  // namespace bfl
