#include "bfl/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "bfl/errors.hpp"
#include "bfl/rng.hpp"

namespace bfl {

void ShiftSpec::validate() const {
  if (num_classes < 2) throw ConfigError("data.num_classes must be at least 2");
  if (input_dim < 1) throw ConfigError("data.input_dim must be at least 1");
  if (!(class_noise_std > 0.0)) throw ConfigError("data.class_noise_std must be positive");
  if (samples_per_day == 0) throw ConfigError("data.samples_per_day must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("data.validation_fraction must be in [0, 1)");
  }
  if (rotation_per_day != 0.0 && input_dim < 2) {
    throw ConfigError("data.rotation_per_day needs input_dim >= 2");
  }
  if (!translation_per_day.empty() && translation_per_day.size() != input_dim) {
    throw ConfigError("data.translation_per_day must have input_dim entries");
  }
  const auto centers = initial_centers();
  for (const auto& c : centers) {
    if (c.size() != input_dim) throw ConfigError("data.class_centers entries must have input_dim coordinates");
  }
  for (std::size_t a = 0; a < centers.size(); ++a) {
    for (std::size_t b = a + 1; b < centers.size(); ++b) {
      if (centers[a] == centers[b]) {
        throw ConfigError("data.class_centers " + std::to_string(a) + " and " +
                          std::to_string(b) + " coincide");
      }
    }
  }
}

std::vector<Point> ShiftSpec::initial_centers() const {
  if (!class_centers_day1.empty()) {
    if (class_centers_day1.size() != num_classes) {
      throw ConfigError("data.class_centers must list num_classes points");
    }
    return class_centers_day1;
  }
  std::vector<Point> centers(num_classes, Point(input_dim, 0.0));
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (input_dim >= 2) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) /
                           static_cast<double>(num_classes);
      centers[c][0] = center_radius * std::cos(angle);
      centers[c][1] = center_radius * std::sin(angle);
    } else {
      centers[c][0] = center_radius * (2.0 * static_cast<double>(c) /
                                           static_cast<double>(num_classes - 1) -
                                       1.0);
    }
  }
  return centers;
}

std::vector<Point> apply_drift(const ShiftSpec& spec, const std::vector<Point>& centers) {
  std::vector<Point> out = centers;
  if (spec.rotation_per_day != 0.0) {
    double cx = 0.0;
    double cy = 0.0;
    for (const auto& c : centers) {
      cx += c[0];
      cy += c[1];
    }
    cx /= static_cast<double>(centers.size());
    cy /= static_cast<double>(centers.size());
    const double cs = std::cos(spec.rotation_per_day);
    const double sn = std::sin(spec.rotation_per_day);
    for (auto& c : out) {
      const double dx = c[0] - cx;
      const double dy = c[1] - cy;
      c[0] = cx + cs * dx - sn * dy;
      c[1] = cy + sn * dx + cs * dy;
    }
  }
  if (!spec.translation_per_day.empty()) {
    for (auto& c : out) {
      for (std::size_t k = 0; k < c.size(); ++k) c[k] += spec.translation_per_day[k];
    }
  }
  return out;
}

std::vector<Point> centers_for_day(const ShiftSpec& spec, std::uint32_t day) {
  if (day < 1) throw ConfigError("day must be at least 1");
  auto centers = spec.initial_centers();
  for (std::uint32_t d = 1; d < day; ++d) centers = apply_drift(spec, centers);
  return centers;
}

LabeledBatch gen_day(const ShiftSpec& spec, std::uint32_t day, std::uint64_t seed) {
  spec.validate();
  const auto centers = centers_for_day(spec, day);
  RngStream rng(derive_seed(seed, "data", day));
  LabeledBatch pool;
  pool.features = Matrix(spec.samples_per_day, spec.input_dim);
  pool.labels.resize(spec.samples_per_day);
  for (std::size_t i = 0; i < spec.samples_per_day; ++i) {
    const auto c = i % spec.num_classes;
    pool.labels[i] = static_cast<int>(c);
    auto row = pool.features.row(i);
    for (std::size_t k = 0; k < spec.input_dim; ++k) {
      row[k] = centers[c][k] + spec.class_noise_std * rng.normal();
    }
  }
  return pool;
}

namespace {

std::vector<std::size_t> permutation(std::size_t n, RngStream& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
  }
  return idx;
}

}  // namespace

ShardAssignment shard_indices(std::size_t pool_size, std::size_t num_nodes,
                              std::size_t per_node, std::uint64_t seed) {
  if (num_nodes == 0 || per_node == 0) throw ConfigError("shard: nodes and per_node must be positive");
  if (pool_size < num_nodes * per_node) {
    throw ConfigError("shard: pool of " + std::to_string(pool_size) + " samples cannot fill " +
                      std::to_string(num_nodes) + " shards of " + std::to_string(per_node));
  }
  RngStream rng(seed);
  const auto perm = permutation(pool_size, rng);
  ShardAssignment out;
  out.shard_indices.resize(num_nodes);
  for (std::size_t n = 0; n < num_nodes; ++n) {
    out.shard_indices[n].assign(perm.begin() + n * per_node, perm.begin() + (n + 1) * per_node);
  }
  out.leftover.assign(perm.begin() + num_nodes * per_node, perm.end());
  return out;
}

ShardedPool shard(const LabeledBatch& pool, std::size_t num_nodes, std::size_t per_node,
                  std::uint64_t seed) {
  const auto assignment = shard_indices(pool.size(), num_nodes, per_node, seed);
  ShardedPool out;
  for (const auto& idx : assignment.shard_indices) out.shards.push_back(select_rows(pool, idx));
  out.leftover = select_rows(pool, assignment.leftover);
  return out;
}

DayDataset make_day_dataset(const LabeledBatch& pool, std::uint32_t day, double validation_fraction,
                            std::size_t num_nodes, std::size_t per_node, std::uint64_t seed) {
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must be in [0, 1)");
  }
  const auto n_val = static_cast<std::size_t>(
      std::llround(validation_fraction * static_cast<double>(pool.size())));
  RngStream split_rng(derive_seed(seed, "validation", day));
  const auto perm = permutation(pool.size(), split_rng);
  const std::span<const std::size_t> all(perm);

  DayDataset out;
  out.day = day;
  out.validation = select_rows(pool, all.first(n_val));
  const auto train_pool = select_rows(pool, all.subspan(n_val));
  out.train_shards = shard(train_pool, num_nodes, per_node, derive_seed(seed, "shard", day)).shards;
  return out;
}

namespace {

double parse_double(std::string_view field, std::size_t line) {
  double v = 0.0;
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  while (first < last && (*first == ' ' || *first == '\t')) ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\t' || last[-1] == '\r')) --last;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || first == last) {
    throw ParseError("line " + std::to_string(line) + ": cannot parse '" + std::string(field) +
                     "' as a number");
  }
  return v;
}

}  // namespace

LabeledBatch load_tabular(const std::filesystem::path& path, const TabularSchema& schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  LabeledBatch pool;
  std::size_t num_features = schema.num_features;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> row;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    row.clear();
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      row.push_back(parse_double(rest.substr(0, comma), line_no));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (row.size() < 2) {
      throw ParseError("line " + std::to_string(line_no) + ": need at least one feature and a label");
    }
    if (num_features == 0) num_features = row.size() - 1;
    if (row.size() != num_features + 1) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(num_features + 1) + " fields, got " +
                       std::to_string(row.size()));
    }
    const double label = row.back();
    if (label != std::floor(label)) {
      throw ParseError("line " + std::to_string(line_no) + ": label is not an integer");
    }
    if (label < 0 || (schema.num_classes > 0 && label >= static_cast<double>(schema.num_classes))) {
      throw ParseError("line " + std::to_string(line_no) + ": label " +
                       std::to_string(static_cast<long long>(label)) + " outside [0, " +
                       std::to_string(schema.num_classes) + ")");
    }
    pool.features.push_row(std::span<const double>(row).first(num_features));
    pool.labels.push_back(static_cast<int>(label));
  }
  return pool;
}

void save_tabular(const std::filesystem::path& path, const LabeledBatch& pool) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  char buf[64];
  for (std::size_t r = 0; r < pool.size(); ++r) {
    for (double v : pool.features.row(r)) {
      const auto res = std::to_chars(buf, buf + sizeof buf, v);
      out.write(buf, res.ptr - buf);
      out.put(',');
    }
    out << pool.labels[r] << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace bfl
