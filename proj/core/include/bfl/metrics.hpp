#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "bfl/model.hpp"
#include "bfl/prior.hpp"

namespace bfl {

struct MetricsConfig {
  std::size_t num_bins = 10;  // J
  double threshold = 0.85;
  /// Posterior samples in the end-of-day predictive average; 0 uses all.
  std::size_t predictive_samples = 0;

  void validate() const;
};

/// Predictive probabilities with their argmax labels and confidences.
struct PredictionSet {
  Matrix probs;
  std::vector<int> predicted;
  std::vector<double> confidence;
  std::vector<int> truth;

  std::size_t size() const noexcept { return truth.size(); }

  /// Argmax ties resolve to the lowest class index.
  static PredictionSet from_probs(Matrix probs, std::vector<int> truth);
};

/// Mean of forward() over the last `num_avg` rows of `samples`.
Matrix predictive(const ModelSpec& spec, const PosteriorSamples& samples, const Matrix& features,
                  std::size_t num_avg);

double accuracy(const PredictionSet& pred);

struct CalibrationBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double accuracy = 0.0;
  double confidence = 0.0;

  double gap() const noexcept { return accuracy - confidence; }
};

struct CalibrationBins {
  std::vector<CalibrationBin> bins;

  std::size_t total() const noexcept;
};

/// Equal-width confidence bins. Sample i goes to bin ceil(conf_i * J),
/// clamped to [1, J], so confidence 0 lands in the first bin and 1 in the last.
CalibrationBins calibration_bins(const PredictionSet& pred, std::size_t num_bins);

/// sum_j |B_j| / total * |acc(B_j) - conf(B_j)|.
double ece(const CalibrationBins& bins, std::size_t total);

/// 1-based index of the first entry >= threshold, or nullopt.
std::optional<std::size_t> iterations_to_threshold(std::span<const double> curve,
                                                   double threshold);

}  // namespace bfl
