#include "bfl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bfl/errors.hpp"

namespace bfl {

void MetricsConfig::validate() const {
  if (num_bins == 0) throw ConfigError("metrics.bins must be at least 1");
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw ConfigError("metrics.threshold must be in (0, 1]");
  }
}

PredictionSet PredictionSet::from_probs(Matrix probs, std::vector<int> truth) {
  if (probs.rows() != truth.size()) {
    throw ShapeError("prediction set has " + std::to_string(probs.rows()) + " rows but " +
                     std::to_string(truth.size()) + " labels");
  }
  PredictionSet p;
  p.predicted.resize(truth.size());
  p.confidence.resize(truth.size());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const auto row = probs.row(i);
    const auto best = std::max_element(row.begin(), row.end());  // first max wins
    p.predicted[i] = static_cast<int>(best - row.begin());
    p.confidence[i] = *best;
  }
  p.probs = std::move(probs);
  p.truth = std::move(truth);
  return p;
}

Matrix predictive(const ModelSpec& spec, const PosteriorSamples& samples, const Matrix& features,
                  std::size_t num_avg) {
  const auto ts = samples.num_samples();
  if (num_avg < 1 || num_avg > ts) {
    throw ConfigError("predictive: sample count " + std::to_string(num_avg) +
                      " outside [1, " + std::to_string(ts) + "]");
  }
  Matrix avg(features.rows(), spec.num_classes());
  for (std::size_t s = ts - num_avg; s < ts; ++s) {
    const auto probs = forward(spec, samples.samples.row(s), features);
    for (std::size_t k = 0; k < avg.data().size(); ++k) avg.data()[k] += probs.data()[k];
  }
  const double inv = 1.0 / static_cast<double>(num_avg);
  for (double& v : avg.data()) v *= inv;
  return avg;
}

double accuracy(const PredictionSet& pred) {
  if (pred.size() == 0) throw ConfigError("accuracy of an empty prediction set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred.predicted[i] == pred.truth[i];
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

std::size_t CalibrationBins::total() const noexcept {
  std::size_t n = 0;
  for (const auto& b : bins) n += b.count;
  return n;
}

CalibrationBins calibration_bins(const PredictionSet& pred, std::size_t num_bins) {
  if (num_bins == 0) throw ConfigError("calibration_bins: need at least one bin");
  if (pred.size() == 0) throw ConfigError("calibration_bins: empty prediction set");
  CalibrationBins out;
  out.bins.resize(num_bins);
  const double j_count = static_cast<double>(num_bins);
  std::vector<double> correct(num_bins, 0.0);
  std::vector<double> conf_sum(num_bins, 0.0);
  for (std::size_t j = 0; j < num_bins; ++j) {
    out.bins[j].lower = static_cast<double>(j) / j_count;
    out.bins[j].upper = static_cast<double>(j + 1) / j_count;
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double c = pred.confidence[i];
    auto j = static_cast<std::ptrdiff_t>(std::ceil(c * j_count));
    j = std::clamp<std::ptrdiff_t>(j, 1, static_cast<std::ptrdiff_t>(num_bins)) - 1;
    auto& bin = out.bins[static_cast<std::size_t>(j)];
    ++bin.count;
    correct[static_cast<std::size_t>(j)] += pred.predicted[i] == pred.truth[i] ? 1.0 : 0.0;
    conf_sum[static_cast<std::size_t>(j)] += c;
  }
  for (std::size_t j = 0; j < num_bins; ++j) {
    auto& bin = out.bins[j];
    if (bin.count == 0) continue;
    bin.accuracy = correct[j] / static_cast<double>(bin.count);
    bin.confidence = conf_sum[j] / static_cast<double>(bin.count);
  }
  return out;
}

double ece(const CalibrationBins& bins, std::size_t total) {
  if (total == 0) throw ConfigError("ece: zero total count");
  double e = 0.0;
  for (const auto& b : bins.bins) {
    if (b.count == 0) continue;
    e += static_cast<double>(b.count) / static_cast<double>(total) *
         std::abs(b.accuracy - b.confidence);
  }
  return e;
}

std::optional<std::size_t> iterations_to_threshold(std::span<const double> curve,
                                                   double threshold) {
  if (curve.empty()) throw ConfigError("iterations_to_threshold: empty curve");
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve[i] >= threshold) return i + 1;
  }
  return std::nullopt;
}

}  // namespace bfl
