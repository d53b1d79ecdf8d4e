#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bfl/prior.hpp"
#include "bfl/rng.hpp"
#include "bfl/tensor.hpp"

namespace bfl {

enum class Activation { relu, tanh };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

/// Predicted probabilities are clamped to at least this value before the log.
inline constexpr double kProbabilityFloor = 1e-12;

/// Multilayer perceptron with softmax output.
///
/// layer_sizes = {input dim, hidden dims..., class count}. Hidden layers use
/// `activation`; the output layer is always a softmax over the class logits.
struct ModelSpec {
  std::vector<std::size_t> layer_sizes;
  Activation activation = Activation::relu;

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t num_classes() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return layer_sizes.size() - 1; }

  /// Throws ConfigError unless there are at least two sizes, all positive.
  void validate() const;
};

/// Sum over consecutive layer pairs of in*out + out.
std::size_t param_count(const ModelSpec& spec);

/// Features (B x input dim) with one integer label per row.
struct LabeledBatch {
  Matrix features;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }

  /// Throws ShapeError on an empty batch, a feature-dim mismatch, or a label
  /// outside [0, C).
  void validate(const ModelSpec& spec) const;
};

/// Rows `indices` of `pool`, in the order given.
LabeledBatch select_rows(const LabeledBatch& pool, std::span<const std::size_t> indices);

/// One layer's weights (out x in, row-major) and biases.
struct LayerParams {
  Matrix weights;
  std::vector<double> bias;
};

/// Splits a flat parameter vector into per-layer blocks. Layout: layers in
/// order; inside a layer, all weights row-major then all biases.
std::vector<LayerParams> unflatten(const ModelSpec& spec, std::span<const double> params);
ParamVector flatten(const ModelSpec& spec, const std::vector<LayerParams>& layers);

/// Class probabilities, one row per input row.
Matrix forward(const ModelSpec& spec, std::span<const double> params, const Matrix& features);

/// Sum over the batch of -log p(y_i | x_i, params).
double nll_loss(const ModelSpec& spec, std::span<const double> params,
                const LabeledBatch& batch);

/// Backpropagated gradient of nll_loss with respect to every parameter.
ParamVector nll_grad(const ModelSpec& spec, std::span<const double> params,
                     const LabeledBatch& batch);

/// Adds the gradient of nll_loss into `out` (length param_count(spec)).
void accumulate_nll_grad(const ModelSpec& spec, std::span<const double> params,
                         const LabeledBatch& batch, std::span<double> out);

/// Draws every component independently from the prior.
ParamVector init_params(const ModelSpec& spec, const GaussianDiagPrior& prior, RngStream& rng);

}  // namespace bfl
