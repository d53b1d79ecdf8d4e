#include "bfl/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bfl/errors.hpp"

namespace bfl {

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + name + "' (expected relu or tanh)");
}

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

void ModelSpec::validate() const {
  if (layer_sizes.size() < 2) {
    throw ConfigError("layer_sizes needs at least an input and an output size");
  }
  for (std::size_t i = 0; i < layer_sizes.size(); ++i) {
    if (layer_sizes[i] == 0) {
      throw ConfigError("layer_sizes[" + std::to_string(i) + "] must be positive");
    }
  }
}

std::size_t param_count(const ModelSpec& spec) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    n += spec.layer_sizes[l] * spec.layer_sizes[l + 1] + spec.layer_sizes[l + 1];
  }
  return n;
}

void LabeledBatch::validate(const ModelSpec& spec) const {
  if (labels.empty()) throw ShapeError("batch is empty");
  if (features.rows() != labels.size()) {
    throw ShapeError("batch has " + std::to_string(features.rows()) + " feature rows but " +
                     std::to_string(labels.size()) + " labels");
  }
  if (features.cols() != spec.input_dim()) {
    throw ShapeError("layer 0 expects input dim " + std::to_string(spec.input_dim()) +
                     ", batch has " + std::to_string(features.cols()));
  }
  const auto classes = static_cast<int>(spec.num_classes());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) {
      throw ShapeError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                       " outside [0, " + std::to_string(classes) + ")");
    }
  }
}

LabeledBatch select_rows(const LabeledBatch& pool, std::span<const std::size_t> indices) {
  LabeledBatch out;
  out.features = Matrix(indices.size(), pool.features.cols());
  out.labels.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto src = pool.features.row(indices[i]);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
    out.labels[i] = pool.labels[indices[i]];
  }
  return out;
}

namespace {

void check_params(const ModelSpec& spec, std::span<const double> params) {
  const auto expected = param_count(spec);
  if (params.size() != expected) {
    throw ShapeError("parameter vector has length " + std::to_string(params.size()) +
                     ", model needs " + std::to_string(expected));
  }
}

void check_features(const ModelSpec& spec, const Matrix& features) {
  if (features.cols() != spec.input_dim()) {
    throw ShapeError("layer 0 expects input dim " + std::to_string(spec.input_dim()) +
                     ", got " + std::to_string(features.cols()));
  }
}

// Per-sample activations of every layer: acts[0] is the input, acts[L] the
// softmax output. Hidden entries hold post-activation values.
struct Trace {
  std::vector<std::vector<double>> acts;
};

void softmax_inplace(std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

void forward_sample(const ModelSpec& spec, std::span<const double> params,
                    std::span<const double> x, Trace& trace) {
  const auto layers = spec.num_layers();
  trace.acts.resize(layers + 1);
  trace.acts[0].assign(x.begin(), x.end());
  std::size_t offset = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto in = spec.layer_sizes[l];
    const auto out = spec.layer_sizes[l + 1];
    const double* w = params.data() + offset;
    const double* b = w + in * out;
    const auto& a = trace.acts[l];
    auto& z = trace.acts[l + 1];
    z.resize(out);
    for (std::size_t o = 0; o < out; ++o) {
      double s = b[o];
      const double* wr = w + o * in;
      for (std::size_t i = 0; i < in; ++i) s += wr[i] * a[i];
      z[o] = s;
    }
    if (l + 1 < layers) {
      if (spec.activation == Activation::relu) {
        for (double& v : z) v = v > 0.0 ? v : 0.0;
      } else {
        for (double& v : z) v = std::tanh(v);
      }
    } else {
      softmax_inplace(z);
    }
    offset += in * out + out;
  }
}

}  // namespace

std::vector<LayerParams> unflatten(const ModelSpec& spec, std::span<const double> params) {
  check_params(spec, params);
  std::vector<LayerParams> layers;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const auto in = spec.layer_sizes[l];
    const auto out = spec.layer_sizes[l + 1];
    LayerParams lp{Matrix(out, in), std::vector<double>(out)};
    std::copy_n(params.begin() + offset, in * out, lp.weights.data().begin());
    offset += in * out;
    std::copy_n(params.begin() + offset, out, lp.bias.begin());
    offset += out;
    layers.push_back(std::move(lp));
  }
  return layers;
}

ParamVector flatten(const ModelSpec& spec, const std::vector<LayerParams>& layers) {
  if (layers.size() != spec.num_layers()) {
    throw ShapeError("expected " + std::to_string(spec.num_layers()) + " layers, got " +
                     std::to_string(layers.size()));
  }
  ParamVector out;
  out.reserve(param_count(spec));
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto in = spec.layer_sizes[l];
    const auto o = spec.layer_sizes[l + 1];
    const auto& lp = layers[l];
    if (lp.weights.rows() != o || lp.weights.cols() != in || lp.bias.size() != o) {
      throw ShapeError("layer " + std::to_string(l) + " block has the wrong shape");
    }
    out.insert(out.end(), lp.weights.data().begin(), lp.weights.data().end());
    out.insert(out.end(), lp.bias.begin(), lp.bias.end());
  }
  return out;
}

Matrix forward(const ModelSpec& spec, std::span<const double> params, const Matrix& features) {
  check_params(spec, params);
  check_features(spec, features);
  Matrix probs(features.rows(), spec.num_classes());
  Trace trace;
  for (std::size_t r = 0; r < features.rows(); ++r) {
    forward_sample(spec, params, features.row(r), trace);
    std::copy(trace.acts.back().begin(), trace.acts.back().end(), probs.row(r).begin());
  }
  return probs;
}

double nll_loss(const ModelSpec& spec, std::span<const double> params,
                const LabeledBatch& batch) {
  check_params(spec, params);
  batch.validate(spec);
  double loss = 0.0;
  Trace trace;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    forward_sample(spec, params, batch.features.row(r), trace);
    const double p = trace.acts.back()[static_cast<std::size_t>(batch.labels[r])];
    loss -= std::log(std::max(p, kProbabilityFloor));
  }
  return loss;
}

void accumulate_nll_grad(const ModelSpec& spec, std::span<const double> params,
                         const LabeledBatch& batch, std::span<double> out) {
  check_params(spec, params);
  batch.validate(spec);
  if (out.size() != params.size()) throw ShapeError("gradient buffer has the wrong length");

  const auto layers = spec.num_layers();
  std::vector<std::size_t> offsets(layers);
  for (std::size_t l = 0, off = 0; l < layers; ++l) {
    offsets[l] = off;
    off += spec.layer_sizes[l] * spec.layer_sizes[l + 1] + spec.layer_sizes[l + 1];
  }

  Trace trace;
  std::vector<double> delta;
  std::vector<double> prev_delta;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    forward_sample(spec, params, batch.features.row(r), trace);
    // Softmax + NLL: d/dz = p - onehot(y).
    delta = trace.acts.back();
    delta[static_cast<std::size_t>(batch.labels[r])] -= 1.0;

    for (std::size_t l = layers; l-- > 0;) {
      const auto in = spec.layer_sizes[l];
      const auto o = spec.layer_sizes[l + 1];
      const double* w = params.data() + offsets[l];
      double* gw = out.data() + offsets[l];
      double* gb = gw + in * o;
      const auto& a = trace.acts[l];
      for (std::size_t j = 0; j < o; ++j) {
        const double d = delta[j];
        gb[j] += d;
        double* gwr = gw + j * in;
        for (std::size_t i = 0; i < in; ++i) gwr[i] += d * a[i];
      }
      if (l == 0) break;
      prev_delta.assign(in, 0.0);
      for (std::size_t j = 0; j < o; ++j) {
        const double d = delta[j];
        const double* wr = w + j * in;
        for (std::size_t i = 0; i < in; ++i) prev_delta[i] += wr[i] * d;
      }
      if (spec.activation == Activation::relu) {
        for (std::size_t i = 0; i < in; ++i) {
          if (a[i] <= 0.0) prev_delta[i] = 0.0;
        }
      } else {
        for (std::size_t i = 0; i < in; ++i) prev_delta[i] *= 1.0 - a[i] * a[i];
      }
      delta.swap(prev_delta);
    }
  }
}

ParamVector nll_grad(const ModelSpec& spec, std::span<const double> params,
                     const LabeledBatch& batch) {
  ParamVector grad(params.size(), 0.0);
  accumulate_nll_grad(spec, params, batch, grad);
  return grad;
}

ParamVector init_params(const ModelSpec& spec, const GaussianDiagPrior& prior, RngStream& rng) {
  const auto n = param_count(spec);
  if (prior.size() != n) {
    throw ShapeError("prior has " + std::to_string(prior.size()) + " components, model needs " +
                     std::to_string(n));
  }
  ParamVector params(n);
  for (std::size_t j = 0; j < n; ++j) {
    params[j] = prior.mean()[j] + std::sqrt(prior.variance()[j]) * rng.normal();
  }
  return params;
}

}  // namespace bfl
