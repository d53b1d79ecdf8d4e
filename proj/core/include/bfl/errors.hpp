#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bfl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent dimensions between a model, its parameters and its inputs.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or invalid argument value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Posterior fitting without enough retained samples.
class InsufficientSamplesError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file (tabular data, posterior file, report).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A sampler produced or consumed a non-finite value.
class DivergenceError : public Error {
 public:
  DivergenceError(std::string detail, std::size_t iteration)
      : Error(detail + " (iteration " + std::to_string(iteration) + ")"),
        detail_(std::move(detail)),
        iteration_(iteration) {}

  const std::string& detail() const noexcept { return detail_; }
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::string detail_;
  std::size_t iteration_;
};

/// Failure inside one node of a federated round; carries the node id and,
/// when known, the day and round.
class NodeError : public Error {
 public:
  NodeError(const std::string& what, std::size_t node)
      : Error("node " + std::to_string(node) + ": " + what), node_(node) {}

  std::size_t node() const noexcept { return node_; }

 private:
  std::size_t node_;
};

}  // namespace bfl
