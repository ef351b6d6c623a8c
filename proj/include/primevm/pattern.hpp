#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace primevm {

using NeuronIndex = std::uint32_t;
using ClusterId = std::uint32_t;

/// Sorted, duplicate-free list of neuron indices (a spike vector in index form).
using SpikeSet = std::vector<NeuronIndex>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Raised when a trainer or a simulated recall cannot reach its target.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A sparse activation pattern: the representation of one symbol.
///
/// `active` is strictly increasing and every index is below `domain_size`.
/// A pattern is never empty and never covers its whole domain.
class Pattern {
 public:
  Pattern() = default;
  Pattern(std::size_t domain_size, std::vector<NeuronIndex> active);

  std::size_t domain_size() const noexcept { return domain_size_; }
  std::span<const NeuronIndex> active() const noexcept { return active_; }
  const SpikeSet& indices() const noexcept { return active_; }
  std::size_t size() const noexcept { return active_.size(); }
  double coverage() const noexcept {
    return domain_size_ == 0 ? 0.0 : static_cast<double>(active_.size()) / static_cast<double>(domain_size_);
  }
  bool contains(NeuronIndex n) const noexcept;

  friend bool operator==(const Pattern&, const Pattern&) = default;

 private:
  std::size_t domain_size_ = 0;
  SpikeSet active_;
};

std::size_t overlap(std::span<const NeuronIndex> a, std::span<const NeuronIndex> b);
SpikeSet set_union(std::span<const NeuronIndex> a, std::span<const NeuronIndex> b);
double jaccard(std::span<const NeuronIndex> a, std::span<const NeuronIndex> b);
bool is_sorted_unique(std::span<const NeuronIndex> s);

std::string to_string(std::span<const NeuronIndex> s);

}  // namespace primevm
