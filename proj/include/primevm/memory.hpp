#pragma once

#include <cstddef>
#include <memory>
#include <optional>

#include "primevm/attractors.hpp"
#include "primevm/pattern.hpp"
#include "primevm/substrate.hpp"

namespace primevm {

/// Expected open synapses into one bound output neuron: |in| * fanout / dst_size.
double expected_theta(std::size_t in_active, std::size_t fanout, std::size_t dst_size);

/// Weight giving an average bound drive of `bound_drive` per tick: bound_drive / theta.
Weight nominal_weight(double bound_drive, double theta);

/// One-shot memory on a plastic random connection. Weights are 0 or `a`; the
/// default wiring lives in a second matrix with weight a * default_ratio.
class OneShotMemory {
 public:
  OneShotMemory(std::shared_ptr<SynapseMatrix> synapses, Weight nominal);

  Weight nominal() const noexcept { return a_; }
  const std::shared_ptr<SynapseMatrix>& synapses() const noexcept { return w_; }
  const std::shared_ptr<SynapseMatrix>& default_synapses() const noexcept { return default_; }
  std::size_t live_bindings() const noexcept { return live_; }

  std::size_t bind(const Pattern& in, const Pattern& out) { return bind(in.active(), out.active()); }
  std::size_t unbind(const Pattern& in, const Pattern& out) { return unbind(in.active(), out.active()); }
  std::size_t bind(std::span<const NeuronIndex> in, std::span<const NeuronIndex> out);
  std::size_t unbind(std::span<const NeuronIndex> in, std::span<const NeuronIndex> out);

  /// Every source neuron reaches the default pattern through the synapses of
  /// its own mask that land in the pattern, at weight a * ratio.
  void install_default(const Pattern& def, double ratio = 0.5);

  /// Every weight is exactly 0 or a (default wiring: exactly a * ratio).
  bool trichotomous() const;

 private:
  std::shared_ptr<SynapseMatrix> w_;
  std::shared_ptr<SynapseMatrix> default_;
  Weight a_;
  Weight default_weight_ = 0.0F;
  std::size_t live_ = 0;
};

/// Source cluster held spiking on `in` through the memory into `out`'s register.
std::optional<SpikeSet> recall_bound(const OneShotMemory& mem, std::span<const NeuronIndex> in,
                                     const TrainedRegister& out, const RecallOptions& opt = {});

/// Largest n with n <= (1 - s c1 - t c1 c2) / (gamma c1 c2) - m / c2 - 1 / c1; 0 when the
/// memory is over-forgotten (numerator <= 0) or the bound is negative.
std::size_t capacity_bound(double c1, double c2, double gamma, double m, double s, double t);

}  // namespace primevm
