#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "primevm/pattern.hpp"
#include "primevm/substrate.hpp"

namespace primevm {

/// Named patterns of one exact size over one domain.
class SymbolSpace {
 public:
  SymbolSpace() = default;
  SymbolSpace(std::size_t cluster_size, std::size_t active, std::uint64_t seed);

  std::size_t cluster_size() const noexcept { return cluster_size_; }
  std::size_t active() const noexcept { return active_; }
  double coverage() const noexcept { return static_cast<double>(active_) / static_cast<double>(cluster_size_); }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t size() const noexcept { return names_.size(); }

  /// Throws on a duplicate name, a duplicate pattern, or a size mismatch.
  const Pattern& add(const std::string& name, Pattern p);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const Pattern& at(const std::string& name) const;
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<Pattern>& patterns() const noexcept { return patterns_; }

  /// Name whose pattern equals `spikes` exactly.
  std::optional<std::string> name_of(std::span<const NeuronIndex> spikes) const;
  /// Name with the largest Jaccard overlap, with that overlap.
  std::pair<std::string, double> nearest(std::span<const NeuronIndex> spikes) const;

  void write(std::ostream& out) const;
  static SymbolSpace read(std::istream& in);

 private:
  std::size_t cluster_size_ = 0;
  std::size_t active_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<std::string> names_;
  std::vector<Pattern> patterns_;
  std::map<std::string, std::size_t> index_;
  std::map<SpikeSet, std::size_t> by_pattern_;
};

using PatternFilter = std::function<bool(const Pattern&)>;

/// Draws fresh exact-size patterns from a seeded stream. Patterns rejected by the
/// filter or equal to one already in the target space are redrawn.
class AttractorSource {
 public:
  AttractorSource(std::size_t cluster_size, std::size_t active, std::uint64_t seed, PatternFilter filter = {},
                  std::size_t max_retries = 1000);
  Pattern draw(const SymbolSpace& avoid);
  std::size_t rejected() const noexcept { return rejected_; }

 private:
  std::size_t cluster_size_;
  std::size_t active_;
  std::mt19937_64 rng_;
  PatternFilter filter_;
  std::size_t max_retries_;
  std::size_t rejected_ = 0;
};

/// `count` patterns named prefix0, prefix1, ...; or one per given name.
SymbolSpace generate_prime_attractors(std::size_t cluster_size, std::size_t active, std::size_t count,
                                      std::uint64_t seed, PatternFilter filter = {}, const std::string& prefix = "s");
SymbolSpace generate_prime_attractors(std::size_t cluster_size, std::size_t active,
                                      const std::vector<std::string>& names, std::uint64_t seed,
                                      PatternFilter filter = {});

/// Accepts a pattern when each of its neurons has at least `min_in` synapses from
/// the rest of the pattern in `mask`.
PatternFilter self_reachability(const SynapseMatrix& mask, std::size_t min_in);

struct MarginParams {
  double alpha = 0.5;
  double margin = 0.05;
  double excitation = 2.0;
  std::size_t max_epochs = 2000;
};

/// One input pattern and the pattern it must produce; a null target means
/// every destination neuron must stay inhibited.
struct TrainingPair {
  const Pattern* input = nullptr;
  const Pattern* target = nullptr;
};

struct TrainingReport {
  std::size_t epochs = 0;
  std::size_t updates = 0;
  std::size_t constraints = 0;
  std::size_t residual = 0;     // constraints still violated at the end
  std::size_t unreachable = 0;  // target neurons with no synapse from their input
};

/// Per-destination-neuron margin projection: response >= excitation + margin on
/// target neurons and <= -alpha - margin elsewhere, for every neuron the input
/// reaches. Throws ConvergenceError when the epoch budget runs out.
TrainingReport train_margins(SynapseMatrix& weights, const std::vector<TrainingPair>& pairs, const MarginParams& p);

/// Exhaustive check of response >= 1 on targets and <= -alpha elsewhere
/// (reachable neurons only). Returns the number of violations.
std::size_t count_margin_violations(const SynapseMatrix& weights, const std::vector<TrainingPair>& pairs,
                                    double alpha);

struct TrainedRegister {
  const SymbolSpace* space = nullptr;
  std::shared_ptr<SynapseMatrix> self_weights;
  double alpha = 0.5;
  TrainingReport report;
};

TrainedRegister train_self_connection(const SymbolSpace& space, SynapseMatrix mask, const MarginParams& p);

/// Pairs are (source symbol, target symbol); an empty target name means "no output".
TrainingReport train_mapping(const SymbolSpace& src, const SymbolSpace& dst,
                             const std::vector<std::pair<std::string, std::string>>& pairs, SynapseMatrix& mask,
                             const MarginParams& p);

/// Recognizer weights: a_rec on every synapse from a watched pattern to its panel neuron.
/// a_rec = 1 / (fill * |pattern|).
SynapseMatrix build_recognizer(const SymbolSpace& src, const std::vector<std::string>& watched, std::size_t panel_size,
                               const std::vector<NeuronIndex>& panel_neurons, double fill);

/// Single register network: one cluster with its self connection.
Network make_register_network(std::shared_ptr<SynapseMatrix> self_weights, const std::string& name = "reg");

struct RecallOptions {
  std::size_t max_ticks = 200;
  std::size_t stable_ticks = 3;
};

/// Injects `drive` every tick into `cluster` until its spike set is identical for
/// `stable_ticks` consecutive ticks; returns that set, or none.
std::optional<SpikeSet> recall(Network& net, ClusterId cluster, const std::vector<double>& drive,
                               const RecallOptions& opt = {});
std::optional<SpikeSet> recall(const TrainedRegister& reg, const std::vector<double>& drive,
                               const RecallOptions& opt = {});

/// Runs the network with no input until `cluster` keeps one spike set for `stable_ticks` ticks.
std::optional<SpikeSet> settle(Network& net, ClusterId cluster, std::size_t max_ticks, std::size_t stable_ticks,
                               std::span<const Injection> external = {}, std::span<const ControlId> controls = {});

/// (dst, src, weight) triples of the nonzero synapses, after a header line.
void write_triples(std::ostream& out, const SynapseMatrix& m);
/// Reads triples into a matrix with the same mask; unknown synapses are an error.
void read_triples(std::istream& in, SynapseMatrix& m);

}  // namespace primevm
