#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "primevm/pattern.hpp"

namespace primevm {

using Weight = float;

/// 1 iff the potential reached the firing threshold.
constexpr int spike_fn(double x) noexcept { return x >= 1.0 ? 1 : 0; }

/// max(lo, min(hi, x)); throws ConfigError when lo > hi.
double clamp(double lo, double hi, double x);

enum class ClusterKind { symbol, panel };

struct ClusterSpec {
  std::string name;
  std::size_t size = 0;
  ClusterKind kind = ClusterKind::symbol;
  double leak = 0.0;
};

/// Sparse synapses stored by source neuron (CSR). Targets of each row are sorted.
class SynapseMatrix {
 public:
  struct InEdge {
    NeuronIndex src;
    std::size_t slot;
  };

  SynapseMatrix() = default;
  SynapseMatrix(std::size_t src_size, std::size_t dst_size, const std::vector<std::vector<NeuronIndex>>& targets);

  /// Each source neuron gets `fanout` distinct targets drawn uniformly without replacement.
  /// With `no_autapse`, neuron k never targets index k.
  static SynapseMatrix random(std::size_t src_size, std::size_t dst_size, std::size_t fanout, std::uint64_t seed,
                              bool no_autapse = false);
  static SynapseMatrix dense(std::size_t src_size, std::size_t dst_size);

  std::size_t src_size() const noexcept { return src_size_; }
  std::size_t dst_size() const noexcept { return dst_size_; }
  std::size_t synapse_count() const noexcept { return col_.size(); }
  std::size_t fanout(NeuronIndex src) const noexcept { return row_[src + 1] - row_[src]; }
  std::size_t max_fanout() const noexcept;

  std::span<const NeuronIndex> targets(NeuronIndex src) const noexcept {
    return {col_.data() + row_[src], row_[src + 1] - row_[src]};
  }
  std::span<const Weight> weights(NeuronIndex src) const noexcept {
    return {w_.data() + row_[src], row_[src + 1] - row_[src]};
  }
  std::span<Weight> weights(NeuronIndex src) noexcept { return {w_.data() + row_[src], row_[src + 1] - row_[src]}; }

  std::size_t row_begin(NeuronIndex src) const noexcept { return row_[src]; }
  NeuronIndex target_at(std::size_t slot) const noexcept { return col_[slot]; }
  Weight weight_at(std::size_t slot) const noexcept { return w_[slot]; }
  void set_weight_at(std::size_t slot, Weight w) noexcept { w_[slot] = w; }
  std::span<const Weight> all_weights() const noexcept { return w_; }

  std::optional<std::size_t> find(NeuronIndex src, NeuronIndex dst) const noexcept;

  /// Sets every existing synapse from `srcs` to `dsts` (both sorted) to `value`. Returns the number touched.
  std::size_t set_block(std::span<const NeuronIndex> srcs, std::span<const NeuronIndex> dsts, Weight value);

  /// Incoming edges per destination neuron (slots index the CSR arrays).
  std::vector<std::vector<InEdge>> incoming() const;

  /// Bumped on every weight mutation; lets simulators cache per-matrix work.
  std::uint64_t version() const noexcept { return version_; }
  void touch() noexcept { ++version_; }

 private:
  std::size_t src_size_ = 0;
  std::size_t dst_size_ = 0;
  std::vector<std::size_t> row_{0};
  std::vector<NeuronIndex> col_;
  std::vector<Weight> w_;
  std::uint64_t version_ = 0;
};

enum class ConnectionKind { self, assignation, mapping, one_shot_memory, recognizer, per_neuron };

std::string_view to_string(ConnectionKind k);

struct Connection {
  std::string name;
  ClusterId src = 0;
  ClusterId dst = 0;
  ConnectionKind kind = ConnectionKind::mapping;
  /// Several connections may share one matrix (shared-weights shortcut).
  std::shared_ptr<SynapseMatrix> synapses;
  /// Only plastic connections react to bind/unbind controls.
  bool plastic = false;
  Weight nominal_weight = 0.0F;
};

enum class ControlKind { inhibit, bind, unbind };

std::string_view to_string(ControlKind k);

struct NeuronRef {
  ClusterId cluster = 0;
  NeuronIndex neuron = 0;
};

/// Broadcast line. An inhibit line acts on `target`; bind/unbind lines act on the
/// plastic connections whose source cluster is `target`.
/// A line is active during a step when its driver spiked on the previous tick, or
/// when the caller raises it explicitly.
struct ControlLine {
  std::string name;
  ControlKind kind = ControlKind::inhibit;
  ClusterId target = 0;
  std::optional<NeuronRef> driver;
};

using ControlId = std::size_t;

struct Branch {
  NeuronIndex table;
  NeuronIndex key;
};

/// Hardwired second-degree network feeding a hash cluster: a destination neuron
/// receives +1 for each branch whose two source neurons both spiked.
struct SecondDegreeSpec {
  std::string name;
  ClusterId table_src = 0;
  ClusterId key_src = 0;
  ClusterId dst = 0;
  std::size_t table_size = 0;
  std::size_t key_size = 0;
  double coverage = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::vector<Branch>> branches;
};

class Topology {
 public:
  ClusterId add_cluster(ClusterSpec spec);
  std::size_t add_connection(Connection c);
  ControlId add_control(ControlLine line);
  void set_driver(ControlId id, NeuronRef driver);
  std::size_t add_second_degree(SecondDegreeSpec spec);

  std::size_t cluster_count() const noexcept { return clusters_.size(); }
  const ClusterSpec& cluster(ClusterId id) const { return clusters_.at(id); }
  const std::vector<ClusterSpec>& clusters() const noexcept { return clusters_; }
  std::optional<ClusterId> find_cluster(std::string_view name) const;
  ClusterId cluster_id(std::string_view name) const;

  const std::vector<Connection>& connections() const noexcept { return connections_; }
  const Connection& connection(std::size_t i) const { return connections_.at(i); }
  std::optional<std::size_t> find_connection(std::string_view name) const;

  const std::vector<ControlLine>& controls() const noexcept { return controls_; }
  const ControlLine& control(ControlId id) const { return controls_.at(id); }
  std::optional<ControlId> find_control(std::string_view name) const;
  ControlId control_id(std::string_view name) const;

  const std::vector<SecondDegreeSpec>& second_degree() const noexcept { return second_degree_; }

  /// Connection indices whose destination is `id`.
  const std::vector<std::size_t>& incoming(ClusterId id) const { return incoming_.at(id); }
  /// Second-degree network indices whose destination is `id`.
  const std::vector<std::size_t>& hash_inputs(ClusterId id) const { return hash_inputs_.at(id); }
  /// For second-degree network `sd`: per table neuron, the (key neuron, hash neuron) pairs.
  const std::vector<std::vector<std::pair<NeuronIndex, NeuronIndex>>>& branch_index(std::size_t sd) const {
    return branch_index_.at(sd);
  }

 private:
  std::vector<ClusterSpec> clusters_;
  std::vector<Connection> connections_;
  std::vector<ControlLine> controls_;
  std::vector<SecondDegreeSpec> second_degree_;
  std::vector<std::vector<std::size_t>> incoming_;
  std::vector<std::vector<std::size_t>> hash_inputs_;
  std::vector<std::vector<std::vector<std::pair<NeuronIndex, NeuronIndex>>>> branch_index_;
};

/// Potentials X_{i,n} of every cluster plus S(X_{i,n}) in index form.
struct NetworkState {
  std::vector<std::vector<double>> potentials;
  std::vector<SpikeSet> spikes;
  std::uint64_t tick = 0;

  static NetworkState zeros(const Topology& topo);
};

/// Potential added to chosen neurons of one cluster during a step.
struct Injection {
  ClusterId cluster = 0;
  std::vector<std::pair<NeuronIndex, double>> values;

  static Injection uniform(ClusterId cluster, std::span<const NeuronIndex> neurons, double value);
};

/// A bind/unbind control observed during a step, to be applied to one plastic connection.
struct PlasticityEvent {
  std::size_t connection = 0;
  ControlKind kind = ControlKind::bind;
  SpikeSet src_spikes;
  SpikeSet dst_spikes;
};

struct StepResult {
  NetworkState next;
  std::vector<PlasticityEvent> plasticity;
};

/// One global tick:
///   X' = (1-l)(C01(X) - S(X)) + sum_j W_j S(X_j) + H(table, key) + external
/// Inhibited clusters are forced to zero. Bind/unbind lines produce plasticity events
/// computed from the tick-n spikes; weights are not modified here.
StepResult step(const Topology& topo, const NetworkState& state, std::span<const Injection> external = {},
                std::span<const ControlId> controls = {});

/// bind sets the touched synapses to the connection's nominal weight, unbind to 0.
std::size_t apply_plasticity(const Topology& topo, const PlasticityEvent& ev);

struct TopologyViolation {
  enum class Kind { fanout, incoming };
  Kind kind;
  std::string subject;
  std::size_t value;
  std::size_t limit;
  std::string message;
};

/// Checks per-connection source fan-out against kappa and the number of distinct
/// non-control source clusters per destination (self included) against max_incoming.
std::vector<TopologyViolation> assert_topology_limits(const Topology& topo, std::size_t kappa,
                                                      std::size_t max_incoming = 3);

class TraceWriter {
 public:
  TraceWriter(std::ostream& out, bool full_spikes) : out_(&out), full_(full_spikes) {}
  void write(const Topology& topo, const NetworkState& state);

 private:
  std::ostream* out_;
  bool full_;
};

/// Stateful driver around `step`: owns topology and state, applies plasticity
/// events, and skips clusters whose successor state is provably unchanged.
class Network {
 public:
  explicit Network(Topology topo);

  const Topology& topology() const noexcept { return topo_; }
  const NetworkState& state() const noexcept { return state_; }
  std::uint64_t tick() const noexcept { return state_.tick; }
  const SpikeSet& spikes(ClusterId id) const { return state_.spikes.at(id); }
  std::span<const double> potentials(ClusterId id) const { return state_.potentials.at(id); }

  void advance(std::span<const Injection> external = {}, std::span<const ControlId> controls = {});
  void run(std::size_t ticks, std::span<const Injection> external = {}, std::span<const ControlId> controls = {});

  /// Puts `neurons` at threshold so they spike now; the rest of the cluster is zeroed.
  void preload(ClusterId id, std::span<const NeuronIndex> neurons);
  void clear(ClusterId id);
  void reset();

  void set_trace(TraceWriter* trace) noexcept { trace_ = trace; }
  std::uint64_t clusters_skipped() const noexcept { return skipped_; }

 private:
  void invalidate(ClusterId id);

  Topology topo_;
  NetworkState state_;
  TraceWriter* trace_ = nullptr;
  std::uint64_t skipped_ = 0;

  // Per-cluster memo of the last transition (see advance()).
  std::vector<char> stable_;          // X_n == X_{n-1} and inputs of that transition were pure W/H
  std::vector<char> spikes_same_;     // S(X_n) == S(X_{n-1})
  std::vector<std::uint64_t> weight_sig_;
  std::vector<char> all_zero_;
  std::vector<double> scratch_;
  std::vector<char> flags_;
};

}  // namespace primevm
