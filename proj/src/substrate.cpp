#include "primevm/substrate.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

namespace primevm {

double clamp(double lo, double hi, double x) {
  if (lo > hi) throw ConfigError("clamp: lower bound exceeds upper bound");
  return std::max(lo, std::min(hi, x));
}

// ---------------------------------------------------------------------------
// SynapseMatrix

SynapseMatrix::SynapseMatrix(std::size_t src_size, std::size_t dst_size,
                             const std::vector<std::vector<NeuronIndex>>& targets)
    : src_size_(src_size), dst_size_(dst_size) {
  if (targets.size() != src_size) throw DimensionError("synapse rows do not match source size");
  row_.assign(1, 0);
  row_.reserve(src_size + 1);
  for (const auto& t : targets) {
    std::vector<NeuronIndex> sorted(t);
    std::sort(sorted.begin(), sorted.end());
    if (!is_sorted_unique(sorted)) throw DimensionError("duplicate synapse in row");
    if (!sorted.empty() && sorted.back() >= dst_size) throw DimensionError("synapse target out of range");
    col_.insert(col_.end(), sorted.begin(), sorted.end());
    row_.push_back(col_.size());
  }
  w_.assign(col_.size(), 0.0F);
}

SynapseMatrix SynapseMatrix::random(std::size_t src_size, std::size_t dst_size, std::size_t fanout,
                                    std::uint64_t seed, bool no_autapse) {
  if (fanout + (no_autapse ? 1 : 0) > dst_size) throw ConfigError("fan-out exceeds destination size");
  std::mt19937_64 rng(seed);
  std::vector<NeuronIndex> pool(dst_size);
  std::iota(pool.begin(), pool.end(), NeuronIndex{0});
  std::vector<std::vector<NeuronIndex>> rows(src_size);
  for (std::size_t s = 0; s < src_size; ++s) {
    // with no_autapse, index s is parked at the end of the pool and never drawn
    std::size_t last = dst_size - 1;
    if (no_autapse && s < dst_size) {
      const auto at = static_cast<std::size_t>(std::find(pool.begin(), pool.end(), static_cast<NeuronIndex>(s)) - pool.begin());
      std::swap(pool[at], pool[last]);
      --last;
    }
    for (std::size_t t = 0; t < fanout; ++t) {
      std::uniform_int_distribution<std::size_t> pick(t, last);
      std::swap(pool[t], pool[pick(rng)]);
    }
    rows[s].assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(fanout));
  }
  return SynapseMatrix(src_size, dst_size, rows);
}

SynapseMatrix SynapseMatrix::dense(std::size_t src_size, std::size_t dst_size) {
  std::vector<NeuronIndex> all(dst_size);
  std::iota(all.begin(), all.end(), NeuronIndex{0});
  return SynapseMatrix(src_size, dst_size, std::vector<std::vector<NeuronIndex>>(src_size, all));
}

std::size_t SynapseMatrix::max_fanout() const noexcept {
  std::size_t best = 0;
  for (std::size_t s = 0; s < src_size_; ++s) best = std::max(best, row_[s + 1] - row_[s]);
  return best;
}

std::optional<std::size_t> SynapseMatrix::find(NeuronIndex src, NeuronIndex dst) const noexcept {
  auto t = targets(src);
  auto it = std::lower_bound(t.begin(), t.end(), dst);
  if (it == t.end() || *it != dst) return std::nullopt;
  return row_[src] + static_cast<std::size_t>(it - t.begin());
}

std::size_t SynapseMatrix::set_block(std::span<const NeuronIndex> srcs, std::span<const NeuronIndex> dsts,
                                     Weight value) {
  std::size_t touched = 0;
  for (NeuronIndex s : srcs) {
    if (s >= src_size_) throw DimensionError("set_block: source index out of range");
    std::size_t slot = row_[s];
    const std::size_t end = row_[s + 1];
    auto d = dsts.begin();
    while (slot < end && d != dsts.end()) {
      if (col_[slot] < *d) {
        ++slot;
      } else if (*d < col_[slot]) {
        ++d;
      } else {
        w_[slot] = value;
        ++touched;
        ++slot;
        ++d;
      }
    }
  }
  if (touched) touch();
  return touched;
}

std::vector<std::vector<SynapseMatrix::InEdge>> SynapseMatrix::incoming() const {
  std::vector<std::vector<InEdge>> in(dst_size_);
  for (NeuronIndex s = 0; s < src_size_; ++s)
    for (std::size_t slot = row_[s]; slot < row_[s + 1]; ++slot) in[col_[slot]].push_back({s, slot});
  return in;
}

std::string_view to_string(ConnectionKind k) {
  switch (k) {
    case ConnectionKind::self: return "self";
    case ConnectionKind::assignation: return "assignation";
    case ConnectionKind::mapping: return "mapping";
    case ConnectionKind::one_shot_memory: return "one_shot_memory";
    case ConnectionKind::recognizer: return "recognizer";
    case ConnectionKind::per_neuron: return "per_neuron";
  }
  return "?";
}

std::string_view to_string(ControlKind k) {
  switch (k) {
    case ControlKind::inhibit: return "inhibit";
    case ControlKind::bind: return "bind";
    case ControlKind::unbind: return "unbind";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Topology

ClusterId Topology::add_cluster(ClusterSpec spec) {
  if (spec.size == 0) throw ConfigError("cluster '" + spec.name + "' has no neurons");
  if (spec.leak < 0.0 || spec.leak > 1.0) throw ConfigError("cluster '" + spec.name + "' leak outside [0, 1]");
  if (find_cluster(spec.name)) throw ConfigError("duplicate cluster name '" + spec.name + "'");
  clusters_.push_back(std::move(spec));
  incoming_.emplace_back();
  hash_inputs_.emplace_back();
  return static_cast<ClusterId>(clusters_.size() - 1);
}

std::size_t Topology::add_connection(Connection c) {
  if (c.src >= clusters_.size() || c.dst >= clusters_.size()) throw ConfigError("connection '" + c.name + "' references unknown cluster");
  if (!c.synapses) throw ConfigError("connection '" + c.name + "' has no synapses");
  if (c.synapses->src_size() != clusters_[c.src].size || c.synapses->dst_size() != clusters_[c.dst].size)
    throw DimensionError("connection '" + c.name + "' matrix does not match cluster sizes");
  if (c.kind == ConnectionKind::self && c.src != c.dst) throw ConfigError("self connection must loop on one cluster");
  incoming_[c.dst].push_back(connections_.size());
  connections_.push_back(std::move(c));
  return connections_.size() - 1;
}

ControlId Topology::add_control(ControlLine line) {
  if (line.target >= clusters_.size()) throw ConfigError("control '" + line.name + "' targets unknown cluster");
  if (line.driver) {
    if (line.driver->cluster >= clusters_.size() || line.driver->neuron >= clusters_[line.driver->cluster].size)
      throw ConfigError("control '" + line.name + "' has an invalid driver neuron");
  }
  controls_.push_back(std::move(line));
  return controls_.size() - 1;
}

void Topology::set_driver(ControlId id, NeuronRef driver) {
  if (driver.cluster >= clusters_.size() || driver.neuron >= clusters_[driver.cluster].size)
    throw ConfigError("invalid driver neuron");
  controls_.at(id).driver = driver;
}

std::size_t Topology::add_second_degree(SecondDegreeSpec spec) {
  if (spec.table_src >= clusters_.size() || spec.key_src >= clusters_.size() || spec.dst >= clusters_.size())
    throw ConfigError("second-degree network references unknown cluster");
  if (spec.branches.size() != clusters_[spec.dst].size) throw DimensionError("branch lists do not match hash size");
  const auto table_size = clusters_[spec.table_src].size;
  const auto key_size = clusters_[spec.key_src].size;
  std::vector<std::vector<std::pair<NeuronIndex, NeuronIndex>>> index(table_size);
  for (NeuronIndex k = 0; k < spec.branches.size(); ++k) {
    for (const auto& b : spec.branches[k]) {
      if (b.table >= table_size || b.key >= key_size) throw DimensionError("branch source out of range");
      index[b.table].emplace_back(b.key, k);
    }
  }
  hash_inputs_[spec.dst].push_back(second_degree_.size());
  branch_index_.push_back(std::move(index));
  second_degree_.push_back(std::move(spec));
  return second_degree_.size() - 1;
}

std::optional<ClusterId> Topology::find_cluster(std::string_view name) const {
  for (std::size_t i = 0; i < clusters_.size(); ++i)
    if (clusters_[i].name == name) return static_cast<ClusterId>(i);
  return std::nullopt;
}

ClusterId Topology::cluster_id(std::string_view name) const {
  if (auto id = find_cluster(name)) return *id;
  throw ConfigError("unknown cluster '" + std::string(name) + "'");
}

std::optional<std::size_t> Topology::find_connection(std::string_view name) const {
  for (std::size_t i = 0; i < connections_.size(); ++i)
    if (connections_[i].name == name) return i;
  return std::nullopt;
}

std::optional<ControlId> Topology::find_control(std::string_view name) const {
  for (std::size_t i = 0; i < controls_.size(); ++i)
    if (controls_[i].name == name) return i;
  return std::nullopt;
}

ControlId Topology::control_id(std::string_view name) const {
  if (auto id = find_control(name)) return *id;
  throw ConfigError("unknown control '" + std::string(name) + "'");
}

NetworkState NetworkState::zeros(const Topology& topo) {
  NetworkState s;
  s.potentials.reserve(topo.cluster_count());
  for (const auto& c : topo.clusters()) s.potentials.emplace_back(c.size, 0.0);
  s.spikes.resize(topo.cluster_count());
  return s;
}

Injection Injection::uniform(ClusterId cluster, std::span<const NeuronIndex> neurons, double value) {
  Injection inj{cluster, {}};
  inj.values.reserve(neurons.size());
  for (NeuronIndex n : neurons) inj.values.emplace_back(n, value);
  return inj;
}

// ---------------------------------------------------------------------------
// Step kernel

namespace {

bool spiked(const NetworkState& st, const NeuronRef& ref) {
  const auto& s = st.spikes[ref.cluster];
  return std::binary_search(s.begin(), s.end(), ref.neuron);
}

void validate(const Topology& topo, const NetworkState& st, std::span<const Injection> external,
              std::span<const ControlId> controls) {
  if (st.potentials.size() != topo.cluster_count() || st.spikes.size() != topo.cluster_count())
    throw DimensionError("state does not match topology cluster count");
  for (std::size_t i = 0; i < topo.cluster_count(); ++i)
    if (st.potentials[i].size() != topo.cluster(static_cast<ClusterId>(i)).size)
      throw DimensionError("state of cluster '" + topo.cluster(static_cast<ClusterId>(i)).name + "' has wrong size");
  for (const auto& inj : external) {
    if (inj.cluster >= topo.cluster_count()) throw DimensionError("injection into unknown cluster");
    for (const auto& [n, v] : inj.values)
      if (n >= topo.cluster(inj.cluster).size) throw DimensionError("injection neuron out of range");
  }
  for (ControlId c : controls)
    if (c >= topo.controls().size()) throw Error("unknown control line " + std::to_string(c));
}

struct ActiveControls {
  std::vector<char> inhibited;
  std::vector<PlasticityEvent> plasticity;
};

ActiveControls resolve_controls(const Topology& topo, const NetworkState& st, std::span<const ControlId> raised) {
  ActiveControls out;
  out.inhibited.assign(topo.cluster_count(), 0);
  std::vector<char> active(topo.controls().size(), 0);
  for (ControlId c : raised) active[c] = 1;
  for (std::size_t c = 0; c < topo.controls().size(); ++c) {
    const auto& line = topo.control(c);
    if (!active[c] && line.driver && spiked(st, *line.driver)) active[c] = 1;
  }
  std::vector<char> bind_on(topo.cluster_count(), 0);
  std::vector<char> unbind_on(topo.cluster_count(), 0);
  for (std::size_t c = 0; c < active.size(); ++c) {
    if (!active[c]) continue;
    const auto& line = topo.control(c);
    switch (line.kind) {
      case ControlKind::inhibit: out.inhibited[line.target] = 1; break;
      case ControlKind::bind: bind_on[line.target] = 1; break;
      case ControlKind::unbind: unbind_on[line.target] = 1; break;
    }
  }
  for (std::size_t i = 0; i < topo.connections().size(); ++i) {
    const auto& conn = topo.connection(i);
    if (!conn.plastic) continue;
    // unbind after bind when both are raised on one cluster
    if (bind_on[conn.src]) out.plasticity.push_back({i, ControlKind::bind, st.spikes[conn.src], st.spikes[conn.dst]});
    if (unbind_on[conn.src])
      out.plasticity.push_back({i, ControlKind::unbind, st.spikes[conn.src], st.spikes[conn.dst]});
  }
  return out;
}

void integrate_cluster(const Topology& topo, const NetworkState& st, ClusterId id, std::span<const Injection> external,
                       std::vector<double>& out, std::vector<char>& keymap) {
  const auto& spec = topo.cluster(id);
  const auto& x = st.potentials[id];
  out.resize(spec.size);
  const double keep = 1.0 - spec.leak;
  for (std::size_t k = 0; k < spec.size; ++k) {
    const double v = x[k];
    const double clamped = v <= 0.0 ? 0.0 : (v >= 1.0 ? 1.0 : v);
    out[k] = keep * (clamped - static_cast<double>(spike_fn(v)));
  }
  for (std::size_t ci : topo.incoming(id)) {
    const auto& conn = topo.connection(ci);
    const auto& m = *conn.synapses;
    for (NeuronIndex s : st.spikes[conn.src]) {
      const auto t = m.targets(s);
      const auto w = m.weights(s);
      for (std::size_t q = 0; q < t.size(); ++q) out[t[q]] += static_cast<double>(w[q]);
    }
  }
  for (std::size_t sd : topo.hash_inputs(id)) {
    const auto& spec2 = topo.second_degree()[sd];
    const auto& index = topo.branch_index(sd);
    const auto& key_spikes = st.spikes[spec2.key_src];
    if (key_spikes.empty()) continue;
    keymap.assign(topo.cluster(spec2.key_src).size, 0);
    for (NeuronIndex j : key_spikes) keymap[j] = 1;
    for (NeuronIndex i : st.spikes[spec2.table_src])
      for (const auto& [j, k] : index[i])
        if (keymap[j]) out[k] += 1.0;
  }
  for (const auto& inj : external)
    if (inj.cluster == id)
      for (const auto& [n, v] : inj.values) out[n] += v;
}

void collect_spikes(std::span<const double> x, SpikeSet& out) {
  out.clear();
  for (std::size_t k = 0; k < x.size(); ++k)
    if (x[k] >= 1.0) out.push_back(static_cast<NeuronIndex>(k));
}

}  // namespace

StepResult step(const Topology& topo, const NetworkState& state, std::span<const Injection> external,
                std::span<const ControlId> controls) {
  validate(topo, state, external, controls);
  auto active = resolve_controls(topo, state, controls);
  StepResult result;
  result.next.tick = state.tick + 1;
  result.next.potentials.resize(topo.cluster_count());
  result.next.spikes.resize(topo.cluster_count());
  std::vector<char> keymap;
  for (ClusterId i = 0; i < topo.cluster_count(); ++i) {
    auto& x = result.next.potentials[i];
    if (active.inhibited[i]) {
      x.assign(topo.cluster(i).size, 0.0);
      continue;
    }
    integrate_cluster(topo, state, i, external, x, keymap);
    collect_spikes(x, result.next.spikes[i]);
  }
  result.plasticity = std::move(active.plasticity);
  return result;
}

std::size_t apply_plasticity(const Topology& topo, const PlasticityEvent& ev) {
  const auto& conn = topo.connection(ev.connection);
  if (!conn.plastic) throw Error("connection '" + conn.name + "' is not plastic");
  const Weight value = ev.kind == ControlKind::bind ? conn.nominal_weight : 0.0F;
  return conn.synapses->set_block(ev.src_spikes, ev.dst_spikes, value);
}

std::vector<TopologyViolation> assert_topology_limits(const Topology& topo, std::size_t kappa,
                                                      std::size_t max_incoming) {
  std::vector<TopologyViolation> report;
  for (const auto& conn : topo.connections()) {
    const auto fan = conn.synapses->max_fanout();
    if (fan > kappa)
      report.push_back({TopologyViolation::Kind::fanout, conn.name, fan, kappa,
                        "connection '" + conn.name + "' has a source neuron with " + std::to_string(fan) +
                            " synapses (limit " + std::to_string(kappa) + ")"});
  }
  for (ClusterId i = 0; i < topo.cluster_count(); ++i) {
    std::set<ClusterId> sources;
    for (std::size_t ci : topo.incoming(i)) sources.insert(topo.connection(ci).src);
    for (std::size_t sd : topo.hash_inputs(i)) {
      sources.insert(topo.second_degree()[sd].table_src);
      sources.insert(topo.second_degree()[sd].key_src);
    }
    if (sources.size() > max_incoming)
      report.push_back({TopologyViolation::Kind::incoming, topo.cluster(i).name, sources.size(), max_incoming,
                        "cluster '" + topo.cluster(i).name + "' has " + std::to_string(sources.size()) +
                            " incoming clusters (limit " + std::to_string(max_incoming) + ")"});
  }
  return report;
}

void TraceWriter::write(const Topology& topo, const NetworkState& state) {
  auto& os = *out_;
  os << state.tick;
  for (ClusterId i = 0; i < topo.cluster_count(); ++i) {
    os << ' ' << topo.cluster(i).name << ':' << state.spikes[i].size();
    if (full_ && !state.spikes[i].empty()) os << '[' << to_string(state.spikes[i]) << ']';
  }
  os << '\n';
}

// ---------------------------------------------------------------------------
// Network

Network::Network(Topology topo) : topo_(std::move(topo)) { reset(); }

void Network::reset() {
  state_ = NetworkState::zeros(topo_);
  const auto n = topo_.cluster_count();
  stable_.assign(n, 0);
  spikes_same_.assign(n, 0);
  weight_sig_.assign(n, 0);
  all_zero_.assign(n, 1);
}

void Network::invalidate(ClusterId id) {
  stable_.at(id) = 0;
  spikes_same_.at(id) = 0;
}

void Network::preload(ClusterId id, std::span<const NeuronIndex> neurons) {
  auto& x = state_.potentials.at(id);
  std::fill(x.begin(), x.end(), 0.0);
  SpikeSet s(neurons.begin(), neurons.end());
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  for (NeuronIndex n : s) x.at(n) = 1.0;
  state_.spikes[id] = std::move(s);
  all_zero_[id] = state_.spikes[id].empty();
  invalidate(id);
}

void Network::clear(ClusterId id) { preload(id, {}); }

void Network::run(std::size_t ticks, std::span<const Injection> external, std::span<const ControlId> controls) {
  for (std::size_t t = 0; t < ticks; ++t) advance(external, controls);
}

// A cluster whose last transition left its potentials unchanged, with no injection
// or inhibition involved, reaches the same potentials again when every input spike
// set and every incoming weight matrix is unchanged: X_{n+1} = F(X_n, in) = F(X_{n-1}, in) = X_n.
void Network::advance(std::span<const Injection> external, std::span<const ControlId> controls) {
  validate(topo_, state_, external, controls);
  auto active = resolve_controls(topo_, state_, controls);
  const auto n = topo_.cluster_count();

  std::vector<char> injected(n, 0);
  for (const auto& inj : external) injected[inj.cluster] = 1;

  std::vector<std::vector<double>> next_x(n);
  std::vector<SpikeSet> next_s(n);
  std::vector<char> new_stable(n, 0);
  std::vector<char> new_same(n, 0);
  std::vector<char> computed(n, 0);

  for (ClusterId i = 0; i < n; ++i) {
    if (active.inhibited[i]) {
      new_same[i] = state_.spikes[i].empty();
      if (!all_zero_[i]) {
        next_x[i].assign(topo_.cluster(i).size, 0.0);
        computed[i] = 1;
      }
      continue;
    }
    std::uint64_t sig = 0;
    bool inputs_same = true;
    for (std::size_t ci : topo_.incoming(i)) {
      const auto& conn = topo_.connection(ci);
      sig += conn.synapses->version();
      inputs_same = inputs_same && spikes_same_[conn.src];
    }
    for (std::size_t sd : topo_.hash_inputs(i)) {
      const auto& spec = topo_.second_degree()[sd];
      inputs_same = inputs_same && spikes_same_[spec.table_src] && spikes_same_[spec.key_src];
    }
    if (!injected[i] && stable_[i] && inputs_same && sig == weight_sig_[i]) {
      new_stable[i] = 1;
      new_same[i] = 1;
      ++skipped_;
      continue;
    }
    integrate_cluster(topo_, state_, i, external, scratch_, flags_);
    const bool unchanged = scratch_ == state_.potentials[i];
    new_stable[i] = (!injected[i] && unchanged) ? 1 : 0;
    weight_sig_[i] = sig;
    collect_spikes(scratch_, next_s[i]);
    new_same[i] = next_s[i] == state_.spikes[i];
    next_x[i].swap(scratch_);
    computed[i] = 1;
  }

  for (ClusterId i = 0; i < n; ++i) {
    if (!computed[i]) continue;
    state_.potentials[i].swap(next_x[i]);
    if (active.inhibited[i]) {
      state_.spikes[i].clear();
      all_zero_[i] = 1;
    } else {
      state_.spikes[i].swap(next_s[i]);
      const auto& x = state_.potentials[i];
      all_zero_[i] = std::all_of(x.begin(), x.end(), [](double v) { return v == 0.0; });
    }
  }
  stable_.swap(new_stable);
  spikes_same_.swap(new_same);
  ++state_.tick;

  for (const auto& ev : active.plasticity) apply_plasticity(topo_, ev);
  if (trace_) trace_->write(topo_, state_);
}

}  // namespace primevm
