#include "primevm/attractors.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace primevm {

// ---------------------------------------------------------------------------
// SymbolSpace

SymbolSpace::SymbolSpace(std::size_t cluster_size, std::size_t active, std::uint64_t seed)
    : cluster_size_(cluster_size), active_(active), seed_(seed) {
  if (active == 0) throw ConfigError("coverage gives no active neuron");
  if (active >= cluster_size) throw ConfigError("coverage must be below 1");
}

const Pattern& SymbolSpace::add(const std::string& name, Pattern p) {
  if (p.domain_size() != cluster_size_ || p.size() != active_) throw DimensionError("pattern does not fit space");
  if (index_.count(name)) throw Error("duplicate symbol '" + name + "'");
  if (by_pattern_.count(p.indices())) throw Error("symbol '" + name + "' duplicates an existing pattern");
  index_[name] = names_.size();
  by_pattern_[p.indices()] = names_.size();
  names_.push_back(name);
  patterns_.push_back(std::move(p));
  return patterns_.back();
}

const Pattern& SymbolSpace::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown symbol '" + name + "'");
  return patterns_[it->second];
}

std::optional<std::string> SymbolSpace::name_of(std::span<const NeuronIndex> spikes) const {
  auto it = by_pattern_.find(SpikeSet(spikes.begin(), spikes.end()));
  if (it == by_pattern_.end()) return std::nullopt;
  return names_[it->second];
}

std::pair<std::string, double> SymbolSpace::nearest(std::span<const NeuronIndex> spikes) const {
  std::pair<std::string, double> best{"", 0.0};
  for (std::size_t i = 0; i < patterns_.size(); ++i) {
    const double j = jaccard(patterns_[i].active(), spikes);
    if (j > best.second) best = {names_[i], j};
  }
  return best;
}

void SymbolSpace::write(std::ostream& out) const {
  out << "space " << cluster_size_ << ' ' << active_ << ' ' << seed_ << ' ' << names_.size() << '\n';
  for (std::size_t i = 0; i < names_.size(); ++i) out << names_[i] << ' ' << to_string(patterns_[i].active()) << '\n';
}

SymbolSpace SymbolSpace::read(std::istream& in) {
  std::string tag;
  std::size_t size = 0, active = 0, count = 0;
  std::uint64_t seed = 0;
  if (!(in >> tag >> size >> active >> seed >> count) || tag != "space") throw ConfigError("bad symbol space header");
  SymbolSpace space(size, active, seed);
  for (std::size_t k = 0; k < count; ++k) {
    std::string name;
    if (!(in >> name)) throw ConfigError("truncated symbol space");
    std::vector<NeuronIndex> idx(active);
    for (auto& v : idx)
      if (!(in >> v)) throw ConfigError("truncated pattern for '" + name + "'");
    space.add(name, Pattern(size, std::move(idx)));
  }
  return space;
}

// ---------------------------------------------------------------------------
// Generation

AttractorSource::AttractorSource(std::size_t cluster_size, std::size_t active, std::uint64_t seed,
                                 PatternFilter filter, std::size_t max_retries)
    : cluster_size_(cluster_size), active_(active), rng_(seed), filter_(std::move(filter)), max_retries_(max_retries) {
  if (active == 0) throw ConfigError("coverage gives no active neuron");
  if (active >= cluster_size) throw ConfigError("coverage must be below 1");
}

Pattern AttractorSource::draw(const SymbolSpace& avoid) {
  for (std::size_t attempt = 0; attempt <= max_retries_; ++attempt) {
    // Floyd's sampling of `active_` distinct indices
    std::set<NeuronIndex> chosen;
    for (std::size_t j = cluster_size_ - active_; j < cluster_size_; ++j) {
      std::uniform_int_distribution<std::size_t> pick(0, j);
      const auto t = static_cast<NeuronIndex>(pick(rng_));
      if (!chosen.insert(t).second) chosen.insert(static_cast<NeuronIndex>(j));
    }
    Pattern p(cluster_size_, std::vector<NeuronIndex>(chosen.begin(), chosen.end()));
    if (avoid.name_of(p.active()) || (filter_ && !filter_(p))) {
      ++rejected_;
      continue;
    }
    return p;
  }
  throw ConvergenceError("no acceptable pattern after " + std::to_string(max_retries_) +
                         " retries; the space is too small for this many symbols");
}

SymbolSpace generate_prime_attractors(std::size_t cluster_size, std::size_t active, std::size_t count,
                                      std::uint64_t seed, PatternFilter filter, const std::string& prefix) {
  if (count == 0) throw ConfigError("attractor count must be at least 1");
  std::vector<std::string> names;
  names.reserve(count);
  for (std::size_t i = 0; i < count; ++i) names.push_back(prefix + std::to_string(i));
  return generate_prime_attractors(cluster_size, active, names, seed, std::move(filter));
}

SymbolSpace generate_prime_attractors(std::size_t cluster_size, std::size_t active,
                                      const std::vector<std::string>& names, std::uint64_t seed,
                                      PatternFilter filter) {
  if (active < 2) throw ConfigError("patterns need at least two active neurons");
  SymbolSpace space(cluster_size, active, seed);
  AttractorSource source(cluster_size, active, seed, std::move(filter));
  for (const auto& n : names) space.add(n, source.draw(space));
  return space;
}

PatternFilter self_reachability(const SynapseMatrix& mask, std::size_t min_in) {
  return [&mask, min_in](const Pattern& p) {
    std::vector<std::size_t> in(p.size(), 0);
    for (NeuronIndex s : p.active()) {
      auto t = mask.targets(s);
      auto it = t.begin();
      for (std::size_t k = 0; k < p.size(); ++k) {
        it = std::lower_bound(it, t.end(), p.active()[k]);
        if (it != t.end() && *it == p.active()[k]) ++in[k];
      }
    }
    return std::all_of(in.begin(), in.end(), [&](std::size_t v) { return v >= min_in; });
  };
}

// ---------------------------------------------------------------------------
// Margin training

namespace {

struct Constraint {
  std::size_t pair;
  bool active;
  std::vector<std::size_t> slots;
};

// Constraints grouped by destination neuron.
std::vector<std::vector<Constraint>> collect_constraints(const SynapseMatrix& m, const std::vector<TrainingPair>& pairs,
                                                         std::size_t& unreachable) {
  std::vector<std::vector<Constraint>> by_dst(m.dst_size());
  std::vector<std::vector<std::size_t>> slots(m.dst_size());
  std::vector<NeuronIndex> touched;
  unreachable = 0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& in = *pairs[p].input;
    if (in.domain_size() != m.src_size()) throw DimensionError("training input does not match source size");
    if (pairs[p].target && pairs[p].target->domain_size() != m.dst_size())
      throw DimensionError("training target does not match destination size");
    touched.clear();
    for (NeuronIndex s : in.active()) {
      const std::size_t base = m.row_begin(s);
      const auto t = m.targets(s);
      for (std::size_t q = 0; q < t.size(); ++q) {
        if (slots[t[q]].empty()) touched.push_back(t[q]);
        slots[t[q]].push_back(base + q);
      }
    }
    for (NeuronIndex d : touched) {
      const bool act = pairs[p].target && pairs[p].target->contains(d);
      by_dst[d].push_back({p, act, std::move(slots[d])});
      slots[d].clear();
    }
    if (pairs[p].target)
      for (NeuronIndex d : pairs[p].target->active())
        if (std::find(touched.begin(), touched.end(), d) == touched.end()) ++unreachable;
  }
  return by_dst;
}

double response(const SynapseMatrix& m, const std::vector<std::size_t>& slots) {
  double s = 0.0;
  for (auto slot : slots) s += static_cast<double>(m.weight_at(slot));
  return s;
}

}  // namespace

TrainingReport train_margins(SynapseMatrix& m, const std::vector<TrainingPair>& pairs, const MarginParams& p) {
  if (p.alpha <= 0.0) throw ConfigError("alpha must be positive");
  TrainingReport report;
  auto by_dst = collect_constraints(m, pairs, report.unreachable);
  const double hi = p.excitation + p.margin;
  const double lo = -p.alpha - p.margin;
  const double slack = 1e-4;
  for (const auto& cs : by_dst) report.constraints += cs.size();

  for (auto& cs : by_dst) {
    std::size_t epoch = 0;
    for (;; ++epoch) {
      if (epoch >= p.max_epochs)
        throw ConvergenceError("margin training did not converge within " + std::to_string(p.max_epochs) + " epochs");
      bool clean = true;
      for (const auto& c : cs) {
        const double s = response(m, c.slots);
        double goal;
        if (c.active && s < hi)
          goal = hi + slack;
        else if (!c.active && s > lo)
          goal = lo - slack;
        else
          continue;
        const auto delta = static_cast<Weight>((goal - s) / static_cast<double>(c.slots.size()));
        for (auto slot : c.slots) m.set_weight_at(slot, m.weight_at(slot) + delta);
        ++report.updates;
        clean = false;
      }
      if (clean) break;
    }
    report.epochs = std::max(report.epochs, epoch + 1);
  }
  m.touch();
  report.residual = count_margin_violations(m, pairs, p.alpha);
  return report;
}

std::size_t count_margin_violations(const SynapseMatrix& m, const std::vector<TrainingPair>& pairs, double alpha) {
  std::size_t unreachable = 0;
  const auto by_dst = collect_constraints(m, pairs, unreachable);
  std::size_t bad = 0;
  for (const auto& cs : by_dst)
    for (const auto& c : cs) {
      const double s = response(m, c.slots);
      if (c.active ? s < 1.0 : s > -alpha) ++bad;
    }
  return bad;
}

TrainedRegister train_self_connection(const SymbolSpace& space, SynapseMatrix mask, const MarginParams& p) {
  if (mask.src_size() != space.cluster_size() || mask.dst_size() != space.cluster_size())
    throw DimensionError("self mask does not match the space");
  std::vector<TrainingPair> pairs;
  for (const auto& pat : space.patterns()) pairs.push_back({&pat, &pat});
  TrainedRegister reg;
  reg.space = &space;
  reg.alpha = p.alpha;
  reg.report = train_margins(mask, pairs, p);
  reg.self_weights = std::make_shared<SynapseMatrix>(std::move(mask));
  return reg;
}

TrainingReport train_mapping(const SymbolSpace& src, const SymbolSpace& dst,
                             const std::vector<std::pair<std::string, std::string>>& pairs, SynapseMatrix& mask,
                             const MarginParams& p) {
  std::vector<TrainingPair> tp;
  tp.reserve(pairs.size());
  for (const auto& [a, b] : pairs) tp.push_back({&src.at(a), b.empty() ? nullptr : &dst.at(b)});
  if (tp.empty()) return {};
  return train_margins(mask, tp, p);
}

SynapseMatrix build_recognizer(const SymbolSpace& src, const std::vector<std::string>& watched, std::size_t panel_size,
                               const std::vector<NeuronIndex>& panel_neurons, double fill) {
  if (watched.size() != panel_neurons.size()) throw DimensionError("one panel neuron per watched symbol");
  std::vector<std::vector<NeuronIndex>> rows(src.cluster_size());
  for (std::size_t w = 0; w < watched.size(); ++w) {
    if (panel_neurons[w] >= panel_size) throw DimensionError("panel neuron out of range");
    for (NeuronIndex s : src.at(watched[w]).active()) rows[s].push_back(panel_neurons[w]);
  }
  SynapseMatrix m(src.cluster_size(), panel_size, rows);
  const auto a_rec = static_cast<Weight>(1.0 / (fill * static_cast<double>(src.active())));
  for (std::size_t w = 0; w < watched.size(); ++w) {
    const NeuronIndex target = panel_neurons[w];
    const SpikeSet one{target};
    m.set_block(src.at(watched[w]).active(), one, a_rec);
  }
  return m;
}

Network make_register_network(std::shared_ptr<SynapseMatrix> self_weights, const std::string& name) {
  Topology topo;
  const auto id = topo.add_cluster({name, self_weights->src_size(), ClusterKind::symbol, 0.0});
  topo.add_connection({name + ".self", id, id, ConnectionKind::self, std::move(self_weights), false, 0.0F});
  return Network(std::move(topo));
}

std::optional<SpikeSet> recall(Network& net, ClusterId cluster, const std::vector<double>& drive,
                               const RecallOptions& opt) {
  if (drive.size() != net.topology().cluster(cluster).size) throw DimensionError("drive does not match cluster size");
  Injection inj{cluster, {}};
  for (NeuronIndex k = 0; k < drive.size(); ++k)
    if (drive[k] != 0.0) inj.values.emplace_back(k, drive[k]);
  const std::vector<Injection> ext{inj};
  SpikeSet last;
  std::size_t same = 0;
  for (std::size_t t = 0; t < opt.max_ticks; ++t) {
    net.advance(ext);
    const auto& s = net.spikes(cluster);
    if (!s.empty() && s == last) {
      if (++same + 1 >= opt.stable_ticks) return s;
    } else {
      same = 0;
      last = s;
    }
  }
  return std::nullopt;
}

std::optional<SpikeSet> recall(const TrainedRegister& reg, const std::vector<double>& drive, const RecallOptions& opt) {
  auto net = make_register_network(reg.self_weights);
  return recall(net, 0, drive, opt);
}

std::optional<SpikeSet> settle(Network& net, ClusterId cluster, std::size_t max_ticks, std::size_t stable_ticks,
                               std::span<const Injection> external, std::span<const ControlId> controls) {
  SpikeSet last = net.spikes(cluster);
  std::size_t same = 1;
  for (std::size_t t = 0; t < max_ticks; ++t) {
    net.advance(external, controls);
    const auto& s = net.spikes(cluster);
    if (s == last) {
      if (++same >= stable_ticks) return s.empty() ? std::nullopt : std::optional<SpikeSet>(s);
    } else {
      same = 1;
      last = s;
    }
  }
  return std::nullopt;
}

void write_triples(std::ostream& out, const SynapseMatrix& m) {
  std::size_t nonzero = 0;
  for (auto w : m.all_weights()) nonzero += (w != 0.0F);
  out << "triples " << m.src_size() << ' ' << m.dst_size() << ' ' << nonzero << '\n';
  out.precision(9);
  for (NeuronIndex s = 0; s < m.src_size(); ++s) {
    const auto t = m.targets(s);
    const auto w = m.weights(s);
    for (std::size_t q = 0; q < t.size(); ++q)
      if (w[q] != 0.0F) out << t[q] << ' ' << s << ' ' << w[q] << '\n';
  }
}

void read_triples(std::istream& in, SynapseMatrix& m) {
  std::string tag;
  std::size_t src = 0, dst = 0, count = 0;
  if (!(in >> tag >> src >> dst >> count) || tag != "triples") throw ConfigError("bad triples header");
  if (src != m.src_size() || dst != m.dst_size()) throw DimensionError("triples do not match matrix size");
  for (std::size_t slot = 0; slot < m.synapse_count(); ++slot) m.set_weight_at(slot, 0.0F);
  for (std::size_t k = 0; k < count; ++k) {
    NeuronIndex d = 0, s = 0;
    Weight w = 0.0F;
    if (!(in >> d >> s >> w)) throw ConfigError("truncated triples");
    if (s >= src || d >= dst) throw DimensionError("triple out of range");
    auto slot = m.find(s, d);
    if (!slot) throw ConfigError("triple names a synapse outside the mask");
    m.set_weight_at(*slot, w);
  }
  m.touch();
}

}  // namespace primevm
