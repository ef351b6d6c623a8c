#include "primevm/memory.hpp"

#include <cmath>

namespace primevm {

double expected_theta(std::size_t in_active, std::size_t fanout, std::size_t dst_size) {
  if (dst_size == 0) throw ConfigError("destination size must be positive");
  return static_cast<double>(in_active) * static_cast<double>(fanout) / static_cast<double>(dst_size);
}

Weight nominal_weight(double bound_drive, double theta) {
  if (theta <= 0.0 || bound_drive <= 0.0) throw ConfigError("bound drive and theta must be positive");
  return static_cast<Weight>(bound_drive / theta);
}

OneShotMemory::OneShotMemory(std::shared_ptr<SynapseMatrix> synapses, Weight nominal)
    : w_(std::move(synapses)), a_(nominal) {
  if (!w_) throw ConfigError("memory needs a synapse matrix");
  if (nominal <= 0.0F) throw ConfigError("nominal weight must be positive");
}

namespace {

void check_fit(const SynapseMatrix& w, std::span<const NeuronIndex> in, std::span<const NeuronIndex> out) {
  if (!is_sorted_unique(in) || !is_sorted_unique(out)) throw DimensionError("memory patterns must be sorted");
  if ((!in.empty() && in.back() >= w.src_size()) || (!out.empty() && out.back() >= w.dst_size()))
    throw DimensionError("memory patterns do not match the memory clusters");
}

}  // namespace

std::size_t OneShotMemory::bind(std::span<const NeuronIndex> in, std::span<const NeuronIndex> out) {
  check_fit(*w_, in, out);
  ++live_;
  return w_->set_block(in, out, a_);
}

std::size_t OneShotMemory::unbind(std::span<const NeuronIndex> in, std::span<const NeuronIndex> out) {
  check_fit(*w_, in, out);
  if (live_ > 0) --live_;
  return w_->set_block(in, out, 0.0F);
}

void OneShotMemory::install_default(const Pattern& def, double ratio) {
  if (def.domain_size() != w_->dst_size()) throw DimensionError("default pattern does not match the destination");
  if (ratio <= 0.0) throw ConfigError("default ratio must be positive");
  std::vector<std::vector<NeuronIndex>> rows(w_->src_size());
  for (NeuronIndex s = 0; s < w_->src_size(); ++s)
    for (NeuronIndex t : w_->targets(s))
      if (def.contains(t)) rows[s].push_back(t);
  default_ = std::make_shared<SynapseMatrix>(w_->src_size(), w_->dst_size(), rows);
  default_weight_ = static_cast<Weight>(static_cast<double>(a_) * ratio);
  for (std::size_t slot = 0; slot < default_->synapse_count(); ++slot) default_->set_weight_at(slot, default_weight_);
  default_->touch();
}

bool OneShotMemory::trichotomous() const {
  for (auto w : w_->all_weights())
    if (w != 0.0F && w != a_) return false;
  if (default_)
    for (auto w : default_->all_weights())
      if (w != default_weight_) return false;
  return true;
}

std::optional<SpikeSet> recall_bound(const OneShotMemory& mem, std::span<const NeuronIndex> in,
                                     const TrainedRegister& out, const RecallOptions& opt) {
  Topology topo;
  const auto src = topo.add_cluster({"in", mem.synapses()->src_size(), ClusterKind::symbol, 0.0});
  const auto dst = topo.add_cluster({"out", mem.synapses()->dst_size(), ClusterKind::symbol, 0.0});
  topo.add_connection({"out.self", dst, dst, ConnectionKind::self, out.self_weights, false, 0.0F});
  topo.add_connection({"mem", src, dst, ConnectionKind::one_shot_memory, mem.synapses(), true, mem.nominal()});
  if (mem.default_synapses())
    topo.add_connection({"mem.default", src, dst, ConnectionKind::one_shot_memory, mem.default_synapses(), false, 0.0F});
  Network net(std::move(topo));
  // one unit of potential per tick keeps the input neurons firing every tick
  const std::vector<Injection> ext{Injection::uniform(src, in, 1.0)};
  SpikeSet last;
  std::size_t same = 0;
  for (std::size_t t = 0; t < opt.max_ticks; ++t) {
    net.advance(ext);
    const auto& s = net.spikes(dst);
    if (!s.empty() && s == last) {
      if (++same + 1 >= opt.stable_ticks) return s;
    } else {
      same = 0;
      last = s;
    }
  }
  return std::nullopt;
}

std::size_t capacity_bound(double c1, double c2, double gamma, double m, double s, double t) {
  if (!(c1 > 0.0 && c1 < 1.0 && c2 > 0.0 && c2 < 1.0)) throw ConfigError("coverages must lie in (0, 1)");
  if (!(gamma > 0.0) || m < 0.0 || s < 0.0 || t < 0.0) throw ConfigError("capacity parameters must be positive");
  const double numerator = 1.0 - s * c1 - t * c1 * c2;
  if (numerator <= 0.0) return 0;
  const double n = numerator / (gamma * c1 * c2) - m / c2 - 1.0 / c1;
  return n <= 0.0 ? 0 : static_cast<std::size_t>(std::floor(n));
}

}  // namespace primevm
