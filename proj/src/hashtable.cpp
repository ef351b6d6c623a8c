#include "primevm/hashtable.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>

namespace primevm {

SecondDegreeSpec build_hash_net(ClusterId table, ClusterId key, ClusterId dst, std::size_t table_size,
                                std::size_t key_size, std::size_t hash_size, double c, std::uint64_t seed,
                                std::size_t branches) {
  if (hash_size == 0) throw ConfigError("hash cluster needs at least one neuron");
  if (!(c > 0.0 && c < 1.0)) throw ConfigError("hash coverage must lie in (0, 1)");
  if (table_size == 0 || key_size == 0) throw ConfigError("hash sources must be non-empty");
  SecondDegreeSpec sd;
  sd.name = "hash";
  sd.table_src = table;
  sd.key_src = key;
  sd.dst = dst;
  sd.table_size = table_size;
  sd.key_size = key_size;
  sd.coverage = c;
  sd.seed = seed;
  const auto per_neuron = branches ? branches : static_cast<std::size_t>(std::floor(1.0 / c));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<NeuronIndex> pick_t(0, static_cast<NeuronIndex>(table_size - 1));
  std::uniform_int_distribution<NeuronIndex> pick_k(0, static_cast<NeuronIndex>(key_size - 1));
  sd.branches.resize(hash_size);
  for (auto& b : sd.branches) {
    b.reserve(per_neuron);
    for (std::size_t q = 0; q < per_neuron; ++q) {
      const NeuronIndex i = pick_t(rng);
      b.push_back({i, pick_k(rng)});
    }
  }
  return sd;
}

std::size_t matched_branches(std::size_t src_size, std::size_t src_active, std::size_t hash_size,
                             std::size_t hash_active) {
  const double c_src = static_cast<double>(src_active) / static_cast<double>(src_size);
  const double c = static_cast<double>(hash_active) / static_cast<double>(hash_size);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(c / (c_src * c_src))));
}

SpikeSet hash_activate(const SecondDegreeSpec& sd, std::span<const NeuronIndex> table,
                       std::span<const NeuronIndex> key) {
  std::vector<char> in_t(sd.table_size, 0), in_k(sd.key_size, 0);
  for (NeuronIndex i : table) in_t.at(i) = 1;
  for (NeuronIndex j : key) in_k.at(j) = 1;
  SpikeSet out;
  for (NeuronIndex k = 0; k < sd.branches.size(); ++k)
    if (std::any_of(sd.branches[k].begin(), sd.branches[k].end(),
                    [&](const Branch& b) { return in_t[b.table] && in_k[b.key]; }))
      out.push_back(k);
  return out;
}

void write_hash_net(std::ostream& out, const SecondDegreeSpec& sd) {
  std::size_t count = 0;
  for (const auto& b : sd.branches) count += b.size();
  out.precision(17);
  out << "hashnet " << sd.table_size << ' ' << sd.key_size << ' ' << sd.branches.size() << ' ' << sd.coverage << ' '
      << sd.seed << ' ' << count << '\n';
  for (std::size_t k = 0; k < sd.branches.size(); ++k)
    for (const auto& b : sd.branches[k]) out << k << ' ' << b.table << ' ' << b.key << '\n';
}

SecondDegreeSpec read_hash_net(std::istream& in, ClusterId table, ClusterId key, ClusterId dst) {
  std::string tag;
  SecondDegreeSpec sd;
  std::size_t hash_size = 0, count = 0;
  if (!(in >> tag >> sd.table_size >> sd.key_size >> hash_size >> sd.coverage >> sd.seed >> count) ||
      tag != "hashnet")
    throw ConfigError("bad hash network header");
  sd.name = "hash";
  sd.table_src = table;
  sd.key_src = key;
  sd.dst = dst;
  sd.branches.resize(hash_size);
  for (std::size_t n = 0; n < count; ++n) {
    std::size_t k = 0;
    Branch b{};
    if (!(in >> k >> b.table >> b.key)) throw ConfigError("truncated hash network");
    if (k >= hash_size || b.table >= sd.table_size || b.key >= sd.key_size) throw DimensionError("branch out of range");
    sd.branches[k].push_back(b);
  }
  return sd;
}

HashTable::HashTable(SecondDegreeSpec sd, OneShotMemory mem, const TrainedRegister& value, const Pattern& false_symbol,
                     double default_ratio)
    : sd_(std::move(sd)), mem_(std::move(mem)), value_(&value) {
  if (mem_.synapses()->src_size() != sd_.branches.size()) throw DimensionError("memory source is not the hash cluster");
  mem_.install_default(false_symbol, default_ratio);
}

SpikeSet HashTable::hash(const Pattern& table, const Pattern& key) const {
  return hash_activate(sd_, table.active(), key.active());
}

std::size_t HashTable::bind(const Pattern& table, const Pattern& key, const Pattern& value) {
  return mem_.bind(hash(table, key), value.active());
}

std::size_t HashTable::unbind(const Pattern& table, const Pattern& key, const Pattern& value) {
  return mem_.unbind(hash(table, key), value.active());
}

std::optional<SpikeSet> HashTable::recall(const Pattern& table, const Pattern& key, const RecallOptions& opt) const {
  return recall_bound(mem_, hash(table, key), *value_, opt);
}

}  // namespace primevm
