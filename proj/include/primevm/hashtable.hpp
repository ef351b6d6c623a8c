#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>

#include "primevm/attractors.hpp"
#include "primevm/memory.hpp"
#include "primevm/substrate.hpp"

namespace primevm {

/// floor(1/c) uniformly random (table, key) branches per hash neuron, or `branches`
/// when nonzero (sources sparser than the hash cluster).
SecondDegreeSpec build_hash_net(ClusterId table, ClusterId key, ClusterId dst, std::size_t table_size,
                                std::size_t key_size, std::size_t hash_size, double c, std::uint64_t seed,
                                std::size_t branches = 0);
/// Branches per hash neuron giving `hash_active` expected active neurons from two
/// source patterns of `src_active` out of `src_size`.
std::size_t matched_branches(std::size_t src_size, std::size_t src_active, std::size_t hash_size,
                             std::size_t hash_active);

/// Hash neuron k is active iff one of its branches has both ends active.
SpikeSet hash_activate(const SecondDegreeSpec& sd, std::span<const NeuronIndex> table,
                       std::span<const NeuronIndex> key);

/// Header (sizes, c, seed) then one `k i j` line per branch.
void write_hash_net(std::ostream& out, const SecondDegreeSpec& sd);
SecondDegreeSpec read_hash_net(std::istream& in, ClusterId table, ClusterId key, ClusterId dst);

/// Hash network feeding a one-shot memory into the value register; unbound
/// pairs recall the default (false) symbol.
class HashTable {
 public:
  HashTable(SecondDegreeSpec sd, OneShotMemory mem, const TrainedRegister& value, const Pattern& false_symbol,
            double default_ratio = 0.5);

  const SecondDegreeSpec& spec() const noexcept { return sd_; }
  const OneShotMemory& memory() const noexcept { return mem_; }
  OneShotMemory& memory() noexcept { return mem_; }

  SpikeSet hash(const Pattern& table, const Pattern& key) const;
  std::size_t bind(const Pattern& table, const Pattern& key, const Pattern& value);
  std::size_t unbind(const Pattern& table, const Pattern& key, const Pattern& value);
  std::optional<SpikeSet> recall(const Pattern& table, const Pattern& key, const RecallOptions& opt = {}) const;

 private:
  SecondDegreeSpec sd_;
  OneShotMemory mem_;
  const TrainedRegister* value_;
};

}  // namespace primevm
