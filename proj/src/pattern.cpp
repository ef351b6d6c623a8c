#include "primevm/pattern.hpp"

#include <algorithm>
#include <iterator>
#include <sstream>

namespace primevm {

Pattern::Pattern(std::size_t domain_size, std::vector<NeuronIndex> active)
    : domain_size_(domain_size), active_(std::move(active)) {
  if (active_.empty()) throw Error("pattern must have at least one active neuron");
  if (active_.size() >= domain_size_) throw Error("pattern coverage must be below 1");
  if (!is_sorted_unique(active_)) throw Error("pattern indices must be strictly increasing");
  if (active_.back() >= domain_size_) throw Error("pattern index out of range");
}

bool Pattern::contains(NeuronIndex n) const noexcept {
  return std::binary_search(active_.begin(), active_.end(), n);
}

std::size_t overlap(std::span<const NeuronIndex> a, std::span<const NeuronIndex> b) {
  std::size_t count = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++count;
      ++ia;
      ++ib;
    }
  }
  return count;
}

SpikeSet set_union(std::span<const NeuronIndex> a, std::span<const NeuronIndex> b) {
  SpikeSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

double jaccard(std::span<const NeuronIndex> a, std::span<const NeuronIndex> b) {
  const auto inter = overlap(a, b);
  const auto uni = a.size() + b.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

bool is_sorted_unique(std::span<const NeuronIndex> s) {
  return std::adjacent_find(s.begin(), s.end(), [](NeuronIndex x, NeuronIndex y) { return x >= y; }) == s.end();
}

std::string to_string(std::span<const NeuronIndex> s) {
  std::ostringstream os;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ' ';
    os << s[i];
  }
  return os.str();
}

}  // namespace primevm
