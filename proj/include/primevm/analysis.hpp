#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "primevm/attractors.hpp"
#include "primevm/memory.hpp"

namespace primevm {

/// theta / kappa. Throws ConfigError unless 0 < theta <= kappa.
double min_coverage(double theta, double kappa);

/// P(X > x) for X ~ Normal(mean, sd).
double normal_tail(double mean, double sd, double x);

struct FiringProbabilities {
  double p_signal = 0.0;
  double false_firers = 0.0;  // expected false firers per output pattern neuron
};

/// Normal approximation of the opened-synapse counts S ~ (theta, sqrt theta) and
/// T ~ (theta/gamma, sqrt(theta/gamma)), firing when count > 1/ka.
FiringProbabilities firing_probabilities(double theta, double gamma, double ka, double c2);

/// Dense vectors for the filtering comparison. Component j belongs to attractor
/// j / width when j < attractors * width.
struct FilterSetup {
  std::size_t attractors = 100;  // l
  std::size_t width = 100;       // neurons per attractor
  std::size_t size = 10000;      // cluster size
  double epsilon = 0.3;
  double alpha = 0.1;
  double s = 0.25;

  /// width / size
  double coverage() const noexcept;
  std::size_t group(std::size_t j) const noexcept { return j / width; }
  /// A1 + epsilon * sum of the other attractors.
  std::vector<double> noisy_input() const;
  /// W* x with W* A_i = (1 + alpha) A_i - alpha 1 on disjoint attractors.
  std::vector<double> ideal_product(const std::vector<double>& x) const;
};

/// Setup for l attractors of coverage c: size = round(1 / c), width = size * c.
FilterSetup filter_setup(std::size_t l, double c, double epsilon, double alpha, double s);

/// C01(W x + s p)
std::vector<double> nonspiking_step(const FilterSetup& f, const std::vector<double>& x, const std::vector<double>& sp);
/// C01(x) - S(x) + W S(x) + s p
std::vector<double> spiking_step(const FilterSetup& f, const std::vector<double>& x, const std::vector<double>& sp);

struct FilterReport {
  FilterSetup setup;
  std::size_t steps = 0;
  std::size_t nonspiking_zero_step = 0;  // first step with an all-zero state; 0 if never
  std::size_t first_spike_step = 0;      // 0 if the spiking network never fired
  bool sustained = false;                // only A1 fired on every step from the first spike on
  std::size_t a1_hold = 0;               // steps on which exactly A1 fired
  std::size_t competitor_spikes = 0;     // spikes outside A1 over the run
  std::vector<double> nonspiking_max;    // max component per step
  std::vector<std::size_t> spiking_count;  // spikes per step
};

FilterReport compare_filtering(const FilterSetup& f, std::size_t steps = 50);
void write_report(std::ostream& out, const FilterReport& r);

/// One load level of the memory capacity sweep.
struct CapacityPoint {
  std::size_t load = 0;
  std::size_t correct = 0;
  std::size_t probes = 0;
  double accuracy() const noexcept { return probes ? static_cast<double>(correct) / static_cast<double>(probes) : 1.0; }
};

/// Binds `load` random input patterns to output symbols (round robin over the
/// output space) on a fresh memory and recalls each of them through `out`.
/// At most `probes` bindings are recalled (0: all).
CapacityPoint measure_capacity(const TrainedRegister& out, std::size_t in_size, std::size_t in_active,
                               std::size_t kappa, double bound_drive, std::size_t load, std::uint64_t seed,
                               std::size_t probes = 0);

/// Bound for a memory fed by patterns of coverage c1 into outputs of coverage c2,
/// with m bindings per output and no unbinds.
std::size_t desk_bound(double c1, double c2, double gamma, std::size_t m);

/// Spearman rank correlation; ties get average ranks.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace primevm
