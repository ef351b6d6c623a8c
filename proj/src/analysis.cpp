#include "primevm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

namespace primevm {

double min_coverage(double theta, double kappa) {
  if (!(theta > 0.0) || theta > kappa) throw ConfigError("min_coverage needs 0 < theta <= kappa");
  return theta / kappa;
}

double normal_tail(double mean, double sd, double x) {
  if (!(sd > 0.0)) return x < mean ? 1.0 : 0.0;
  return 0.5 * std::erfc((x - mean) / (sd * std::sqrt(2.0)));
}

FiringProbabilities firing_probabilities(double theta, double gamma, double ka, double c2) {
  if (!(theta > 0.0) || !(gamma > 0.0) || !(ka > 0.0)) throw ConfigError("firing probabilities need positive parameters");
  if (!(c2 > 0.0 && c2 < 1.0)) throw ConfigError("c2 must lie in (0, 1)");
  const double x = 1.0 / ka;
  FiringProbabilities p;
  p.p_signal = normal_tail(theta, std::sqrt(theta), x);
  const double noise = theta / gamma;
  p.false_firers = (1.0 - c2) / c2 * normal_tail(noise, std::sqrt(noise), x);
  return p;
}

double FilterSetup::coverage() const noexcept { return static_cast<double>(width) / static_cast<double>(size); }

std::vector<double> FilterSetup::noisy_input() const {
  std::vector<double> p(size, 0.0);
  for (std::size_t j = 0; j < attractors * width && j < size; ++j) p[j] = group(j) == 0 ? 1.0 : epsilon;
  return p;
}

std::vector<double> FilterSetup::ideal_product(const std::vector<double>& x) const {
  // weight 1/width inside an attractor, -alpha/width from it to every other neuron
  std::vector<double> sums(attractors, 0.0);
  double total = 0.0;
  for (std::size_t j = 0; j < attractors * width; ++j) sums[group(j)] += x[j];
  for (double s : sums) total += s;
  const double w = 1.0 / static_cast<double>(width);
  std::vector<double> y(size);
  for (std::size_t j = 0; j < size; ++j) {
    if (j < attractors * width) {
      const double own = sums[group(j)];
      y[j] = w * own - alpha * w * (total - own);
    } else {
      y[j] = -alpha * w * total;
    }
  }
  return y;
}

FilterSetup filter_setup(std::size_t l, double c, double epsilon, double alpha, double s) {
  if (!(c > 0.0 && c < 1.0) || l == 0) throw ConfigError("filter setup needs l >= 1 and c in (0, 1)");
  FilterSetup f;
  f.size = static_cast<std::size_t>(std::lround(100.0 / c));
  f.width = static_cast<std::size_t>(std::lround(static_cast<double>(f.size) * c));
  f.attractors = l;
  if (f.width == 0 || l * f.width > f.size) throw ConfigError("attractors do not fit at this coverage");
  f.epsilon = epsilon;
  f.alpha = alpha;
  f.s = s;
  return f;
}

namespace {

double c01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

std::vector<double> nonspiking_step(const FilterSetup& f, const std::vector<double>& x, const std::vector<double>& sp) {
  if (x.size() != f.size || sp.size() != f.size) throw DimensionError("state size mismatch");
  auto y = f.ideal_product(x);
  for (std::size_t j = 0; j < y.size(); ++j) y[j] = c01(y[j] + sp[j]);
  return y;
}

std::vector<double> spiking_step(const FilterSetup& f, const std::vector<double>& x, const std::vector<double>& sp) {
  if (x.size() != f.size || sp.size() != f.size) throw DimensionError("state size mismatch");
  std::vector<double> s(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) s[j] = spike_fn(x[j]);
  auto y = f.ideal_product(s);
  for (std::size_t j = 0; j < y.size(); ++j) y[j] += c01(x[j]) - s[j] + sp[j];
  return y;
}

FilterReport compare_filtering(const FilterSetup& f, std::size_t steps) {
  FilterReport r;
  r.setup = f;
  r.steps = steps;
  auto sp = f.noisy_input();
  for (auto& v : sp) v *= f.s;

  std::vector<double> x(f.size, 0.0);
  for (std::size_t n = 1; n <= steps; ++n) {
    x = nonspiking_step(f, x, sp);
    const double mx = *std::max_element(x.begin(), x.end());
    r.nonspiking_max.push_back(mx);
    if (mx == 0.0 && r.nonspiking_zero_step == 0) r.nonspiking_zero_step = n;
  }

  x.assign(f.size, 0.0);
  bool only_a1 = true;
  for (std::size_t n = 1; n <= steps; ++n) {
    x = spiking_step(f, x, sp);
    std::size_t count = 0, in_a1 = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (!spike_fn(x[j])) continue;
      ++count;
      if (j < f.width) ++in_a1; else ++r.competitor_spikes;
    }
    r.spiking_count.push_back(count);
    if (count && r.first_spike_step == 0) r.first_spike_step = n;
    const bool exact = in_a1 == f.width && count == f.width;
    if (exact) ++r.a1_hold;
    if (r.first_spike_step && !exact) only_a1 = false;
  }
  r.sustained = r.first_spike_step != 0 && only_a1;
  return r;
}

void write_report(std::ostream& out, const FilterReport& r) {
  const auto& f = r.setup;
  out << "l=" << f.attractors << " size=" << f.size << " width=" << f.width << " c=" << f.coverage()
      << " epsilon=" << f.epsilon << " alpha=" << f.alpha << " s=" << f.s << '\n';
  out << "nonspiking: max component per step";
  for (std::size_t n = 0; n < std::min<std::size_t>(r.nonspiking_max.size(), 6); ++n) out << ' ' << r.nonspiking_max[n];
  out << "\nnonspiking: all-zero at step " << r.nonspiking_zero_step << '\n';
  out << "spiking: first spike at step " << r.first_spike_step << ", A1-only steps " << r.a1_hold << '/'
      << (r.first_spike_step ? r.steps - r.first_spike_step + 1 : 0) << ", competitor spikes " << r.competitor_spikes
      << (r.sustained ? ", sustained" : ", not sustained") << '\n';
}

CapacityPoint measure_capacity(const TrainedRegister& out, std::size_t in_size, std::size_t in_active,
                               std::size_t kappa, double bound_drive, std::size_t load, std::uint64_t seed,
                               std::size_t probes) {
  const auto& space = *out.space;
  const std::size_t n_out = space.cluster_size();
  auto mask = std::make_shared<SynapseMatrix>(SynapseMatrix::random(in_size, n_out, kappa, seed));
  OneShotMemory mem(mask, nominal_weight(bound_drive, expected_theta(in_active, kappa, n_out)));
  const auto inputs = generate_prime_attractors(in_size, in_active, load, seed ^ 0x5bd1e995ULL, {}, "in");
  for (std::size_t i = 0; i < load; ++i)
    mem.bind(inputs.patterns()[i], space.patterns()[i % space.size()]);

  std::vector<std::size_t> order(load);
  std::iota(order.begin(), order.end(), 0);
  if (probes && probes < load) {
    std::mt19937_64 rng(seed + 1);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(probes);
  }
  CapacityPoint p;
  p.load = load;
  for (auto i : order) {
    ++p.probes;
    const auto got = recall_bound(mem, inputs.patterns()[i].active(), out);
    if (got && *got == space.patterns()[i % space.size()].indices()) ++p.correct;
  }
  return p;
}

std::size_t desk_bound(double c1, double c2, double gamma, std::size_t m) {
  return capacity_bound(c1, c2, gamma, static_cast<double>(m), 0.0, 0.0);
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DimensionError("spearman needs two equal series of length >= 2");
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace primevm
