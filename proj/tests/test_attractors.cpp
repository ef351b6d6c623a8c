#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "primevm/attractors.hpp"

using namespace primevm;

namespace {

// Response of destination d to input pattern p, summed straight from the mask.
double dense_response(const SynapseMatrix& m, const Pattern& p, NeuronIndex d) {
  double s = 0.0;
  for (NeuronIndex i : p.active())
    if (auto slot = m.find(i, d)) s += m.weight_at(*slot);
  return s;
}

bool reaches(const SynapseMatrix& m, const Pattern& p, NeuronIndex d) {
  for (NeuronIndex i : p.active())
    if (m.find(i, d)) return true;
  return false;
}

struct Small {
  SynapseMatrix mask = SynapseMatrix::random(1000, 1000, 300, 4, true);
  SymbolSpace space = generate_prime_attractors(1000, 10, 40, 9, self_reachability(mask, 2));
};

}  // namespace

TEST(Attractors, ExactSizeAndDistinct) {
  const auto s = generate_prime_attractors(500, 7, 60, 3);
  std::set<SpikeSet> seen;
  for (const auto& p : s.patterns()) {
    EXPECT_EQ(p.size(), 7u);
    EXPECT_EQ(p.domain_size(), 500u);
    EXPECT_TRUE(is_sorted_unique(p.active()));
    EXPECT_TRUE(seen.insert(p.indices()).second);
  }
  EXPECT_EQ(s.name_of(s.at("s17").active()), "s17");
  EXPECT_FALSE(s.name_of(SpikeSet{1, 2, 3}));
}

TEST(Attractors, SeedDeterminism) {
  const auto a = generate_prime_attractors(800, 8, 20, 42);
  const auto b = generate_prime_attractors(800, 8, 20, 42);
  const auto c = generate_prime_attractors(800, 8, 20, 43);
  EXPECT_EQ(a.patterns(), b.patterns());
  EXPECT_NE(a.patterns(), c.patterns());
}

TEST(Attractors, CoverageLimits) {
  EXPECT_THROW(generate_prime_attractors(10, 10, 1, 1), ConfigError);
  EXPECT_THROW(generate_prime_attractors(10, 1, 1, 1), ConfigError);
  // C(4,2) = 6 distinct patterns exist
  EXPECT_NO_THROW(generate_prime_attractors(4, 2, 6, 1));
  EXPECT_THROW(generate_prime_attractors(4, 2, 7, 1), ConvergenceError);
}

TEST(Attractors, ReachabilityFilter) {
  Small s;
  for (const auto& p : s.space.patterns())
    for (NeuronIndex d : p.active()) {
      std::size_t in = 0;
      for (NeuronIndex i : p.active()) in += s.mask.find(i, d).has_value();
      EXPECT_GE(in, 2u);
    }
}

TEST(Attractors, MarginsHoldAgainstDenseSums) {
  Small s;
  const MarginParams mp{0.5, 0.05, 2.0, 2000};
  const auto reg = train_self_connection(s.space, s.mask, mp);
  EXPECT_EQ(reg.report.residual, 0u);
  std::size_t checked = 0;
  for (const auto& p : s.space.patterns())
    for (NeuronIndex d = 0; d < 1000; ++d) {
      if (!reaches(*reg.self_weights, p, d)) continue;
      const double r = dense_response(*reg.self_weights, p, d);
      if (p.contains(d))
        EXPECT_GE(r, 1.0);
      else
        EXPECT_LE(r, -0.5);
      ++checked;
    }
  EXPECT_GT(checked, 40u * 1000u / 2u);
  EXPECT_EQ(count_margin_violations(*reg.self_weights, {{&s.space.patterns()[0], &s.space.patterns()[0]}}, 0.5), 0u);
}

TEST(Attractors, PreloadedPatternIsStable) {
  Small s;
  const auto reg = train_self_connection(s.space, s.mask, {});
  for (std::size_t k = 0; k < s.space.size(); k += 7) {
    auto net = make_register_network(reg.self_weights);
    net.preload(0, s.space.patterns()[k].active());
    for (int t = 0; t < 100; ++t) {
      net.advance();
      ASSERT_EQ(net.spikes(0), s.space.patterns()[k].indices()) << "symbol " << k << " tick " << t;
    }
  }
}

TEST(Attractors, PartialCueCompletes) {
  Small s;
  const auto reg = train_self_connection(s.space, s.mask, {});
  const auto& p = s.space.patterns()[5];
  std::vector<double> drive(1000, 0.0);
  for (std::size_t k = 0; k < 6; ++k) drive[p.active()[k]] = 0.5;
  const auto got = recall(reg, drive);
  ASSERT_TRUE(got);
  EXPECT_EQ(*got, p.indices());
}

TEST(Attractors, MappingTraining) {
  const auto src = generate_prime_attractors(600, 8, 10, 1);
  const auto dst = generate_prime_attractors(400, 8, 10, 2);
  auto mask = SynapseMatrix::random(600, 400, 200, 3);
  std::vector<std::pair<std::string, std::string>> pairs;
  for (int k = 0; k < 10; ++k) pairs.push_back({"s" + std::to_string(k), k == 9 ? "" : "s" + std::to_string((k + 3) % 10)});
  const auto rep = train_mapping(src, dst, pairs, mask, {});
  EXPECT_EQ(rep.residual, 0u);
  for (int k = 0; k < 9; ++k)
    for (NeuronIndex d : dst.at("s" + std::to_string((k + 3) % 10)).active())
      if (reaches(mask, src.at("s" + std::to_string(k)), d))
        EXPECT_GE(dense_response(mask, src.at("s" + std::to_string(k)), d), 1.0);
  for (NeuronIndex d = 0; d < 400; ++d)
    if (reaches(mask, src.at("s9"), d)) EXPECT_LE(dense_response(mask, src.at("s9"), d), -0.5);
}

TEST(Attractors, RecognizerWeight) {
  const auto src = generate_prime_attractors(300, 12, 3, 5);
  const auto m = build_recognizer(src, {"s0", "s2"}, 4, {1, 3}, 0.75);
  const Weight a = static_cast<Weight>(1.0 / (0.75 * 12));
  for (NeuronIndex i : src.at("s2").active()) EXPECT_FLOAT_EQ(m.weight_at(*m.find(i, 3)), a);
  // a full pattern gives 4/3, three quarters of it exactly 1
  EXPECT_NEAR(12 * a, 4.0 / 3.0, 1e-6);
  EXPECT_NEAR(9 * a, 1.0, 1e-6);
}

TEST(Attractors, SpaceAndTriplesRoundTrip) {
  Small s;
  std::stringstream ss;
  s.space.write(ss);
  const auto back = SymbolSpace::read(ss);
  EXPECT_EQ(back.patterns(), s.space.patterns());
  EXPECT_EQ(back.names(), s.space.names());

  auto reg = train_self_connection(s.space, s.mask, {});
  std::stringstream ts;
  write_triples(ts, *reg.self_weights);
  auto copy = s.mask;
  read_triples(ts, copy);
  EXPECT_EQ(std::vector<Weight>(copy.all_weights().begin(), copy.all_weights().end()),
            std::vector<Weight>(reg.self_weights->all_weights().begin(), reg.self_weights->all_weights().end()));
  std::stringstream bad("triples 5 5 0\n");
  EXPECT_THROW(read_triples(bad, copy), DimensionError);
}
