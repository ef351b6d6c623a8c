#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "primevm/hashtable.hpp"

using namespace primevm;

namespace {

constexpr std::size_t N = 2000;
constexpr std::size_t A = 20;
constexpr double C = 0.01;

struct Rig {
  SymbolSpace keys = generate_prime_attractors(N, A, 60, 31);
  SynapseMatrix self_mask = SynapseMatrix::random(N, N, 600, 32, true);
  SymbolSpace values = generate_prime_attractors(N, A, std::vector<std::string>{"false", "true", "x", "y", "z"}, 33,
                                                 self_reachability(self_mask, 2));
  TrainedRegister reg = train_self_connection(values, self_mask, {});
  HashTable table{build_hash_net(0, 1, 2, N, N, N, C, 34),
                  OneShotMemory(std::make_shared<SynapseMatrix>(SynapseMatrix::random(N, N, 600, 35)),
                                nominal_weight(0.2, expected_theta(A, 600, N))),
                  reg, values.at("false")};
};

}  // namespace

TEST(HashTable, BranchCount) {
  const auto sd = build_hash_net(0, 1, 2, N, N, N, C, 1);
  ASSERT_EQ(sd.branches.size(), N);
  for (const auto& b : sd.branches) EXPECT_EQ(b.size(), 100u);
  const auto odd = build_hash_net(0, 1, 2, 50, 70, 10, 0.3, 1);
  for (const auto& b : odd.branches) {
    EXPECT_EQ(b.size(), 3u);
    for (const auto& br : b) {
      EXPECT_LT(br.table, 50u);
      EXPECT_LT(br.key, 70u);
    }
  }
  EXPECT_EQ(build_hash_net(0, 1, 2, N, N, N, C, 1, 7).branches[0].size(), 7u);
  EXPECT_THROW(build_hash_net(0, 1, 2, N, N, N, 0.0, 1), ConfigError);
}

TEST(HashTable, MatchedBranches) {
  // c_hash / c_src^2
  EXPECT_EQ(matched_branches(4000, 20, 16000, 40), 100u);
  EXPECT_EQ(matched_branches(2000, 20, 2000, 20), 100u);
  EXPECT_EQ(matched_branches(10, 9, 1000, 1), 1u);
}

TEST(HashTable, ActivationMatchesBranchRule) {
  const auto sd = build_hash_net(0, 1, 2, 40, 40, 30, 0.2, 8);
  const SpikeSet t{1, 5, 9, 20, 33}, k{0, 5, 6, 39};
  const auto h = hash_activate(sd, t, k);
  for (NeuronIndex n = 0; n < 30; ++n) {
    bool any = false;
    for (const auto& b : sd.branches[n])
      any |= std::binary_search(t.begin(), t.end(), b.table) && std::binary_search(k.begin(), k.end(), b.key);
    EXPECT_EQ(std::binary_search(h.begin(), h.end(), n), any);
  }
  EXPECT_TRUE(hash_activate(sd, t, {}).empty());
  EXPECT_EQ(hash_activate(sd, t, k), h);
}

TEST(HashTable, MeanCoverage) {
  const auto sd = build_hash_net(0, 1, 2, N, N, N, C, 11);
  const auto pats = generate_prime_attractors(N, A, 100, 12);
  double total = 0.0;
  std::size_t draws = 0;
  for (std::size_t i = 0; i < 100 && draws < 1000; ++i)
    for (std::size_t j = 0; j < 10 && draws < 1000; ++j, ++draws)
      total += static_cast<double>(hash_activate(sd, pats.patterns()[i].active(), pats.patterns()[(i + j + 1) % 100].active()).size()) / N;
  const double mean = total / static_cast<double>(draws);
  const double predicted = 1.0 - std::pow(1.0 - C * C, 100.0);
  EXPECT_NEAR(mean, C, 0.15 * C);
  EXPECT_NEAR(mean, predicted, 0.15 * predicted);
}

TEST(HashTable, KeySensitivity) {
  const auto sd = build_hash_net(0, 1, 2, N, N, N, C, 13);
  const auto pats = generate_prime_attractors(N, A, 41, 14);
  double worst = 0.0;
  for (std::size_t k = 1; k < 41; k += 2) {
    const auto a = hash_activate(sd, pats.patterns()[0].active(), pats.patterns()[k].active());
    const auto b = hash_activate(sd, pats.patterns()[0].active(), pats.patterns()[k + 1].active());
    worst = std::max(worst, jaccard(a, b));
  }
  EXPECT_LT(worst, 0.2);
}

TEST(HashTable, BindRecallDefault) {
  Rig r;
  const auto& t = r.keys.at("s0");
  r.table.bind(t, r.keys.at("s1"), r.values.at("x"));
  r.table.bind(t, r.keys.at("s2"), r.values.at("y"));
  r.table.bind(r.keys.at("s3"), r.keys.at("s1"), r.values.at("z"));
  EXPECT_EQ(r.table.recall(t, r.keys.at("s1")), r.values.at("x").indices());
  EXPECT_EQ(r.table.recall(t, r.keys.at("s2")), r.values.at("y").indices());
  EXPECT_EQ(r.table.recall(r.keys.at("s3"), r.keys.at("s1")), r.values.at("z").indices());
  EXPECT_EQ(r.table.recall(t, r.keys.at("s4")), r.values.at("false").indices());
  r.table.unbind(t, r.keys.at("s1"), r.values.at("x"));
  EXPECT_EQ(r.table.recall(t, r.keys.at("s1")), r.values.at("false").indices());
  EXPECT_EQ(r.table.recall(t, r.keys.at("s2")), r.values.at("y").indices());
  EXPECT_TRUE(r.table.memory().trichotomous());
}

TEST(HashTable, SerializationRoundTrip) {
  const auto sd = build_hash_net(0, 1, 2, 100, 100, 50, 0.1, 15);
  std::stringstream ss;
  write_hash_net(ss, sd);
  const auto back = read_hash_net(ss, 0, 1, 2);
  ASSERT_EQ(back.branches.size(), sd.branches.size());
  for (std::size_t k = 0; k < sd.branches.size(); ++k) {
    ASSERT_EQ(back.branches[k].size(), sd.branches[k].size());
    for (std::size_t q = 0; q < sd.branches[k].size(); ++q) {
      EXPECT_EQ(back.branches[k][q].table, sd.branches[k][q].table);
      EXPECT_EQ(back.branches[k][q].key, sd.branches[k][q].key);
    }
  }
}
