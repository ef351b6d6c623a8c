#include <gtest/gtest.h>

#include <set>

#include "primevm/switchbox.hpp"

using namespace primevm;

namespace {

struct Rig {
  SynapseMatrix mask = SynapseMatrix::random(1000, 1000, 300, 41, true);
  SymbolSpace space = generate_prime_attractors(1000, 10, 12, 42, self_reachability(mask, 2));
  TrainedRegister reg = train_self_connection(space, mask, {});
};

std::vector<std::string> names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back("r" + std::to_string(k));
  return out;
}

}  // namespace

TEST(Switchbox, TreeShape) {
  Topology t;
  auto w = std::make_shared<SynapseMatrix>(SynapseMatrix::random(50, 50, 5, 1, true));
  const auto sb = add_switchbox(t, names(16), w);
  // 16 leaves + 8 + 4 + 2 + 1 per direction
  EXPECT_EQ(sb.relays.size(), 62u);
  // every path climbs to the root and comes back down
  EXPECT_EQ(sb.max_path_length(), 10u);
  EXPECT_EQ(sb.paths.size(), 16u * 15u);
  for (const auto& [k, p] : sb.paths) {
    std::set<std::size_t> uniq(p.begin(), p.end());
    EXPECT_EQ(uniq.size(), p.size());
    EXPECT_EQ(p.size(), 10u);
  }
  EXPECT_TRUE(assert_topology_limits(t, 5).empty());
}

TEST(Switchbox, TwoRegisters) {
  Topology t;
  auto w = std::make_shared<SynapseMatrix>(SynapseMatrix::random(50, 50, 5, 1, true));
  const auto sb = add_switchbox(t, names(2), w);
  EXPECT_EQ(sb.relays.size(), 2u);
  EXPECT_EQ(sb.path(0, 1).size(), 1u);
  EXPECT_NE(sb.path(0, 1), sb.path(1, 0));
  EXPECT_THROW(add_switchbox(t, names(1), w), ConfigError);
}

TEST(Switchbox, ScheduleText) {
  Topology t;
  auto w = std::make_shared<SynapseMatrix>(SynapseMatrix::random(50, 50, 5, 1, true));
  const auto sb = add_switchbox(t, names(4), w);
  const auto s = transfer_schedule(sb, "r0", "r3", 12, 0);
  // leaf, inner, root up and back down
  EXPECT_EQ(s.length, 12 + default_open_time(6));
  EXPECT_EQ(s.entries.size(), 7u);
  EXPECT_EQ(s.to_text().substr(0, 11), "0 clear r3 ");
  EXPECT_THROW(transfer_schedule(sb, "r1", "r1", 12, 0), Error);
  EXPECT_THROW(clear_schedule(sb, "nope", 12), Error);
}

TEST(Switchbox, TransfersWithoutInterference) {
  Rig r;
  Topology t;
  const auto sb = add_switchbox(t, names(5), r.reg.self_weights);
  Network net(t);
  const std::size_t n = 5;
  for (std::size_t sym = 0; sym < 4; ++sym)
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t d = 0; d < n; ++d) {
        if (s == d) continue;
        net.reset();
        std::vector<std::size_t> held(n);
        for (std::size_t k = 0; k < n; ++k) {
          held[k] = k == s ? sym : 4 + (k + sym) % 8;
          net.preload(sb.register_ids[k], r.space.patterns()[held[k]].active());
        }
        execute(net, sb, transfer_schedule(sb, sb.registers[s], sb.registers[d], 12, 0));
        idle(net, sb, 3);
        for (std::size_t k = 0; k < n; ++k) {
          const auto want = k == d ? sym : held[k];
          ASSERT_EQ(net.spikes(sb.register_ids[k]), r.space.patterns()[want].indices())
              << sb.registers[s] << "->" << sb.registers[d] << " symbol " << sym << " register " << k;
        }
      }
}

TEST(Switchbox, ClearEmptiesOnlyTarget) {
  Rig r;
  Topology t;
  const auto sb = add_switchbox(t, names(3), r.reg.self_weights);
  Network net(t);
  for (std::size_t k = 0; k < 3; ++k) net.preload(sb.register_ids[k], r.space.patterns()[k].active());
  execute(net, sb, clear_schedule(sb, "r1", 12));
  idle(net, sb, 5);
  EXPECT_TRUE(net.spikes(sb.register_ids[1]).empty());
  EXPECT_EQ(net.spikes(sb.register_ids[0]), r.space.patterns()[0].indices());
  EXPECT_EQ(net.spikes(sb.register_ids[2]), r.space.patterns()[2].indices());
}
