#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "primevm/substrate.hpp"

using namespace primevm;

namespace {

// Dense reference of one tick: X' = (1-l)(C(X) - S(X)) + sum W S + H + ext.
std::vector<std::vector<double>> dense_step(const Topology& topo, const NetworkState& st,
                                            const std::vector<Injection>& ext, const std::vector<char>& inhibited) {
  std::vector<std::vector<double>> out(topo.cluster_count());
  for (ClusterId c = 0; c < topo.cluster_count(); ++c) {
    const auto& spec = topo.cluster(c);
    out[c].assign(spec.size, 0.0);
    if (inhibited[c]) continue;
    for (std::size_t k = 0; k < spec.size; ++k) {
      const double x = st.potentials[c][k];
      const double s = x >= 1.0 ? 1.0 : 0.0;
      out[c][k] = (1.0 - spec.leak) * (std::min(1.0, std::max(0.0, x)) - s);
    }
    for (const auto& conn : topo.connections()) {
      if (conn.dst != c) continue;
      for (std::size_t src = 0; src < conn.synapses->src_size(); ++src) {
        if (st.potentials[conn.src][src] < 1.0) continue;
        for (std::size_t dst = 0; dst < spec.size; ++dst)
          if (auto slot = conn.synapses->find(static_cast<NeuronIndex>(src), static_cast<NeuronIndex>(dst)))
            out[c][dst] += conn.synapses->weight_at(*slot);
      }
    }
    for (const auto& sd : topo.second_degree()) {
      if (sd.dst != c) continue;
      for (std::size_t k = 0; k < sd.branches.size(); ++k)
        for (const auto& b : sd.branches[k])
          if (st.potentials[sd.table_src][b.table] >= 1.0 && st.potentials[sd.key_src][b.key] >= 1.0) out[c][k] += 1.0;
    }
    for (const auto& inj : ext)
      if (inj.cluster == c)
        for (const auto& [n, v] : inj.values) out[c][n] += v;
  }
  return out;
}

Topology small_topology(std::uint64_t seed) {
  Topology t;
  const auto a = t.add_cluster({"a", 30, ClusterKind::symbol, 0.0});
  const auto b = t.add_cluster({"b", 20, ClusterKind::panel, 0.5});
  auto wa = std::make_shared<SynapseMatrix>(SynapseMatrix::random(30, 30, 6, seed, true));
  auto wab = std::make_shared<SynapseMatrix>(SynapseMatrix::random(30, 20, 5, seed + 1));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.6, 0.9);
  for (auto* m : {wa.get(), wab.get()})
    for (std::size_t s = 0; s < m->synapse_count(); ++s) m->set_weight_at(s, static_cast<Weight>(u(rng)));
  t.add_connection({"a.self", a, a, ConnectionKind::self, wa});
  t.add_connection({"a->b", a, b, ConnectionKind::mapping, wab});
  t.add_control({"b.inhibit", ControlKind::inhibit, b, NeuronRef{a, 0}});
  return t;
}

}  // namespace

TEST(Substrate, SpikeAndClamp) {
  EXPECT_EQ(spike_fn(1.0), 1);
  EXPECT_EQ(spike_fn(0.999999), 0);
  EXPECT_EQ(spike_fn(-3.0), 0);
  EXPECT_DOUBLE_EQ(clamp(0.0, 1.0, 1.7), 1.0);
  EXPECT_DOUBLE_EQ(clamp(0.0, 1.0, -0.2), 0.0);
  EXPECT_DOUBLE_EQ(clamp(0.0, 1.0, 0.4), 0.4);
  EXPECT_THROW(clamp(1.0, 0.0, 0.5), ConfigError);
}

TEST(Substrate, RandomMatrixFanout) {
  const auto m = SynapseMatrix::random(200, 200, 17, 5, true);
  for (NeuronIndex s = 0; s < 200; ++s) {
    EXPECT_EQ(m.fanout(s), 17u);
    const auto t = m.targets(s);
    EXPECT_TRUE(std::is_sorted(t.begin(), t.end()));
    EXPECT_FALSE(std::binary_search(t.begin(), t.end(), s));
  }
  const auto again = SynapseMatrix::random(200, 200, 17, 5, true);
  EXPECT_TRUE(std::equal(m.targets(3).begin(), m.targets(3).end(), again.targets(3).begin()));
}

TEST(Substrate, StepMatchesDenseReference) {
  auto topo = small_topology(11);
  NetworkState st = NetworkState::zeros(topo);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.5, 1.5);
  for (int n = 0; n < 25; ++n) {
    std::vector<Injection> ext{{0, {{static_cast<NeuronIndex>(n % 30), 0.7}, {5, 0.2}}}};
    const auto r = step(topo, st, ext);
    std::vector<char> inh(2, 0);
    inh[1] = st.potentials[0][0] >= 1.0;
    const auto want = dense_step(topo, st, ext, inh);
    for (ClusterId c = 0; c < 2; ++c)
      for (std::size_t k = 0; k < want[c].size(); ++k) ASSERT_NEAR(r.next.potentials[c][k], want[c][k], 1e-9);
    st = r.next;
    if (n % 7 == 0)
      for (auto& x : st.potentials[0]) x = u(rng);
    for (ClusterId c = 0; c < 2; ++c) {
      st.spikes[c].clear();
      for (std::size_t k = 0; k < st.potentials[c].size(); ++k)
        if (st.potentials[c][k] >= 1.0) st.spikes[c].push_back(static_cast<NeuronIndex>(k));
    }
  }
}

TEST(Substrate, InhibitZeroesSameTick) {
  auto topo = small_topology(2);
  NetworkState st = NetworkState::zeros(topo);
  std::vector<Injection> ext{Injection::uniform(1, std::vector<NeuronIndex>{0, 1, 2}, 5.0)};
  const std::vector<ControlId> raised{0};
  const auto r = step(topo, st, ext, raised);
  for (double x : r.next.potentials[1]) EXPECT_EQ(x, 0.0);
  EXPECT_TRUE(r.next.spikes[1].empty());
}

TEST(Substrate, SecondDegreeAddsOnePerBranch) {
  Topology t;
  const auto ta = t.add_cluster({"table", 4, ClusterKind::symbol, 0.0});
  const auto ke = t.add_cluster({"key", 4, ClusterKind::symbol, 0.0});
  const auto h = t.add_cluster({"hash", 3, ClusterKind::symbol, 0.0});
  SecondDegreeSpec sd;
  sd.table_src = ta;
  sd.key_src = ke;
  sd.dst = h;
  sd.table_size = 4;
  sd.key_size = 4;
  sd.branches = {{{0, 1}, {2, 3}}, {{1, 1}}, {{0, 1}, {0, 3}}};
  t.add_second_degree(sd);
  Network net(std::move(t));
  net.preload(ta, std::vector<NeuronIndex>{0, 2});
  net.preload(ke, std::vector<NeuronIndex>{1, 3});
  net.advance();
  const auto x = net.potentials(h);
  EXPECT_DOUBLE_EQ(x[0], 2.0);
  EXPECT_DOUBLE_EQ(x[1], 0.0);
  EXPECT_DOUBLE_EQ(x[2], 2.0);
}

TEST(Substrate, BindUsesSpikesOfTheStep) {
  Topology t;
  const auto a = t.add_cluster({"a", 10, ClusterKind::symbol, 0.0});
  const auto b = t.add_cluster({"b", 10, ClusterKind::symbol, 0.0});
  auto m = std::make_shared<SynapseMatrix>(SynapseMatrix::dense(10, 10));
  t.add_connection({"mem", a, b, ConnectionKind::one_shot_memory, m, true, 0.25F});
  const auto bind = t.add_control({"a.bind", ControlKind::bind, a, std::nullopt});
  NetworkState st = NetworkState::zeros(t);
  st.potentials[a][1] = st.potentials[a][4] = 1.0;
  st.spikes[a] = {1, 4};
  st.potentials[b][7] = 1.0;
  st.spikes[b] = {7};
  const std::vector<ControlId> raised{bind};
  const auto r = step(t, st, {}, raised);
  ASSERT_EQ(r.plasticity.size(), 1u);
  EXPECT_EQ(m->weight_at(*m->find(1, 7)), 0.0F);  // not applied by step
  EXPECT_EQ(apply_plasticity(t, r.plasticity[0]), 2u);
  EXPECT_EQ(m->weight_at(*m->find(1, 7)), 0.25F);
  EXPECT_EQ(m->weight_at(*m->find(4, 7)), 0.25F);
  EXPECT_EQ(m->weight_at(*m->find(4, 6)), 0.0F);
}

TEST(Substrate, NetworkMatchesPureStep) {
  auto topo = small_topology(8);
  Network net(topo);
  NetworkState st = NetworkState::zeros(topo);
  std::vector<NeuronIndex> seed_neurons{0, 3, 9, 12, 17, 25};
  net.preload(0, seed_neurons);
  st.potentials[0].assign(30, 0.0);
  for (auto n : seed_neurons) st.potentials[0][n] = 1.0;
  st.spikes[0] = seed_neurons;
  for (int n = 0; n < 60; ++n) {
    std::vector<Injection> ext;
    if (n % 10 < 3) ext.push_back(Injection::uniform(0, seed_neurons, 0.4));
    net.advance(ext);
    st = step(topo, st, ext).next;
    for (ClusterId c = 0; c < 2; ++c) {
      ASSERT_EQ(net.spikes(c), st.spikes[c]) << "tick " << n;
      for (std::size_t k = 0; k < st.potentials[c].size(); ++k) ASSERT_EQ(net.potentials(c)[k], st.potentials[c][k]);
    }
  }
}

TEST(Substrate, TopologyLimits) {
  Topology t;
  std::vector<ClusterId> c;
  for (int i = 0; i < 5; ++i) c.push_back(t.add_cluster({"c" + std::to_string(i), 50, ClusterKind::symbol, 0.0}));
  auto small = std::make_shared<SynapseMatrix>(SynapseMatrix::random(50, 50, 10, 1));
  auto wide = std::make_shared<SynapseMatrix>(SynapseMatrix::random(50, 50, 30, 2));
  t.add_connection({"0->4", c[0], c[4], ConnectionKind::mapping, small});
  t.add_connection({"1->4", c[1], c[4], ConnectionKind::mapping, small});
  t.add_connection({"2->4", c[2], c[4], ConnectionKind::mapping, small});
  EXPECT_TRUE(assert_topology_limits(t, 20).empty());
  t.add_connection({"3->4", c[3], c[4], ConnectionKind::mapping, wide});
  t.add_control({"4.inhibit", ControlKind::inhibit, c[4], NeuronRef{c[0], 0}});
  const auto report = assert_topology_limits(t, 20);
  ASSERT_EQ(report.size(), 2u);
  EXPECT_EQ(report[0].kind, TopologyViolation::Kind::fanout);
  EXPECT_EQ(report[0].value, 30u);
  EXPECT_EQ(report[1].kind, TopologyViolation::Kind::incoming);
  EXPECT_EQ(report[1].value, 4u);
}

TEST(Substrate, DimensionErrors) {
  auto topo = small_topology(1);
  NetworkState st = NetworkState::zeros(topo);
  std::vector<Injection> bad{{0, {{30, 1.0}}}};
  EXPECT_THROW(step(topo, st, bad), DimensionError);
  st.potentials[1].resize(3);
  EXPECT_THROW(step(topo, st), DimensionError);
}

TEST(Substrate, TraceLine) {
  auto topo = small_topology(1);
  Network net(topo);
  net.preload(0, std::vector<NeuronIndex>{2, 5});
  std::ostringstream os;
  TraceWriter tw(os, true);
  tw.write(net.topology(), net.state());
  EXPECT_NE(os.str().find("a:2[2 5]"), std::string::npos);
}
