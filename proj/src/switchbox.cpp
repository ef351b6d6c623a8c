#include "primevm/switchbox.hpp"

#include <algorithm>
#include <sstream>

namespace primevm {

std::size_t Switchbox::index_of(const std::string& reg) const {
  auto it = std::find(registers.begin(), registers.end(), reg);
  if (it == registers.end()) throw Error("unknown register '" + reg + "'");
  return static_cast<std::size_t>(it - registers.begin());
}

const std::vector<std::size_t>& Switchbox::path(std::size_t src, std::size_t dst) const {
  auto it = paths.find({src, dst});
  if (it == paths.end()) throw Error("no path between the given registers");
  return it->second;
}

std::size_t Switchbox::max_path_length() const {
  std::size_t best = 0;
  for (const auto& [k, p] : paths) best = std::max(best, p.size());
  return best;
}

namespace {

std::size_t add_relay(Topology& topo, Switchbox& sb, const std::string& name, std::size_t size,
                      const std::shared_ptr<SynapseMatrix>& w) {
  const auto id = topo.add_cluster({name, size, ClusterKind::symbol, 0.0});
  topo.add_connection({name + ".self", id, id, ConnectionKind::self, w, false, 0.0F});
  const auto line = topo.add_control({name + ".inhibit", ControlKind::inhibit, id, std::nullopt});
  sb.relays.push_back({name, id, line});
  return sb.relays.size() - 1;
}

void assign(Topology& topo, ClusterId src, ClusterId dst, const std::shared_ptr<SynapseMatrix>& w) {
  topo.add_connection({topo.cluster(src).name + "->" + topo.cluster(dst).name, src, dst, ConnectionKind::assignation,
                       w, false, 0.0F});
}

}  // namespace

Switchbox add_switchbox(Topology& topo, const std::vector<std::string>& registers,
                        std::shared_ptr<SynapseMatrix> w, std::size_t arity) {
  if (registers.size() < 2) throw ConfigError("a switch box needs at least two registers");
  if (arity < 2) throw ConfigError("relay tree arity must be at least 2");
  const std::size_t size = w->src_size();
  Switchbox sb;
  sb.registers = registers;
  for (const auto& r : registers) {
    const auto id = topo.add_cluster({r, size, ClusterKind::symbol, 0.0});
    topo.add_connection({r + ".self", id, id, ConnectionKind::self, w, false, 0.0F});
    sb.register_ids.push_back(id);
    sb.clear_lines.push_back(topo.add_control({r + ".clear", ControlKind::inhibit, id, std::nullopt}));
  }

  if (registers.size() == 2) {
    const auto c1 = add_relay(topo, sb, "c1", size, w);
    const auto c2 = add_relay(topo, sb, "c2", size, w);
    assign(topo, sb.register_ids[0], sb.relays[c1].cluster, w);
    assign(topo, sb.relays[c1].cluster, sb.register_ids[1], w);
    assign(topo, sb.register_ids[1], sb.relays[c2].cluster, w);
    assign(topo, sb.relays[c2].cluster, sb.register_ids[0], w);
    sb.paths[{0, 1}] = {c1};
    sb.paths[{1, 0}] = {c2};
    return sb;
  }

  // Outbound tree: one leaf per register, grouped by `arity` up to a root.
  const std::size_t n = registers.size();
  std::vector<std::size_t> o_parent, i_parent;  // relay index -> parent relay index (or npos)
  std::vector<std::size_t> o_leaf(n), i_leaf(n);
  constexpr auto none = static_cast<std::size_t>(-1);
  std::vector<std::size_t> level;
  std::size_t counter = 0;
  for (std::size_t r = 0; r < n; ++r) {
    o_leaf[r] = add_relay(topo, sb, "o" + std::to_string(++counter), size, w);
    assign(topo, sb.register_ids[r], sb.relays[o_leaf[r]].cluster, w);
    level.push_back(o_leaf[r]);
  }
  std::vector<std::size_t> parent_of(sb.relays.size() + 4 * n, none);
  while (level.size() > 1) {
    std::vector<std::size_t> next;
    for (std::size_t g = 0; g < level.size(); g += arity) {
      const std::size_t end = std::min(level.size(), g + arity);
      if (end - g == 1) {
        next.push_back(level[g]);
        continue;
      }
      const auto p = add_relay(topo, sb, "o" + std::to_string(++counter), size, w);
      for (std::size_t c = g; c < end; ++c) {
        assign(topo, sb.relays[level[c]].cluster, sb.relays[p].cluster, w);
        parent_of[level[c]] = p;
      }
      next.push_back(p);
    }
    level = std::move(next);
  }
  const std::size_t o_root = level.front();

  // Inbound tree mirrors the outbound one.
  std::vector<std::size_t> mirror(sb.relays.size(), none);
  counter = 0;
  const std::size_t o_count = sb.relays.size();
  // children lists of the outbound tree, visited root first
  std::vector<std::vector<std::size_t>> children(o_count);
  for (std::size_t k = 0; k < o_count; ++k)
    if (parent_of[k] != none) children[parent_of[k]].push_back(k);
  std::vector<std::size_t> order{o_root};
  for (std::size_t q = 0; q < order.size(); ++q)
    for (auto c : children[order[q]]) order.push_back(c);
  // name inbound relays after the outbound ones they mirror
  for (auto k : order) {
    const auto name = "i" + sb.relays[k].name.substr(1);
    mirror[k] = add_relay(topo, sb, name, size, w);
  }
  assign(topo, sb.relays[o_root].cluster, sb.relays[mirror[o_root]].cluster, w);
  for (auto k : order)
    for (auto c : children[k]) assign(topo, sb.relays[mirror[k]].cluster, sb.relays[mirror[c]].cluster, w);
  for (std::size_t r = 0; r < n; ++r) assign(topo, sb.relays[mirror[o_leaf[r]]].cluster, sb.register_ids[r], w);

  for (std::size_t s = 0; s < n; ++s) {
    std::vector<std::size_t> up;
    for (auto k = o_leaf[s]; k != none; k = parent_of[k]) up.push_back(k);
    for (std::size_t d = 0; d < n; ++d) {
      if (s == d) continue;
      std::vector<std::size_t> down;
      for (auto k = o_leaf[d]; k != none; k = parent_of[k]) down.push_back(mirror[k]);
      std::reverse(down.begin(), down.end());
      auto path = up;
      path.insert(path.end(), down.begin(), down.end());
      sb.paths[{s, d}] = std::move(path);
    }
  }
  return sb;
}

std::string Schedule::to_text() const {
  std::ostringstream os;
  for (const auto& e : entries)
    os << e.start << ' ' << (e.action == ScheduleEntry::Action::clear ? "clear" : "release") << ' ' << e.target << ' '
       << e.duration << '\n';
  os << length << " end\n";
  return os.str();
}

std::size_t default_open_time(std::size_t relays) { return 2 * (relays + 1) + 4; }

Schedule transfer_schedule(const Switchbox& sb, const std::string& src, const std::string& dst, std::size_t t_clear,
                           std::size_t t_open) {
  const auto s = sb.index_of(src);
  const auto d = sb.index_of(dst);
  if (s == d) throw Error("transfer needs two distinct registers");
  const auto& path = sb.path(s, d);
  if (t_open == 0) t_open = default_open_time(path.size());
  Schedule out;
  out.entries.push_back({0, t_clear, ScheduleEntry::Action::clear, dst});
  for (auto r : path) out.entries.push_back({t_clear, t_open, ScheduleEntry::Action::release, sb.relays[r].name});
  out.length = t_clear + t_open;
  return out;
}

Schedule clear_schedule(const Switchbox& sb, const std::string& reg, std::size_t t_clear) {
  sb.index_of(reg);
  Schedule out;
  out.entries.push_back({0, t_clear, ScheduleEntry::Action::clear, reg});
  out.length = t_clear;
  return out;
}

void execute(Network& net, const Switchbox& sb, const Schedule& schedule) {
  std::map<std::string, ControlId> clear_of, relay_of;
  for (std::size_t r = 0; r < sb.registers.size(); ++r) clear_of[sb.registers[r]] = sb.clear_lines[r];
  for (const auto& rl : sb.relays) relay_of[rl.name] = rl.inhibit;
  std::vector<ControlId> raised;
  for (std::size_t t = 0; t < schedule.length; ++t) {
    raised.clear();
    std::vector<char> released(sb.relays.size(), 0);
    for (const auto& e : schedule.entries) {
      if (t < e.start || t >= e.start + e.duration) continue;
      if (e.action == ScheduleEntry::Action::clear) {
        auto it = clear_of.find(e.target);
        if (it == clear_of.end()) throw Error("schedule clears unknown register '" + e.target + "'");
        raised.push_back(it->second);
      } else {
        auto it = relay_of.find(e.target);
        if (it == relay_of.end()) throw Error("schedule releases unknown relay '" + e.target + "'");
        for (std::size_t k = 0; k < sb.relays.size(); ++k)
          if (sb.relays[k].inhibit == it->second) released[k] = 1;
      }
    }
    for (std::size_t k = 0; k < sb.relays.size(); ++k)
      if (!released[k]) raised.push_back(sb.relays[k].inhibit);
    net.advance({}, raised);
  }
}

void idle(Network& net, const Switchbox& sb, std::size_t ticks) {
  std::vector<ControlId> raised;
  for (const auto& rl : sb.relays) raised.push_back(rl.inhibit);
  for (std::size_t t = 0; t < ticks; ++t) net.advance({}, raised);
}

}  // namespace primevm
