#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "primevm/attractors.hpp"
#include "primevm/substrate.hpp"

namespace primevm {

struct Relay {
  std::string name;
  ClusterId cluster = 0;
  ControlId inhibit = 0;
};

/// Registers joined by an outbound and an inbound relay tree meeting at the root
/// (two registers: one direct relay per direction). All clusters share one weight
/// matrix for self and assignation connections.
struct Switchbox {
  std::vector<std::string> registers;
  std::vector<ClusterId> register_ids;
  std::vector<ControlId> clear_lines;  // inhibit line per register
  std::vector<Relay> relays;
  // per ordered pair (src, dst): relay indices from src to dst
  std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> paths;

  std::size_t index_of(const std::string& reg) const;
  const std::vector<std::size_t>& path(std::size_t src, std::size_t dst) const;
  std::size_t max_path_length() const;
};

/// Adds registers, relays and their inhibit lines to `topo`.
Switchbox add_switchbox(Topology& topo, const std::vector<std::string>& registers,
                        std::shared_ptr<SynapseMatrix> shared_weights, std::size_t arity = 2);

struct ScheduleEntry {
  enum class Action { clear, release };
  std::size_t start = 0;
  std::size_t duration = 0;
  Action action = Action::clear;
  std::string target;
};

/// Control schedule relative to its first tick. Relays not released are inhibited.
struct Schedule {
  std::vector<ScheduleEntry> entries;
  std::size_t length = 0;
  std::string to_text() const;
};

/// Settle window for a path of `relays` relay clusters plus the destination.
std::size_t default_open_time(std::size_t relays);

Schedule transfer_schedule(const Switchbox& sb, const std::string& src, const std::string& dst, std::size_t t_clear,
                           std::size_t t_open);
Schedule clear_schedule(const Switchbox& sb, const std::string& reg, std::size_t t_clear);

/// Runs a schedule tick by tick: every relay inhibit is raised unless released.
void execute(Network& net, const Switchbox& sb, const Schedule& schedule);
/// Ticks with every relay inhibited and no register cleared.
void idle(Network& net, const Switchbox& sb, std::size_t ticks);

}  // namespace primevm
