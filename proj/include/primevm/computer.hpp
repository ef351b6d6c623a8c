#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "primevm/assembler.hpp"
#include "primevm/attractors.hpp"
#include "primevm/config.hpp"
#include "primevm/hashtable.hpp"
#include "primevm/memory.hpp"
#include "primevm/switchbox.hpp"

namespace primevm {

// ---------------------------------------------------------------------------
// Micro program

enum class MicroKind { inhibit_fetch, transfer, clear, gate, read, write, exit, fetch };
enum class GateMode { recall, bind, unbind };

/// One step of a microinstruction sequence.
struct MicroOp {
  MicroKind kind = MicroKind::clear;
  std::string src;                 // transfer
  std::string dst;                 // transfer
  std::vector<std::string> regs;   // clear, gate recall: registers cleared first
  std::string unit;                // gate: "alloc", "cons" or "table"
  GateMode mode = GateMode::recall;

  std::string text() const;
};

/// Memory unit behind alloc-*, cons-* and table-* opcodes.
struct MemoryUnit {
  std::string name;                // alloc, cons, table
  std::string cluster;             // alloc-c, cons-c, hash
  std::vector<std::string> keys;   // registers feeding the unit
  std::vector<std::string> values; // registers written by a recall
};
const std::vector<MemoryUnit>& memory_units();
const MemoryUnit& memory_unit(const std::string& name);

/// Ticks spent by each micro-op. Transfer length depends on the relay path.
struct Timing {
  std::size_t clear = 12;
  std::size_t open = 0;  // 0: derived from the relay count of each path
  std::size_t recall = 24;
  std::size_t bind = 4;
  std::size_t fetch = 4;
  std::size_t read = 8;

  static Timing from(const Geometry& g);
  std::size_t open_time(std::size_t relays) const;
};

/// Sequence of micro-ops per opcode, shared by both backends.
class MicroProgram {
 public:
  explicit MicroProgram(const std::set<Opcode>& opcodes);

  const std::vector<MicroOp>& at(const Opcode& op) const;
  const std::map<Opcode, std::vector<MicroOp>>& sequences() const noexcept { return seq_; }
  /// Fetch tail run once at boot.
  const std::vector<MicroOp>& boot() const noexcept { return boot_; }
  std::string to_text() const;

 private:
  std::map<Opcode, std::vector<MicroOp>> seq_;
  std::vector<MicroOp> boot_;
};

std::vector<MicroOp> micro_sequence(const Opcode& op);

// ---------------------------------------------------------------------------
// Symbols and initial content

/// Register symbol names: digits, digit pairs, true/false, table names, sep,
/// free pool f0.., code lines @0...
std::vector<std::string> machine_symbols(const Geometry& g);
/// Every opcode the machine can wire: fixed opcodes plus the mov table.
std::set<Opcode> machine_opcodes(const MovTable& movs = default_mov_table());

struct Binding {
  std::string table;
  std::string key;
  std::string value;
};
/// Hash table content loaded before a run.
std::vector<Binding> standard_prelude(bool bind_false);

/// Input text as channel symbols, terminated by false.
std::vector<std::string> input_symbols(const std::string& text);
std::string output_text(const std::vector<std::string>& symbols);

struct RunResult {
  std::vector<std::string> output;
  std::string text;
  std::uint64_t cycles = 0;        // substrate ticks
  std::size_t instructions = 0;
  std::map<std::string, std::size_t> histogram;  // opcode name -> executions
  bool exited = false;
};

// ---------------------------------------------------------------------------
// Functional backend

/// Registers are symbol slots, memories are maps. Cycles are the nominal
/// tick counts of the micro-ops it executes.
class FunctionalMachine {
 public:
  FunctionalMachine(const LinkedProgram& program, const Geometry& g);

  RunResult run(const std::vector<std::string>& input, std::uint64_t max_cycles);

  const std::optional<std::string>& reg(const std::string& name) const;
  void set_reg(const std::string& name, std::optional<std::string> value);
  std::size_t free_count() const;
  /// One line per dispatched instruction: opcode and register contents.
  void set_trace(std::ostream* out) noexcept { trace_ = out; }

 private:
  void exec(const MicroOp& op, RunResult& out);
  std::size_t duration(const MicroOp& op) const;

  const LinkedProgram* program_;
  Geometry geo_;
  Timing timing_;
  MicroProgram micro_;
  Switchbox shape_;  // relay paths only, for transfer lengths
  std::map<std::string, std::optional<std::string>> regs_;
  std::map<std::string, std::string> alloc_mem_;
  std::map<std::string, std::pair<std::string, std::string>> cons_mem_;
  std::map<std::pair<std::string, std::string>, std::string> table_mem_;
  std::vector<std::string> input_;
  std::size_t in_pos_ = 0;
  bool halted_ = false;
  std::optional<Opcode> pending_;
  std::ostream* trace_ = nullptr;
};

/// Trace line shared by both backends.
std::string register_line(const std::string& opcode, const std::map<std::string, std::optional<std::string>>& regs);

// ---------------------------------------------------------------------------
// Spiking backend

/// Program-independent trained state: symbol spaces and their shared weights.
struct TrainedMachine {
  Geometry geo;
  SymbolSpace registers;
  SymbolSpace opcodes;
  std::shared_ptr<SynapseMatrix> w;     // register self and assignation weights
  std::shared_ptr<SynapseMatrix> w_op;  // opcode assignation weights
  TrainingReport register_report;
  TrainingReport opcode_report;

  void save(const std::string& dir) const;
  static TrainedMachine load(const std::string& dir, const Geometry& g);
};

TrainedMachine train_machine(const Geometry& g);
/// Loads from `dir` when a cache for this geometry exists, otherwise trains and saves.
TrainedMachine cached_training(const Geometry& g, const std::string& dir);
std::string cache_key(const Geometry& g);

enum class TestOutcome { false_neuron, true_neuron, none, both };
std::string_view to_string(TestOutcome t);

class SpikingMachine {
 public:
  SpikingMachine(const TrainedMachine& trained, const LinkedProgram& program);

  RunResult run(const std::vector<std::string>& input, std::uint64_t max_cycles);

  Network& network() noexcept { return *net_; }
  const Topology& topology() const { return net_->topology(); }
  const Switchbox& switchbox() const noexcept { return sb_; }
  const MicroProgram& micro() const noexcept { return micro_; }
  const TrainedMachine& trained() const noexcept { return *trained_; }

  /// Exact symbol held by a register; none when empty; "?" when unreadable.
  std::optional<std::string> reg(const std::string& name) const;
  void set_reg(const std::string& name, const std::optional<std::string>& symbol);
  /// Which test neuron fires once the value register holds `value` (none: cleared).
  TestOutcome test_circuit(const std::optional<std::string>& value, std::size_t ticks = 6);
  /// Opcode reaching the opcode cluster when code holds `line` and value holds `value`.
  std::optional<std::string> dispatch(const std::string& line, const std::optional<std::string>& value);

  std::size_t micro_neurons() const noexcept { return micro_size_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }
  void set_trace(std::ostream* out) noexcept { trace_ = out; }

  /// Direct memory writes used by initialization (same weights as the bind opcodes).
  void bind_alloc(const std::string& head, const std::string& next);
  void bind_table(const std::string& table, const std::string& key, const std::string& value);

 private:
  struct MicroNeuron {
    std::vector<std::pair<NeuronIndex, Weight>> gates;  // control panel neuron, weight
    enum class Hook { none, read_start, read_drive, write, exit } hook = Hook::none;
  };
  struct Dispatcher {
    Opcode op;
    NeuronIndex recognizer;
    NeuronIndex barrier;
    NeuronIndex first;
  };

  void build();
  std::size_t compile(const std::vector<MicroOp>& ops, std::vector<MicroNeuron>& out);
  void reset_state();
  std::vector<ControlId> idle_controls() const;
  void check_registers(const std::string& where);

  const TrainedMachine* trained_;
  const LinkedProgram* program_;
  Geometry geo_;
  Timing timing_;
  MicroProgram micro_;
  std::unique_ptr<Network> net_;
  Switchbox sb_;
  std::map<std::string, ClusterId> reg_id_;
  std::vector<std::unique_ptr<OneShotMemory>> memories_;
  std::map<std::string, std::size_t> memory_of_;  // connection name -> index into memories_
  SecondDegreeSpec hash_spec_;
  std::map<std::string, NeuronIndex> gate_;       // control line name -> control panel neuron
  std::vector<MicroNeuron> micro_neurons_;
  std::vector<Dispatcher> dispatch_;
  NeuronIndex boot_ = 0;
  std::size_t micro_size_ = 0;
  std::size_t longest_sequence_ = 0;
  ClusterId micro_id_ = 0, control_id_ = 0, test_id_ = 0, opcode_id_ = 0;
  std::vector<std::string> warnings_;
  std::vector<NeuronIndex> always_on_gates_;
  std::ostream* trace_ = nullptr;
};

/// Builds and initializes a spiking machine: code-c mappings, free list, hash prelude.
std::unique_ptr<SpikingMachine> init_machine(const TrainedMachine& trained, const LinkedProgram& program);

}  // namespace primevm
