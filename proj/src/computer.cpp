#include "primevm/computer.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace primevm {

namespace {

constexpr Weight kRelease = -2.0F;
constexpr Weight kForce = 4.0F;
constexpr Weight kPulse = 1.0F;
// ticks between the last fetch neuron and the first neuron of the next sequence
constexpr std::size_t kDispatchLatency = 2;

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t k) { return seed * 0x9E3779B97F4A7C15ULL + k * 0xBF58476D1CE4E5B9ULL; }

MarginParams margins(const Geometry& g) { return {g.alpha, g.margin, g.excitation, g.max_epochs}; }

std::string digit(int d) { return std::string(1, static_cast<char>('0' + d)); }
std::string pair_name(int a, int b) { return "p" + digit(a) + digit(b); }

// Per-neuron wiring accumulated as (src, dst) -> weight.
class Wiring {
 public:
  Wiring(std::size_t src, std::size_t dst) : src_(src), dst_(dst) {}
  void add(NeuronIndex s, NeuronIndex d, Weight w) { w_[{s, d}] += w; }
  std::shared_ptr<SynapseMatrix> build() const {
    std::vector<std::vector<NeuronIndex>> rows(src_);
    for (const auto& [k, w] : w_) rows[k.first].push_back(k.second);
    auto m = std::make_shared<SynapseMatrix>(src_, dst_, rows);
    for (const auto& [k, w] : w_) m->set_weight_at(*m->find(k.first, k.second), w);
    m->touch();
    return m;
  }

 private:
  std::size_t src_, dst_;
  std::map<std::pair<NeuronIndex, NeuronIndex>, Weight> w_;
};

Switchbox relay_shape() {
  Topology topo;
  auto w = std::make_shared<SynapseMatrix>(1, 1, std::vector<std::vector<NeuronIndex>>{{}});
  return add_switchbox(topo, register_names(), w, 2);
}

}  // namespace

// ---------------------------------------------------------------------------
// Micro program

std::string MicroOp::text() const {
  switch (kind) {
    case MicroKind::inhibit_fetch: return "inhibit code-c";
    case MicroKind::transfer: return "transfer " + src + " -> " + dst;
    case MicroKind::clear: {
      std::string s = "clear";
      for (const auto& r : regs) s += " " + r;
      return s;
    }
    case MicroKind::gate: {
      std::string s = unit + (mode == GateMode::recall ? " recall" : mode == GateMode::bind ? " bind" : " unbind");
      for (const auto& r : regs) s += " clear " + r;
      return s;
    }
    case MicroKind::read: return "read";
    case MicroKind::write: return "write";
    case MicroKind::exit: return "exit";
    case MicroKind::fetch: return "fetch";
  }
  return "?";
}

const std::vector<MemoryUnit>& memory_units() {
  static const std::vector<MemoryUnit> units = {
      {"alloc", "alloc-c", {"alloc"}, {"alloc2"}},
      {"cons", "cons-c", {"cons"}, {"car", "cdr"}},
      {"table", "hash", {"table", "key"}, {"value"}},
  };
  return units;
}

const MemoryUnit& memory_unit(const std::string& name) {
  for (const auto& u : memory_units())
    if (u.name == name) return u;
  throw Error("unknown memory unit '" + name + "'");
}

Timing Timing::from(const Geometry& g) {
  Timing t{g.t_clear, g.t_open, g.t_recall, g.t_bind, g.t_fetch, g.t_read};
  if (t.clear < 2) throw ConfigError("time.clear must be at least 2");
  if (t.bind < 3) throw ConfigError("time.bind must be at least 3");
  if (t.fetch < 1 || t.read < 2 || t.recall < 2) throw ConfigError("time.fetch, time.read or time.recall too short");
  return t;
}

std::size_t Timing::open_time(std::size_t relays) const { return open ? open : default_open_time(relays); }

std::vector<MicroOp> micro_sequence(const Opcode& op) {
  std::vector<MicroOp> seq;
  seq.push_back({MicroKind::inhibit_fetch, "", "", {}, "", GateMode::recall});
  if (op.kind == OpKind::exit) {
    seq.push_back({MicroKind::exit, "", "", {}, "", GateMode::recall});
    return seq;
  }
  if (!(op.kind == OpKind::mov && op.dst == "code")) seq.push_back({MicroKind::transfer, "code2", "code", {}, "", {}});
  auto gate = [&](const std::string& unit, GateMode mode) {
    MicroOp m{MicroKind::gate, "", "", {}, unit, mode};
    if (mode == GateMode::recall) m.regs = memory_unit(unit).values;
    seq.push_back(m);
  };
  switch (op.kind) {
    case OpKind::alloc_recall: gate("alloc", GateMode::recall); break;
    case OpKind::alloc_bind: gate("alloc", GateMode::bind); break;
    case OpKind::alloc_unbind: gate("alloc", GateMode::unbind); break;
    case OpKind::cons_recall: gate("cons", GateMode::recall); break;
    case OpKind::cons_bind: gate("cons", GateMode::bind); break;
    case OpKind::cons_unbind: gate("cons", GateMode::unbind); break;
    case OpKind::table_recall: gate("table", GateMode::recall); break;
    case OpKind::table_bind: gate("table", GateMode::bind); break;
    case OpKind::table_unbind: gate("table", GateMode::unbind); break;
    case OpKind::read: seq.push_back({MicroKind::read, "", "", {"reserved"}, "", {}}); break;
    case OpKind::write: seq.push_back({MicroKind::write, "", "", {}, "", {}}); break;
    case OpKind::nop: break;
    case OpKind::exit: break;
    case OpKind::mov: seq.push_back({MicroKind::transfer, op.src, op.dst, {}, "", {}}); break;
  }
  seq.push_back({MicroKind::fetch, "", "", {"code2", "arg"}, "", {}});
  return seq;
}

MicroProgram::MicroProgram(const std::set<Opcode>& opcodes) {
  for (const auto& op : opcodes) seq_[op] = micro_sequence(op);
  boot_.push_back({MicroKind::fetch, "", "", {"code2", "arg"}, "", {}});
}

const std::vector<MicroOp>& MicroProgram::at(const Opcode& op) const {
  auto it = seq_.find(op);
  if (it == seq_.end()) throw Error("no micro sequence for opcode " + op.name());
  return it->second;
}

std::string MicroProgram::to_text() const {
  std::ostringstream os;
  for (const auto& [op, seq] : seq_) {
    os << op.name() << ':';
    for (std::size_t k = 0; k < seq.size(); ++k) os << (k ? "; " : " ") << seq[k].text();
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Symbols

std::vector<std::string> machine_symbols(const Geometry& g) {
  std::vector<std::string> names;
  for (int d = 0; d < 10; ++d) names.push_back(digit(d));
  for (int a = 0; a < 10; ++a)
    for (int b = 0; b < 10; ++b) names.push_back(pair_name(a, b));
  for (const char* s : {"true", "false", "is-digit", "add-mod-10", "add-carry", "sep"}) names.emplace_back(s);
  for (std::size_t k = 0; k < g.free_pool; ++k) names.push_back("f" + std::to_string(k));
  for (std::size_t k = 0; k < g.code_lines; ++k) names.push_back("@" + std::to_string(k));
  return names;
}

std::set<Opcode> machine_opcodes(const MovTable& movs) {
  std::set<Opcode> ops;
  for (auto k : {OpKind::alloc_recall, OpKind::alloc_bind, OpKind::alloc_unbind, OpKind::cons_recall,
                 OpKind::cons_bind, OpKind::cons_unbind, OpKind::table_recall, OpKind::table_bind,
                 OpKind::table_unbind, OpKind::read, OpKind::write, OpKind::nop, OpKind::exit})
    ops.insert({k, "", ""});
  for (const auto& [a, b] : movs) ops.insert({OpKind::mov, a, b});
  return ops;
}

std::vector<Binding> standard_prelude(bool bind_false) {
  std::vector<Binding> out;
  for (int a = 0; a < 10; ++a)
    for (int b = 0; b < 10; ++b) out.push_back({digit(a), digit(b), pair_name(a, b)});
  for (int d = 0; d < 10; ++d) out.push_back({"is-digit", digit(d), "true"});
  for (int a = 0; a < 10; ++a)
    for (int b = 0; b < 10; ++b) out.push_back({"add-mod-10", pair_name(a, b), digit((a + b) % 10)});
  for (int a = 0; a < 10; ++a)
    for (int b = 0; b < 10; ++b) {
      if (a + b >= 10)
        out.push_back({"add-carry", pair_name(a, b), "true"});
      else if (bind_false)
        out.push_back({"add-carry", pair_name(a, b), "false"});
    }
  return out;
}

std::vector<std::string> input_symbols(const std::string& text) {
  std::vector<std::string> out;
  for (char c : text) out.push_back(char_symbol(c));
  out.emplace_back("false");
  return out;
}

std::string output_text(const std::vector<std::string>& symbols) {
  std::string s;
  for (const auto& x : symbols) s += symbol_text(x);
  return s;
}

std::string register_line(const std::string& opcode, const std::map<std::string, std::optional<std::string>>& regs) {
  std::string s = opcode;
  for (const auto& r : register_names()) {
    auto it = regs.find(r);
    if (it == regs.end() || !it->second) continue;
    s += " " + r + "=" + *it->second;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Functional backend

FunctionalMachine::FunctionalMachine(const LinkedProgram& program, const Geometry& g)
    : program_(&program), geo_(g), timing_(Timing::from(g)), micro_(program.opcodes()), shape_(relay_shape()) {
  if (program.code.empty()) throw Error("empty program");
  for (const auto& r : register_names()) regs_[r] = std::nullopt;
}

const std::optional<std::string>& FunctionalMachine::reg(const std::string& name) const {
  auto it = regs_.find(name);
  if (it == regs_.end()) throw Error("unknown register '" + name + "'");
  return it->second;
}

void FunctionalMachine::set_reg(const std::string& name, std::optional<std::string> value) {
  reg(name);
  regs_[name] = std::move(value);
}

std::size_t FunctionalMachine::free_count() const {
  std::size_t n = 0;
  auto head = regs_.at("alloc");
  std::set<std::string> seen;
  while (head && *head != "false" && seen.insert(*head).second) {
    ++n;
    auto it = alloc_mem_.find(*head);
    if (it == alloc_mem_.end()) break;
    head = it->second;
  }
  return n;
}

std::size_t FunctionalMachine::duration(const MicroOp& op) const {
  switch (op.kind) {
    case MicroKind::inhibit_fetch: return 1;
    case MicroKind::transfer:
      return timing_.clear + timing_.open_time(shape_.path(shape_.index_of(op.src), shape_.index_of(op.dst)).size());
    case MicroKind::clear: return timing_.clear;
    case MicroKind::gate: return op.mode == GateMode::recall ? timing_.clear + timing_.recall : timing_.bind;
    case MicroKind::read: return timing_.clear + timing_.read;
    case MicroKind::write: return 1;
    case MicroKind::exit: return 0;  // the run stops on the tick exit fires
    case MicroKind::fetch: return timing_.clear + timing_.fetch;
  }
  return 0;
}

void FunctionalMachine::exec(const MicroOp& op, RunResult& out) {
  auto& r = regs_;
  switch (op.kind) {
    case MicroKind::inhibit_fetch: break;
    case MicroKind::transfer: r[op.dst] = r[op.src]; break;
    case MicroKind::clear:
      for (const auto& x : op.regs) r[x].reset();
      break;
    case MicroKind::gate: {
      if (op.unit == "alloc") {
        const auto& k = r["alloc"];
        if (op.mode == GateMode::recall) {
          r["alloc2"].reset();
          if (k && alloc_mem_.count(*k)) r["alloc2"] = alloc_mem_[*k];
        } else if (op.mode == GateMode::bind) {
          if (k && r["alloc2"]) alloc_mem_[*k] = *r["alloc2"];
        } else if (k && r["alloc2"] && alloc_mem_.count(*k) && alloc_mem_[*k] == *r["alloc2"]) {
          alloc_mem_.erase(*k);
        }
      } else if (op.unit == "cons") {
        const auto& k = r["cons"];
        if (op.mode == GateMode::recall) {
          r["car"].reset();
          r["cdr"].reset();
          if (k && cons_mem_.count(*k)) {
            r["car"] = cons_mem_[*k].first;
            r["cdr"] = cons_mem_[*k].second;
          }
        } else if (op.mode == GateMode::bind) {
          if (k && r["car"] && r["cdr"]) cons_mem_[*k] = {*r["car"], *r["cdr"]};
        } else if (k && cons_mem_.count(*k) && r["car"] && r["cdr"] &&
                   cons_mem_[*k] == std::make_pair(*r["car"], *r["cdr"])) {
          cons_mem_.erase(*k);
        }
      } else {
        const auto& t = r["table"];
        const auto& k = r["key"];
        if (!t || !k) {
          if (op.mode == GateMode::recall) r["value"].reset();
          break;
        }
        const auto key = std::make_pair(*t, *k);
        if (op.mode == GateMode::recall) {
          auto it = table_mem_.find(key);
          r["value"] = it == table_mem_.end() ? std::string("false") : it->second;
        } else if (op.mode == GateMode::bind) {
          if (r["value"]) table_mem_[key] = *r["value"];
        } else if (r["value"] && table_mem_.count(key) && table_mem_[key] == *r["value"]) {
          table_mem_.erase(key);
        }
      }
      break;
    }
    case MicroKind::read:
      if (in_pos_ >= input_.size()) throw Error("read past the end of the input channel");
      r["reserved"] = input_[in_pos_++];
      break;
    case MicroKind::write:
      if (!r["reserved"]) throw Error("write with an empty reserved register");
      out.output.push_back(*r["reserved"]);
      break;
    case MicroKind::exit:
      halted_ = true;
      out.exited = true;
      break;
    case MicroKind::fetch: {
      r["code2"].reset();
      r["arg"].reset();
      const auto& c = r["code"];
      if (!c || c->empty() || c->front() != '@') throw Error("code register holds no instruction");
      const auto& line = program_->at(*c);
      r["code2"] = line.next;
      if (line.arg) r["arg"] = *line.arg;
      const bool is_false = r["value"] && *r["value"] == "false";
      pending_ = is_false ? line.neq : line.eq;
      break;
    }
  }
}

RunResult FunctionalMachine::run(const std::vector<std::string>& input, std::uint64_t max_cycles) {
  for (auto& [k, v] : regs_) v.reset();
  alloc_mem_.clear();
  cons_mem_.clear();
  table_mem_.clear();
  std::string head = "false";
  for (std::size_t k = 0; k < geo_.free_pool; ++k) {
    const auto f = "f" + std::to_string(k);
    alloc_mem_[f] = head;
    head = f;
  }
  for (const auto& b : standard_prelude(geo_.bind_false != 0))
    if (b.value != "false") table_mem_[{b.table, b.key}] = b.value;
  regs_["code"] = program_->entry;
  regs_["alloc"] = head;
  regs_["stack"] = "false";
  regs_["cont"] = "false";
  regs_["value"] = "false";
  input_ = input;
  in_pos_ = 0;
  halted_ = false;
  pending_.reset();

  RunResult out;
  for (const auto& op : micro_.boot()) {
    exec(op, out);
    out.cycles += duration(op);
  }
  while (!halted_) {
    if (!pending_) throw Error("no opcode dispatched");
    const Opcode op = *pending_;
    pending_.reset();
    ++out.instructions;
    ++out.histogram[op.name()];
    if (trace_) *trace_ << register_line(op.name(), regs_) << '\n';
    out.cycles += kDispatchLatency;
    for (const auto& m : micro_.at(op)) {
      exec(m, out);
      out.cycles += duration(m);
      if (halted_) break;
    }
    if (out.cycles > max_cycles) throw ConvergenceError("cycle budget of " + std::to_string(max_cycles) + " exceeded");
  }
  out.text = output_text(out.output);
  return out;
}

// ---------------------------------------------------------------------------
// Training and cache

TrainedMachine train_machine(const Geometry& g) {
  TrainedMachine tm;
  tm.geo = g;
  const auto params = margins(g);
  {
    auto mask = SynapseMatrix::random(g.register_size, g.register_size, g.kappa, sub_seed(g.seed, 1), true);
    tm.registers = generate_prime_attractors(g.register_size, g.register_active, machine_symbols(g),
                                             sub_seed(g.seed, 2), self_reachability(mask, g.min_reach));
    auto reg = train_self_connection(tm.registers, std::move(mask), params);
    tm.w = reg.self_weights;
    tm.register_report = reg.report;
  }
  {
    const auto fan = std::min(g.kappa, g.opcode_size - 1);
    auto mask = SynapseMatrix::random(g.opcode_size, g.opcode_size, fan, sub_seed(g.seed, 3), true);
    std::vector<std::string> names;
    for (const auto& op : machine_opcodes()) names.push_back(op.name());
    tm.opcodes = generate_prime_attractors(g.opcode_size, g.opcode_active, names, sub_seed(g.seed, 4),
                                           self_reachability(mask, g.min_reach));
    auto reg = train_self_connection(tm.opcodes, std::move(mask), params);
    tm.w_op = reg.self_weights;
    tm.opcode_report = reg.report;
  }
  return tm;
}

std::string cache_key(const Geometry& g) {
  // FNV-1a over the canonical geometry text
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : g.fingerprint()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

void TrainedMachine::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(std::filesystem::path(dir) / name);
    if (!f) throw Error("cannot write " + (std::filesystem::path(dir) / name).string());
    f.precision(9);
    return f;
  };
  {
    auto f = open("geometry.cfg");
    f << geo.fingerprint();
  }
  {
    auto f = open("registers.space");
    registers.write(f);
  }
  {
    auto f = open("opcodes.space");
    opcodes.write(f);
  }
  {
    auto f = open("registers.weights");
    write_triples(f, *w);
  }
  {
    auto f = open("opcodes.weights");
    write_triples(f, *w_op);
  }
}

TrainedMachine TrainedMachine::load(const std::string& dir, const Geometry& g) {
  auto open = [&](const char* name) {
    std::ifstream f(std::filesystem::path(dir) / name);
    if (!f) throw Error("cannot read " + (std::filesystem::path(dir) / name).string());
    return f;
  };
  {
    auto f = open("geometry.cfg");
    std::stringstream ss;
    ss << f.rdbuf();
    if (ss.str() != g.fingerprint()) throw ConfigError("cached training in " + dir + " is for another geometry");
  }
  TrainedMachine tm;
  tm.geo = g;
  {
    auto f = open("registers.space");
    tm.registers = SymbolSpace::read(f);
  }
  {
    auto f = open("opcodes.space");
    tm.opcodes = SymbolSpace::read(f);
  }
  tm.w = std::make_shared<SynapseMatrix>(
      SynapseMatrix::random(g.register_size, g.register_size, g.kappa, sub_seed(g.seed, 1), true));
  {
    auto f = open("registers.weights");
    read_triples(f, *tm.w);
  }
  tm.w_op = std::make_shared<SynapseMatrix>(SynapseMatrix::random(
      g.opcode_size, g.opcode_size, std::min(g.kappa, g.opcode_size - 1), sub_seed(g.seed, 3), true));
  {
    auto f = open("opcodes.weights");
    read_triples(f, *tm.w_op);
  }
  return tm;
}

TrainedMachine cached_training(const Geometry& g, const std::string& dir) {
  const auto sub = (std::filesystem::path(dir) / cache_key(g)).string();
  if (std::filesystem::exists(std::filesystem::path(sub) / "geometry.cfg")) return TrainedMachine::load(sub, g);
  auto tm = train_machine(g);
  tm.save(sub);
  return tm;
}

// ---------------------------------------------------------------------------
// Spiking backend

std::string_view to_string(TestOutcome t) {
  switch (t) {
    case TestOutcome::false_neuron: return "false";
    case TestOutcome::true_neuron: return "true";
    case TestOutcome::none: return "none";
    case TestOutcome::both: return "both";
  }
  return "?";
}

SpikingMachine::SpikingMachine(const TrainedMachine& trained, const LinkedProgram& program)
    : trained_(&trained),
      program_(&program),
      geo_(trained.geo),
      timing_(Timing::from(trained.geo)),
      micro_(program.opcodes()) {
  if (program.code.empty()) throw Error("empty program");
  if (program.code.size() > geo_.code_lines)
    throw Error("program needs " + std::to_string(program.code.size()) + " code symbols, machine has " +
                std::to_string(geo_.code_lines));
  for (const auto& s : program.data_symbols)
    if (!trained.registers.contains(s)) throw Error("program uses unknown symbol '" + s + "'");
  build();
}

namespace {

// test panel layout
constexpr NeuronIndex kFalse = 0;
constexpr NeuronIndex kTrue = 1;
constexpr NeuronIndex kTestOn = 2;
// control panel: neuron 0 fires every tick
constexpr NeuronIndex kControlOn = 0;

}  // namespace

void SpikingMachine::build() {
  const auto& g = geo_;
  const auto& regs = trained_->registers;
  const auto& ops = trained_->opcodes;
  const std::size_t N = g.register_size;
  const auto params = margins(g);
  Topology topo;

  sb_ = add_switchbox(topo, register_names(), trained_->w, 2);
  for (std::size_t r = 0; r < sb_.registers.size(); ++r) reg_id_[sb_.registers[r]] = sb_.register_ids[r];

  auto symbol_cluster = [&](const std::string& name, std::size_t size) {
    return topo.add_cluster({name, size, ClusterKind::symbol, 0.0});
  };
  auto connect = [&](const std::string& name, ClusterId src, ClusterId dst, ConnectionKind kind,
                     std::shared_ptr<SynapseMatrix> m, bool plastic = false, Weight nominal = 0.0F) {
    return topo.add_connection({name, src, dst, kind, std::move(m), plastic, nominal});
  };

  // special circuitry fed by registers
  const auto code_c = symbol_cluster("code-c", N);
  connect("code->code-c", reg_id_["code"], code_c, ConnectionKind::assignation, trained_->w);
  const auto alloc_c = symbol_cluster("alloc-c", N);
  connect("alloc->alloc-c", reg_id_["alloc"], alloc_c, ConnectionKind::assignation, trained_->w);
  const auto cons_c = symbol_cluster("cons-c", N);
  connect("cons->cons-c", reg_id_["cons"], cons_c, ConnectionKind::assignation, trained_->w);
  const auto hash = symbol_cluster("hash", g.hash_size);
  hash_spec_ = build_hash_net(reg_id_["table"], reg_id_["key"], hash, N, N, g.hash_size,
                              static_cast<double>(g.hash_active) / static_cast<double>(g.hash_size),
                              sub_seed(g.seed, 13), matched_branches(N, g.register_active, g.hash_size, g.hash_active));
  hash_spec_.name = "table*key->hash";
  topo.add_second_degree(hash_spec_);

  // one-shot memories
  const auto a_reg = nominal_weight(g.bound_drive, expected_theta(g.register_active, g.kappa, N));
  const auto a_hash = nominal_weight(g.bound_drive, expected_theta(g.hash_active, g.kappa, N));
  auto memory = [&](const std::string& name, ClusterId src, std::size_t src_size, ClusterId dst, Weight a,
                    std::uint64_t k) {
    auto m = std::make_shared<SynapseMatrix>(SynapseMatrix::random(src_size, N, g.kappa, sub_seed(g.seed, k)));
    memories_.push_back(std::make_unique<OneShotMemory>(m, a));
    memory_of_[name] = memories_.size() - 1;
    connect(name, src, dst, ConnectionKind::one_shot_memory, m, true, a);
  };
  memory("alloc-c->alloc2", alloc_c, N, reg_id_["alloc2"], a_reg, 5);
  memory("cons-c->car", cons_c, N, reg_id_["car"], a_reg, 6);
  memory("cons-c->cdr", cons_c, N, reg_id_["cdr"], a_reg, 7);
  memory("hash->value", hash, g.hash_size, reg_id_["value"], a_hash, 8);
  {
    auto& hm = *memories_[memory_of_["hash->value"]];
    hm.install_default(regs.at("false"), g.default_ratio);
    connect("hash->value.default", hash, reg_id_["value"], ConnectionKind::one_shot_memory, hm.default_synapses());
  }

  // code-c mappings for this program
  const auto eq = symbol_cluster("opcode-eq", g.opcode_size);
  const auto neq = symbol_cluster("opcode-neq", g.opcode_size);
  opcode_id_ = symbol_cluster("opcode", g.opcode_size);
  {
    std::vector<std::pair<std::string, std::string>> next, arg, op_eq, op_neq;
    for (const auto& line : program_->code) {
      next.emplace_back(line.symbol, line.next);
      arg.emplace_back(line.symbol, line.arg.value_or(""));
      op_eq.emplace_back(line.symbol, line.eq.name());
      op_neq.emplace_back(line.symbol, line.neq.name());
    }
    auto mapping = [&](const std::string& name, ClusterId dst, const SymbolSpace& dst_space,
                       const std::vector<std::pair<std::string, std::string>>& pairs, std::uint64_t k) {
      const auto fan = std::min(g.kappa, dst_space.cluster_size());
      auto m = std::make_shared<SynapseMatrix>(SynapseMatrix::random(N, dst_space.cluster_size(), fan, sub_seed(g.seed, k)));
      train_mapping(regs, dst_space, pairs, *m, params);
      connect(name, code_c, dst, ConnectionKind::mapping, m);
    };
    mapping("code-c->code2", reg_id_["code2"], regs, next, 9);
    mapping("code-c->arg", reg_id_["arg"], regs, arg, 10);
    mapping("code-c->opcode-eq", eq, ops, op_eq, 11);
    mapping("code-c->opcode-neq", neq, ops, op_neq, 12);
  }
  connect("opcode-eq->opcode", eq, opcode_id_, ConnectionKind::assignation, trained_->w_op);
  connect("opcode-neq->opcode", neq, opcode_id_, ConnectionKind::assignation, trained_->w_op);

  // test panel
  test_id_ = topo.add_cluster({"test", 3, ClusterKind::panel, g.panel_leak});
  connect("value->test", reg_id_["value"], test_id_, ConnectionKind::recognizer,
          std::make_shared<SynapseMatrix>(build_recognizer(regs, {"false"}, 3, {kFalse}, g.recognizer_fill)));
  {
    Wiring w(3, 3);
    w.add(kTestOn, kTestOn, 1.0F);
    w.add(kTestOn, kTrue, 1.0F);
    w.add(kFalse, kTrue, -2.0F);
    connect("test->test", test_id_, test_id_, ConnectionKind::per_neuron, w.build());
  }
  topo.add_control({"opcode-eq.inhibit", ControlKind::inhibit, eq, NeuronRef{test_id_, kFalse}});
  topo.add_control({"opcode-neq.inhibit", ControlKind::inhibit, neq, NeuronRef{test_id_, kTrue}});

  // control lines and their gate neurons
  std::vector<std::pair<ControlId, bool>> gated;  // line, normally on
  for (const auto& rl : sb_.relays) gated.emplace_back(rl.inhibit, true);
  for (auto c : sb_.clear_lines) gated.emplace_back(c, false);
  for (auto id : {code_c, alloc_c, cons_c, hash}) {
    const auto& name = topo.cluster(id).name;
    gated.emplace_back(topo.add_control({name + ".inhibit", ControlKind::inhibit, id, std::nullopt}), true);
    if (id == code_c) continue;
    gated.emplace_back(topo.add_control({name + ".bind", ControlKind::bind, id, std::nullopt}), false);
    gated.emplace_back(topo.add_control({name + ".unbind", ControlKind::unbind, id, std::nullopt}), false);
  }
  const std::size_t control_size = gated.size() + 1;
  control_id_ = topo.add_cluster({"control", control_size, ClusterKind::panel, g.panel_leak});
  Wiring control_wiring(control_size, control_size);
  control_wiring.add(kControlOn, kControlOn, 1.0F);
  always_on_gates_.clear();
  for (std::size_t k = 0; k < gated.size(); ++k) {
    const auto neuron = static_cast<NeuronIndex>(k + 1);
    const auto [line, on] = gated[k];
    gate_[topo.control(line).name] = neuron;
    topo.set_driver(line, {control_id_, neuron});
    if (on) {
      control_wiring.add(kControlOn, neuron, 1.0F);
      always_on_gates_.push_back(neuron);
    }
  }
  connect("control->control", control_id_, control_id_, ConnectionKind::per_neuron, control_wiring.build());

  // micro panel: boot chain, then recognizer, barrier and chain per opcode
  micro_neurons_.clear();
  dispatch_.clear();
  std::vector<std::pair<NeuronIndex, std::size_t>> chains;
  boot_ = 0;
  chains.emplace_back(boot_, compile(micro_.boot(), micro_neurons_));
  longest_sequence_ = 0;
  for (const auto& [op, seq] : micro_.sequences()) {
    Dispatcher d{op, 0, 0, 0};
    d.recognizer = static_cast<NeuronIndex>(micro_neurons_.size());
    micro_neurons_.emplace_back();
    d.barrier = static_cast<NeuronIndex>(micro_neurons_.size());
    micro_neurons_.emplace_back();
    d.first = static_cast<NeuronIndex>(micro_neurons_.size());
    const auto len = compile(seq, micro_neurons_);
    longest_sequence_ = std::max(longest_sequence_, len);
    chains.emplace_back(d.first, len);
    dispatch_.push_back(d);
  }
  micro_size_ = micro_neurons_.size();
  micro_id_ = topo.add_cluster({"micro", micro_size_, ClusterKind::panel, g.panel_leak});
  {
    Wiring w(micro_size_, micro_size_);
    for (const auto& [first, len] : chains)
      for (std::size_t k = 0; k + 1 < len; ++k)
        w.add(static_cast<NeuronIndex>(first + k), static_cast<NeuronIndex>(first + k + 1), 1.0F);
    for (const auto& d : dispatch_) {
      w.add(d.recognizer, d.first, 1.0F);
      w.add(d.recognizer, d.barrier, 1.0F);
      w.add(d.barrier, d.first, -2.0F);
    }
    connect("micro->micro", micro_id_, micro_id_, ConnectionKind::per_neuron, w.build());
  }
  {
    std::vector<std::string> watched;
    std::vector<NeuronIndex> neurons;
    for (const auto& d : dispatch_) {
      watched.push_back(d.op.name());
      neurons.push_back(d.recognizer);
    }
    connect("opcode->micro", opcode_id_, micro_id_, ConnectionKind::recognizer,
            std::make_shared<SynapseMatrix>(build_recognizer(ops, watched, micro_size_, neurons, g.recognizer_fill)));
  }
  {
    Wiring w(micro_size_, control_size);
    for (std::size_t k = 0; k < micro_neurons_.size(); ++k)
      for (const auto& [gate, weight] : micro_neurons_[k].gates) w.add(static_cast<NeuronIndex>(k), gate, weight);
    connect("micro->control", micro_id_, control_id_, ConnectionKind::per_neuron, w.build());
  }

  net_ = std::make_unique<Network>(std::move(topo));
}

std::size_t SpikingMachine::compile(const std::vector<MicroOp>& ops, std::vector<MicroNeuron>& out) {
  const auto start = out.size();
  auto line = [&](const std::string& name) {
    auto it = gate_.find(name);
    if (it == gate_.end()) throw Error("no control line '" + name + "'");
    return it->second;
  };
  auto push = [&](std::vector<std::pair<NeuronIndex, Weight>> gates, MicroNeuron::Hook hook = MicroNeuron::Hook::none) {
    out.push_back({std::move(gates), hook});
  };
  auto clears = [&](const std::vector<std::string>& regs) {
    std::vector<std::pair<NeuronIndex, Weight>> v;
    for (const auto& r : regs) v.emplace_back(line(r + ".clear"), kPulse);
    return v;
  };
  for (const auto& op : ops) {
    switch (op.kind) {
      case MicroKind::inhibit_fetch: push({{line("code-c.inhibit"), kForce}}); break;
      case MicroKind::transfer: {
        const auto& path = sb_.path(sb_.index_of(op.src), sb_.index_of(op.dst));
        for (std::size_t t = 0; t < timing_.clear; ++t) push(clears({op.dst}));
        std::vector<std::pair<NeuronIndex, Weight>> release;
        for (auto r : path) release.emplace_back(line(sb_.relays[r].name + ".inhibit"), kRelease);
        for (std::size_t t = 0; t < timing_.open_time(path.size()); ++t) push(release);
        break;
      }
      case MicroKind::clear:
        for (std::size_t t = 0; t < timing_.clear; ++t) push(clears(op.regs));
        break;
      case MicroKind::gate: {
        const auto& unit = memory_unit(op.unit);
        const auto release = line(unit.cluster + ".inhibit");
        if (op.mode == GateMode::recall) {
          for (std::size_t t = 0; t < timing_.clear; ++t) push(clears(op.regs));
          for (std::size_t t = 0; t < timing_.recall; ++t) push({{release, kRelease}});
        } else {
          const auto pulse = line(unit.cluster + (op.mode == GateMode::bind ? ".bind" : ".unbind"));
          for (std::size_t t = 0; t < timing_.bind; ++t) {
            if (t == 2)
              push({{release, kRelease}, {pulse, kPulse}});
            else
              push({{release, kRelease}});
          }
        }
        break;
      }
      case MicroKind::read:
        for (std::size_t t = 0; t < timing_.clear; ++t) push(clears(op.regs));
        for (std::size_t t = 0; t < timing_.read; ++t)
          push({}, t == 0 ? MicroNeuron::Hook::read_start : MicroNeuron::Hook::read_drive);
        break;
      case MicroKind::write: push({}, MicroNeuron::Hook::write); break;
      case MicroKind::exit: push({}, MicroNeuron::Hook::exit); break;
      case MicroKind::fetch: {
        for (std::size_t t = 0; t < timing_.clear; ++t) push(clears(op.regs));
        for (std::size_t t = 0; t < timing_.fetch; ++t) push({{line("code-c.inhibit"), kRelease}});
        break;
      }
    }
  }
  return out.size() - start;
}

void SpikingMachine::bind_alloc(const std::string& head, const std::string& next) {
  const auto& s = trained_->registers;
  memories_[memory_of_.at("alloc-c->alloc2")]->bind(s.at(head), s.at(next));
}

void SpikingMachine::bind_table(const std::string& table, const std::string& key, const std::string& value) {
  const auto& s = trained_->registers;
  const auto h = hash_activate(hash_spec_, s.at(table).active(), s.at(key).active());
  memories_[memory_of_.at("hash->value")]->bind(h, s.at(value).active());
}

void SpikingMachine::reset_state() {
  net_->reset();
  for (auto& m : memories_) {
    auto& w = *m->synapses();
    for (std::size_t slot = 0; slot < w.synapse_count(); ++slot) w.set_weight_at(slot, 0.0F);
    w.touch();
    m = std::make_unique<OneShotMemory>(m->synapses(), m->nominal());
  }
  std::string head = "false";
  for (std::size_t k = 0; k < geo_.free_pool; ++k) {
    const auto f = "f" + std::to_string(k);
    bind_alloc(f, head);
    head = f;
  }
  for (const auto& b : standard_prelude(geo_.bind_false != 0)) bind_table(b.table, b.key, b.value);

  std::vector<NeuronIndex> control{kControlOn};
  control.insert(control.end(), always_on_gates_.begin(), always_on_gates_.end());
  net_->preload(control_id_, control);
  const std::vector<NeuronIndex> test{kTestOn};
  net_->preload(test_id_, test);
  set_reg("code", program_->entry);
  set_reg("alloc", head);
  set_reg("stack", "false");
  set_reg("cont", "false");
  set_reg("value", "false");
}

std::optional<std::string> SpikingMachine::reg(const std::string& name) const {
  const auto& s = net_->spikes(reg_id_.at(name));
  if (s.empty()) return std::nullopt;
  if (auto n = trained_->registers.name_of(s)) return n;
  return std::string("?");
}

void SpikingMachine::set_reg(const std::string& name, const std::optional<std::string>& symbol) {
  const auto id = reg_id_.at(name);
  if (symbol)
    net_->preload(id, trained_->registers.at(*symbol).active());
  else
    net_->clear(id);
}

void SpikingMachine::check_registers(const std::string& where) {
  std::string bad;
  for (const auto& r : register_names()) {
    const auto& s = net_->spikes(reg_id_.at(r));
    if (s.empty() || trained_->registers.name_of(s)) continue;
    const auto [name, j] = trained_->registers.nearest(s);
    std::ostringstream os;
    os << ' ' << r << "~" << name << '(' << s.size() << " spikes, jaccard " << j << ')';
    bad += os.str();
  }
  if (!bad.empty())
    throw ConvergenceError("unstable register at tick " + std::to_string(net_->tick()) + " before " + where + ":" + bad);
}

RunResult SpikingMachine::run(const std::vector<std::string>& input, std::uint64_t max_cycles) {
  reset_state();
  const std::vector<NeuronIndex> boot{boot_};
  net_->preload(micro_id_, boot);

  std::map<NeuronIndex, std::size_t> recognizer_of;
  for (std::size_t k = 0; k < dispatch_.size(); ++k) recognizer_of[dispatch_[k].recognizer] = k;
  const auto reserved = reg_id_.at("reserved");

  RunResult out;
  SpikeSet prev;
  std::size_t in_pos = 0;
  std::optional<std::string> reading;
  std::uint64_t last_activity = 0;
  const std::uint64_t stall_limit = 32;
  std::vector<Injection> inj;

  for (;;) {
    const SpikeSet now = net_->spikes(micro_id_);
    if (!now.empty()) last_activity = net_->tick();
    bool stop = false;
    for (NeuronIndex n : now) {
      if (auto it = recognizer_of.find(n); it != recognizer_of.end()) {
        if (!std::binary_search(prev.begin(), prev.end(), n)) {
          const auto& op = dispatch_[it->second].op;
          check_registers(op.name());
          if (trace_) {
            std::map<std::string, std::optional<std::string>> regs;
            for (const auto& r : register_names()) regs[r] = reg(r);
            *trace_ << register_line(op.name(), regs) << '\n';
          }
          ++out.instructions;
          ++out.histogram[op.name()];
        }
        continue;
      }
      switch (micro_neurons_[n].hook) {
        case MicroNeuron::Hook::read_start:
          if (in_pos >= input.size()) throw Error("read past the end of the input channel");
          reading = input[in_pos++];
          break;
        case MicroNeuron::Hook::write: {
          const auto& s = net_->spikes(reserved);
          if (s.empty()) throw Error("write with an empty reserved register");
          if (auto name = trained_->registers.name_of(s)) {
            out.output.push_back(*name);
          } else {
            const auto [name2, j] = trained_->registers.nearest(s);
            if (j < 0.5) throw ConvergenceError("reserved register unreadable at write");
            warnings_.push_back("inexact write decoded as " + name2);
            out.output.push_back(name2);
          }
          break;
        }
        case MicroNeuron::Hook::exit: stop = true; break;
        default: break;
      }
    }
    if (stop) {
      out.exited = true;
      break;
    }
    inj.clear();
    if (reading)
      for (NeuronIndex n : prev) {
        const auto h = n < micro_neurons_.size() ? micro_neurons_[n].hook : MicroNeuron::Hook::none;
        if (h == MicroNeuron::Hook::read_start || h == MicroNeuron::Hook::read_drive) {
          inj.push_back(Injection::uniform(reserved, trained_->registers.at(*reading).active(), geo_.read_drive));
          break;
        }
      }
    net_->advance(inj);
    prev = now;
    if (net_->tick() > max_cycles) throw ConvergenceError("cycle budget of " + std::to_string(max_cycles) + " exceeded");
    if (net_->tick() - last_activity > stall_limit)
      throw ConvergenceError("machine stalled at tick " + std::to_string(net_->tick()) + " (no opcode dispatched)");
  }
  out.cycles = net_->tick();
  out.text = output_text(out.output);
  return out;
}

TestOutcome SpikingMachine::test_circuit(const std::optional<std::string>& value, std::size_t ticks) {
  reset_state();
  set_reg("value", value);
  net_->run(ticks);
  const auto& s = net_->spikes(test_id_);
  const bool f = std::binary_search(s.begin(), s.end(), kFalse);
  const bool t = std::binary_search(s.begin(), s.end(), kTrue);
  if (f && t) return TestOutcome::both;
  if (f) return TestOutcome::false_neuron;
  if (t) return TestOutcome::true_neuron;
  return TestOutcome::none;
}

std::optional<std::string> SpikingMachine::dispatch(const std::string& line, const std::optional<std::string>& value) {
  reset_state();
  set_reg("code", line);
  set_reg("value", value);
  net_->run(4);
  const std::vector<NeuronIndex> boot{boot_};
  net_->preload(micro_id_, boot);
  for (std::size_t t = 0; t < timing_.clear + timing_.fetch + 16; ++t) {
    net_->advance();
    const auto& s = net_->spikes(micro_id_);
    for (const auto& d : dispatch_)
      if (std::binary_search(s.begin(), s.end(), d.recognizer)) return d.op.name();
  }
  return std::nullopt;
}

std::unique_ptr<SpikingMachine> init_machine(const TrainedMachine& trained, const LinkedProgram& program) {
  return std::make_unique<SpikingMachine>(trained, program);
}

}  // namespace primevm
