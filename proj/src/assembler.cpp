#include "primevm/assembler.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <sstream>

namespace primevm {

const std::vector<std::string>& register_names() {
  static const std::vector<std::string> names = {"reserved", "r1",   "r2",    "table", "key",   "value",
                                                 "code",     "code2", "cont", "arg",   "alloc", "alloc2",
                                                 "cons",     "car",  "cdr",   "stack"};
  return names;
}

bool is_register(const std::string& name) {
  const auto& n = register_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

namespace {

const std::vector<std::pair<const char*, OpKind>>& plain_opcodes() {
  static const std::vector<std::pair<const char*, OpKind>> ops = {
      {"alloc-recall", OpKind::alloc_recall}, {"alloc-bind", OpKind::alloc_bind},
      {"alloc-unbind", OpKind::alloc_unbind}, {"cons-recall", OpKind::cons_recall},
      {"cons-bind", OpKind::cons_bind},       {"cons-unbind", OpKind::cons_unbind},
      {"table-recall", OpKind::table_recall}, {"table-bind", OpKind::table_bind},
      {"table-unbind", OpKind::table_unbind}, {"read", OpKind::read},
      {"write", OpKind::write},               {"nop", OpKind::nop},
      {"exit", OpKind::exit}};
  return ops;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'; }

bool is_ident(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), ident_char);
}

// Splits on commas at parenthesis depth 0, skipping quoted characters.
std::vector<std::pair<std::string, std::size_t>> split_top(const std::string& s, std::size_t offset, std::size_t line) {
  std::vector<std::pair<std::string, std::size_t>> parts;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '\'' || c == '"') {
      const auto close = s.find(c, i + 1);
      if (close == std::string::npos) throw ParseError(line, offset + i + 1, "unterminated quote");
      i = close;
    } else if (c == '(') {
      ++depth;
    } else if (c == ')') {
      if (--depth < 0) throw ParseError(line, offset + i + 1, "unbalanced ')'");
    } else if (c == ',' && depth == 0) {
      parts.emplace_back(s.substr(start, i - start), offset + start);
      start = i + 1;
    }
  }
  if (depth != 0) throw ParseError(line, offset + s.size(), "unbalanced '('");
  parts.emplace_back(s.substr(start), offset + start);
  return parts;
}

// Symbol literal: bare identifier, or a quoted single character.
std::string parse_literal(const std::string& raw, std::size_t line, std::size_t col) {
  const auto t = trim(raw);
  if (t.size() == 3 && (t[0] == '\'' || t[0] == '"') && t[2] == t[0]) return char_symbol(t[1]);
  if (is_ident(t)) return t;
  throw ParseError(line, col, "bad symbol literal '" + t + "'");
}

const std::set<std::string>& macro_names() {
  static const std::set<std::string> names = {"alloc_into", "dealloc_from", "push", "pop", "call", "ret", "if_true"};
  return names;
}

std::string strip_comment(const std::string& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\'' || s[i] == '"') {
      const auto close = s.find(s[i], i + 1);
      if (close == std::string::npos) return s;
      i = close;
    } else if (s[i] == ';') {
      return s.substr(0, i);
    }
  }
  return s;
}

// Body of one line (labels removed): instruction tuple or macro call.
std::variant<Instruction, MacroCall> parse_body(const std::string& text, std::size_t col, std::size_t line) {
  const auto body = trim(text);
  const auto lead = col + text.find_first_not_of(" \t");
  if (body.front() == '(') {
    if (body.back() != ')') throw ParseError(line, lead + body.size(), "expected ')' at end of instruction");
    auto parts = split_top(body.substr(1, body.size() - 2), lead + 1, line);
    Instruction ins;
    std::vector<Opcode> ops;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      const auto& [raw, at] = parts[k];
      const auto p = trim(raw);
      if (p.empty()) throw ParseError(line, at, "empty field in instruction");
      const auto pos = at + raw.find_first_not_of(" \t");  // column of the field's first character
      const auto eq = p.find('=');
      if (eq != std::string::npos && p.find('(') == std::string::npos) {
        if (trim(p.substr(0, eq)) != "arg") throw ParseError(line, pos, "only 'arg = value' may be assigned");
        if (k + 1 != parts.size()) throw ParseError(line, pos, "arg must be the last field");
        ins.arg = parse_literal(p.substr(eq + 1), line, pos + eq + 1);
        continue;
      }
      try {
        ops.push_back(parse_opcode(p));
      } catch (const ParseError& e) {
        throw ParseError(line, pos, e.what());
      }
    }
    if (ops.empty() || ops.size() > 2) throw ParseError(line, lead + 1, "an instruction takes one or two opcodes");
    ins.eq = ops.front();
    ins.neq = ops.back();
    return ins;
  }
  const auto open = body.find('(');
  MacroCall call;
  call.name = trim(body.substr(0, open));
  if (!macro_names().count(call.name)) throw ParseError(line, lead + 1, "unknown macro or opcode '" + call.name + "'");
  if (open != std::string::npos) {
    if (body.back() != ')') throw ParseError(line, lead + body.size(), "expected ')' after macro arguments");
    for (auto& [raw, at] : split_top(body.substr(open + 1, body.size() - open - 2), lead + open + 1, line))
      call.args.push_back(trim(raw));
  }
  return call;
}

}  // namespace

std::string Opcode::name() const {
  if (kind == OpKind::mov) return "mov(" + src + "," + dst + ")";
  for (const auto& [n, k] : plain_opcodes())
    if (k == kind) return n;
  return "?";
}

ParseError::ParseError(std::size_t line, std::size_t column, const std::string& what)
    : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

Opcode parse_opcode(const std::string& text) {
  const auto t = trim(text);
  for (const auto& [n, k] : plain_opcodes())
    if (t == n) return {k, "", ""};
  if (t.rfind("mov", 0) == 0) {
    const auto open = t.find('(');
    const auto comma = t.find(',');
    if (open != std::string::npos && trim(t.substr(3, open - 3)).empty() && comma != std::string::npos &&
        t.back() == ')') {
      Opcode op{OpKind::mov, trim(t.substr(open + 1, comma - open - 1)), trim(t.substr(comma + 1, t.size() - comma - 2))};
      if (!is_register(op.src)) throw ParseError(0, 0, "unknown register '" + op.src + "'");
      if (!is_register(op.dst)) throw ParseError(0, 0, "unknown register '" + op.dst + "'");
      if (op.src == op.dst) throw ParseError(0, 0, "mov needs two distinct registers");
      return op;
    }
  }
  throw ParseError(0, 0, "unknown opcode '" + t + "'");
}

const MovTable& default_mov_table() {
  static const MovTable table = [] {
    MovTable t;
    const char* pairs[][2] = {
        // sequence library
        {"alloc", "cons"}, {"alloc", "r1"}, {"alloc2", "alloc"}, {"alloc", "alloc2"}, {"cons", "alloc"}, {"reserved", "car"},
        {"stack", "cdr"}, {"cons", "stack"}, {"stack", "cons"}, {"car", "reserved"}, {"cdr", "stack"},
        {"cont", "car"}, {"car", "cont"}, {"arg", "cont"}, {"arg", "code"}, {"cont", "code"},
        // test programs
        {"reserved", "value"}, {"reserved", "key"}, {"arg", "table"}, {"arg", "key"}, {"arg", "value"},
        {"arg", "stack"}, {"arg", "reserved"}, {"arg", "r2"}, {"stack", "r1"}, {"stack", "r2"}, {"stack", "value"},
        {"r1", "value"}, {"r2", "value"}, {"r1", "cons"}, {"r2", "cons"}, {"r1", "table"}, {"r2", "table"},
        {"r2", "key"}, {"r2", "reserved"}, {"car", "table"}, {"car", "key"}, {"cdr", "r1"}, {"cdr", "r2"},
        {"value", "key"}, {"value", "table"}, {"value", "reserved"}, {"value", "r2"}, {"value", "car"},
    };
    for (const auto& p : pairs) t.insert({p[0], p[1]});
    return t;
  }();
  return table;
}

AsmProgram assemble(const std::string& text) {
  AsmProgram prog;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  std::vector<std::string> pending;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = strip_comment(raw);
    std::size_t col = 0;
    // leading labels
    for (;;) {
      const auto first = line.find_first_not_of(" \t", col);
      if (first == std::string::npos) break;
      std::size_t end = first;
      while (end < line.size() && ident_char(line[end])) ++end;
      if (end > first && end < line.size() && line[end] == ':') {
        const auto label = line.substr(first, end - first);
        if (label.front() == '.') throw ParseError(lineno, first + 1, "labels starting with '.' are reserved");
        pending.push_back(label);
        col = end + 1;
        continue;
      }
      break;
    }
    const auto rest = line.substr(col);
    if (trim(rest).empty()) continue;
    AsmLine al;
    al.labels = std::move(pending);
    pending.clear();
    al.source_line = lineno;
    al.body = parse_body(rest, col + 1, lineno);
    prog.lines.push_back(std::move(al));
  }
  if (!pending.empty()) throw ParseError(lineno, 1, "label '" + pending.front() + "' has no instruction");
  return prog;
}

namespace {

Instruction single(const std::string& op, std::optional<std::string> arg = std::nullopt) {
  const auto o = parse_opcode(op);
  return {o, o, std::move(arg)};
}

struct Expander {
  std::size_t counter = 0;
  std::vector<AsmLine> out;

  void emit(std::vector<std::string>& labels, std::size_t src, Instruction ins) {
    out.push_back({std::move(labels), std::move(ins), src});
    labels.clear();
  }

  void line(const AsmLine& l) {
    auto labels = l.labels;
    if (std::holds_alternative<Instruction>(l.body)) {
      emit(labels, l.source_line, std::get<Instruction>(l.body));
      return;
    }
    macro(std::get<MacroCall>(l.body), labels, l.source_line);
    if (!labels.empty()) throw ParseError(l.source_line, 1, "macro produced no instruction");
  }

  void need(const MacroCall& m, std::size_t n, std::size_t src) {
    if (m.args.size() != n)
      throw ParseError(src, 1, m.name + " takes " + std::to_string(n) + " argument" + (n == 1 ? "" : "s"));
  }

  std::string reg(const MacroCall& m, std::size_t src) {
    need(m, 1, src);
    if (!is_register(m.args[0])) throw ParseError(src, 1, "unknown register '" + m.args[0] + "'");
    return m.args[0];
  }

  void macro(const MacroCall& m, std::vector<std::string>& labels, std::size_t src) {
    if (m.name == "alloc_into") {
      const auto r = reg(m, src);
      emit(labels, src, single("alloc-recall"));
      emit(labels, src, single("alloc-unbind"));
      emit(labels, src, single("mov(alloc," + r + ")"));
      emit(labels, src, single("mov(alloc2,alloc)"));
    } else if (m.name == "dealloc_from") {
      const auto r = reg(m, src);
      emit(labels, src, single("mov(alloc,alloc2)"));
      emit(labels, src, single("mov(" + r + ",alloc)"));
      emit(labels, src, single("alloc-bind"));
    } else if (m.name == "push") {
      const auto r = reg(m, src);
      macro({"alloc_into", {"cons"}}, labels, src);
      emit(labels, src, single("mov(" + r + ",car)"));
      emit(labels, src, single("mov(stack,cdr)"));
      emit(labels, src, single("cons-bind"));
      emit(labels, src, single("mov(cons,stack)"));
    } else if (m.name == "pop") {
      const auto r = reg(m, src);
      emit(labels, src, single("mov(stack,cons)"));
      emit(labels, src, single("cons-recall"));
      emit(labels, src, single("cons-unbind"));
      emit(labels, src, single("mov(car," + r + ")"));
      emit(labels, src, single("mov(cdr,stack)"));
      macro({"dealloc_from", {"cons"}}, labels, src);
    } else if (m.name == "call") {
      need(m, 1, src);
      const auto back = ".ret" + std::to_string(++counter);
      macro({"push", {"cont"}}, labels, src);
      emit(labels, src, single("mov(arg,cont)", back));
      emit(labels, src, single("mov(arg,code)", m.args[0]));
      labels.push_back(back);
      macro({"pop", {"cont"}}, labels, src);
    } else if (m.name == "ret") {
      need(m, 0, src);
      emit(labels, src, single("mov(cont,code)"));
    } else if (m.name == "if_true") {
      need(m, 1, src);
      const auto skip = ".skip" + std::to_string(++counter);
      emit(labels, src, {parse_opcode("nop"), parse_opcode("mov(arg,code)"), skip});
      auto action = m.args[0];
      if (!action.empty() && action.front() != '(' && action.find('(') == std::string::npos && !macro_names().count(action))
        action = "(" + action + ")";
      const auto sub = assemble(action);
      if (sub.lines.size() != 1) throw ParseError(src, 1, "if_true takes one action");
      AsmLine inner = sub.lines.front();
      inner.source_line = src;
      inner.labels = std::move(labels);
      labels.clear();
      line(inner);
      labels.push_back(skip);
      emit(labels, src, single("nop"));
    } else {
      throw ParseError(src, 1, "unknown macro '" + m.name + "'");
    }
  }
};

bool needs_label(const Opcode& op) { return op.kind == OpKind::mov && op.src == "arg" && (op.dst == "code" || op.dst == "cont"); }

}  // namespace

AsmProgram expand_macros(const AsmProgram& program) {
  Expander ex;
  for (const auto& l : program.lines) ex.line(l);
  return {std::move(ex.out)};
}

const LinkedInstruction& LinkedProgram::at(const std::string& symbol) const {
  for (const auto& c : code)
    if (c.symbol == symbol) return c;
  throw Error("no instruction '" + symbol + "'");
}

std::set<Opcode> LinkedProgram::opcodes() const {
  std::set<Opcode> ops;
  for (const auto& c : code) {
    ops.insert(c.eq);
    ops.insert(c.neq);
  }
  return ops;
}

std::string LinkedProgram::dump() const {
  std::ostringstream os;
  for (const auto& c : code) {
    os << c.symbol;
    for (const auto& l : c.labels) os << ' ' << l << ':';
    os << " (" << c.eq.name() << ", " << c.neq.name();
    if (c.arg) os << ", arg = " << *c.arg;
    os << ") next " << c.next << '\n';
  }
  return os.str();
}

LinkedProgram link(const AsmProgram& program, std::size_t symbol_budget, const MovTable& movs) {
  const auto flat = expand_macros(program);
  if (flat.lines.size() > symbol_budget)
    throw Error("program needs " + std::to_string(flat.lines.size()) + " code symbols, budget is " +
                std::to_string(symbol_budget));
  std::map<std::string, std::size_t> label_at;
  for (std::size_t k = 0; k < flat.lines.size(); ++k)
    for (const auto& l : flat.lines[k].labels)
      if (!label_at.emplace(l, k).second)
        throw ParseError(flat.lines[k].source_line, 1, "duplicate label '" + l + "'");

  LinkedProgram out;
  auto sym = [](std::size_t k) { return "@" + std::to_string(k); };
  for (std::size_t k = 0; k < flat.lines.size(); ++k) {
    const auto& line = flat.lines[k];
    const auto& ins = std::get<Instruction>(line.body);
    for (const auto* op : {&ins.eq, &ins.neq})
      if (op->kind == OpKind::mov && !movs.count({op->src, op->dst}))
        throw ParseError(line.source_line, 1, op->name() + " is not wired in this machine");
    LinkedInstruction li{sym(k), ins.eq, ins.neq, std::nullopt, sym(k + 1 < flat.lines.size() ? k + 1 : k), line.labels};
    if (ins.arg) {
      auto it = label_at.find(*ins.arg);
      if (it != label_at.end()) {
        li.arg = sym(it->second);
      } else if (needs_label(ins.eq) || needs_label(ins.neq)) {
        throw ParseError(line.source_line, 1, "undefined label '" + *ins.arg + "'");
      } else {
        li.arg = *ins.arg;
        out.data_symbols.insert(*ins.arg);
      }
    } else if (ins.eq.uses_arg() || ins.neq.uses_arg()) {
      out.warnings.push_back("line " + std::to_string(line.source_line) + ": opcode reads arg but none is given");
    }
    out.code.push_back(std::move(li));
  }
  if (!out.code.empty()) out.entry = out.code.front().symbol;

  // exit must be reachable
  std::set<std::string> seen;
  std::vector<std::string> work;
  if (!out.entry.empty()) work.push_back(out.entry);
  bool exits = false;
  std::map<std::string, std::size_t> index;
  for (std::size_t k = 0; k < out.code.size(); ++k) index[out.code[k].symbol] = k;
  while (!work.empty()) {
    auto s = work.back();
    work.pop_back();
    if (!seen.insert(s).second) continue;
    const auto& c = out.code[index[s]];
    if (c.eq.kind == OpKind::exit || c.neq.kind == OpKind::exit) exits = true;
    work.push_back(c.next);
    if (c.arg && index.count(*c.arg)) work.push_back(*c.arg);
  }
  if (!out.code.empty() && !exits) out.warnings.push_back("no exit is reachable from the entry");
  return out;
}

std::string disassemble(const LinkedProgram& program) {
  std::ostringstream os;
  for (const auto& c : program.code) {
    os << 'L' << c.symbol.substr(1) << ": (" << c.eq.name();
    if (!(c.neq == c.eq) || c.arg) os << ", " << c.neq.name();
    if (c.arg) {
      if (!c.arg->empty() && c.arg->front() == '@')
        os << ", arg = L" << c.arg->substr(1);
      else
        os << ", arg = " << *c.arg;
    }
    os << ")\n";
  }
  return os.str();
}

std::string char_symbol(char c) {
  if (c >= '0' && c <= '9') return std::string(1, c);
  return "sep";
}

std::string symbol_text(const std::string& symbol) {
  if (symbol.size() == 1 && symbol[0] >= '0' && symbol[0] <= '9') return symbol;
  if (symbol == "sep") return ":";
  return "[" + symbol + "]";
}

}  // namespace primevm
