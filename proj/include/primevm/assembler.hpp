#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "primevm/pattern.hpp"

namespace primevm {

/// The sixteen registers of the switch box, in machine order.
const std::vector<std::string>& register_names();
bool is_register(const std::string& name);

enum class OpKind {
  alloc_recall,
  alloc_bind,
  alloc_unbind,
  cons_recall,
  cons_bind,
  cons_unbind,
  table_recall,
  table_bind,
  table_unbind,
  read,
  write,
  nop,
  exit,
  mov
};

struct Opcode {
  OpKind kind = OpKind::nop;
  std::string src;  // mov only
  std::string dst;  // mov only

  /// Canonical spelling, also the opcode's symbol name: "nop", "mov(r1,r2)".
  std::string name() const;
  bool uses_arg() const { return kind == OpKind::mov && src == "arg"; }
  friend bool operator==(const Opcode&, const Opcode&) = default;
  friend auto operator<=>(const Opcode& a, const Opcode& b) { return a.name() <=> b.name(); }
};

/// Parses "nop", "table-recall", "mov(a, b)"; throws ParseError.
Opcode parse_opcode(const std::string& text);

/// Register pairs the machine wires a mov opcode for.
using MovTable = std::set<std::pair<std::string, std::string>>;
const MovTable& default_mov_table();

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what);
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

struct Instruction {
  Opcode eq;
  Opcode neq;
  std::optional<std::string> arg;  // symbol literal or label
};

struct MacroCall {
  std::string name;
  std::vector<std::string> args;  // raw text of each argument
};

struct AsmLine {
  std::vector<std::string> labels;
  std::variant<Instruction, MacroCall> body;
  std::size_t source_line = 0;
};

struct AsmProgram {
  std::vector<AsmLine> lines;
};

/// Parses source text. Single-opcode tuples expand to (op, op). Labels are checked
/// after macro expansion (see link).
AsmProgram assemble(const std::string& text);

/// Replaces every macro call by its instruction sequence. Generated labels start with '.'.
AsmProgram expand_macros(const AsmProgram& program);

struct LinkedInstruction {
  std::string symbol;
  Opcode eq;
  Opcode neq;
  std::optional<std::string> arg;  // resolved: a code-line symbol or a data symbol
  std::string next;
  std::vector<std::string> labels;
};

struct LinkedProgram {
  std::vector<LinkedInstruction> code;
  std::string entry;
  std::set<std::string> data_symbols;  // literals used as args
  std::vector<std::string> warnings;

  const LinkedInstruction& at(const std::string& symbol) const;
  std::set<Opcode> opcodes() const;
  /// One line per instruction: symbol, fields, next.
  std::string dump() const;
};

/// Expands macros, gives each line a fresh code symbol "@k", resolves labels and
/// next pointers, and validates movs against `movs`. The last line's next is itself.
LinkedProgram link(const AsmProgram& program, std::size_t symbol_budget, const MovTable& movs = default_mov_table());

/// Source text that re-assembles into an isomorphic program.
std::string disassemble(const LinkedProgram& program);

/// Input character to symbol name and back: digits are "0".."9", anything else is "sep".
std::string char_symbol(char c);
std::string symbol_text(const std::string& symbol);

}  // namespace primevm
