#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "primevm/assembler.hpp"

using namespace primevm;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

const char* kPrograms[] = {"echo", "echo2", "echo3", "add", "count-digits"};

}  // namespace

TEST(Assembler, Opcodes) {
  EXPECT_EQ(parse_opcode("table-recall").kind, OpKind::table_recall);
  const auto m = parse_opcode("mov( r1 ,  value )");
  EXPECT_EQ(m.kind, OpKind::mov);
  EXPECT_EQ(m.name(), "mov(r1,value)");
  EXPECT_THROW(parse_opcode("mov(r1,r1)"), ParseError);
  EXPECT_THROW(parse_opcode("mov(r1,pc)"), ParseError);
  EXPECT_THROW(parse_opcode("jump"), ParseError);
  EXPECT_EQ(register_names().size(), 16u);
}

TEST(Assembler, TuplesAndLabels) {
  const auto p = assemble("a: b: (nop, mov(arg, code), arg = a) ; loop\n   (exit)\n");
  ASSERT_EQ(p.lines.size(), 2u);
  EXPECT_EQ(p.lines[0].labels, (std::vector<std::string>{"a", "b"}));
  const auto& ins = std::get<Instruction>(p.lines[0].body);
  EXPECT_EQ(ins.eq.kind, OpKind::nop);
  EXPECT_EQ(ins.neq.name(), "mov(arg,code)");
  EXPECT_EQ(ins.arg, "a");
  const auto& ex = std::get<Instruction>(p.lines[1].body);
  EXPECT_EQ(ex.eq, ex.neq);
}

TEST(Assembler, CharacterLiterals) {
  const auto p = assemble("(mov(arg, value), arg = '7')\n(mov(arg, value), arg = ':')\n");
  EXPECT_EQ(std::get<Instruction>(p.lines[0].body).arg, "7");
  EXPECT_EQ(std::get<Instruction>(p.lines[1].body).arg, "sep");
  EXPECT_EQ(symbol_text("sep"), ":");
  EXPECT_EQ(symbol_text("4"), "4");
}

TEST(Assembler, ErrorPositions) {
  try {
    assemble("(nop)\n   (bogus)\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
    EXPECT_EQ(e.column(), 5u);
  }
  EXPECT_THROW(assemble("(nop, arg = x, exit)\n"), ParseError);
  EXPECT_THROW(assemble("(nop, exit, read)\n"), ParseError);
  EXPECT_THROW(assemble("dangling:\n"), ParseError);
  EXPECT_THROW(assemble(".x: (nop)\n"), ParseError);
  EXPECT_THROW(assemble("(nop\n"), ParseError);
  EXPECT_THROW(link(assemble("(mov(arg, code), arg = nowhere)\n(exit)\n"), 10), ParseError);
  EXPECT_THROW(link(assemble("a: (nop)\na: (exit)\n"), 10), ParseError);
  EXPECT_THROW(link(assemble("(mov(car, stack))\n(exit)\n"), 10), ParseError);
  EXPECT_THROW(link(assemble("(nop)\n(nop)\n(exit)\n"), 2), Error);
}

TEST(Assembler, MacroLengths) {
  auto count = [](const std::string& src) { return expand_macros(assemble(src)).lines.size(); };
  EXPECT_EQ(count("push(reserved)\n"), 8u);
  EXPECT_EQ(count("pop(reserved)\n"), 8u);
  EXPECT_EQ(count("call(f)\nf: ret\n"), 8u + 2u + 8u + 1u);
  EXPECT_EQ(count("if_true(write)\n"), 3u);
  EXPECT_THROW(count("push(pc)\n"), ParseError);
  EXPECT_THROW(count("ret(x)\n"), ParseError);
}

TEST(Assembler, CallReturnsPastItself) {
  const auto lp = link(assemble("call(f)\n(exit)\nf: ret\n"), 100);
  // push(cont), mov(arg,cont) with the return label, mov(arg,code) to f
  EXPECT_EQ(lp.code[8].eq.name(), "mov(arg,cont)");
  EXPECT_EQ(lp.code[8].arg, "@10");
  EXPECT_EQ(lp.code[9].arg, lp.code[19].symbol);
  EXPECT_EQ(lp.code[18].eq.kind, OpKind::exit);
}

TEST(Assembler, LinkNextPointers) {
  const auto lp = link(assemble("(read)\n(write)\n(exit)\n"), 10);
  ASSERT_EQ(lp.code.size(), 3u);
  EXPECT_EQ(lp.entry, "@0");
  EXPECT_EQ(lp.code[0].next, "@1");
  EXPECT_EQ(lp.code[2].next, "@2");
  EXPECT_TRUE(lp.warnings.empty());
  EXPECT_FALSE(link(assemble("l: (mov(arg, code), arg = l)\n"), 10).warnings.empty());
}

TEST(Assembler, ShippedProgramsLink) {
  for (const auto* name : kPrograms) {
    const auto lp = link(assemble(slurp(std::string(PROGRAM_DIR) + "/" + name + ".sasm")), 200);
    EXPECT_TRUE(lp.warnings.empty()) << name;
    EXPECT_GT(lp.code.size(), 5u) << name;
  }
}

TEST(Assembler, DisassemblyRoundTrip) {
  for (const auto* name : kPrograms) {
    const auto lp = link(assemble(slurp(std::string(PROGRAM_DIR) + "/" + name + ".sasm")), 200);
    const auto back = link(assemble(disassemble(lp)), 200);
    ASSERT_EQ(back.code.size(), lp.code.size()) << name;
    for (std::size_t k = 0; k < lp.code.size(); ++k) {
      EXPECT_EQ(back.code[k].eq, lp.code[k].eq);
      EXPECT_EQ(back.code[k].neq, lp.code[k].neq);
      EXPECT_EQ(back.code[k].arg, lp.code[k].arg);
      EXPECT_EQ(back.code[k].next, lp.code[k].next);
    }
  }
}
