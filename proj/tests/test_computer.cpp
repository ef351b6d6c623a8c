#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include "primevm/computer.hpp"

using namespace primevm;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

LinkedProgram load(const std::string& name) {
  return link(assemble(slurp(std::string(PROGRAM_DIR) + "/" + name + ".sasm")), Geometry{}.code_lines);
}

// Reference semantics of the shipped programs, written directly.
std::string decimal_sum(const std::string& text) {
  const auto plus = text.find('+');
  std::string a = text.substr(0, plus), b = text.substr(plus + 1), out;
  int carry = 0;
  for (std::size_t k = 0; k < std::max(a.size(), b.size()) || carry; ++k) {
    int s = carry;
    if (k < a.size()) s += a[a.size() - 1 - k] - '0';
    if (k < b.size()) s += b[b.size() - 1 - k] - '0';
    out.push_back(static_cast<char>('0' + s % 10));
    carry = s / 10;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::string digit_counts(const std::string& text) {
  int n[10] = {};
  for (char c : text) ++n[c - '0'];
  std::string out;
  for (int d = 0; d < 10; ++d)
    if (n[d]) out += ":" + std::to_string(d) + ":" + std::to_string(n[d]) + ":";
  return out;
}

std::string run_functional(const std::string& program, const std::string& input) {
  const auto lp = load(program);
  FunctionalMachine m(lp, Geometry{});
  return m.run(input_symbols(input), 5000000).text;
}

std::string random_digits(std::mt19937_64& rng, std::size_t len) {
  std::uniform_int_distribution<int> d(0, 9);
  std::string s;
  for (std::size_t k = 0; k < len; ++k) s.push_back(static_cast<char>('0' + d(rng)));
  return s;
}

}  // namespace

TEST(Prelude, Counts) {
  const auto with = standard_prelude(true);
  const auto without = standard_prelude(false);
  EXPECT_EQ(with.size(), 100u + 10u + 100u + 100u);
  // 45 digit pairs sum to ten or more
  EXPECT_EQ(without.size(), 100u + 10u + 100u + 45u);
  std::size_t carries = 0;
  for (const auto& b : without)
    if (b.table == "add-carry") {
      EXPECT_EQ(b.value, "true");
      ++carries;
    }
  EXPECT_EQ(carries, 45u);
}

TEST(Prelude, Symbols) {
  Geometry g;
  const auto s = machine_symbols(g);
  EXPECT_EQ(s.size(), 10u + 100u + 6u + g.free_pool + g.code_lines);
  EXPECT_EQ(std::set<std::string>(s.begin(), s.end()).size(), s.size());
  EXPECT_EQ(input_symbols("1:"), (std::vector<std::string>{"1", "sep", "false"}));
  EXPECT_EQ(output_text({"4", "sep", "2"}), "4:2");
}

TEST(Micro, Sequences) {
  const auto mov = micro_sequence(parse_opcode("mov(r1,value)"));
  ASSERT_EQ(mov.size(), 4u);
  EXPECT_EQ(mov[0].kind, MicroKind::inhibit_fetch);
  EXPECT_EQ(mov[1].kind, MicroKind::transfer);
  EXPECT_EQ(mov[1].src, "code2");
  EXPECT_EQ(mov[2].src, "r1");
  EXPECT_EQ(mov[3].kind, MicroKind::fetch);
  // a jump skips the code2 -> code step
  const auto jump = micro_sequence(parse_opcode("mov(arg,code)"));
  EXPECT_EQ(jump.size(), 3u);
  EXPECT_EQ(micro_sequence(parse_opcode("exit")).size(), 2u);
  const auto rec = micro_sequence(parse_opcode("table-recall"));
  EXPECT_EQ(rec[2].kind, MicroKind::gate);
  EXPECT_EQ(rec[2].regs, memory_unit("table").values);
}

TEST(Functional, ReferenceRuns) {
  EXPECT_EQ(run_functional("echo", "1234"), "1234");
  EXPECT_EQ(run_functional("echo2", "12345"), "54321");
  EXPECT_EQ(run_functional("echo3", "2345678"), "2345678");
  EXPECT_EQ(run_functional("add", "0+1"), "1");
  EXPECT_EQ(run_functional("add", "1969+1973"), "3942");
  EXPECT_EQ(run_functional("add", "99995+5"), "100000");
  EXPECT_EQ(run_functional("add", "21341000009+5"), "21341000014");
  EXPECT_EQ(run_functional("count-digits", "0"), ":0:1:");
  EXPECT_EQ(run_functional("count-digits", "212"), ":1:1::2:2:");
  EXPECT_EQ(run_functional("count-digits", "2214523678703"), ":0:1::1:1::2:3::3:2::4:1::5:1::6:1::7:2::8:1:");
  EXPECT_EQ(run_functional("echo", ""), "");
}

TEST(Functional, RandomInputsAgainstReference) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> len(1, 9);
  for (int k = 0; k < 25; ++k) {
    const auto a = random_digits(rng, len(rng)), b = random_digits(rng, len(rng));
    const auto sum = a + "+" + b;
    EXPECT_EQ(run_functional("add", sum), decimal_sum(sum)) << sum;
    const auto s = random_digits(rng, len(rng));
    EXPECT_EQ(run_functional("echo", s), s);
    EXPECT_EQ(run_functional("echo2", s), std::string(s.rbegin(), s.rend()));
    EXPECT_EQ(run_functional("echo3", s), s);
    EXPECT_EQ(run_functional("count-digits", s), digit_counts(s)) << s;
  }
}

TEST(Functional, CycleModel) {
  const auto lp = load("echo");
  FunctionalMachine m(lp, Geometry{});
  const auto a = m.run(input_symbols("12"), 1000000);
  const auto b = m.run(input_symbols("12"), 1000000);
  EXPECT_EQ(a.cycles, b.cycles);
  EXPECT_EQ(a.instructions, b.instructions);
  std::size_t total = 0;
  for (const auto& [op, n] : a.histogram) total += n;
  EXPECT_EQ(total, a.instructions);
  EXPECT_THROW(m.run(input_symbols("12"), 10), ConvergenceError);
  // the free list is intact after a program that allocates nothing
  EXPECT_EQ(m.free_count(), Geometry{}.free_pool);
}

TEST(Functional, FreeListBalance) {
  const auto lp = load("echo2");
  FunctionalMachine m(lp, Geometry{});
  m.run(input_symbols("123"), 1000000);
  EXPECT_EQ(m.free_count(), Geometry{}.free_pool);
}

TEST(Functional, ReadPastEnd) {
  const auto lp = link(assemble("(read)\n(read)\n(exit)\n"), 10);
  FunctionalMachine m(lp, Geometry{});
  EXPECT_THROW(m.run({"false"}, 100000), Error);
}
