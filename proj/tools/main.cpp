#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "primevm/analysis.hpp"
#include "primevm/computer.hpp"

using namespace primevm;

namespace {

enum Exit { ok = 0, mismatch = 1, usage = 2, convergence = 3 };

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string cache = ".primevm-cache";

  Geometry geometry() const {
    Config c = config.empty() ? Config{} : Config::load(config);
    auto g = Geometry::from_config(c);
    if (seed_set) g.seed = seed;
    return g;
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "geometry config file")->check(CLI::ExistingFile);
  cmd->add_option_function<std::uint64_t>("--seed", [&c](std::uint64_t s) { c.seed = s; c.seed_set = true; }, "master seed");
  cmd->add_option("--cache", c.cache, "training cache directory");
}

struct RunArgs {
  std::string program;
  std::string input;
  std::string expect;
  bool has_expect = false;
  std::string backend = "spiking";
  std::uint64_t max_cycles = 2000000;
  bool trace = false;
  std::string out;
};

int cmd_run(const Common& c, const RunArgs& a) {
  const auto g = c.geometry();
  const auto lp = link(assemble(read_file(a.program)), g.code_lines);
  for (const auto& w : lp.warnings) std::cerr << "warning: " << w << '\n';
  std::ofstream out_file;
  std::ostream* out = &std::cout;
  if (!a.out.empty()) {
    out_file.open(a.out);
    if (!out_file) throw Error("cannot write " + a.out);
    out = &out_file;
  }
  const auto input = input_symbols(a.input);
  std::optional<RunResult> fr, sr;
  if (a.backend == "functional" || a.backend == "both") {
    FunctionalMachine fm(lp, g);
    if (a.trace) fm.set_trace(&std::cerr);
    fr = fm.run(input, a.max_cycles);
    *out << "functional: \"" << fr->text << "\" cycles " << fr->cycles << " instructions " << fr->instructions
         << " seed " << g.seed << '\n';
  }
  if (a.backend == "spiking" || a.backend == "both") {
    const auto tm = cached_training(g, c.cache);
    auto m = init_machine(tm, lp);
    if (a.trace) m->set_trace(&std::cerr);
    for (const auto& w : m->warnings()) std::cerr << "warning: " << w << '\n';
    sr = m->run(input, a.max_cycles);
    *out << "spiking: \"" << sr->text << "\" cycles " << sr->cycles << " instructions " << sr->instructions
         << " seed " << g.seed << '\n';
  }
  int status = Exit::ok;
  if (fr && sr && fr->output != sr->output) {
    *out << "backends disagree\n";
    status = Exit::mismatch;
  }
  if (a.has_expect)
    for (const auto* r : {fr ? &*fr : nullptr, sr ? &*sr : nullptr})
      if (r && r->text != a.expect) {
        *out << "expected \"" << a.expect << "\"\n";
        status = Exit::mismatch;
        break;
      }
  return status;
}

struct BenchArgs {
  std::vector<std::size_t> loads;
  std::size_t seeds = 1;
  std::size_t probes = 200;
  double gamma = 5.0;
};

int cmd_bench(const Common& c, const BenchArgs& a) {
  const auto g = c.geometry();
  const auto tm = cached_training(g, c.cache);
  TrainedRegister out{&tm.registers, tm.w, g.alpha, tm.register_report};
  std::cout << "seed,load,m,probes,correct,accuracy,bound\n";
  for (std::size_t s = 0; s < a.seeds; ++s)
    for (auto load : a.loads) {
      const auto m = (load + tm.registers.size() - 1) / tm.registers.size();
      const auto p = measure_capacity(out, g.register_size, g.register_active, g.kappa, g.bound_drive, load,
                                      g.seed + s, a.probes);
      std::cout << g.seed + s << ',' << load << ',' << m << ',' << p.probes << ',' << p.correct << ','
                << p.accuracy() << ',' << desk_bound(g.coverage(), g.coverage(), a.gamma, std::max<std::size_t>(m, 1))
                << '\n';
    }
  return Exit::ok;
}

struct FilterArgs {
  std::size_t l = 100;
  double c = 0.01, epsilon = 0.3, alpha = 0.1, s = 0.25;
  std::size_t steps = 50;
};

int cmd_filter(const Common& c, const FilterArgs& a) {
  const auto r = compare_filtering(filter_setup(a.l, a.c, a.epsilon, a.alpha, a.s), a.steps);
  write_report(std::cout, r);
  std::cout << "seed " << c.geometry().seed << " (unused: the comparison is deterministic)\n";
  return Exit::ok;
}

int cmd_train(const Common& c, const std::string& out_dir) {
  const auto g = c.geometry();
  const auto tm = train_machine(g);
  const auto dir = out_dir.empty() ? (std::filesystem::path(c.cache) / cache_key(g)).string() : out_dir;
  tm.save(dir);
  std::cout << "registers " << tm.registers.size() << " symbols, residual " << tm.register_report.residual
            << "; opcodes " << tm.opcodes.size() << " symbols, residual " << tm.opcode_report.residual << '\n';
  std::cout << "saved to " << dir << " seed " << g.seed << '\n';
  return Exit::ok;
}

int cmd_assemble(const Common& c, const std::string& file) {
  const auto g = c.geometry();
  const auto lp = link(assemble(read_file(file)), g.code_lines);
  for (const auto& w : lp.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << lp.dump() << "; seed " << g.seed << '\n';
  return Exit::ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prime attractor machine"};
  app.require_subcommand(1);
  Common common;

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "run a program");
  add_common(run_cmd, common);
  run_cmd->add_option("program", run.program, "assembly file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--input", run.input, "input characters");
  run_cmd->add_option_function<std::string>("--expect", [&run](const std::string& s) { run.expect = s; run.has_expect = true; },
                                            "expected output");
  run_cmd->add_option("--backend", run.backend)->check(CLI::IsMember({"spiking", "functional", "both"}));
  run_cmd->add_option("--max-cycles", run.max_cycles);
  run_cmd->add_flag("--trace", run.trace, "one line per instruction on stderr");
  run_cmd->add_option("--out", run.out, "write the result here");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench-capacity", "memory recall accuracy against load, as CSV");
  add_common(bench_cmd, common);
  bench_cmd->add_option("--loads", bench.loads, "binding counts")->delimiter(',');
  bench_cmd->add_option("--seeds", bench.seeds);
  bench_cmd->add_option("--probes", bench.probes, "recalls per load (0: all)");
  bench_cmd->add_option("--gamma", bench.gamma);

  FilterArgs filter;
  auto* filter_cmd = app.add_subcommand("compare-filtering", "spiking vs non-spiking noise filtering");
  add_common(filter_cmd, common);
  filter_cmd->add_option("--l", filter.l);
  filter_cmd->add_option("--c", filter.c);
  filter_cmd->add_option("--epsilon", filter.epsilon);
  filter_cmd->add_option("--alpha", filter.alpha);
  filter_cmd->add_option("--s", filter.s);
  filter_cmd->add_option("--steps", filter.steps);

  std::string train_out;
  auto* train_cmd = app.add_subcommand("train", "train symbol spaces and weights");
  add_common(train_cmd, common);
  train_cmd->add_option("--out", train_out, "output directory (default: the cache entry)");

  std::string asm_file;
  auto* asm_cmd = app.add_subcommand("assemble", "print the linked program");
  add_common(asm_cmd, common);
  asm_cmd->add_option("program", asm_file)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : Exit::usage;
  }

  try {
    if (*run_cmd) return cmd_run(common, run);
    if (*bench_cmd) return cmd_bench(common, bench);
    if (*filter_cmd) return cmd_filter(common, filter);
    if (*train_cmd) return cmd_train(common, train_out);
    if (*asm_cmd) return cmd_assemble(common, asm_file);
  } catch (const ConvergenceError& e) {
    std::cerr << "convergence failure: " << e.what() << '\n';
    return Exit::convergence;
  } catch (const ParseError& e) {
    std::cerr << e.what() << '\n';
    return Exit::usage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return Exit::usage;
  }
  return Exit::usage;
}
