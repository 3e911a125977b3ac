// clustersim: assemble, run, benchmark, sweep and calibrate.
//
// Exit codes: 0 success, 1 input error, 2 simulation trap / divergence /
// deadlock / timeout, 3 verification mismatch or calibration out of band.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clustersim/assembler.h"
#include "clustersim/bench.h"
#include "clustersim/cluster.h"
#include "clustersim/config.h"
#include "clustersim/core.h"
#include "clustersim/energy.h"
#include "clustersim/kernels.h"
#include "clustersim/report.h"

using namespace csim;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kInput = 1, kSim = 2, kMismatch = 3 };

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  try {
    return read_text_file(path);
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
}

// "-" is stdout.
void write_output(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
    std::fflush(stdout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError(fmt::format("cannot write '{}'", path));
  out << text;
  if (!out) throw InputError(fmt::format("error writing '{}'", path));
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

struct Common {
  std::string config_path;
  std::string params_path;

  ClusterConfig config() const {
    if (config_path.empty()) return {};
    ClusterConfig c = cluster_config_from(parse_key_values(read_file(config_path), config_path));
    c.validate();
    return c;
  }
  energy::Params params() const {
    if (params_path.empty()) return energy::default_params();
    return energy::params_from(parse_key_values(read_file(params_path), params_path), energy::default_params());
  }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "cluster configuration file (key=value)");
  cmd->add_option("--energy-params", c.params_path, "energy parameter file (key=value)");
}

// ---- asm ----

struct AsmArgs {
  std::string input;
  std::string output = "-";
  bool disasm = false;
};

std::string listing(const Program& p) {
  std::string out;
  std::map<uint32_t, std::vector<std::string>> labels;
  for (const auto& [name, addr] : p.symbols) labels[addr].push_back(name);
  for (size_t i = 0; i < p.text.size(); ++i) {
    uint32_t pc = p.text_base + 4u * static_cast<uint32_t>(i);
    if (auto it = labels.find(pc); it != labels.end()) {
      for (const auto& l : it->second) out += l + ":\n";
    }
    const auto& in = p.text[i];
    out += fmt::format("{:08x}  {:<40} # line {}\n", pc, format_instruction(in), in.span.line);
  }
  for (const auto& sec : p.data) {
    out += fmt::format("{} data 0x{:08x} {} bytes\n", sec.region == Region::L1 ? "l1" : "l2", sec.base,
                       sec.bytes.size());
  }
  out += "symbols:\n";
  for (const auto& [name, addr] : p.symbols) out += fmt::format("  {:08x} {}\n", addr, name);
  return out;
}

Program assemble_file(const std::string& path, const ClusterConfig& cfg) {
  AsmResult r = assemble(read_file(path), AsmOptions::from(cfg, path));
  if (!r.ok()) {
    for (const auto& e : r.errors) std::cerr << e.to_string() << "\n";
    throw InputError(fmt::format("{}: {} error(s)", path, r.errors.size()));
  }
  return std::move(*r.program);
}

int cmd_asm(const AsmArgs& a) {
  Program p = assemble_file(a.input, ClusterConfig{});
  write_output(a.output, a.disasm ? disassemble(p) : listing(p));
  return kOk;
}

// ---- run ----

struct RunArgs {
  Common common;
  std::string program;
  std::string expect;
  std::string json_out;
  bool strict = false;
  bool permissive = false;
  std::optional<uint64_t> max_cycles;
};

std::string summary(const Metrics& m, const energy::Breakdown& e, std::optional<bool> verified) {
  std::string out;
  out += fmt::format("cycles                {}\n", m.cycles);
  out += fmt::format("instructions retired  {}\n", m.instructions_retired());
  out += fmt::format("tcdm accesses         {}\n", m.tcdm_accesses);
  out += fmt::format("conflict stalls       {}\n", m.conflict_stall_cycles);
  out += fmt::format("broadcasts            {}\n", m.broadcasts);
  out += fmt::format("vlem entries/exits    {}/{} ({} cycles)\n", m.vlem_entries, m.vlem_exits, m.cycles_in_vlem);
  out += fmt::format("macs                  {} ({:.3f}/cycle)\n", m.macs, m.macs_per_cycle());
  out += fmt::format("energy                {:.1f} pJ ({:.3f} pJ/cycle)\n", e.total_pJ, e.pJ_per_cycle);
  for (size_t u = 0; u < energy::kUnits; ++u) {
    out += fmt::format("  {:<14} {:>12.1f} pJ {:>6.1f}%\n", energy::unit_name(energy::Unit(u)), e.by_unit[u],
                       e.share_pct[u]);
  }
  if (verified) out += fmt::format("verified              {}\n", *verified ? "yes" : "NO");
  return out;
}

int cmd_run(const RunArgs& a) {
  if (a.strict && a.permissive) throw InputError("--mode-strict-divergence and --mode-permissive-divergence conflict");
  report::RunInfo info;
  info.config = a.common.config();
  info.params = a.common.params();
  if (a.strict) info.config.strict_divergence = true;
  if (a.permissive) info.config.strict_divergence = false;
  if (a.max_cycles) info.config.max_cycles = *a.max_cycles;
  info.config.validate();
  std::string source = read_file(a.program);
  info.input = a.program;
  info.input_hash = report::fnv1a(source);
  Program prog = assemble_file(a.program, info.config);
  kernels::Kernel k;
  if (!a.expect.empty()) k.expect = kernels::parse_expect(read_file(a.expect), a.expect);

  Cluster cluster(info.config);
  cluster.load(prog);
  std::optional<Metrics> partial;
  std::string error;
  int code = kOk;
  try {
    cluster.run();
  } catch (const TimeoutError& e) {
    partial = e.partial;
    error = e.what();
    code = kSim;
  } catch (const SimTrap& e) {
    error = e.what();
    code = kSim;
  } catch (const DivergenceError& e) {
    error = e.what();
    code = kSim;
  } catch (const DeadlockError& e) {
    error = e.what();
    code = kSim;
  }
  const Metrics& m = partial ? *partial : cluster.metrics();
  std::optional<bool> verified;
  kernels::Verification v;
  if (code == kOk && !a.expect.empty()) {
    v = kernels::verify(k, cluster);
    verified = v.ok;
    if (!v.ok) code = kMismatch;
  }
  if (!error.empty()) std::cerr << "error: " << error << "\n";
  if (verified && !*verified) std::cerr << "verification failed: " << v.mismatches << " mismatch(es), first " << v.first << "\n";

  if (!a.json_out.empty()) {
    json j = report::run_json(info, m, cluster.activity(), verified);
    j["status"] = code == kOk ? "ok" : code == kSim ? "simulation_error" : "mismatch";
    if (!error.empty()) j["error"] = error;
    write_output(a.json_out, dump(j));
  }
  if (a.json_out != "-") {
    std::cout << summary(m, energy::report(energy::price(cluster.activity(), info.params), m.cycles), verified);
  }
  return code;
}

// ---- bench ----

struct BenchArgs {
  Common common;
  std::string suite;
  std::string csv_out;
  std::string json_out;
  unsigned jobs = 1;
  uint64_t seed = 1;
};

int suite_exit(const bench::SuiteResult& s) {
  for (const auto& r : s.rows) {
    if (!r.result.verification.ok) {
      std::cerr << fmt::format("{}: verification failed: {}\n", r.bench.name, r.result.verification.first);
      return kMismatch;
    }
  }
  return kOk;
}

int cmd_bench(const BenchArgs& a, CLI::App* cmd) {
  std::string text = read_file(a.suite);
  std::vector<bench::BenchCase> cases;
  try {
    cases = bench::parse_suite(text, a.suite);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n\n" << cmd->help();
    return kInput;
  }
  ClusterConfig cfg = a.common.config();
  energy::Params params = a.common.params();
  bench::SuiteResult s = bench::run_suite(cases, cfg, params, a.jobs, a.seed);
  if (!a.csv_out.empty()) write_output(a.csv_out, report::suite_csv(s));
  if (!a.json_out.empty()) write_output(a.json_out, dump(report::suite_json(a.suite, report::fnv1a(text), cfg, params, s)));
  if (a.csv_out != "-" && a.json_out != "-") std::cout << report::suite_table(s);
  return suite_exit(s);
}

// ---- sweep ----

struct Axis {
  std::string name;
  std::vector<std::string> values;
};

std::string format_number(double v) {
  std::string s = fmt::format("{:.6f}", v);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s == "-0" ? "0" : s;
}

// name=v1,v2,... or name=lo:hi:step
Axis parse_axis(const std::string& spec) {
  size_t eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
    throw InputError(fmt::format("grid '{}': expected name=v1,v2 or name=lo:hi:step", spec));
  }
  Axis a{spec.substr(0, eq), {}};
  std::string rhs = spec.substr(eq + 1);
  if (rhs.find(':') != std::string::npos) {
    double lo = 0, hi = 0, step = 0;
    char tail = 0;
    if (std::sscanf(rhs.c_str(), "%lf:%lf:%lf%c", &lo, &hi, &step, &tail) != 3 || !(step > 0) || hi < lo) {
      throw InputError(fmt::format("grid '{}': range must be lo:hi:step with step > 0 and lo <= hi", spec));
    }
    size_t n = static_cast<size_t>((hi - lo) / step + 1e-9) + 1;
    if (n > 10000) throw InputError(fmt::format("grid '{}': too many points", spec));
    for (size_t i = 0; i < n; ++i) a.values.push_back(format_number(lo + double(i) * step));
  } else {
    size_t pos = 0;
    while (pos <= rhs.size()) {
      size_t c = std::min(rhs.find(',', pos), rhs.size());
      std::string v = rhs.substr(pos, c - pos);
      if (v.empty()) throw InputError(fmt::format("grid '{}': empty value", spec));
      a.values.push_back(v);
      pos = c + 1;
    }
  }
  return a;
}

bool is_energy_param(const std::string& name) { return energy::to_key_values(energy::Params{}).count(name) > 0; }
bool is_cluster_key(const std::string& name) { return to_key_values(ClusterConfig{}).count(name) > 0; }

// The calibration matmul in both modes, VLEM against MIMD.
const char* kCalibrationSuite = R"([bench]
name = mimd
kind = matmul
mode = mimd
[bench]
name = vlem
kind = matmul
mode = vlem
baseline = mimd
)";

struct SweepArgs {
  Common common;
  std::string suite;
  std::vector<std::string> grid;
  std::string csv_out = "-";
  unsigned jobs = 1;
  uint64_t seed = 1;
};

int cmd_sweep(const SweepArgs& a) {
  if (a.grid.empty()) throw InputError("sweep needs at least one --grid");
  std::vector<Axis> axes;
  for (const auto& g : a.grid) {
    Axis ax = parse_axis(g);
    if (!is_energy_param(ax.name) && !is_cluster_key(ax.name)) {
      throw InputError(fmt::format("grid '{}': unknown parameter '{}'", g, ax.name));
    }
    for (const auto& prev : axes) {
      if (prev.name == ax.name) throw InputError(fmt::format("grid parameter '{}' given twice", ax.name));
    }
    if (is_energy_param(ax.name)) {
      for (const auto& v : ax.values) parse_double(ax.name, v);
    }
    axes.push_back(std::move(ax));
  }
  std::string text = a.suite.empty() ? kCalibrationSuite : read_file(a.suite);
  auto cases = bench::parse_suite(text, a.suite.empty() ? "<calibration>" : a.suite);
  ClusterConfig base_cfg = a.common.config();
  energy::Params base_params = a.common.params();

  std::string out;
  for (const auto& ax : axes) out += ax.name + ",";
  out += report::csv_header() + "\n";

  std::map<KeyValues, bench::SuiteResult> runs;  // by cluster overrides
  std::vector<size_t> idx(axes.size(), 0);
  int code = kOk;
  for (;;) {
    KeyValues cluster_kv;
    energy::Params params = base_params;
    std::string prefix;
    for (size_t i = 0; i < axes.size(); ++i) {
      const std::string& v = axes[i].values[idx[i]];
      prefix += v + ",";
      if (is_energy_param(axes[i].name)) {
        energy::set_param(params, axes[i].name, parse_double(axes[i].name, v));
      } else {
        cluster_kv[axes[i].name] = v;
      }
    }
    auto it = runs.find(cluster_kv);
    if (it == runs.end()) {
      ClusterConfig cfg = cluster_config_from(cluster_kv, base_cfg);
      cfg.validate();
      it = runs.emplace(cluster_kv, bench::run_suite(cases, cfg, base_params, a.jobs, a.seed)).first;
    }
    bench::SuiteResult s = bench::reprice(it->second, params);
    if (code == kOk) code = suite_exit(s);
    for (const auto& r : s.rows) out += prefix + report::csv_row(r) + "\n";

    size_t d = axes.size();
    while (d > 0) {
      --d;
      if (++idx[d] < axes[d].values.size()) break;
      idx[d] = 0;
      if (d == 0) {
        d = axes.size() + 1;
        break;
      }
    }
    if (d == axes.size() + 1) break;
  }
  write_output(a.csv_out, out);
  return code;
}

// ---- gen ----

struct GenArgs {
  std::vector<std::string> settings;
  std::string output;
  uint64_t seed = 1;
};

int cmd_gen(const GenArgs& a) {
  std::string text = "[bench]\n";
  for (const auto& s : a.settings) {
    if (s.find('=') == std::string::npos) throw InputError(fmt::format("expected key=value, got '{}'", s));
    text += s + "\n";
  }
  auto cases = bench::parse_suite(text, "<gen>");
  kernels::Kernel k = bench::build_kernel(cases.front(), a.seed);
  if (a.output.empty()) {
    write_output("-", k.source);
    return kOk;
  }
  write_output(a.output + ".s", k.source);
  write_output(a.output + ".expect", kernels::format_expect(k.expect));
  return kOk;
}

// ---- calibrate ----

struct CalibrateArgs {
  Common common;
  std::string json_out;
};

int cmd_calibrate(const CalibrateArgs& a) {
  energy::Params params = a.common.params();
  kernels::CalibrationReport r = kernels::calibrate_check(params, a.common.config());
  std::cout << fmt::format("MIMD {:.3f} pJ/cycle, VLEM {:.3f} pJ/cycle\n", r.mimd_pj_per_cycle, r.vlem_pj_per_cycle);
  std::cout << fmt::format("ratio {:.4f} (band [{:.2f}, {:.2f}]), cycle delta {:+.2f}%, largest VLEM unit {}\n",
                           r.ratio, kernels::kCalibLow, kernels::kCalibHigh, 100.0 * r.cycle_delta,
                           energy::unit_name(r.vlem_largest));
  for (size_t u = 0; u < energy::kUnits; ++u) {
    std::cout << fmt::format("  {:<14} {:+.3f} pJ/cycle\n", energy::unit_name(energy::Unit(u)), r.unit_delta[u]);
  }
  if (!r.diagnostic.empty()) std::cout << r.diagnostic << "\n";
  std::cout << (r.pass ? "calibration PASS\n" : "calibration FAIL\n");
  if (!a.json_out.empty()) {
    json deltas = json::object();
    for (size_t u = 0; u < energy::kUnits; ++u) deltas[energy::unit_name(energy::Unit(u))] = r.unit_delta[u];
    json j = {{"tool", {{"name", "clustersim"}, {"version", report::kVersion}}},
              {"energy_params", report::kv_json(energy::to_key_values(params))},
              {"pass", r.pass},
              {"ratio", r.ratio},
              {"cycle_delta", r.cycle_delta},
              {"mimd_pJ_per_cycle", r.mimd_pj_per_cycle},
              {"vlem_pJ_per_cycle", r.vlem_pj_per_cycle},
              {"vlem_largest_unit", energy::unit_name(r.vlem_largest)},
              {"unit_delta_pJ_per_cycle", deltas},
              {"verified", r.verified}};
    write_output(a.json_out, dump(j));
  }
  if (!r.verified) return kMismatch;
  return r.pass ? kOk : kMismatch;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cycle-level simulator of a 16-core cluster with lockstep mode and mixed-precision SIMD"};
  app.set_version_flag("--version", report::kVersion);
  app.require_subcommand(1);

  AsmArgs asm_args;
  auto* asm_cmd = app.add_subcommand("asm", "assemble a program and print a listing");
  asm_cmd->add_option("input", asm_args.input, "assembly source")->required();
  asm_cmd->add_option("-o,--output", asm_args.output, "output file (- for stdout)");
  asm_cmd->add_flag("--disasm", asm_args.disasm, "emit a listing that assembles back to the same program");

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "run a program on the cluster");
  run_cmd->add_option("program", run_args.program, "assembly source")->required();
  add_common(run_cmd, run_args.common);
  run_cmd->add_flag("--mode-strict-divergence", run_args.strict, "trap when followers leave the leader's stream");
  run_cmd->add_flag("--mode-permissive-divergence", run_args.permissive, "on divergence, warn and move followers to the leader's pc");
  run_cmd->add_option("--max-cycles", run_args.max_cycles, "cycle cap");
  run_cmd->add_option("--json", run_args.json_out, "write the JSON report here (- for stdout)");
  run_cmd->add_option("--expect", run_args.expect, "expected memory contents to verify");

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "run a benchmark suite");
  bench_cmd->add_option("--suite", bench_args.suite, "suite file of [bench] blocks")->required();
  add_common(bench_cmd, bench_args.common);
  bench_cmd->add_option("--csv", bench_args.csv_out, "write CSV here (- for stdout)");
  bench_cmd->add_option("--json", bench_args.json_out, "write JSON here (- for stdout)");
  bench_cmd->add_option("-j,--jobs", bench_args.jobs, "benches run concurrently")->check(CLI::Range(1u, 256u));
  bench_cmd->add_option("--seed", bench_args.seed, "seed for benches without their own");

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "run a suite over a parameter grid and emit CSV");
  sweep_cmd->add_option("--suite", sweep_args.suite, "suite file (default: calibration matmul, MIMD and VLEM)");
  sweep_cmd->add_option("--grid", sweep_args.grid, "name=v1,v2,... or name=lo:hi:step (repeatable)")->required();
  add_common(sweep_cmd, sweep_args.common);
  sweep_cmd->add_option("--csv", sweep_args.csv_out, "write CSV here (- for stdout)");
  sweep_cmd->add_option("-j,--jobs", sweep_args.jobs, "benches run concurrently")->check(CLI::Range(1u, 256u));
  sweep_cmd->add_option("--seed", sweep_args.seed, "seed for benches without their own");

  GenArgs gen_args;
  auto* gen_cmd = app.add_subcommand("gen", "generate a kernel from bench keys (kind=conv act_bits=4 ...)");
  gen_cmd->add_option("settings", gen_args.settings, "key=value bench settings");
  gen_cmd->add_option("-o,--output", gen_args.output, "write PREFIX.s and PREFIX.expect");
  gen_cmd->add_option("--seed", gen_args.seed, "data seed when no seed= key is given");

  CalibrateArgs cal_args;
  auto* cal_cmd = app.add_subcommand("calibrate", "check energy parameters against the MIMD/VLEM matmul target");
  add_common(cal_cmd, cal_args.common);
  cal_cmd->add_option("--json", cal_args.json_out, "write JSON here (- for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kInput;
  }

  try {
    if (*asm_cmd) return cmd_asm(asm_args);
    if (*run_cmd) return cmd_run(run_args);
    if (*bench_cmd) return cmd_bench(bench_args, bench_cmd);
    if (*sweep_cmd) return cmd_sweep(sweep_args);
    if (*gen_cmd) return cmd_gen(gen_args);
    if (*cal_cmd) return cmd_calibrate(cal_args);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInput;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInput;
  } catch (const kernels::KernelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInput;
  } catch (const LoadError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInput;
  } catch (const TimeoutError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSim;
  } catch (const SimTrap& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSim;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSim;
  } catch (const DeadlockError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kSim;
  }
  return kInput;
}
