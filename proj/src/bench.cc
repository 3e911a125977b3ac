#include "clustersim/bench.h"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <map>
#include <set>
#include <thread>

namespace csim::bench {

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::Conv: return "conv";
    case Kind::Matmul: return "matmul";
    case Kind::Vecadd: return "vecadd";
  }
  return "?";
}

namespace {

std::string_view trim(std::string_view s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

unsigned as_unsigned(const std::string& k, const std::string& v) {
  uint64_t x = parse_uint(k, v);
  if (x > 0xFFFFFFFFull) throw ConfigError(fmt::format("{}: value {} too large", k, v));
  return static_cast<unsigned>(x);
}

void apply(BenchCase& c, const std::string& k, const std::string& v) {
  auto u = [&] { return as_unsigned(k, v); };
  if (k == "name") {
    if (v.empty()) throw ConfigError("name must not be empty");
    c.name = v;
  } else if (k == "kind") {
    if (v == "conv") c.kind = Kind::Conv;
    else if (v == "matmul") c.kind = Kind::Matmul;
    else if (v == "vecadd") c.kind = Kind::Vecadd;
    else throw ConfigError(fmt::format("kind: expected conv, matmul or vecadd, got '{}'", v));
  } else if (k == "mode") {
    if (v == "mimd") c.opt.mode = kernels::ExecMode::MIMD;
    else if (v == "vlem") c.opt.mode = kernels::ExecMode::VLEM;
    else throw ConfigError(fmt::format("mode: expected mimd or vlem, got '{}'", v));
  } else if (k == "path") {
    if (v == "hardware" || v == "hw") c.opt.path = kernels::Path::Hardware;
    else if (v == "software" || v == "sw") c.opt.path = kernels::Path::Software;
    else throw ConfigError(fmt::format("path: expected hardware or software, got '{}'", v));
  } else if (k == "layout") {
    if (v == "naive") c.opt.layout = kernels::Layout::Naive;
    else if (v == "misaligned") c.opt.layout = kernels::Layout::Misaligned;
    else throw ConfigError(fmt::format("layout: expected naive or misaligned, got '{}'", v));
  } else if (k == "blocking") {
    unsigned p = 0, ch = 0;
    char x = 0;
    if (std::sscanf(v.c_str(), "%u%c%u", &p, &x, &ch) != 3 || x != 'x') {
      throw ConfigError(fmt::format("blocking: expected PIXELSxCHANNELS, got '{}'", v));
    }
    c.opt.blocking = kernels::Blocking{p, ch};
  } else if (k == "broadcast") {
    c.broadcast = parse_bool(k, v);
  } else if (k == "seed") {
    c.seed = parse_uint(k, v);
  } else if (k == "baseline") {
    c.baseline = v;
  } else if (k == "group") {
    c.group = v;
  } else if (k == "H") {
    c.conv.H = u();
  } else if (k == "W") {
    c.conv.W = u();
  } else if (k == "C_in") {
    c.conv.C_in = u();
  } else if (k == "C_out") {
    c.conv.C_out = u();
  } else if (k == "K") {
    c.conv.K = u();
  } else if (k == "pad") {
    c.conv.pad = u();
  } else if (k == "M") {
    c.matmul.M = u();
  } else if (k == "N") {
    c.matmul.N = u();
  } else if (k == "Kd") {
    c.matmul.Kd = u();
  } else if (k == "act_bits") {
    c.conv.act_bits = c.matmul.act_bits = u();
  } else if (k == "wgt_bits") {
    c.conv.wgt_bits = c.matmul.wgt_bits = u();
  } else if (k == "act_signed") {
    c.conv.act_signed = c.matmul.act_signed = parse_bool(k, v);
  } else if (k == "wgt_signed") {
    c.conv.wgt_signed = c.matmul.wgt_signed = parse_bool(k, v);
  } else if (k == "n") {
    c.vecadd.n = u();
  } else if (k == "chunk") {
    c.vecadd.chunk = u();
  } else if (k == "s") {
    c.vecadd.s = u();
  } else {
    throw ConfigError(fmt::format("unknown key '{}'", k));
  }
}

}  // namespace

std::vector<BenchCase> parse_suite(std::string_view text, const std::string& origin) {
  std::vector<BenchCase> cases;
  std::set<std::string> keys;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (size_t h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
    line = trim(line);
    if (line.empty()) continue;
    auto fail = [&](const std::string& msg) { throw ConfigError(fmt::format("{}:{}: {}", origin, line_no, msg)); };
    if (line.front() == '[') {
      if (line != "[bench]") fail(fmt::format("unknown section '{}'", line));
      cases.emplace_back();
      cases.back().line = line_no;
      keys.clear();
      continue;
    }
    if (cases.empty()) fail("key outside a [bench] block");
    size_t eq = line.find('=');
    if (eq == std::string_view::npos) fail("expected key=value");
    std::string key(trim(line.substr(0, eq))), value(trim(line.substr(eq + 1)));
    if (!keys.insert(key).second) fail(fmt::format("duplicate key '{}'", key));
    try {
      apply(cases.back(), key, value);
    } catch (const ConfigError& e) {
      fail(e.what());
    }
  }
  if (cases.empty()) throw ConfigError(fmt::format("{}: suite has no [bench] blocks", origin));
  std::set<std::string> names;
  for (size_t i = 0; i < cases.size(); ++i) {
    if (cases[i].name.empty()) cases[i].name = fmt::format("bench{}", i);
    if (!names.insert(cases[i].name).second) {
      throw ConfigError(fmt::format("{}:{}: duplicate bench name '{}'", origin, cases[i].line, cases[i].name));
    }
  }
  for (const auto& c : cases) {
    if (c.baseline.empty()) continue;
    if (c.baseline == c.name || !names.count(c.baseline)) {
      throw ConfigError(fmt::format("{}:{}: baseline '{}' does not name another bench", origin, c.line, c.baseline));
    }
  }
  return cases;
}

kernels::Kernel build_kernel(const BenchCase& c, uint64_t default_seed) {
  uint64_t seed = c.seed.value_or(default_seed);
  kernels::Kernel k;
  switch (c.kind) {
    case Kind::Conv: {
      kernels::ConvSpec s = c.conv;
      s.seed = seed;
      k = kernels::gen_conv(s, c.opt);
      break;
    }
    case Kind::Matmul: {
      kernels::MatmulSpec s = c.matmul;
      s.seed = seed;
      k = kernels::gen_matmul(s, c.opt);
      break;
    }
    case Kind::Vecadd:
      k = kernels::gen_vecadd(c.vecadd.n, c.vecadd.chunk, c.vecadd.s, c.opt.mode, seed, c.opt.n_cores);
      break;
  }
  k.name = c.name;
  return k;
}

ClusterConfig config_for(const BenchCase& c, const ClusterConfig& base) {
  ClusterConfig cfg = base;
  if (c.broadcast) cfg.broadcast_enabled = *c.broadcast;
  return cfg;
}

namespace {

void derive(SuiteResult& s) {
  std::map<std::string, size_t> index;
  for (size_t i = 0; i < s.rows.size(); ++i) index[s.rows[i].bench.name] = i;
  for (auto& r : s.rows) {
    r.overhead_pct.reset();
    r.speedup.reset();
    r.energy_delta_pct.reset();
    if (r.bench.baseline.empty()) continue;
    const auto& b = s.rows[index.at(r.bench.baseline)].result;
    double c = double(r.result.metrics.cycles), bc = double(b.metrics.cycles);
    if (bc > 0 && c > 0) {
      r.overhead_pct = 100.0 * (c / bc - 1.0);
      r.speedup = bc / c;
    }
    if (b.energy.total_pJ > 0) r.energy_delta_pct = 100.0 * (r.result.energy.total_pJ / b.energy.total_pJ - 1.0);
  }
  s.groups.clear();
  std::map<std::string, size_t> gi;
  for (const auto& r : s.rows) {
    if (r.bench.group.empty()) continue;
    auto [it, fresh] = gi.emplace(r.bench.group, s.groups.size());
    if (fresh) s.groups.push_back(GroupTotal{r.bench.group});
    GroupTotal& g = s.groups[it->second];
    g.cycles += r.result.metrics.cycles;
    g.total_pJ += r.result.energy.total_pJ;
    g.macs += r.result.metrics.macs;
    g.verified = g.verified && r.result.verification.ok;
  }
}

}  // namespace

SuiteResult run_suite(const std::vector<BenchCase>& cases, const ClusterConfig& cfg, const energy::Params& params,
                      unsigned jobs, uint64_t default_seed) {
  SuiteResult s;
  s.rows.resize(cases.size());
  std::vector<std::exception_ptr> errors(cases.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < cases.size(); i = next++) {
      try {
        s.rows[i].bench = cases[i];
        s.rows[i].result = kernels::run_bench(build_kernel(cases[i], default_seed), config_for(cases[i], cfg), params);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(cases.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  derive(s);
  return s;
}

SuiteResult reprice(const SuiteResult& in, const energy::Params& params) {
  SuiteResult s = in;
  for (auto& r : s.rows) {
    r.result.energy = energy::report(energy::price(r.result.activity, params), r.result.metrics.cycles);
  }
  derive(s);
  return s;
}

}  // namespace csim::bench
