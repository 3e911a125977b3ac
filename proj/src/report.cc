#include "clustersim/report.h"

#include <fmt/format.h>

#include <cmath>
#include <cstdlib>

namespace csim::report {

using nlohmann::json;

uint64_t fnv1a(std::string_view data) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(uint64_t h) { return fmt::format("{:016x}", h); }

namespace {

double finite(double v) { return std::isfinite(v) ? v : 0.0; }

json opt_num(const std::optional<double>& v) { return v ? json(finite(*v)) : json(nullptr); }

std::string opt_text(const std::optional<double>& v, const char* spec) {
  return v ? fmt::format(fmt::runtime(spec), *v) : std::string();
}

json units_json(const energy::UnitArray& a) {
  json j = json::object();
  for (size_t u = 0; u < energy::kUnits; ++u) j[energy::unit_name(energy::Unit(u))] = finite(a[u]);
  return j;
}

}  // namespace

json kv_json(const KeyValues& kv) {
  json j = json::object();
  for (const auto& [k, v] : kv) {
    char* end = nullptr;
    if (v == "true" || v == "false") {
      j[k] = v == "true";
    } else if (!v.empty() && (std::strtoull(v.c_str(), &end, 0), *end == '\0') && v[0] != '-') {
      j[k] = std::strtoull(v.c_str(), nullptr, 0);
    } else if (!v.empty() && (std::strtod(v.c_str(), &end), *end == '\0')) {
      j[k] = finite(std::strtod(v.c_str(), nullptr));
    } else {
      j[k] = v;
    }
  }
  return j;
}

json metrics_json(const Metrics& m, const std::vector<energy::Activity>& activity, const energy::Params& params,
                  std::optional<bool> verified) {
  energy::Ledger ledger = energy::price(activity, params);
  energy::Breakdown b = energy::report(ledger, m.cycles);
  json j;
  j["cycles"] = m.cycles;
  j["instructions_retired"] = m.instructions_retired();
  json cores = json::array();
  for (size_t c = 0; c < m.per_core.size(); ++c) {
    const auto& pc = m.per_core[c];
    double e = 0;
    if (c < ledger.per_core.size()) {
      for (double v : ledger.per_core[c]) e += v;
    }
    cores.push_back({{"core", c},
                     {"retired", pc.retired},
                     {"conflict_stall_cycles", pc.conflict_stall_cycles},
                     {"icache_stall_cycles", pc.icache_stall_cycles},
                     {"l0_misses", pc.l0_misses},
                     {"l15_misses", pc.l15_misses},
                     {"energy_pJ", finite(e)}});
  }
  j["per_core"] = cores;
  j["tcdm"] = {{"accesses", m.tcdm_accesses},
               {"conflict_stall_cycles", m.conflict_stall_cycles},
               {"broadcasts", m.broadcasts}};
  j["vlem"] = {{"entries", m.vlem_entries}, {"exits", m.vlem_exits}, {"cycles_in_vlem", m.cycles_in_vlem}};
  j["energy"] = {{"total_pJ", finite(b.total_pJ)},
                 {"by_unit", units_json(b.by_unit)},
                 {"pJ_per_cycle", finite(b.pJ_per_cycle)}};
  j["macs"] = m.macs;
  j["macs_per_cycle"] = finite(m.macs_per_cycle());
  j["verified"] = verified ? json(*verified) : json(nullptr);
  j["warnings"] = {{"divergence", m.divergence_warnings},
                   {"same_address_rw", m.same_address_rw_warnings},
                   {"macctl_zero", m.macctl_zero_warnings}};
  return j;
}

json run_json(const RunInfo& info, const Metrics& m, const std::vector<energy::Activity>& activity,
              std::optional<bool> verified) {
  json j = metrics_json(m, activity, info.params, verified);
  j["tool"] = {{"name", "clustersim"}, {"version", kVersion}};
  j["input"] = {{"file", info.input}, {"fnv1a", hash_hex(info.input_hash)}};
  j["config"] = kv_json(to_key_values(info.config));
  j["energy_params"] = kv_json(energy::to_key_values(info.params));
  return j;
}

json suite_json(const std::string& suite, uint64_t suite_hash, const ClusterConfig& cfg, const energy::Params& params,
                const bench::SuiteResult& s) {
  json j;
  j["tool"] = {{"name", "clustersim"}, {"version", kVersion}};
  j["input"] = {{"file", suite}, {"fnv1a", hash_hex(suite_hash)}};
  j["config"] = kv_json(to_key_values(cfg));
  j["energy_params"] = kv_json(energy::to_key_values(params));
  json rows = json::array();
  for (const auto& r : s.rows) {
    const auto& c = r.bench;
    json row = metrics_json(r.result.metrics, r.result.activity, params, r.result.verification.ok);
    row["name"] = c.name;
    row["kind"] = bench::kind_name(c.kind);
    row["mode"] = kernels::exec_mode_name(c.opt.mode);
    row["path"] = kernels::path_name(c.opt.path);
    row["layout"] = kernels::layout_name(c.opt.layout);
    row["broadcast"] = config_for(c, cfg).broadcast_enabled;
    row["baseline"] = c.baseline.empty() ? json(nullptr) : json(c.baseline);
    row["group"] = c.group.empty() ? json(nullptr) : json(c.group);
    row["overhead_pct"] = opt_num(r.overhead_pct);
    row["speedup"] = opt_num(r.speedup);
    row["energy_delta_pct"] = opt_num(r.energy_delta_pct);
    if (!r.result.verification.ok) row["mismatch"] = r.result.verification.first;
    rows.push_back(row);
  }
  j["results"] = rows;
  json groups = json::array();
  for (const auto& g : s.groups) {
    groups.push_back({{"name", g.name},
                      {"cycles", g.cycles},
                      {"total_pJ", finite(g.total_pJ)},
                      {"macs", g.macs},
                      {"verified", g.verified}});
  }
  j["groups"] = groups;
  return j;
}

std::string csv_header() {
  return "name,kind,mode,path,layout,act_bits,wgt_bits,cycles,instructions_retired,macs,macs_per_cycle,"
         "conflict_stall_cycles,broadcasts,total_pJ,pJ_per_cycle,verified,baseline,overhead_pct,speedup,"
         "energy_delta_pct";
}

std::string csv_row(const bench::Row& r) {
  const auto& c = r.bench;
  const auto& m = r.result.metrics;
  unsigned ab = c.kind == bench::Kind::Matmul ? c.matmul.act_bits : c.conv.act_bits;
  unsigned wb = c.kind == bench::Kind::Matmul ? c.matmul.wgt_bits : c.conv.wgt_bits;
  if (c.kind == bench::Kind::Vecadd) ab = wb = 8 * c.vecadd.s;
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{:.4f},{},{},{:.3f},{:.4f},{},{},{},{},{}", c.name,
                     bench::kind_name(c.kind), kernels::exec_mode_name(c.opt.mode), kernels::path_name(c.opt.path),
                     kernels::layout_name(c.opt.layout), ab, wb, m.cycles, m.instructions_retired(), m.macs,
                     finite(m.macs_per_cycle()), m.conflict_stall_cycles, m.broadcasts,
                     finite(r.result.energy.total_pJ), finite(r.result.energy.pJ_per_cycle),
                     r.result.verification.ok ? 1 : 0, c.baseline, opt_text(r.overhead_pct, "{:.3f}"),
                     opt_text(r.speedup, "{:.4f}"), opt_text(r.energy_delta_pct, "{:.3f}"));
}

std::string suite_csv(const bench::SuiteResult& s) {
  std::string out = csv_header() + "\n";
  for (const auto& r : s.rows) out += csv_row(r) + "\n";
  return out;
}

std::string suite_table(const bench::SuiteResult& s) {
  std::string out = fmt::format("{:<24} {:>6} {:>9} {:>10} {:>8} {:>10} {:>9} {:>10} {:>8}  {}\n", "name", "mode",
                                "path", "cycles", "MAC/cyc", "stalls", "pJ/cyc", "overhead", "speedup", "ok");
  for (const auto& r : s.rows) {
    const auto& m = r.result.metrics;
    out += fmt::format("{:<24} {:>6} {:>9} {:>10} {:>8.2f} {:>10} {:>9.2f} {:>10} {:>8}  {}\n", r.bench.name,
                       kernels::exec_mode_name(r.bench.opt.mode), kernels::path_name(r.bench.opt.path), m.cycles,
                       m.macs_per_cycle(), m.conflict_stall_cycles, r.result.energy.pJ_per_cycle,
                       r.overhead_pct ? fmt::format("{:+.1f}%", *r.overhead_pct) : "",
                       r.speedup ? fmt::format("{:.2f}x", *r.speedup) : "", r.result.verification.ok ? "yes" : "NO");
  }
  for (const auto& g : s.groups) {
    out += fmt::format("group {:<18} cycles {:>10}  energy {:>12.1f} pJ  {}\n", g.name, g.cycles, g.total_pJ,
                       g.verified ? "verified" : "MISMATCH");
  }
  return out;
}

}  // namespace csim::report
