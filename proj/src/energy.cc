#include "clustersim/energy.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace csim::energy {

const char* unit_name(Unit u) {
  static const char* names[kUnits] = {"IF", "ICACHE", "IDEX", "LSU", "TCDM", "INTERCONNECT", "LEAKAGE"};
  return names[static_cast<size_t>(u)];
}

namespace {

struct Field {
  const char* name;
  double Params::*ptr;
};

constexpr Field kFields[] = {
    {"if_stage_active", &Params::if_stage_active},
    {"icache_l0_access", &Params::icache_l0_access},
    {"icache_l15_access", &Params::icache_l15_access},
    {"idex_active", &Params::idex_active},
    {"idex_simd_extra", &Params::idex_simd_extra},
    {"lsu_access", &Params::lsu_access},
    {"tcdm_bank_access", &Params::tcdm_bank_access},
    {"interconnect_traversal", &Params::interconnect_traversal},
    {"broadcast_traversal", &Params::broadcast_traversal},
    {"leakage_per_core_cycle", &Params::leakage_per_core_cycle},
    {"gated_core_cycle", &Params::gated_core_cycle},
};

}  // namespace

void Params::validate() const {
  for (const auto& f : kFields) {
    double v = this->*f.ptr;
    if (!std::isfinite(v) || v < 0) throw ConfigError(fmt::format("energy parameter {} must be finite and >= 0", f.name));
  }
  double active = leakage_per_core_cycle + idex_active + if_stage_active;
  if (active > 0 && gated_core_cycle >= active) {
    throw ConfigError("gated_core_cycle must be below the active per-cycle cost");
  }
}

Params default_params() {
  Params p;
  return p;
}

void set_param(Params& p, const std::string& name, double value) {
  for (const auto& f : kFields) {
    if (name == f.name) {
      p.*f.ptr = value;
      return;
    }
  }
  throw ConfigError("unknown energy parameter '" + name + "'");
}

double get_param(const Params& p, const std::string& name) {
  for (const auto& f : kFields) {
    if (name == f.name) return p.*f.ptr;
  }
  throw ConfigError("unknown energy parameter '" + name + "'");
}

Params params_from(const KeyValues& kv, Params base) {
  for (const auto& [k, v] : kv) set_param(base, k, parse_double(k, v));
  base.validate();
  return base;
}

KeyValues to_key_values(const Params& p) {
  KeyValues kv;
  for (const auto& f : kFields) kv[f.name] = fmt::format("{}", p.*f.ptr);
  return kv;
}

Activity& Activity::operator+=(const Activity& o) {
  if_cycles += o.if_cycles;
  l0_accesses += o.l0_accesses;
  l15_accesses += o.l15_accesses;
  idex_cycles += o.idex_cycles;
  simd_ops += o.simd_ops;
  lsu_accesses += o.lsu_accesses;
  bank_accesses += o.bank_accesses;
  interconnect_traversals += o.interconnect_traversals;
  broadcast_traversals += o.broadcast_traversals;
  leak_cycles += o.leak_cycles;
  gated_cycles += o.gated_cycles;
  return *this;
}

UnitArray Ledger::by_unit() const {
  UnitArray sum{};
  for (const auto& c : per_core) {
    for (size_t u = 0; u < kUnits; ++u) sum[u] += c[u];
  }
  return sum;
}

double Ledger::total() const {
  auto u = by_unit();
  double t = 0;
  for (double v : u) t += v;
  return t;
}

Ledger& Ledger::operator+=(const Ledger& o) {
  if (per_core.size() < o.per_core.size()) per_core.resize(o.per_core.size(), UnitArray{});
  for (size_t c = 0; c < o.per_core.size(); ++c) {
    for (size_t u = 0; u < kUnits; ++u) per_core[c][u] += o.per_core[c][u];
  }
  return *this;
}

void accrue(Ledger& ledger, unsigned core, const Activity& a, const Params& p) {
  if (ledger.per_core.size() <= core) ledger.per_core.resize(core + 1, UnitArray{});
  UnitArray& e = ledger.per_core[core];
  auto d = [](uint64_t n) { return static_cast<double>(n); };
  e[size_t(Unit::IF)] += d(a.if_cycles) * p.if_stage_active;
  e[size_t(Unit::ICACHE)] += d(a.l0_accesses) * p.icache_l0_access + d(a.l15_accesses) * p.icache_l15_access;
  e[size_t(Unit::IDEX)] += d(a.idex_cycles) * p.idex_active + d(a.simd_ops) * p.idex_simd_extra;
  e[size_t(Unit::LSU)] += d(a.lsu_accesses) * p.lsu_access;
  e[size_t(Unit::TCDM)] += d(a.bank_accesses) * p.tcdm_bank_access;
  e[size_t(Unit::INTERCONNECT)] +=
      d(a.interconnect_traversals) * p.interconnect_traversal + d(a.broadcast_traversals) * p.broadcast_traversal;
  e[size_t(Unit::LEAKAGE)] += d(a.leak_cycles) * p.leakage_per_core_cycle + d(a.gated_cycles) * p.gated_core_cycle;
}

Ledger price(const std::vector<Activity>& per_core, const Params& p) {
  Ledger l;
  l.per_core.assign(per_core.size(), UnitArray{});
  for (size_t c = 0; c < per_core.size(); ++c) accrue(l, static_cast<unsigned>(c), per_core[c], p);
  return l;
}

Unit Breakdown::largest() const {
  size_t best = 0;
  for (size_t u = 1; u < kUnits; ++u) {
    if (by_unit[u] > by_unit[best]) best = u;
  }
  return static_cast<Unit>(best);
}

Breakdown report(const Ledger& ledger, uint64_t cycles) {
  Breakdown b;
  b.by_unit = ledger.by_unit();
  for (double v : b.by_unit) b.total_pJ += v;
  for (size_t u = 0; u < kUnits; ++u) b.share_pct[u] = b.total_pJ > 0 ? 100.0 * b.by_unit[u] / b.total_pJ : 0.0;
  b.cycles = cycles;
  b.pJ_per_cycle = cycles ? b.total_pJ / static_cast<double>(cycles) : 0.0;
  return b;
}

}  // namespace csim::energy
