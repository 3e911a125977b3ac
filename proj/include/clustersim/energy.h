// Event-based energy accounting: activity counters priced in pJ per event.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "clustersim/config.h"

namespace csim::energy {

enum class Unit : uint8_t { IF, ICACHE, IDEX, LSU, TCDM, INTERCONNECT, LEAKAGE };
constexpr size_t kUnits = 7;
const char* unit_name(Unit u);

struct Params {
  double if_stage_active = 0.7;
  double icache_l0_access = 1.26;
  double icache_l15_access = 3.0;
  double idex_active = 2.5;
  double idex_simd_extra = 0.5;
  double lsu_access = 0.5;
  double tcdm_bank_access = 1.2;
  double interconnect_traversal = 0.6;
  double broadcast_traversal = 1.0;
  double leakage_per_core_cycle = 0.2;
  double gated_core_cycle = 0.2;

  void validate() const;  // throws ConfigError
};

// Calibrated defaults shipped with the tool (config/energy_default.params).
Params default_params();
Params params_from(const KeyValues& kv, Params base);
KeyValues to_key_values(const Params& p);
// Sets one field by name; throws ConfigError on unknown names.
void set_param(Params& p, const std::string& name, double value);
double get_param(const Params& p, const std::string& name);

// Event counts for one core.
struct Activity {
  uint64_t if_cycles = 0;
  uint64_t l0_accesses = 0;
  uint64_t l15_accesses = 0;
  uint64_t idex_cycles = 0;
  uint64_t simd_ops = 0;
  uint64_t lsu_accesses = 0;
  uint64_t bank_accesses = 0;
  uint64_t interconnect_traversals = 0;
  uint64_t broadcast_traversals = 0;
  uint64_t leak_cycles = 0;
  uint64_t gated_cycles = 0;

  Activity& operator+=(const Activity& o);
};

using UnitArray = std::array<double, kUnits>;

struct Ledger {
  std::vector<UnitArray> per_core;

  UnitArray by_unit() const;
  double total() const;
  Ledger& operator+=(const Ledger& o);
};

// Adds the priced activity of one core. Gated cycles only pay gated_core_cycle.
void accrue(Ledger& ledger, unsigned core, const Activity& a, const Params& p);
Ledger price(const std::vector<Activity>& per_core, const Params& p);

struct Breakdown {
  double total_pJ = 0;
  UnitArray by_unit{};
  UnitArray share_pct{};
  double pJ_per_cycle = 0;
  uint64_t cycles = 0;

  Unit largest() const;
};

Breakdown report(const Ledger& ledger, uint64_t cycles);

}  // namespace csim::energy
