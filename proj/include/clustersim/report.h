// Machine-readable run and suite reports (JSON, CSV) and a text table.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "clustersim/bench.h"
#include "clustersim/cluster.h"
#include "clustersim/energy.h"

namespace csim::report {

inline constexpr const char* kVersion = "0.1.0";

// 64-bit FNV-1a.
uint64_t fnv1a(std::string_view data);
std::string hash_hex(uint64_t h);

// Key=value pairs with numeric and boolean values typed.
nlohmann::json kv_json(const KeyValues& kv);

// cycles, instructions_retired, per_core[], tcdm{}, vlem{}, energy{}, macs,
// macs_per_cycle, verified (null when nothing was checked).
nlohmann::json metrics_json(const Metrics& m, const std::vector<energy::Activity>& activity,
                            const energy::Params& params, std::optional<bool> verified);

struct RunInfo {
  std::string input;  // file name
  uint64_t input_hash = 0;
  ClusterConfig config;
  energy::Params params;
  std::vector<std::string> warnings;
};

nlohmann::json run_json(const RunInfo& info, const Metrics& m, const std::vector<energy::Activity>& activity,
                        std::optional<bool> verified);

nlohmann::json suite_json(const std::string& suite, uint64_t suite_hash, const ClusterConfig& cfg,
                          const energy::Params& params, const bench::SuiteResult& s);
std::string suite_csv(const bench::SuiteResult& s);
std::string suite_table(const bench::SuiteResult& s);

std::string csv_header();
// One CSV row without the trailing newline.
std::string csv_row(const bench::Row& r);

}  // namespace csim::report
