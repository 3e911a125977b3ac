// Benchmark suites: [bench] blocks of key=value lines, run against a cluster
// configuration and compared with named baselines.
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clustersim/config.h"
#include "clustersim/energy.h"
#include "clustersim/kernels.h"

namespace csim::bench {

enum class Kind : uint8_t { Conv, Matmul, Vecadd };
const char* kind_name(Kind k);

struct VecaddSpec {
  unsigned n = 1024, chunk = 1, s = 4;
};

struct BenchCase {
  std::string name;
  Kind kind = Kind::Conv;
  kernels::ConvSpec conv;
  kernels::MatmulSpec matmul;
  VecaddSpec vecadd;
  kernels::GenOptions opt;
  std::optional<bool> broadcast;  // overrides the cluster setting
  std::optional<uint64_t> seed;
  std::string baseline;  // name of an earlier or later case
  std::string group;     // cases summed together in reports
  int line = 0;
};

// Throws ConfigError on unknown keys, bad values, duplicate names, dangling
// baselines or an empty suite.
std::vector<BenchCase> parse_suite(std::string_view text, const std::string& origin = "<suite>");

// default_seed applies to cases without an explicit seed.
kernels::Kernel build_kernel(const BenchCase& c, uint64_t default_seed = 1);
ClusterConfig config_for(const BenchCase& c, const ClusterConfig& base);

struct Row {
  BenchCase bench;
  kernels::BenchResult result;
  std::optional<double> overhead_pct;       // cycles relative to the baseline
  std::optional<double> speedup;            // baseline cycles / cycles
  std::optional<double> energy_delta_pct;   // energy relative to the baseline
};

struct GroupTotal {
  std::string name;
  uint64_t cycles = 0;
  double total_pJ = 0;
  uint64_t macs = 0;
  bool verified = true;
};

struct SuiteResult {
  std::vector<Row> rows;
  std::vector<GroupTotal> groups;
};

// Runs every case (up to `jobs` at once); rows keep suite order. Simulation
// errors propagate from the first failing case in suite order.
SuiteResult run_suite(const std::vector<BenchCase>& cases, const ClusterConfig& cfg, const energy::Params& params,
                      unsigned jobs = 1, uint64_t default_seed = 1);

// Re-prices recorded activity and recomputes baseline comparisons.
SuiteResult reprice(const SuiteResult& s, const energy::Params& params);

}  // namespace csim::bench
