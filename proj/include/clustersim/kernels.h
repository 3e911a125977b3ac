// Layout helpers, golden models and assembly generators for the QNN kernels.
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "clustersim/assembler.h"
#include "clustersim/cluster.h"
#include "clustersim/energy.h"
#include "clustersim/simd.h"

namespace csim::kernels {

// Unsupported spec combination or inconsistent dimensions.
class KernelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OutOfMemory : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LayoutParams {
  unsigned s = 1;  // element bytes
  unsigned w = 4;
  unsigned n_cores = 16;
  unsigned n_banks = 32;

  void validate() const;
};

// Chunk sizes (in elements) for which lockstep round-robin chunking is conflict-free.
unsigned min_chunk(const LayoutParams& lp);
unsigned max_chunk(const LayoutParams& lp);

// n = bytes per core.
uint32_t misaligned_sub_buffer(uint32_t n, const LayoutParams& lp = {});
uint32_t misaligned_total(uint32_t n, const LayoutParams& lp = {});
uint32_t misaligned_offset(unsigned core, uint32_t n, const LayoutParams& lp = {});

// Bump allocator over a TCDM window.
class L1Allocator {
 public:
  explicit L1Allocator(uint32_t base = mmap::TCDM_BASE, uint32_t bytes = 131072, LayoutParams lp = {});

  uint32_t alloc(uint32_t bytes, uint32_t align = 4);
  // Base of a misaligned_total(n) region; core i's buffer starts at
  // base + misaligned_offset(i, n), on bank i.
  uint32_t misaligned_alloc(uint32_t n);
  // n_cores contiguous buffers of n bytes (stride rounded up to w), the first
  // one on bank 0.
  uint32_t naive_alloc(uint32_t n);
  uint32_t naive_stride(uint32_t n) const;
  uint32_t top() const { return top_; }

 private:
  uint32_t base_;
  uint32_t end_;
  uint32_t top_;
  LayoutParams lp_;
};

enum class Layout : uint8_t { Naive, Misaligned };
enum class Path : uint8_t { Hardware, Software };
enum class ExecMode : uint8_t { MIMD, VLEM };

const char* layout_name(Layout l);
const char* path_name(Path p);
const char* exec_mode_name(ExecMode m);

struct ConvSpec {
  unsigned H = 16, W = 16, C_in = 16, C_out = 16, K = 3, pad = 1;
  unsigned act_bits = 8, wgt_bits = 8;
  bool act_signed = true, wgt_signed = true;
  uint64_t seed = 1;

  unsigned H_out() const { return H + 2 * pad - K + 1; }
  unsigned W_out() const { return W + 2 * pad - K + 1; }
  unsigned pixels() const { return H_out() * W_out(); }
  unsigned reduction() const { return K * K * C_in; }
  uint64_t macs() const { return uint64_t{pixels()} * C_out * reduction(); }
  void validate() const;  // throws KernelError
};

// C[M x N] = A[M x Kd] * B[N x Kd]^T; A rows are the activations.
struct MatmulSpec {
  unsigned M = 128, N = 32, Kd = 256;
  unsigned act_bits = 8, wgt_bits = 8;
  bool act_signed = true, wgt_signed = true;
  uint64_t seed = 1;

  uint64_t macs() const { return uint64_t{M} * N * Kd; }
  void validate() const;
};

// Operand roles for a (act_bits, wgt_bits) pair: A is the wider operand,
// activations when equal. Throws KernelError for unsupported signedness.
struct Roles {
  simd::SimdFormat fmt;
  bool act_is_a = true;
};
Roles roles_for(unsigned act_bits, unsigned wgt_bits, bool act_signed, bool wgt_signed);

// Uniformly distributed lane values for a precision and signedness.
std::vector<int32_t> random_values(size_t n, unsigned bits, bool is_signed, uint64_t seed);

// Reference arithmetic on unbounded integers, reduced to wrapping 32-bit.
std::vector<int32_t> golden_matmul(const std::vector<int32_t>& a, const std::vector<int32_t>& b, unsigned M,
                                   unsigned N, unsigned Kd);
// input: H x W x C_in (HWC); result: (H_out * W_out) x (K * K * C_in), taps in (ky, kx, ci) order.
std::vector<int32_t> im2col_ref(const std::vector<int32_t>& input, const ConvSpec& spec);
// weights: C_out x K x K x C_in; result: (H_out * W_out) x C_out.
std::vector<int32_t> golden_conv2d(const std::vector<int32_t>& input, const std::vector<int32_t>& weights,
                                   const ConvSpec& spec);

// Register blocking of the matmul inner loop: pixels (rows) x channels.
struct Blocking {
  unsigned pixels = 2;
  unsigned channels = 4;
};

struct InnerCost {
  unsigned instructions = 0;  // per inner-loop iteration
  unsigned dotps = 0;
  unsigned macs = 0;
};
// Static cost of one inner-loop iteration. Throws KernelError when the path
// cannot express the format.
InnerCost inner_cost(Path path, const Roles& r, unsigned act_bits, unsigned wgt_bits, Blocking b);
// Cheapest blocking per MAC that divides the row and channel counts.
Blocking choose_blocking(Path path, const Roles& r, unsigned act_bits, unsigned wgt_bits, unsigned rows_per_core,
                         unsigned channels);

struct GenOptions {
  ExecMode mode = ExecMode::VLEM;
  Path path = Path::Hardware;
  Layout layout = Layout::Misaligned;
  std::optional<Blocking> blocking;
  unsigned n_cores = 16;
};

struct Expect {
  uint32_t addr;
  uint8_t width;
  uint32_t value;
};

struct Kernel {
  std::string name;
  std::string source;
  std::vector<Expect> expect;
  uint64_t macs = 0;
  Blocking blocking;
  bool mixed = false;
};

// Labels delimiting the matmul inner loop in generated sources.
inline constexpr const char* kInnerBegin = "inner_begin";
inline constexpr const char* kInnerEnd = "inner_end";

Kernel gen_conv(const ConvSpec& spec, const GenOptions& opt);
Kernel gen_matmul(const MatmulSpec& spec, const GenOptions& opt);
// Element-wise c = a + b over n elements of s bytes, round-robin chunks per core.
Kernel gen_vecadd(unsigned n, unsigned chunk, unsigned s, ExecMode mode = ExecMode::VLEM, uint64_t seed = 1,
                  unsigned n_cores = 16);

struct Verification {
  bool ok = true;
  size_t mismatches = 0;
  std::string first;  // description of the first mismatch
};
Verification verify(const Kernel& k, const Cluster& c);

// Expectation files: one "address width value" line per check, hex or
// decimal, '#' comments. Throws ConfigError with origin:line on bad lines.
std::string format_expect(const std::vector<Expect>& expect);
std::vector<Expect> parse_expect(std::string_view text, const std::string& origin = "<expect>");

struct InnerLoopStats {
  uint64_t retired = 0;  // instructions retired inside the inner loop, all cores
  uint64_t dotps = 0;
};
InnerLoopStats inner_loop_stats(const Program& p, const Metrics& m);

struct BenchResult {
  std::string name;
  Metrics metrics;
  energy::Breakdown energy;
  std::vector<energy::Activity> activity;  // per core, for re-pricing
  double macs_per_cycle = 0;
  Verification verification;
};

// Assembles, loads, runs and verifies. Simulation errors propagate.
BenchResult run_bench(const Kernel& k, const ClusterConfig& cfg, const energy::Params& params);

struct CalibrationReport {
  bool pass = false;
  double ratio = 0;        // VLEM pJ/cycle over MIMD pJ/cycle
  double cycle_delta = 0;  // (VLEM - MIMD) / MIMD cycles
  double mimd_pj_per_cycle = 0;
  double vlem_pj_per_cycle = 0;
  energy::UnitArray unit_delta{};  // VLEM minus MIMD pJ/cycle, per unit
  energy::Unit vlem_largest = energy::Unit::IDEX;
  bool verified = false;
  std::string diagnostic;
};

inline constexpr double kCalibLow = 0.60;
inline constexpr double kCalibHigh = 0.64;

// The 8-bit parallel matmul used to calibrate energy parameters.
MatmulSpec calibration_matmul();
CalibrationReport calibrate_check(const energy::Params& params, const ClusterConfig& cfg = {});

}  // namespace csim::kernels
