// 16-core cluster: banked TCDM, round-robin interconnect, lockstep unit,
// event unit and a two-level instruction cache, advanced cycle by cycle.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "clustersim/assembler.h"
#include "clustersim/config.h"
#include "clustersim/core.h"
#include "clustersim/energy.h"

namespace csim {

enum class Mode : uint8_t { MIMD, VLEM };

struct CoreMetrics {
  uint64_t retired = 0;
  uint64_t conflict_stall_cycles = 0;
  uint64_t icache_stall_cycles = 0;
  uint64_t l0_misses = 0;
  uint64_t l15_misses = 0;
};

struct Metrics {
  uint64_t cycles = 0;
  uint64_t tcdm_accesses = 0;  // bank accesses
  uint64_t conflict_stall_cycles = 0;
  uint64_t broadcasts = 0;
  uint64_t vlem_entries = 0;
  uint64_t vlem_exits = 0;
  uint64_t cycles_in_vlem = 0;
  uint64_t macs = 0;
  uint64_t divergence_warnings = 0;
  uint64_t same_address_rw_warnings = 0;
  uint64_t macctl_zero_warnings = 0;
  uint64_t barriers = 0;
  std::vector<CoreMetrics> per_core;
  std::vector<uint64_t> retired_per_pc;  // indexed by text slot, summed over cores

  uint64_t instructions_retired() const;
  double macs_per_cycle() const { return cycles ? static_cast<double>(macs) / static_cast<double>(cycles) : 0.0; }
};

class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(unsigned core, uint32_t leader_pc, uint32_t follower_pc, uint64_t cycle);
  unsigned core_id;
  uint32_t leader_pc;
  uint32_t follower_pc;
  uint64_t cycle;
};

class DeadlockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TimeoutError : public std::runtime_error {
 public:
  TimeoutError(uint64_t cycles, Metrics partial);
  Metrics partial;
};

// ((addr - tcdm_base) / w) mod n_banks. Throws std::out_of_range outside TCDM.
unsigned bank_of(const ClusterConfig& cfg, uint32_t addr);
bool in_tcdm(const ClusterConfig& cfg, uint32_t addr);

// One grant per bank, round-robin from each bank's pointer. Returns the
// indices (into reqs) of granted requests and advances the pointers.
std::vector<size_t> arbitrate_mimd(const std::vector<MemRequest>& reqs, std::vector<unsigned>& rr_ptr,
                                   const ClusterConfig& cfg);

struct VlemSchedule {
  unsigned cycles = 0;        // all grants release after this many cycles
  unsigned bank_accesses = 0;
  bool broadcast = false;
  std::vector<unsigned> order;  // service order (indices into reqs)
  bool same_address_rw = false;
};

// Grant-hold schedule: every request is served, all grants release together.
// Identical-address loads from every requester collapse into one broadcast
// access when enabled. Advances the per-bank pointers.
VlemSchedule arbitrate_vlem(const std::vector<MemRequest>& reqs, std::vector<unsigned>& rr_ptr,
                            const ClusterConfig& cfg, bool broadcast_enabled);

struct BarrierEvent {
  uint64_t last_arrival = 0;
  uint64_t resume = 0;
};

class Cluster {
 public:
  explicit Cluster(ClusterConfig cfg = {});

  void load(const Program& prog);
  // Runs until every core halts. Throws SimTrap, DivergenceError,
  // DeadlockError or TimeoutError.
  void run();
  // Advances one cycle; returns false once every core has halted.
  bool step_cycle();

  const ClusterConfig& config() const { return cfg_; }
  const Metrics& metrics() const { return metrics_; }
  const std::vector<energy::Activity>& activity() const { return activity_; }
  const std::vector<BarrierEvent>& barrier_log() const { return barrier_log_; }
  const Core& core(unsigned i) const { return ctx_[i].core; }
  Mode mode() const { return mode_; }
  uint64_t now() const { return now_; }
  bool halted() const;

  uint32_t read32(uint32_t addr) const;
  uint8_t read8(uint32_t addr) const;
  void write32(uint32_t addr, uint32_t value);
  std::vector<uint8_t> read_bytes(uint32_t addr, uint32_t n) const;

 private:
  enum class State : uint8_t { Ready, WaitGrant, Barrier, VlemEnter, Halted };
  struct Ctx {
    Core core;
    State st = State::Ready;
    uint64_t ready_at = 0;
    bool fetched = false;
    long slot = -1;
    MemRequest req;
    uint64_t retired_at_entry = 0;
  };

  ClusterConfig cfg_;
  const Program* prog_ = nullptr;
  Program prog_copy_;
  std::vector<Ctx> ctx_;
  std::vector<uint8_t> tcdm_;
  std::vector<uint8_t> l2_;
  std::vector<uint32_t> l0_tags_;   // per core, n_lines each; all-ones = invalid
  std::vector<uint32_t> l15_tags_;
  std::vector<unsigned> rr_ptr_;
  std::vector<energy::Activity> activity_;
  std::vector<BarrierEvent> barrier_log_;
  Metrics metrics_;
  Mode mode_ = Mode::MIMD;
  uint64_t now_ = 0;
  uint32_t barrier_mask_ = 0;
  uint32_t enter_mask_ = 0;
  uint64_t blocked_since_ = 0;
  bool blocked_ = false;
  std::vector<MemRequest> reqs_;
  std::vector<unsigned> req_core_;

  uint32_t all_mask() const { return cfg_.n_cores >= 32 ? 0xFFFFFFFFu : ((1u << cfg_.n_cores) - 1u); }
  unsigned icache_access(unsigned core, uint32_t pc);
  void cycle_mimd();
  void cycle_vlem();
  void finish_tcdm(Ctx& c, const MemRequest& r);
  uint32_t access_memory(const MemRequest& r);
  void handle_periph_mimd(unsigned id, const MemRequest& r);
  void account_cycle(Mode m);
  void release_barrier();
  void check_watchdog();
  void enter_vlem();
  void check_divergence();
  [[noreturn]] void trap_at(unsigned core, const std::string& why) const;
};

}  // namespace csim
