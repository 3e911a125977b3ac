// One in-order core: register file, CSRs, hardware loops, cost model.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "clustersim/assembler.h"
#include "clustersim/isa.h"
#include "clustersim/simd.h"

namespace csim {

// Architectural fault raised while simulating (illegal CSR, misaligned access...).
class SimTrap : public std::runtime_error {
 public:
  SimTrap(const std::string& what, unsigned core_id, uint32_t pc, uint64_t cycle = 0);
  unsigned core_id;
  uint32_t pc;
  uint64_t cycle;
  std::string reason;
};

// Precision codes used in SIMD_FMT: 00->16, 01->8, 10->4, 11->2.
unsigned precision_code(unsigned bits);
unsigned precision_from_code(unsigned code);
uint32_t encode_simd_fmt(unsigned a_bits, unsigned b_bits, simd::SignMode sign);

struct CsrFile {
  uint32_t simd_fmt = 0x5;  // 8x8, SS
  uint32_t mp_macctl = 1;
  uint32_t mac_counter = 0;
  uint32_t slice = 0;
};

struct HwLoop {
  uint32_t start = 0;
  uint32_t end = 0;  // first address after the body
  uint32_t count = 0;
};

struct MemRequest {
  unsigned core_id = 0;
  uint32_t addr = 0;
  bool is_store = false;
  uint8_t width = 4;
  uint32_t wdata = 0;
};

struct CoreEvent {
  uint32_t cycles = 1;  // excluding memory stalls
  std::optional<MemRequest> mem;
  bool taken = false;    // taken branch or jump
  bool halted = false;   // pc reached the end of text; nothing executed
  unsigned macs = 0;
  bool dotp = false;
};

class Core {
 public:
  explicit Core(unsigned id = 0) : id_(id) {}

  void reset(uint32_t pc);

  // Executes `in`, which must be the instruction at pc(). Memory instructions
  // return a request and stay pending until complete_access() is called.
  CoreEvent execute(const Instruction& in);
  // Finishes the pending memory instruction. `raw` is the loaded value
  // zero-extended from the access width; ignored for stores.
  void complete_access(uint32_t raw);
  bool pending() const { return pending_.has_value(); }

  uint32_t read_csr(uint32_t addr) const;
  void write_csr(uint32_t addr, uint32_t value);
  simd::SimdFormat format(simd::SignMode sign) const;

  unsigned id() const { return id_; }
  uint32_t pc() const { return pc_; }
  void set_pc(uint32_t pc) { pc_ = pc; }
  uint32_t reg(unsigned i) const { return regs_[i]; }
  void set_reg(unsigned i, uint32_t v) {
    if (i) regs_[i] = v;
  }
  const std::array<uint32_t, 32>& regs() const { return regs_; }
  const CsrFile& csrs() const { return csr_; }
  const HwLoop& hwloop(unsigned level) const { return loops_[level]; }
  uint64_t retired() const { return retired_; }
  uint64_t macctl_zero_warnings() const { return macctl_zero_warnings_; }

  [[noreturn]] void trap(const std::string& why) const;

 private:
  unsigned id_;
  uint32_t pc_ = 0;
  std::array<uint32_t, 32> regs_{};
  CsrFile csr_;
  std::array<HwLoop, 2> loops_{};
  uint64_t retired_ = 0;
  uint64_t macctl_zero_warnings_ = 0;

  struct Pending {
    Op op;
    uint8_t rd;
    uint8_t rs1;
    uint32_t addr;
    uint32_t post_inc;  // base register value after a post-increment access
  };
  std::optional<Pending> pending_;

  uint32_t next_pc(uint32_t pc);
  void mpc_advance();
  void retire(uint32_t next) {
    pc_ = next;
    ++retired_;
  }
};

// Flat memory used by single-core execution.
class DataPort {
 public:
  virtual ~DataPort() = default;
  virtual uint32_t load(uint32_t addr, unsigned width) = 0;
  virtual void store(uint32_t addr, unsigned width, uint32_t value) = 0;
};

// Fetches from `prog` and completes any memory access immediately through
// `port`. Returns an event with halted set when pc is the end of text.
CoreEvent step(Core& core, const Program& prog, DataPort& port);

}  // namespace csim
