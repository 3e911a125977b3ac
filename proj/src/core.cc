#include "clustersim/core.h"

#include <fmt/format.h>

#include <algorithm>
#include <limits>

namespace csim {

SimTrap::SimTrap(const std::string& what, unsigned core, uint32_t pc_, uint64_t cyc)
    : std::runtime_error(fmt::format("trap on core {} at pc 0x{:08x}: {}", core, pc_, what)),
      core_id(core),
      pc(pc_),
      cycle(cyc),
      reason(what) {}

unsigned precision_code(unsigned bits) {
  switch (bits) {
    case 16: return 0;
    case 8: return 1;
    case 4: return 2;
    case 2: return 3;
    default: throw std::invalid_argument(fmt::format("no precision code for {} bits", bits));
  }
}

unsigned precision_from_code(unsigned code) {
  static const unsigned bits[4] = {16, 8, 4, 2};
  return bits[code & 3];
}

uint32_t encode_simd_fmt(unsigned a_bits, unsigned b_bits, simd::SignMode sign) {
  return precision_code(a_bits) | precision_code(b_bits) << 2 | static_cast<uint32_t>(sign) << 4;
}

void Core::trap(const std::string& why) const { throw SimTrap(why, id_, pc_); }

void Core::reset(uint32_t pc) {
  pc_ = pc;
  regs_.fill(0);
  csr_ = CsrFile{};
  loops_ = {};
  retired_ = 0;
  macctl_zero_warnings_ = 0;
  pending_.reset();
}

simd::SimdFormat Core::format(simd::SignMode sign) const {
  simd::SimdFormat f;
  f.a = simd::Precision{precision_from_code(csr_.simd_fmt & 3)};
  f.b = simd::Precision{precision_from_code((csr_.simd_fmt >> 2) & 3)};
  f.sign = sign;
  return f;
}

uint32_t Core::read_csr(uint32_t addr) const {
  switch (addr) {
    case csr::SIMD_FMT: return csr_.simd_fmt;
    case csr::MP_MACCTL: return csr_.mp_macctl;
    case csr::MP_STATE: return (csr_.mac_counter & 0xFFFFu) | (csr_.slice & 0xFu) << 16;
    case csr::MHARTID: return id_;
    default: trap(fmt::format("read of unimplemented CSR 0x{:03x}", addr));
  }
}

void Core::write_csr(uint32_t addr, uint32_t v) {
  switch (addr) {
    case csr::SIMD_FMT: {
      unsigned a = precision_from_code(v & 3), b = precision_from_code((v >> 2) & 3);
      unsigned sign = (v >> 4) & 3;
      if (b > a) trap(fmt::format("SIMD_FMT write 0x{:x}: operand B ({} bit) wider than A ({} bit)", v, b, a));
      if (sign == 3) trap(fmt::format("SIMD_FMT write 0x{:x}: invalid sign mode", v));
      csr_.simd_fmt = v & 0x3F;
      csr_.slice = std::min(csr_.slice, a / b - 1);
      return;
    }
    case csr::MP_MACCTL:
      csr_.mp_macctl = v & 0xFFFFu;
      return;
    case csr::MP_STATE: {
      csr_.mac_counter = v & 0xFFFFu;
      unsigned sc = format(simd::SignMode::SS).slice_count();
      csr_.slice = std::min<uint32_t>((v >> 16) & 0xFu, sc - 1);
      return;
    }
    case csr::MHARTID: trap("write to read-only CSR mhartid");
    default: trap(fmt::format("write of unimplemented CSR 0x{:03x}", addr));
  }
}

void Core::mpc_advance() {
  uint32_t target = csr_.mp_macctl;
  if (target == 0) {
    ++macctl_zero_warnings_;
    target = 1;
  }
  if (++csr_.mac_counter >= target) {
    csr_.mac_counter = 0;
    unsigned sc = format(simd::SignMode::SS).slice_count();
    csr_.slice = (csr_.slice + 1) % sc;
  }
}

// Sequential successor with hardware-loop back edges; level 0 is the inner loop.
uint32_t Core::next_pc(uint32_t pc) {
  uint32_t next = pc + 4;
  for (auto& l : loops_) {
    if (l.count > 0 && next == l.end) {
      if (--l.count > 0) return l.start;
    }
  }
  return next;
}

namespace {

uint32_t field(uint32_t word, unsigned len, unsigned pos, bool is_signed) {
  return static_cast<uint32_t>(simd::extend_lane(simd::lane_bits(word >> pos, len, 0), len, is_signed));
}

}  // namespace

CoreEvent Core::execute(const Instruction& in) {
  if (pending_) trap("execute while a memory access is pending");
  CoreEvent ev;
  const uint32_t rs1 = regs_[in.rs1], rs2 = regs_[in.rs2];
  const int32_t s1 = static_cast<int32_t>(rs1), s2 = static_cast<int32_t>(rs2);
  const uint32_t imm = static_cast<uint32_t>(in.imm);
  auto wr = [&](uint32_t v) { set_reg(in.rd, v); };
  auto jump = [&](uint32_t target) {
    ev.taken = true;
    ev.cycles = 2;
    retire(target);
  };
  auto seq = [&] { retire(next_pc(pc_)); };
  auto memop = [&](uint32_t addr, uint8_t width, bool store, uint32_t data) {
    if (addr % width) trap(fmt::format("misaligned {}-byte access at 0x{:08x}", width, addr));
    ev.mem = MemRequest{id_, addr, store, width, data};
    pending_ = Pending{in.op, in.rd, in.rs1, addr, rs1 + imm};
  };

  switch (in.op) {
    case Op::ADD: wr(rs1 + rs2); seq(); break;
    case Op::SUB: wr(rs1 - rs2); seq(); break;
    case Op::AND: wr(rs1 & rs2); seq(); break;
    case Op::OR: wr(rs1 | rs2); seq(); break;
    case Op::XOR: wr(rs1 ^ rs2); seq(); break;
    case Op::SLL: wr(rs1 << (rs2 & 31)); seq(); break;
    case Op::SRL: wr(rs1 >> (rs2 & 31)); seq(); break;
    case Op::SRA: wr(static_cast<uint32_t>(s1 >> (rs2 & 31))); seq(); break;
    case Op::SLT: wr(s1 < s2); seq(); break;
    case Op::SLTU: wr(rs1 < rs2); seq(); break;
    case Op::ADDI: wr(rs1 + imm); seq(); break;
    case Op::ANDI: wr(rs1 & imm); seq(); break;
    case Op::ORI: wr(rs1 | imm); seq(); break;
    case Op::XORI: wr(rs1 ^ imm); seq(); break;
    case Op::SLLI: wr(rs1 << (imm & 31)); seq(); break;
    case Op::SRLI: wr(rs1 >> (imm & 31)); seq(); break;
    case Op::SRAI: wr(static_cast<uint32_t>(s1 >> (imm & 31))); seq(); break;
    case Op::SLTI: wr(s1 < in.imm); seq(); break;
    case Op::LUI: wr(imm << 12); seq(); break;
    case Op::AUIPC: wr(pc_ + (imm << 12)); seq(); break;
    case Op::MUL: wr(rs1 * rs2); seq(); break;
    case Op::MULH: wr(static_cast<uint32_t>((int64_t{s1} * int64_t{s2}) >> 32)); seq(); break;
    case Op::DIV:
      if (s2 == 0) wr(0xFFFFFFFFu);
      else if (s1 == std::numeric_limits<int32_t>::min() && s2 == -1) wr(rs1);
      else wr(static_cast<uint32_t>(s1 / s2));
      seq();
      break;
    case Op::REM:
      if (s2 == 0) wr(rs1);
      else if (s1 == std::numeric_limits<int32_t>::min() && s2 == -1) wr(0);
      else wr(static_cast<uint32_t>(s1 % s2));
      seq();
      break;
    case Op::LW: memop(rs1 + imm, 4, false, 0); break;
    case Op::LH: case Op::LHU: memop(rs1 + imm, 2, false, 0); break;
    case Op::LB: case Op::LBU: memop(rs1 + imm, 1, false, 0); break;
    case Op::SW: memop(rs1 + imm, 4, true, rs2); break;
    case Op::SH: memop(rs1 + imm, 2, true, rs2 & 0xFFFFu); break;
    case Op::SB: memop(rs1 + imm, 1, true, rs2 & 0xFFu); break;
    case Op::P_LW: memop(rs1, 4, false, 0); break;
    case Op::P_SW: memop(rs1, 4, true, rs2); break;
    case Op::BEQ: if (rs1 == rs2) jump(imm); else seq(); break;
    case Op::BNE: if (rs1 != rs2) jump(imm); else seq(); break;
    case Op::BLT: if (s1 < s2) jump(imm); else seq(); break;
    case Op::BGE: if (s1 >= s2) jump(imm); else seq(); break;
    case Op::BLTU: if (rs1 < rs2) jump(imm); else seq(); break;
    case Op::BGEU: if (rs1 >= rs2) jump(imm); else seq(); break;
    case Op::JAL: wr(pc_ + 4); jump(imm); break;
    case Op::JALR: {
      uint32_t t = (rs1 + imm) & ~1u;
      wr(pc_ + 4);
      jump(t);
      break;
    }
    case Op::CSRRW: {
      uint32_t old = in.rd ? read_csr(imm) : 0;
      write_csr(imm, rs1);
      wr(old);
      seq();
      break;
    }
    case Op::CSRRS: case Op::CSRRC: {
      uint32_t old = read_csr(imm);
      if (in.rs1) write_csr(imm, in.op == Op::CSRRS ? (old | rs1) : (old & ~rs1));
      wr(old);
      seq();
      break;
    }
    case Op::CSRRWI: {
      uint32_t old = in.rd ? read_csr(imm) : 0;
      write_csr(imm, static_cast<uint32_t>(in.imm2));
      wr(old);
      seq();
      break;
    }
    case Op::LP_SETUP: {
      HwLoop& l = loops_[in.imm & 1];
      uint32_t end = static_cast<uint32_t>(in.imm2);
      if (end <= pc_ + 4) trap("lp.setup with an empty loop body");
      l.start = pc_ + 4;
      l.end = end;
      l.count = rs1;
      if (l.count == 0) retire(end);  // zero iterations skip the body
      else seq();
      break;
    }
    case Op::LP_COUNT: loops_[in.imm & 1].count = rs1; seq(); break;
    case Op::LP_START: loops_[in.imm & 1].start = static_cast<uint32_t>(in.imm2); seq(); break;
    case Op::LP_END: loops_[in.imm & 1].end = static_cast<uint32_t>(in.imm2); seq(); break;
    case Op::P_EXTRACT: wr(field(rs1, in.imm, in.imm2, true)); seq(); break;
    case Op::P_EXTRACTU: wr(field(rs1, in.imm, in.imm2, false)); seq(); break;
    case Op::PV_PACKLO_B: wr(simd::pack_byte(regs_[in.rd], rs1, rs2, simd::Half::LO)); seq(); break;
    case Op::PV_PACKHI_B: wr(simd::pack_byte(regs_[in.rd], rs1, rs2, simd::Half::HI)); seq(); break;
    case Op::PV_DOTP: case Op::PV_DOTPU: case Op::PV_DOTPUS:
    case Op::PV_SDOTP: case Op::PV_SDOTPU: case Op::PV_SDOTPUS: {
      simd::SimdFormat f = format(dotp_sign(in.op));
      unsigned slice = std::min(csr_.slice, f.slice_count() - 1);
      int32_t r = dotp_accumulates(in.op) ? simd::sdotp(rs1, rs2, f, slice, static_cast<int32_t>(regs_[in.rd]))
                                          : simd::dotp(rs1, rs2, f, slice);
      wr(static_cast<uint32_t>(r));
      if (f.mixed()) mpc_advance();
      ev.macs = simd::lanes(f.a);
      ev.dotp = true;
      seq();
      break;
    }
    case Op::COUNT_: trap("illegal instruction");
  }
  return ev;
}

void Core::complete_access(uint32_t raw) {
  if (!pending_) trap("no pending memory access");
  const Pending& in = *pending_;
  switch (in.op) {
    case Op::LW: case Op::P_LW: set_reg(in.rd, raw); break;
    case Op::LH: set_reg(in.rd, static_cast<uint32_t>(simd::extend_lane(raw & 0xFFFFu, 16, true))); break;
    case Op::LHU: set_reg(in.rd, raw & 0xFFFFu); break;
    case Op::LB: set_reg(in.rd, static_cast<uint32_t>(simd::extend_lane(raw & 0xFFu, 8, true))); break;
    case Op::LBU: set_reg(in.rd, raw & 0xFFu); break;
    default: break;
  }
  if (in.op == Op::P_LW || in.op == Op::P_SW) {
    // Loaded value wins when rd == rs1.
    uint32_t updated = pending_->post_inc;
    if (!(in.op == Op::P_LW && in.rd == in.rs1)) set_reg(in.rs1, updated);
  }
  pending_.reset();
  retire(next_pc(pc_));
}

CoreEvent step(Core& core, const Program& prog, DataPort& port) {
  long idx = prog.index_of(core.pc());
  if (idx < 0) {
    if (core.pc() == prog.text_end()) {
      CoreEvent ev;
      ev.halted = true;
      ev.cycles = 0;
      return ev;
    }
    core.trap("instruction fetch outside text");
  }
  CoreEvent ev = core.execute(prog.text[static_cast<size_t>(idx)]);
  if (ev.mem) {
    const MemRequest& r = *ev.mem;
    if (r.is_store) {
      port.store(r.addr, r.width, r.wdata);
      core.complete_access(0);
    } else {
      core.complete_access(port.load(r.addr, r.width));
    }
  }
  return ev;
}

}  // namespace csim
