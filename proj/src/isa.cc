#include "clustersim/isa.h"

#include <fmt/format.h>

#include <array>
#include <stdexcept>

namespace csim {

namespace {

constexpr std::array<OpInfo, static_cast<size_t>(Op::COUNT_)> kTable{{
    {"add", Op::ADD, Shape::R, false},
    {"sub", Op::SUB, Shape::R, false},
    {"and", Op::AND, Shape::R, false},
    {"or", Op::OR, Shape::R, false},
    {"xor", Op::XOR, Shape::R, false},
    {"sll", Op::SLL, Shape::R, false},
    {"srl", Op::SRL, Shape::R, false},
    {"sra", Op::SRA, Shape::R, false},
    {"slt", Op::SLT, Shape::R, false},
    {"sltu", Op::SLTU, Shape::R, false},
    {"addi", Op::ADDI, Shape::I, false},
    {"andi", Op::ANDI, Shape::I, false},
    {"ori", Op::ORI, Shape::I, false},
    {"xori", Op::XORI, Shape::I, false},
    {"slli", Op::SLLI, Shape::I, false},
    {"srli", Op::SRLI, Shape::I, false},
    {"srai", Op::SRAI, Shape::I, false},
    {"slti", Op::SLTI, Shape::I, false},
    {"lui", Op::LUI, Shape::U, false},
    {"auipc", Op::AUIPC, Shape::U, false},
    {"mul", Op::MUL, Shape::R, false},
    {"mulh", Op::MULH, Shape::R, false},
    {"div", Op::DIV, Shape::R, false},
    {"rem", Op::REM, Shape::R, false},
    {"lw", Op::LW, Shape::Load, false},
    {"lh", Op::LH, Shape::Load, false},
    {"lhu", Op::LHU, Shape::Load, false},
    {"lb", Op::LB, Shape::Load, false},
    {"lbu", Op::LBU, Shape::Load, false},
    {"sw", Op::SW, Shape::Store, false},
    {"sh", Op::SH, Shape::Store, false},
    {"sb", Op::SB, Shape::Store, false},
    {"beq", Op::BEQ, Shape::Branch, false},
    {"bne", Op::BNE, Shape::Branch, false},
    {"blt", Op::BLT, Shape::Branch, false},
    {"bge", Op::BGE, Shape::Branch, false},
    {"bltu", Op::BLTU, Shape::Branch, false},
    {"bgeu", Op::BGEU, Shape::Branch, false},
    {"jal", Op::JAL, Shape::Jal, false},
    {"jalr", Op::JALR, Shape::Jalr, false},
    {"csrrw", Op::CSRRW, Shape::Csr, false},
    {"csrrs", Op::CSRRS, Shape::Csr, false},
    {"csrrc", Op::CSRRC, Shape::Csr, false},
    {"csrrwi", Op::CSRRWI, Shape::CsrI, false},
    {"lp.setup", Op::LP_SETUP, Shape::LpSetup, false},
    {"lp.count", Op::LP_COUNT, Shape::LpCount, false},
    {"lp.start", Op::LP_START, Shape::LpAddr, false},
    {"lp.end", Op::LP_END, Shape::LpAddr, false},
    {"p.lw", Op::P_LW, Shape::PLoad, false},
    {"p.sw", Op::P_SW, Shape::PStore, false},
    {"p.extract", Op::P_EXTRACT, Shape::Extract, false},
    {"p.extractu", Op::P_EXTRACTU, Shape::Extract, false},
    {"pv.packlo.b", Op::PV_PACKLO_B, Shape::R, false},
    {"pv.packhi.b", Op::PV_PACKHI_B, Shape::R, false},
    {"pv.dotp", Op::PV_DOTP, Shape::R, true},
    {"pv.dotpu", Op::PV_DOTPU, Shape::R, true},
    {"pv.dotpus", Op::PV_DOTPUS, Shape::R, true},
    {"pv.sdotp", Op::PV_SDOTP, Shape::R, true},
    {"pv.sdotpu", Op::PV_SDOTPU, Shape::R, true},
    {"pv.sdotpus", Op::PV_SDOTPUS, Shape::R, true},
}};

constexpr bool table_is_indexed() {
  for (size_t i = 0; i < kTable.size(); ++i) {
    if (static_cast<size_t>(kTable[i].op) != i) return false;
  }
  return true;
}
static_assert(table_is_indexed(), "op table order must follow the Op enum");

}  // namespace

std::span<const OpInfo> op_table() { return kTable; }

const OpInfo& op_info(Op op) { return kTable[static_cast<size_t>(op)]; }

std::optional<Op> op_from_mnemonic(std::string_view m) {
  for (const auto& e : kTable) {
    if (e.mnemonic == m) return e.op;
  }
  return std::nullopt;
}

bool Instruction::is_memory() const {
  switch (op_info(op).shape) {
    case Shape::Load: case Shape::Store: case Shape::PLoad: case Shape::PStore: return true;
    default: return false;
  }
}

bool Instruction::is_store() const {
  auto s = op_info(op).shape;
  return s == Shape::Store || s == Shape::PStore;
}

simd::SignMode dotp_sign(Op op) {
  switch (op) {
    case Op::PV_DOTP: case Op::PV_SDOTP: return simd::SignMode::SS;
    case Op::PV_DOTPU: case Op::PV_SDOTPU: return simd::SignMode::UU;
    case Op::PV_DOTPUS: case Op::PV_SDOTPUS: return simd::SignMode::US;
    default: throw std::logic_error("dotp_sign on a non-dotp opcode");
  }
}

bool dotp_accumulates(Op op) {
  return op == Op::PV_SDOTP || op == Op::PV_SDOTPU || op == Op::PV_SDOTPUS;
}

namespace csr {

std::optional<uint32_t> from_name(std::string_view n) {
  if (n == "simd_fmt") return SIMD_FMT;
  if (n == "mp_macctl") return MP_MACCTL;
  if (n == "mp_state") return MP_STATE;
  if (n == "mhartid") return MHARTID;
  return std::nullopt;
}

const char* name(uint32_t addr) {
  switch (addr) {
    case SIMD_FMT: return "simd_fmt";
    case MP_MACCTL: return "mp_macctl";
    case MP_STATE: return "mp_state";
    case MHARTID: return "mhartid";
    default: return nullptr;
  }
}

}  // namespace csr

namespace {

std::string hex_addr(int32_t v) { return fmt::format("0x{:x}", static_cast<uint32_t>(v)); }

std::string imm_text(int32_t v) {
  if (v > 4095 || v < -4096) return hex_addr(v);
  return std::to_string(v);
}

std::string csr_text(int32_t addr) {
  const char* n = csr::name(static_cast<uint32_t>(addr));
  return n ? std::string(n) : hex_addr(addr);
}

}  // namespace

std::string format_instruction(const Instruction& in) {
  const OpInfo& info = op_info(in.op);
  auto m = info.mnemonic;
  switch (info.shape) {
    case Shape::R: return fmt::format("{} x{}, x{}, x{}", m, in.rd, in.rs1, in.rs2);
    case Shape::I: return fmt::format("{} x{}, x{}, {}", m, in.rd, in.rs1, imm_text(in.imm));
    case Shape::U: return fmt::format("{} x{}, {}", m, in.rd, hex_addr(in.imm));
    case Shape::Load: return fmt::format("{} x{}, {}(x{})", m, in.rd, imm_text(in.imm), in.rs1);
    case Shape::Store: return fmt::format("{} x{}, {}(x{})", m, in.rs2, imm_text(in.imm), in.rs1);
    case Shape::Branch: return fmt::format("{} x{}, x{}, {}", m, in.rs1, in.rs2, hex_addr(in.imm));
    case Shape::Jal: return fmt::format("{} x{}, {}", m, in.rd, hex_addr(in.imm));
    case Shape::Jalr: return fmt::format("{} x{}, {}(x{})", m, in.rd, imm_text(in.imm), in.rs1);
    case Shape::Csr: return fmt::format("{} x{}, {}, x{}", m, in.rd, csr_text(in.imm), in.rs1);
    case Shape::CsrI: return fmt::format("{} x{}, {}, {}", m, in.rd, csr_text(in.imm), in.imm2);
    case Shape::LpSetup: return fmt::format("{} {}, x{}, {}", m, in.imm, in.rs1, hex_addr(in.imm2));
    case Shape::LpCount: return fmt::format("{} {}, x{}", m, in.imm, in.rs1);
    case Shape::LpAddr: return fmt::format("{} {}, {}", m, in.imm, hex_addr(in.imm2));
    case Shape::PLoad: return fmt::format("{} x{}, {}(x{}!)", m, in.rd, imm_text(in.imm), in.rs1);
    case Shape::PStore: return fmt::format("{} x{}, {}(x{}!)", m, in.rs2, imm_text(in.imm), in.rs1);
    case Shape::Extract: return fmt::format("{} x{}, x{}, {}, {}", m, in.rd, in.rs1, in.imm, in.imm2);
  }
  return std::string(m);
}

}  // namespace csim
