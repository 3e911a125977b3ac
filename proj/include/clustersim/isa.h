// Instruction set: opcodes, operand shapes, decoded instruction form.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "clustersim/simd.h"

namespace csim {

enum class Op : uint8_t {
  ADD, SUB, AND, OR, XOR, SLL, SRL, SRA, SLT, SLTU,
  ADDI, ANDI, ORI, XORI, SLLI, SRLI, SRAI, SLTI,
  LUI, AUIPC,
  MUL, MULH, DIV, REM,
  LW, LH, LHU, LB, LBU,
  SW, SH, SB,
  BEQ, BNE, BLT, BGE, BLTU, BGEU,
  JAL, JALR,
  CSRRW, CSRRS, CSRRC, CSRRWI,
  LP_SETUP, LP_COUNT, LP_START, LP_END,
  P_LW, P_SW,
  P_EXTRACT, P_EXTRACTU,
  PV_PACKLO_B, PV_PACKHI_B,
  PV_DOTP, PV_DOTPU, PV_DOTPUS,
  PV_SDOTP, PV_SDOTPU, PV_SDOTPUS,
  COUNT_
};

// Textual operand layout of a mnemonic.
enum class Shape : uint8_t {
  R,        // rd, rs1, rs2
  I,        // rd, rs1, imm
  U,        // rd, imm
  Load,     // rd, imm(rs1)
  Store,    // rs2, imm(rs1)
  Branch,   // rs1, rs2, target
  Jal,      // rd, target
  Jalr,     // rd, imm(rs1)
  Csr,      // rd, csr, rs1
  CsrI,     // rd, csr, uimm
  LpSetup,  // level, rs1, target
  LpCount,  // level, rs1
  LpAddr,   // level, target
  PLoad,    // rd, imm(rs1!)
  PStore,   // rs2, imm(rs1!)
  Extract,  // rd, rs1, len, pos
};

struct OpInfo {
  std::string_view mnemonic;
  Op op;
  Shape shape;
  bool simd_virtual;
};

std::span<const OpInfo> op_table();
const OpInfo& op_info(Op op);
std::optional<Op> op_from_mnemonic(std::string_view m);

struct SourceSpan {
  std::string file;
  int line = 0;
  int column = 0;
};

struct Instruction {
  Op op = Op::ADDI;
  uint8_t rd = 0;
  uint8_t rs1 = 0;
  uint8_t rs2 = 0;
  // imm: immediate, memory offset, absolute target, CSR address, loop level,
  // or extract length. imm2: second field (loop target, extract position,
  // csrrwi immediate).
  int32_t imm = 0;
  int32_t imm2 = 0;
  SourceSpan span;

  bool is_simd_virtual() const { return op_info(op).simd_virtual; }
  bool is_memory() const;
  bool is_store() const;

  // Equality ignores the source span.
  bool same_as(const Instruction& o) const {
    return op == o.op && rd == o.rd && rs1 == o.rs1 && rs2 == o.rs2 && imm == o.imm && imm2 == o.imm2;
  }
};

// Sign mode selected by a dot-product mnemonic.
simd::SignMode dotp_sign(Op op);
bool dotp_accumulates(Op op);

namespace csr {
constexpr uint32_t SIMD_FMT = 0x7C0;
constexpr uint32_t MP_MACCTL = 0x7C1;
constexpr uint32_t MP_STATE = 0x7C2;
constexpr uint32_t MHARTID = 0xF14;
std::optional<uint32_t> from_name(std::string_view name);
const char* name(uint32_t addr);  // nullptr when unnamed
}  // namespace csr

std::string format_instruction(const Instruction& in);

}  // namespace csim
