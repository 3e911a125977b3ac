// Two-pass assembler and disassembler for the simulator's textual ISA.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clustersim/config.h"
#include "clustersim/isa.h"

namespace csim {

enum class Region : uint8_t { L1, L2 };

struct DataSection {
  Region region = Region::L1;
  uint32_t base = 0;
  std::vector<uint8_t> bytes;
};

struct Program {
  uint32_t text_base = mmap::L2_BASE;
  std::vector<Instruction> text;
  std::vector<DataSection> data;
  std::map<std::string, uint32_t> symbols;
  uint32_t entry = mmap::L2_BASE;

  uint32_t text_end() const { return text_base + 4u * static_cast<uint32_t>(text.size()); }
  // Index of the instruction at pc, or -1 when pc is outside the text.
  long index_of(uint32_t pc) const {
    if (pc < text_base || pc >= text_end() || (pc - text_base) % 4) return -1;
    return static_cast<long>((pc - text_base) / 4);
  }
  uint32_t symbol(const std::string& name) const;  // throws std::out_of_range
};

enum class AsmErrorKind : uint8_t {
  Syntax,
  UnknownMnemonic,
  BadOperand,
  DuplicateLabel,
  UndefinedLabel,
  SectionOverflow,
};

const char* asm_error_kind_name(AsmErrorKind k);

struct AsmError {
  AsmErrorKind kind;
  SourceSpan span;
  std::string message;

  // "file:line:col: kind: message"
  std::string to_string() const;
};

struct AsmOptions {
  std::string file_name = "<input>";
  uint32_t text_base = mmap::L2_BASE;
  uint32_t l1_base = mmap::TCDM_BASE;
  uint32_t l1_bytes = 131072;
  uint32_t l2_bytes = 512 * 1024;

  static AsmOptions from(const ClusterConfig& c, std::string file_name = "<input>");
};

struct AsmResult {
  std::optional<Program> program;
  std::vector<AsmError> errors;

  bool ok() const { return program.has_value(); }
};

// Register reserved for the vlem.on pseudo-instruction expansion.
constexpr uint8_t kAsmTempReg = 31;

AsmResult assemble(std::string_view source, const AsmOptions& opts = {});

// Listing that assembles back to an identical instruction stream and data image.
std::string disassemble(const Program& program);

}  // namespace csim
