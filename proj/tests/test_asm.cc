#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "clustersim/assembler.h"
#include "clustersim/cluster.h"
#include "support.h"

using namespace csim;

namespace {

void check_round_trip(const Program& p) {
  std::string listing = disassemble(p);
  auto again = assemble(listing);
  REQUIRE_MESSAGE(again.ok(), listing);
  CHECK(testing::same_stream(p, *again.program));
}

}  // namespace

TEST_CASE("single addi") {
  auto p = testing::must_assemble("addi x5, x0, 42\n");
  REQUIRE(p.text.size() == 1);
  const auto& in = p.text[0];
  CHECK(in.op == Op::ADDI);
  CHECK(in.rd == 5);
  CHECK(in.rs1 == 0);
  CHECK(in.imm == 42);
  CHECK(in.span.line == 1);
  CHECK(format_instruction(in) == "addi x5, x0, 42");
}

TEST_CASE("post-increment load and backward jump") {
  auto p = testing::must_assemble("loop: p.lw x8, 4(x9!)\n j loop\n");
  REQUIRE(p.text.size() == 2);
  CHECK(p.text[0].op == Op::P_LW);
  CHECK(p.text[0].rd == 8);
  CHECK(p.text[0].rs1 == 9);
  CHECK(p.text[0].imm == 4);
  CHECK(p.text[1].op == Op::JAL);
  CHECK(p.text[1].rd == 0);
  CHECK(static_cast<uint32_t>(p.text[1].imm) == p.symbol("loop"));
  CHECK(p.symbol("loop") == mmap::L2_BASE);
}

TEST_CASE("virtual simd carries no precision") {
  auto p = testing::must_assemble("pv.sdotp x10, x11, x12\npv.dotpus x1, x2, x3\nadd x1, x2, x3\n");
  CHECK(p.text[0].is_simd_virtual());
  CHECK(p.text[1].is_simd_virtual());
  CHECK_FALSE(p.text[2].is_simd_virtual());
  CHECK(p.text[0].rd == 10);
  CHECK(p.text[0].rs1 == 11);
  CHECK(p.text[0].rs2 == 12);
}

TEST_CASE("forward and backward references assemble identically") {
  auto fwd = testing::must_assemble("  beq x1, x2, L\n  addi x1, x1, 1\nL: addi x2, x2, 1\n");
  auto bwd = testing::must_assemble("  beq x1, x2, 0x1C000008\n  addi x1, x1, 1\n  addi x2, x2, 1\n");
  CHECK(testing::same_stream(fwd, bwd));
}

TEST_CASE("pseudo instructions") {
  auto p = testing::must_assemble("barrier\nvlem.on\nvlem.off\nli x3, 0x12345\nmv x4, x3\nnop\n");
  REQUIRE(p.text.size() >= 6);
  CHECK(p.text[0].op == Op::LW);
  CHECK(p.text[0].rd == 0);
  CHECK(static_cast<uint32_t>(p.text[0].imm) == mmap::EU_BARRIER);
  CHECK(p.text[1].op == Op::ADDI);
  CHECK(p.text[1].rd == kAsmTempReg);
  CHECK(p.text[2].op == Op::SW);
  CHECK(static_cast<uint32_t>(p.text[2].imm) == mmap::VLEM_CTRL);
  CHECK(p.text[3].op == Op::SW);
  CHECK(p.text[3].rs2 == 0);
}

TEST_CASE("data sections and symbols") {
  auto p = testing::must_assemble(
      ".data .l1\nbuf: .word 1, 2, 0xdeadbeef\nb2: .byte 7\n.align 2\nw: .word buf\n"
      ".data .l2\ntbl: .space 8\n.text\n_start: lw x1, 0(x0)\n");
  CHECK(p.symbol("buf") == mmap::TCDM_BASE);
  CHECK(p.symbol("b2") == mmap::TCDM_BASE + 12);
  CHECK(p.symbol("w") == mmap::TCDM_BASE + 16);
  CHECK(p.entry == p.symbol("_start"));
  REQUIRE(p.data.size() == 2);
  CHECK(p.data[0].region == Region::L1);
  CHECK(p.data[0].bytes.size() == 20);
  CHECK(p.data[0].bytes[8] == 0xef);
  CHECK(p.data[0].bytes[16] == 0x00);
  CHECK(p.data[0].bytes[19] == 0x10);
  CHECK(p.data[1].region == Region::L2);
  CHECK(p.data[1].base >= p.text_end());
}

TEST_CASE("l1 data lands in bank 0 word 0") {
  auto p = testing::must_assemble(".data .l1\n.word 0x11223344\n.text\naddi x1, x0, 1\n");
  Cluster c;
  c.load(p);
  CHECK(c.read32(mmap::TCDM_BASE) == 0x11223344u);
  CHECK(bank_of(c.config(), mmap::TCDM_BASE) == 0);
}

TEST_CASE("loading an empty program fails") {
  auto p = testing::must_assemble("");
  CHECK(p.text.empty());
  Cluster c;
  CHECK_THROWS_AS(c.load(p), LoadError);
  std::string listing = disassemble(p);
  CHECK(assemble(listing).ok());
}

TEST_CASE("empty text with data is annotated") {
  auto p = testing::must_assemble(".data .l1\n.word 5\n");
  std::string listing = disassemble(p);
  CHECK(listing.find(".data .l1") != std::string::npos);
  check_round_trip(p);
}

TEST_CASE("error kinds and spans") {
  struct Case {
    const char* src;
    AsmErrorKind kind;
    unsigned line;
  };
  const Case cases[] = {
      {"addi x1, x0, 1\nfoo x1, x2\n", AsmErrorKind::UnknownMnemonic, 2},
      {"addi x1, x0\n", AsmErrorKind::BadOperand, 1},
      {"addi x32, x0, 1\n", AsmErrorKind::BadOperand, 1},
      {"a: nop\na: nop\n", AsmErrorKind::DuplicateLabel, 2},
      {"nop\nj nowhere\n", AsmErrorKind::UndefinedLabel, 2},
      {"nop\n.bogus 1\n", AsmErrorKind::Syntax, 2},
      {".data .l1\n.space 200000\n", AsmErrorKind::SectionOverflow, 2},
      {"slli x1, x1, 32\n", AsmErrorKind::BadOperand, 1},
      {"p.extract x1, x2, 30, 4\n", AsmErrorKind::BadOperand, 1},
      {"lp.setup 2, x1, end\nend: nop\n", AsmErrorKind::BadOperand, 1},
  };
  for (const auto& c : cases) {
    CAPTURE(c.src);
    auto r = assemble(c.src);
    REQUIRE_FALSE(r.ok());
    REQUIRE(!r.errors.empty());
    CHECK(r.errors[0].kind == c.kind);
    CHECK(r.errors[0].span.line == c.line);
    CHECK(r.errors[0].span.column >= 1);
  }
}

TEST_CASE("errors are collected, not fail-fast") {
  auto r = assemble("bogus\naddi x1, x0\nj missing\nnop\n", AsmOptions{.file_name = "k.s"});
  REQUIRE(r.errors.size() == 3);
  CHECK(r.errors[0].span.line == 1);
  CHECK(r.errors[1].span.line == 2);
  CHECK(r.errors[2].span.line == 3);
  CHECK(r.errors[0].to_string().rfind("k.s:1:", 0) == 0);
}

TEST_CASE("malformed corpus never crashes") {
  const std::vector<std::string> corpus = {
      "(", ")", ",", ":", "::", "x:", "1:", ".word", ".word x", ".align 99", ".byte 300", ".space -1",
      "lw x1, (x2)", "lw x1, 4(x2", "lw x1, 4x2)", "p.lw x1, 4(x2)", "lw x1, 4(x2!)", "sw x1",
      "beq x1, x2", "jal", "jalr x1, x2", "csrrw x1, 0x7C0", "csrrw x1, bogus, x2", "lp.setup 0, x1",
      "lp.count 3, x1", "lui x1, 0x100000", "addi x1, x0, 0xFFFFFFFFFF", "addi x1, x0, --1",
      "addi x1, x0, sym+", ".data .l3", ".text extra", "li", "li x1", "mv x1", "pv.sdotp x1, x2",
      "p.extract x1, x2, 0, 0", ".align", "label with space: nop", "\t\t", "# comment only",
      std::string(1, '\0'), "addi x1, x0, 1 # trailing", "\xff\xfe", ".global", "a: b: c: nop",
      "j 0x1C000002",
  };
  std::mt19937 rng(7);
  std::vector<std::string> all = corpus;
  const std::string alphabet = "adilsxw0123456789(),:!.#- \n\tpvj";
  for (int i = 0; i < 300; ++i) {
    std::string s;
    int n = std::uniform_int_distribution<int>(1, 40)(rng);
    for (int k = 0; k < n; ++k) s += alphabet[std::uniform_int_distribution<size_t>(0, alphabet.size() - 1)(rng)];
    all.push_back(s);
  }
  for (const auto& src : all) {
    CAPTURE(src);
    AsmResult r;
    CHECK_NOTHROW(r = assemble(src));
    for (const auto& e : r.errors) CHECK(e.span.line >= 1);
    if (r.ok()) check_round_trip(*r.program);
  }
}

TEST_CASE("round trip of a mixed program") {
  const char* src = R"(
.data .l1
a:  .word 1, -2, 3
    .byte 1, 2, 3
.data .l2
.align 6
b:  .space 64
    .word 0x7fffffff
.text
_start:
    csrrwi x0, 0x7C0, 9
    csrrw x5, mhartid, x0
    lp.setup 0, x6, end
    p.lw x7, 4(x8!)
    p.sw x7, -4(x9!)
    pv.sdotpus x10, x7, x11
end:
    lp.count 1, x3
    lp.start 1, _start
    lp.end 1, end
    p.extractu x1, x2, 4, 28
    pv.packhi.b x1, x2, x3
    lui x4, 0xFFFFF
    auipc x4, 1
    sra x1, x2, x3
    mulh x1, x2, x3
    bgeu x1, x2, _start
    jalr x1, -8(x2)
    lb x1, -1(x2)
    sh x1, 2(x2)
    vlem.on
    barrier
    vlem.off
)";
  auto p = testing::must_assemble(src);
  check_round_trip(p);
  CHECK(p.entry == p.text_base);
}

TEST_CASE("assembly is deterministic") {
  const char* src = "x: addi x1, x1, 1\n bne x1, x2, x\n.data .l1\n.word x\n";
  auto a = testing::must_assemble(src);
  auto b = testing::must_assemble(src);
  CHECK(testing::same_stream(a, b));
  CHECK(disassemble(a) == disassemble(b));
}
