#include <doctest.h>

#include <map>
#include <string>

#include "clustersim/core.h"
#include "support.h"

using namespace csim;

namespace {

class FlatMem : public DataPort {
 public:
  uint32_t load(uint32_t addr, unsigned width) override {
    uint32_t v = 0;
    for (unsigned i = 0; i < width; ++i) v |= uint32_t{bytes[addr + i]} << (8 * i);
    return v;
  }
  void store(uint32_t addr, unsigned width, uint32_t value) override {
    for (unsigned i = 0; i < width; ++i) bytes[addr + i] = static_cast<uint8_t>(value >> (8 * i));
  }
  std::map<uint32_t, uint8_t> bytes;
};

struct Run {
  Core core;
  uint64_t cycles = 0;
  uint64_t taken = 0;
};

Run run(const std::string& src, unsigned id = 0, FlatMem* mem = nullptr) {
  Program p = testing::must_assemble(src);
  FlatMem local;
  FlatMem& m = mem ? *mem : local;
  Run r{Core(id)};
  r.core.reset(p.entry);
  for (int guard = 0; guard < 1000000; ++guard) {
    CoreEvent ev = step(r.core, p, m);
    if (ev.halted) return r;
    r.cycles += ev.cycles;
    r.taken += ev.taken;
  }
  throw std::runtime_error("program did not halt");
}

}  // namespace

TEST_CASE("addi costs one cycle") {
  auto r = run("addi x5, x0, 42\n");
  CHECK(r.core.reg(5) == 42);
  CHECK(r.cycles == 1);
  CHECK(r.core.retired() == 1);
}

TEST_CASE("x0 stays zero") {
  auto r = run("addi x0, x0, 5\nadd x1, x0, x0\n");
  CHECK(r.core.reg(0) == 0);
  CHECK(r.core.reg(1) == 0);
}

TEST_CASE("branch costs") {
  auto taken = run("addi x1, x0, 1\nbne x1, x0, skip\nnop\nskip: nop\n");
  CHECK(taken.core.retired() == 3);
  CHECK(taken.cycles == 1 + 2 + 1);
  auto not_taken = run("bne x0, x0, skip\nnop\nskip: nop\n");
  CHECK(not_taken.core.retired() == 3);
  CHECK(not_taken.cycles == 3);
}

TEST_CASE("hardware loop is zero overhead") {
  for (unsigned k : {1u, 2u, 7u, 100u}) {
    for (unsigned n : {1u, 3u}) {
      std::string body;
      for (unsigned i = 0; i < n; ++i) body += "addi x2, x2, 1\n";
      auto r = run("li x1, " + std::to_string(k) + "\nlp.setup 0, x1, end\n" + body + "end:\n");
      CHECK(r.core.reg(2) == n * k);
      CHECK(r.core.retired() == 2 + n * k);
      CHECK(r.cycles == 2 + n * k);
    }
  }
}

TEST_CASE("hardware loop beats the branch loop on the same body") {
  auto hw = run("li x1, 10\nlp.setup 0, x1, e\naddi x2, x2, 3\ne:\n");
  auto sw = run("li x1, 10\nl: addi x2, x2, 3\naddi x1, x1, -1\nbne x1, x0, l\n");
  CHECK(hw.core.reg(2) == sw.core.reg(2));
  CHECK(hw.cycles < sw.cycles);
}

TEST_CASE("nested hardware loops") {
  auto r = run(
      "li x1, 3\nli x3, 4\n"
      "lp.setup 1, x1, outer\n"
      "  lp.setup 0, x3, inner\n"
      "    addi x2, x2, 1\n"
      "  inner:\n"
      "  addi x4, x4, 1\n"
      "outer:\n");
  CHECK(r.core.reg(2) == 12);
  CHECK(r.core.reg(4) == 3);
}

TEST_CASE("zero-count loop skips its body") {
  auto r = run("lp.setup 0, x0, e\naddi x2, x2, 1\ne: addi x3, x3, 1\n");
  CHECK(r.core.reg(2) == 0);
  CHECK(r.core.reg(3) == 1);
}

TEST_CASE("split loop setup") {
  auto r = run("li x1, 5\nlp.start 0, s\nlp.end 0, e\nlp.count 0, x1\ns: addi x2, x2, 2\ne:\n");
  CHECK(r.core.reg(2) == 10);
}

TEST_CASE("post-increment addressing") {
  FlatMem m;
  m.store(0x100, 4, 11);
  m.store(0x104, 4, 22);
  auto r = run("li x9, 0x100\np.lw x8, 4(x9!)\np.lw x7, 4(x9!)\nli x5, 0x200\np.sw x8, -4(x5!)\n", 0, &m);
  CHECK(r.core.reg(8) == 11);
  CHECK(r.core.reg(7) == 22);
  CHECK(r.core.reg(9) == 0x108);
  CHECK(r.core.reg(5) == 0x1FC);
  CHECK(m.load(0x200, 4) == 11);
  auto same = run("li x9, 0x100\np.lw x9, 4(x9!)\n", 0, &m);
  CHECK(same.core.reg(9) == 11);
}

TEST_CASE("misaligned word access traps") {
  CHECK_THROWS_AS(run("li x1, 2\nlw x2, 0(x1)\n"), SimTrap);
  CHECK_NOTHROW(run("li x1, 2\nlh x2, 0(x1)\n"));
}

TEST_CASE("division edge cases") {
  auto r = run("li x1, 7\ndiv x2, x1, x0\nrem x3, x1, x0\nli x4, 0x80000000\nli x5, -1\ndiv x6, x4, x5\nrem x7, x4, x5\n");
  CHECK(r.core.reg(2) == 0xFFFFFFFFu);
  CHECK(r.core.reg(3) == 7);
  CHECK(r.core.reg(6) == 0x80000000u);
  CHECK(r.core.reg(7) == 0);
}

TEST_CASE("csr access") {
  uint32_t fmt84 = encode_simd_fmt(8, 4, simd::SignMode::SS);
  CHECK(fmt84 == (1u | 2u << 2));
  auto r = run("li x1, " + std::to_string(fmt84) + "\ncsrrw x0, simd_fmt, x1\ncsrrs x2, simd_fmt, x0\n");
  CHECK(r.core.reg(2) == fmt84);
  CHECK_THROWS_AS(run("li x1, " + std::to_string(encode_simd_fmt(8, 2, simd::SignMode::SS) ^ 0xC) + "\n" +
                      "csrrw x0, simd_fmt, x1\n"),
                  SimTrap);
  // A = 2 bit, B = 8 bit
  CHECK_THROWS_AS(run("li x1, " + std::to_string(3u | 1u << 2) + "\ncsrrw x0, simd_fmt, x1\n"), SimTrap);
  CHECK_THROWS_AS(run("li x1, 0x35\ncsrrw x0, simd_fmt, x1\n"), SimTrap);
  auto h = run("csrrs x3, mhartid, x0\n", 7);
  CHECK(h.core.reg(3) == 7);
  CHECK_THROWS_AS(run("csrrw x0, mhartid, x1\n"), SimTrap);
  CHECK_THROWS_AS(run("csrrs x1, 0x7C5, x0\n"), SimTrap);
}

TEST_CASE("mp_state slice is clamped to the format") {
  Core c;
  c.write_csr(csr::SIMD_FMT, encode_simd_fmt(8, 4, simd::SignMode::SS));
  c.write_csr(csr::MP_STATE, 7u << 16 | 3);
  CHECK(c.csrs().slice == 1);
  CHECK(c.csrs().mac_counter == 3);
  c.write_csr(csr::SIMD_FMT, encode_simd_fmt(8, 8, simd::SignMode::SS));
  CHECK(c.csrs().slice == 0);
}

namespace {

// a = bytes [1,2,3,4]; b = nibbles [1,1,1,1,-1,-1,-1,-1]
constexpr uint32_t kA = 0x04030201u;
constexpr uint32_t kB = 0xFFFF1111u;

std::string dot_prologue(uint32_t fmt, uint32_t state) {
  return "li x1, " + std::to_string(fmt) + "\ncsrrw x0, simd_fmt, x1\nli x1, " + std::to_string(state) +
         "\ncsrrw x0, mp_state, x1\nli x11, " + std::to_string(kA) + "\nli x12, " + std::to_string(kB) + "\n";
}

}  // namespace

TEST_CASE("virtual simd reads its format from the csr") {
  auto hi = run(dot_prologue(encode_simd_fmt(8, 4, simd::SignMode::SS), 1u << 16) + "pv.sdotp x10, x11, x12\n");
  CHECK(static_cast<int32_t>(hi.core.reg(10)) == -10);
  auto lo = run(dot_prologue(encode_simd_fmt(8, 4, simd::SignMode::SS), 0) + "pv.sdotp x10, x11, x12\n");
  CHECK(static_cast<int32_t>(lo.core.reg(10)) == 10);

  // 8x8: slice irrelevant
  uint32_t f88 = encode_simd_fmt(8, 8, simd::SignMode::SS);
  auto s0 = run(dot_prologue(f88, 0) + "pv.dotp x10, x11, x12\n");
  auto s1 = run(dot_prologue(f88, 1u << 16) + "pv.dotp x10, x11, x12\n");
  CHECK(s0.core.reg(10) == s1.core.reg(10));
  CHECK(static_cast<int32_t>(s0.core.reg(10)) == 1 * 0x11 + 2 * 0x11 + 3 * -1 + 4 * -1);

  // one mnemonic, different behaviour per format
  auto two = run(dot_prologue(f88, 0) + "pv.dotp x10, x11, x12\nli x1, " +
                 std::to_string(encode_simd_fmt(8, 4, simd::SignMode::SS)) +
                 "\ncsrrw x0, simd_fmt, x1\npv.dotp x13, x11, x12\n");
  CHECK(two.core.reg(10) != two.core.reg(13));
}

TEST_CASE("mixed-precision controller") {
  Core c;
  c.write_csr(csr::SIMD_FMT, encode_simd_fmt(8, 4, simd::SignMode::SS));
  c.write_csr(csr::MP_MACCTL, 2);
  c.write_csr(csr::MP_STATE, 1);
  Instruction sd{};
  sd.op = Op::PV_SDOTP;
  sd.rd = 10;
  sd.rs1 = 11;
  sd.rs2 = 12;
  c.execute(sd);
  CHECK(c.csrs().mac_counter == 0);
  CHECK(c.csrs().slice == 1);

  Core d;
  d.write_csr(csr::SIMD_FMT, encode_simd_fmt(8, 2, simd::SignMode::SS));
  d.write_csr(csr::MP_MACCTL, 4);
  std::vector<uint32_t> slices;
  for (int i = 0; i < 16; ++i) {
    slices.push_back(d.csrs().slice);
    d.execute(sd);
  }
  CHECK(slices == std::vector<uint32_t>{0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3});
  CHECK(d.csrs().slice == 0);

  // software override for the next sdotp
  d.write_csr(csr::MP_STATE, 3u << 16);
  CHECK(d.csrs().slice == 3);

  // uniform formats leave the controller alone
  Core u;
  u.write_csr(csr::MP_MACCTL, 1);
  u.execute(sd);
  CHECK(u.csrs().mac_counter == 0);
  CHECK(u.csrs().slice == 0);

  // target 0 behaves as 1 and is counted
  Core z;
  z.write_csr(csr::SIMD_FMT, encode_simd_fmt(8, 4, simd::SignMode::SS));
  z.write_csr(csr::MP_MACCTL, 0);
  z.execute(sd);
  CHECK(z.csrs().slice == 1);
  CHECK(z.macctl_zero_warnings() == 1);
}

TEST_CASE("dotp also advances the controller") {
  Core c;
  c.write_csr(csr::SIMD_FMT, encode_simd_fmt(16, 4, simd::SignMode::UU));
  Instruction d{};
  d.op = Op::PV_DOTPU;
  d.rd = 1;
  c.execute(d);
  CHECK(c.csrs().slice == 1);
}

TEST_CASE("identical programs give identical event streams") {
  const char* src = "li x1, 9\nlp.setup 0, x1, e\naddi x2, x2, 3\nbne x2, x0, e\ne: mul x3, x2, x2\n";
  auto a = run(src);
  auto b = run(src);
  CHECK(a.cycles == b.cycles);
  CHECK(a.core.regs() == b.core.regs());
}
