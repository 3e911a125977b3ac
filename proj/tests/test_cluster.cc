#include <doctest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "clustersim/cluster.h"
#include "support.h"

using namespace csim;

namespace {

Cluster run(const std::string& src, ClusterConfig cfg = {}) {
  Cluster c(cfg);
  c.load(testing::must_assemble(src, cfg));
  c.run();
  return c;
}

MemRequest load_req(unsigned core, uint32_t addr) { return MemRequest{core, addr, false, 4, 0}; }

// Cycle at which each request is granted when the losers retry every cycle.
std::vector<unsigned> mimd_waveform(std::vector<MemRequest> reqs, std::vector<unsigned>& ptr, const ClusterConfig& cfg) {
  std::vector<unsigned> grant_cycle(cfg.n_cores, ~0u);
  for (unsigned t = 0; !reqs.empty(); ++t) {
    auto g = arbitrate_mimd(reqs, ptr, cfg);
    std::sort(g.rbegin(), g.rend());
    for (size_t i : g) {
      grant_cycle[reqs[i].core_id] = t;
      reqs.erase(reqs.begin() + static_cast<long>(i));
    }
  }
  return grant_cycle;
}

const std::string kId = "csrrs x1, mhartid, x0\n";

}  // namespace

TEST_CASE("bank mapping") {
  ClusterConfig cfg;
  CHECK(bank_of(cfg, cfg.tcdm_base) == 0);
  CHECK(bank_of(cfg, cfg.tcdm_base + 4) == 1);
  CHECK(bank_of(cfg, cfg.tcdm_base + 128) == 0);
  CHECK(bank_of(cfg, cfg.tcdm_base + 4096) == 0);
  CHECK(bank_of(cfg, cfg.tcdm_base + 127) == 31);
  CHECK_THROWS_AS(bank_of(cfg, cfg.tcdm_base + cfg.tcdm_bytes), std::out_of_range);
  CHECK_THROWS_AS(bank_of(cfg, cfg.l2_base), std::out_of_range);
}

TEST_CASE("mimd arbitration") {
  ClusterConfig cfg;
  SUBCASE("three cores on one bank are granted in order") {
    std::vector<unsigned> ptr(cfg.n_banks, 0);
    auto g = mimd_waveform({load_req(0, cfg.tcdm_base), load_req(1, cfg.tcdm_base + 128), load_req(2, cfg.tcdm_base + 256)},
                           ptr, cfg);
    CHECK(g[0] == 0);
    CHECK(g[1] == 1);
    CHECK(g[2] == 2);
  }
  SUBCASE("distinct banks grant together") {
    std::vector<unsigned> ptr(cfg.n_banks, 0);
    std::vector<MemRequest> reqs;
    for (unsigned i = 0; i < 16; ++i) reqs.push_back(load_req(i, cfg.tcdm_base + 4 * i));
    CHECK(arbitrate_mimd(reqs, ptr, cfg).size() == 16);
  }
  SUBCASE("pointer rotation alternates the waiting core") {
    std::vector<unsigned> ptr(cfg.n_banks, 0);
    std::vector<MemRequest> both = {load_req(3, cfg.tcdm_base), load_req(9, cfg.tcdm_base + 128)};
    auto first = mimd_waveform(both, ptr, cfg);
    auto second = mimd_waveform(both, ptr, cfg);
    CHECK(first[3] == 0);
    CHECK(first[9] == 1);
    CHECK(second[3] == 0);
    CHECK(second[9] == 1);
    // once core 9 held the bank last, core 3 is next in line only after wrap-around
    ptr[0] = 4;
    auto third = mimd_waveform(both, ptr, cfg);
    CHECK(third[9] == 0);
    CHECK(third[3] == 1);
  }
}

TEST_CASE("vlem arbitration") {
  ClusterConfig cfg;
  std::vector<unsigned> ptr(cfg.n_banks, 0);
  SUBCASE("same-address loads broadcast") {
    std::vector<MemRequest> reqs;
    for (unsigned i = 0; i < 16; ++i) reqs.push_back(load_req(i, cfg.tcdm_base + 64));
    auto s = arbitrate_vlem(reqs, ptr, cfg, true);
    CHECK(s.broadcast);
    CHECK(s.cycles == 1);
    CHECK(s.bank_accesses == 1);
    auto off = arbitrate_vlem(reqs, ptr, cfg, false);
    CHECK_FALSE(off.broadcast);
    CHECK(off.cycles == 16);
  }
  SUBCASE("grant hold releases together") {
    std::vector<MemRequest> reqs = {load_req(0, cfg.tcdm_base), load_req(1, cfg.tcdm_base + 128),
                                    load_req(2, cfg.tcdm_base + 256)};
    auto s = arbitrate_vlem(reqs, ptr, cfg, true);
    CHECK(s.cycles == 3);
    CHECK(s.bank_accesses == 3);
    CHECK(s.order == std::vector<unsigned>{0, 1, 2});
  }
  SUBCASE("distinct banks take one cycle") {
    std::vector<MemRequest> reqs;
    for (unsigned i = 0; i < 16; ++i) reqs.push_back(load_req(i, cfg.tcdm_base + 4 * i));
    auto s = arbitrate_vlem(reqs, ptr, cfg, true);
    CHECK(s.cycles == 1);
    CHECK_FALSE(s.broadcast);
  }
  SUBCASE("stores never broadcast; mixed load/store is flagged") {
    std::vector<MemRequest> reqs;
    for (unsigned i = 0; i < 4; ++i) reqs.push_back(MemRequest{i, cfg.tcdm_base, true, 4, i});
    auto s = arbitrate_vlem(reqs, ptr, cfg, true);
    CHECK_FALSE(s.broadcast);
    CHECK(s.cycles == 4);
    CHECK_FALSE(s.same_address_rw);
    reqs[2].is_store = false;
    CHECK(arbitrate_vlem(reqs, ptr, cfg, true).same_address_rw);
  }
}

TEST_CASE("barrier wakes everyone two cycles after the last arrival") {
  // core i spins 3*i iterations before the barrier, then samples the cycle counter
  const std::string src = kId +
                          "li x2, 3\nmul x2, x2, x1\naddi x2, x2, 1\n"
                          "lp.setup 0, x2, spin\nnop\nspin:\n"
                          ".align 4\n"
                          "barrier\n"
                          "lw x5, 0x10200200(x0)\n"
                          "slli x3, x1, 2\n"
                          "sw x5, 0x10000000(x3)\n";
  auto c = run(src);
  REQUIRE(c.barrier_log().size() == 1);
  auto ev = c.barrier_log()[0];
  CHECK(ev.resume == ev.last_arrival + 2);
  for (unsigned i = 0; i < 16; ++i) CHECK(c.read32(mmap::TCDM_BASE + 4 * i) == ev.resume);
  CHECK(c.metrics().barriers == 1);
}

TEST_CASE("back to back barriers") {
  auto c = run("barrier\nbarrier\naddi x1, x0, 1\n");
  REQUIRE(c.barrier_log().size() == 2);
  CHECK(c.barrier_log()[1].last_arrival >= c.barrier_log()[0].resume);
  for (unsigned i = 0; i < 16; ++i) CHECK(c.core(i).reg(1) == 1);
}

TEST_CASE("lonely barrier trips the watchdog") {
  ClusterConfig cfg;
  cfg.watchdog_cycles = 200;
  CHECK_THROWS_AS(run(kId + "bne x1, x0, out\nbarrier\nout:\n", cfg), DeadlockError);
  // a partial VLEM entry also deadlocks
  CHECK_THROWS_AS(run(kId + "bne x1, x0, out\nvlem.on\nout:\n", cfg), DeadlockError);
}

TEST_CASE("cycle cap reports partial metrics") {
  ClusterConfig cfg;
  cfg.max_cycles = 500;
  try {
    run("l: j l\n", cfg);
    FAIL("expected a timeout");
  } catch (const TimeoutError& e) {
    CHECK(e.partial.cycles == 500);
    CHECK(e.partial.instructions_retired() > 0);
  }
}

TEST_CASE("no TCDM stores between the first VLEM request and entry") {
  // core 0 requests entry at once while the others still store
  std::string src = kId + "beq x1, x0, go\nnop\nnop\nnop\nnop\nslli x3, x1, 2\nsw x1, 0x10000000(x3)\ngo:\nvlem.on\n";
  CHECK_THROWS_AS(run(src), SimTrap);
  // loads are fine
  auto c = run(kId + "beq x1, x0, go\nlw x4, 0x10000000(x0)\ngo:\nvlem.on\nvlem.off\n");
  CHECK(c.metrics().vlem_entries == 1);
}

TEST_CASE("enter then exit") {
  auto c = run("vlem.on\nvlem.off\n");
  CHECK(c.mode() == Mode::MIMD);
  CHECK(c.metrics().vlem_entries == 1);
  CHECK(c.metrics().vlem_exits == 1);
  CHECK(c.metrics().cycles_in_vlem == 2);
  for (unsigned i = 1; i < 16; ++i) CHECK(c.core(i).pc() == c.core(0).pc());
}

TEST_CASE("illegal mode transitions trap") {
  CHECK_THROWS_AS(run("vlem.off\n"), SimTrap);
  CHECK_THROWS_AS(run("vlem.on\nvlem.on\n"), SimTrap);
  CHECK_THROWS_AS(run("li x2, 5\nsw x2, 0x10200100(x0)\n"), SimTrap);
  CHECK_THROWS_AS(run("lw x2, 0x10200300(x0)\n"), SimTrap);
  CHECK_THROWS_AS(run("sw x2, 0x1C000000(x0)\n"), SimTrap);
  CHECK_THROWS_AS(run("lw x2, 0x20000000(x0)\n"), SimTrap);
}

TEST_CASE("broadcast in lockstep") {
  const std::string src =
      ".data .l1\nv: .word 0x5a5a1234\n.text\n" + kId +
      "vlem.on\nlw x2, v(x0)\nvlem.off\n";
  auto c = run(src);
  CHECK(c.metrics().broadcasts == 1);
  CHECK(c.metrics().tcdm_accesses == 1);
  CHECK(c.metrics().conflict_stall_cycles == 0);
  uint64_t leader_bc = c.activity()[0].broadcast_traversals;
  CHECK(leader_bc == 1);
  for (unsigned i = 0; i < 16; ++i) CHECK(c.core(i).reg(2) == 0x5a5a1234u);

  ClusterConfig off;
  off.broadcast_enabled = false;
  auto d = run(src, off);
  CHECK(d.metrics().broadcasts == 0);
  CHECK(d.metrics().tcdm_accesses == 16);
  CHECK(d.metrics().conflict_stall_cycles == 16 * 15);
  for (unsigned i = 0; i < 16; ++i) CHECK(d.core(i).reg(2) == 0x5a5a1234u);

  auto m = run(".data .l1\nv: .word 0x5a5a1234\n.text\nlw x2, v(x0)\n");
  for (unsigned i = 0; i < 16; ++i) CHECK(m.core(i).reg(2) == c.core(i).reg(2));
}

TEST_CASE("grant hold keeps cores aligned under conflicts") {
  // every core reads base + 128*id: all on bank 0
  auto c = run(kId + "slli x2, x1, 7\nvlem.on\nlw x3, 0x10000000(x2)\nvlem.off\n");
  CHECK(c.metrics().tcdm_accesses == 16);
  for (unsigned i = 0; i < 16; ++i) CHECK(c.metrics().per_core[i].conflict_stall_cycles == 15);
  for (unsigned i = 1; i < 16; ++i) CHECK(c.core(i).retired() == c.core(0).retired());
  // misaligned by one word per core: no conflicts
  auto m = run(kId + "li x4, 132\nmul x2, x1, x4\nvlem.on\nlw x3, 0x10000000(x2)\nvlem.off\n");
  CHECK(m.metrics().conflict_stall_cycles == 0);
}

TEST_CASE("divergence") {
  const std::string src = kId + "vlem.on\nbeq x1, x0, zero\naddi x2, x0, 1\nzero: addi x3, x0, 1\nvlem.off\n";
  try {
    run(src);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.core_id == 1);
    CHECK(e.follower_pc != e.leader_pc);
  }
  ClusterConfig permissive;
  permissive.strict_divergence = false;
  auto c = run(src, permissive);
  CHECK(c.metrics().divergence_warnings == 15);
  for (unsigned i = 0; i < 16; ++i) CHECK(c.core(i).reg(2) == 0);
}

TEST_CASE("only the leader fetches in lockstep") {
  std::string body;
  for (int i = 0; i < 20; ++i) body += "nop\n";
  auto c = run("vlem.on\n" + body + "vlem.off\n");
  CHECK(c.activity()[0].l0_accesses == 2 + 20 + 1);
  for (unsigned i = 1; i < 16; ++i) {
    CHECK(c.activity()[i].l0_accesses == 2);
    CHECK(c.activity()[i].if_cycles < c.activity()[0].if_cycles);
  }
}

TEST_CASE("followers miss after exit") {
  std::string body;
  for (int i = 0; i < 40; ++i) body += "nop\n";
  ClusterConfig cfg;
  auto c = run("vlem.on\n" + body + "vlem.off\n.align 4\nnop\n", cfg);
  for (unsigned i = 1; i < 16; ++i) {
    // line 0 before entry, the line holding vlem.off, the aligned line after it
    CHECK(c.metrics().per_core[i].l0_misses == 3);
    CHECK(c.metrics().per_core[i].l15_misses == 0);
    CHECK(c.metrics().per_core[i].icache_stall_cycles == 3 * cfg.miss_l0_penalty);
  }
}

TEST_CASE("straight-line code misses once per line") {
  std::string body;
  for (int i = 0; i < 64; ++i) body += "addi x1, x1, 1\n";
  auto c = run(body);
  ClusterConfig cfg;
  uint64_t l15 = 0, stall = 0;
  for (const auto& m : c.metrics().per_core) {
    CHECK(m.l0_misses == 16);
    l15 += m.l15_misses;
    stall += m.icache_stall_cycles;
  }
  // the shared level misses once per line, whichever core gets there first
  CHECK(l15 == 16);
  CHECK(stall == 16 * 16 * cfg.miss_l0_penalty + 16 * cfg.miss_l15_penalty);
}

TEST_CASE("small loops stop missing after the first iteration") {
  auto c = run("li x2, 50\nlp.setup 0, x2, e\naddi x1, x1, 1\naddi x1, x1, 1\naddi x1, x1, 1\naddi x1, x1, 1\n"
               "addi x1, x1, 1\ne:\n");
  CHECK(c.metrics().per_core[0].l0_misses == 2);
  CHECK(c.core(0).reg(1) == 250);
}

TEST_CASE("gated cores only accrue gated cycles") {
  auto c = run(kId + "bne x1, x0, out\nli x2, 100\nlp.setup 0, x2, e\nnop\ne:\nout:\n");
  const auto& a = c.activity()[3];
  CHECK(a.gated_cycles > 90);
  CHECK(a.leak_cycles + a.gated_cycles == c.metrics().cycles);
}

TEST_CASE("matmul-style accumulate matches a host computation") {
  // each core sums 8 words of its own slice
  std::string data = ".data .l1\narr:\n";
  for (int i = 0; i < 16 * 8; ++i) data += ".word " + std::to_string(i * 3 + 1) + "\n";
  const std::string src = data + ".text\n" + kId +
                          "slli x2, x1, 5\nli x4, arr\nadd x2, x2, x4\nli x5, 8\n"
                          "lp.setup 0, x5, e\np.lw x6, 4(x2!)\nadd x7, x7, x6\ne:\n";
  for (bool vlem : {false, true}) {
    auto c = run(vlem ? (src + "").insert(src.find("li x5"), "vlem.on\n") + "vlem.off\n" : src);
    for (unsigned k = 0; k < 16; ++k) {
      uint32_t expect = 0;
      for (int j = 0; j < 8; ++j) expect += static_cast<uint32_t>((k * 8 + j) * 3 + 1);
      CHECK(c.core(k).reg(7) == expect);
    }
  }
}

TEST_CASE("determinism") {
  const std::string src = kId + "slli x2, x1, 3\nli x3, 20\nlp.setup 0, x3, e\nlw x4, 0x10000000(x2)\naddi x4, x4, 1\n"
                                "sw x4, 0x10000000(x2)\ne:\n";
  auto a = run(src);
  auto b = run(src);
  CHECK(a.metrics().cycles == b.metrics().cycles);
  CHECK(a.metrics().conflict_stall_cycles == b.metrics().conflict_stall_cycles);
  CHECK(a.read_bytes(mmap::TCDM_BASE, 256) == b.read_bytes(mmap::TCDM_BASE, 256));
}
