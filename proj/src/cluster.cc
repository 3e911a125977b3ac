#include "clustersim/cluster.h"

#include <fmt/format.h>

#include <algorithm>
#include <limits>

namespace csim {

uint64_t Metrics::instructions_retired() const {
  uint64_t n = 0;
  for (const auto& c : per_core) n += c.retired;
  return n;
}

DivergenceError::DivergenceError(unsigned core, uint32_t lpc, uint32_t fpc, uint64_t cyc)
    : std::runtime_error(fmt::format("divergence at cycle {}: core {} next pc 0x{:08x}, leader 0x{:08x}", cyc, core,
                                     fpc, lpc)),
      core_id(core),
      leader_pc(lpc),
      follower_pc(fpc),
      cycle(cyc) {}

TimeoutError::TimeoutError(uint64_t cycles, Metrics m)
    : std::runtime_error(fmt::format("cycle cap of {} reached", cycles)), partial(std::move(m)) {}

bool in_tcdm(const ClusterConfig& cfg, uint32_t addr) {
  return addr >= cfg.tcdm_base && addr - cfg.tcdm_base < cfg.tcdm_bytes;
}

unsigned bank_of(const ClusterConfig& cfg, uint32_t addr) {
  if (!in_tcdm(cfg, addr)) throw std::out_of_range(fmt::format("0x{:08x} is not a TCDM address", addr));
  return ((addr - cfg.tcdm_base) / cfg.word_bytes) % cfg.n_banks;
}

std::vector<size_t> arbitrate_mimd(const std::vector<MemRequest>& reqs, std::vector<unsigned>& rr_ptr,
                                   const ClusterConfig& cfg) {
  constexpr size_t kNone = std::numeric_limits<size_t>::max();
  std::vector<size_t> best(cfg.n_banks, kNone);
  std::vector<unsigned> best_dist(cfg.n_banks, 0);
  for (size_t i = 0; i < reqs.size(); ++i) {
    unsigned b = bank_of(cfg, reqs[i].addr);
    unsigned dist = (reqs[i].core_id + cfg.n_cores - rr_ptr[b] % cfg.n_cores) % cfg.n_cores;
    if (best[b] == kNone || dist < best_dist[b]) {
      best[b] = i;
      best_dist[b] = dist;
    }
  }
  std::vector<size_t> granted;
  for (unsigned b = 0; b < cfg.n_banks; ++b) {
    if (best[b] == kNone) continue;
    granted.push_back(best[b]);
    rr_ptr[b] = (reqs[best[b]].core_id + 1) % cfg.n_cores;
  }
  return granted;
}

VlemSchedule arbitrate_vlem(const std::vector<MemRequest>& reqs, std::vector<unsigned>& rr_ptr,
                            const ClusterConfig& cfg, bool broadcast_enabled) {
  VlemSchedule s;
  if (reqs.empty()) return s;
  bool same = reqs.size() > 1;
  for (const auto& r : reqs) {
    if (r.is_store || r.addr != reqs[0].addr || r.width != reqs[0].width) same = false;
  }
  if (broadcast_enabled && same) {
    s.cycles = 1;
    s.bank_accesses = 1;
    s.broadcast = true;
    for (unsigned i = 0; i < reqs.size(); ++i) s.order.push_back(i);
    return s;
  }
  std::vector<std::vector<unsigned>> per_bank(cfg.n_banks);
  for (unsigned i = 0; i < reqs.size(); ++i) per_bank[bank_of(cfg, reqs[i].addr)].push_back(i);
  for (unsigned b = 0; b < cfg.n_banks; ++b) {
    auto& q = per_bank[b];
    if (q.empty()) continue;
    unsigned ptr = rr_ptr[b] % cfg.n_cores;
    std::sort(q.begin(), q.end(), [&](unsigned x, unsigned y) {
      return (reqs[x].core_id + cfg.n_cores - ptr) % cfg.n_cores < (reqs[y].core_id + cfg.n_cores - ptr) % cfg.n_cores;
    });
    s.cycles = std::max<unsigned>(s.cycles, static_cast<unsigned>(q.size()));
    rr_ptr[b] = (reqs[q.back()].core_id + 1) % cfg.n_cores;
    for (size_t i = 0; i < q.size(); ++i) {
      s.order.push_back(q[i]);
      for (size_t j = i + 1; j < q.size(); ++j) {
        const auto& a = reqs[q[i]];
        const auto& c = reqs[q[j]];
        if ((a.addr & ~3u) == (c.addr & ~3u) && a.is_store != c.is_store) s.same_address_rw = true;
      }
    }
  }
  s.bank_accesses = static_cast<unsigned>(reqs.size());
  return s;
}

Cluster::Cluster(ClusterConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  ctx_.resize(cfg_.n_cores);
  for (unsigned i = 0; i < cfg_.n_cores; ++i) ctx_[i].core = Core(i);
  tcdm_.assign(cfg_.tcdm_bytes, 0);
  l2_.assign(cfg_.l2_bytes, 0);
}

void Cluster::load(const Program& p) {
  if (p.text.empty()) throw LoadError("no entry: program has no instructions");
  if (p.text_base != cfg_.l2_base) throw LoadError(fmt::format("text must start at L2 base 0x{:08x}", cfg_.l2_base));
  if (uint64_t{p.text_end()} - cfg_.l2_base > cfg_.l2_bytes) throw LoadError("section-overflow: text exceeds L2");
  if (p.index_of(p.entry) < 0) throw LoadError("entry point is outside text");
  std::fill(tcdm_.begin(), tcdm_.end(), 0);
  std::fill(l2_.begin(), l2_.end(), 0);
  for (const auto& sec : p.data) {
    uint64_t end = uint64_t{sec.base} + sec.bytes.size();
    if (sec.region == Region::L1) {
      if (sec.base < cfg_.tcdm_base || end > uint64_t{cfg_.tcdm_base} + cfg_.tcdm_bytes) {
        throw LoadError("section-overflow: L1 data does not fit the TCDM");
      }
      std::copy(sec.bytes.begin(), sec.bytes.end(), tcdm_.begin() + (sec.base - cfg_.tcdm_base));
    } else {
      if (sec.base < p.text_end() || end > uint64_t{cfg_.l2_base} + cfg_.l2_bytes) {
        throw LoadError("section-overflow: L2 data does not fit");
      }
      std::copy(sec.bytes.begin(), sec.bytes.end(), l2_.begin() + (sec.base - cfg_.l2_base));
    }
  }
  prog_copy_ = p;
  prog_ = &prog_copy_;
  for (auto& c : ctx_) {
    c.core.reset(p.entry);
    c.st = State::Ready;
    c.ready_at = 0;
    c.fetched = false;
    c.slot = -1;
    c.retired_at_entry = 0;
  }
  unsigned l0_lines = cfg_.icache_l0_bytes / cfg_.icache_line_bytes;
  unsigned l15_lines = cfg_.icache_l15_bytes / cfg_.icache_line_bytes;
  l0_tags_.assign(size_t{l0_lines} * cfg_.n_cores, 0xFFFFFFFFu);
  l15_tags_.assign(l15_lines, 0xFFFFFFFFu);
  rr_ptr_.assign(cfg_.n_banks, 0);
  activity_.assign(cfg_.n_cores, energy::Activity{});
  barrier_log_.clear();
  metrics_ = Metrics{};
  metrics_.per_core.assign(cfg_.n_cores, CoreMetrics{});
  metrics_.retired_per_pc.assign(p.text.size(), 0);
  mode_ = Mode::MIMD;
  now_ = 0;
  barrier_mask_ = enter_mask_ = 0;
  blocked_ = false;
}

bool Cluster::halted() const {
  return std::all_of(ctx_.begin(), ctx_.end(), [](const Ctx& c) { return c.st == State::Halted; });
}

void Cluster::trap_at(unsigned core, const std::string& why) const {
  throw SimTrap(why, core, ctx_[core].core.pc(), now_);
}

unsigned Cluster::icache_access(unsigned core, uint32_t pc) {
  uint32_t line = pc / cfg_.icache_line_bytes;
  unsigned l0_lines = cfg_.icache_l0_bytes / cfg_.icache_line_bytes;
  unsigned l15_lines = cfg_.icache_l15_bytes / cfg_.icache_line_bytes;
  ++activity_[core].l0_accesses;
  uint32_t& tag = l0_tags_[size_t{core} * l0_lines + line % l0_lines];
  if (tag == line) return 0;
  tag = line;
  auto& cm = metrics_.per_core[core];
  ++cm.l0_misses;
  ++activity_[core].l15_accesses;
  unsigned penalty = cfg_.miss_l0_penalty;
  uint32_t& t15 = l15_tags_[line % l15_lines];
  if (t15 != line) {
    t15 = line;
    ++cm.l15_misses;
    penalty += cfg_.miss_l15_penalty;
  }
  cm.icache_stall_cycles += penalty;
  return penalty;
}

uint32_t Cluster::access_memory(const MemRequest& r) {
  uint8_t* base = nullptr;
  if (in_tcdm(cfg_, r.addr)) {
    base = &tcdm_[r.addr - cfg_.tcdm_base];
  } else if (r.addr >= cfg_.l2_base && r.addr - cfg_.l2_base < cfg_.l2_bytes) {
    if (r.is_store && r.addr < prog_->text_end()) trap_at(r.core_id, fmt::format("store into text at 0x{:08x}", r.addr));
    base = &l2_[r.addr - cfg_.l2_base];
  } else {
    trap_at(r.core_id, fmt::format("access outside the memory map at 0x{:08x}", r.addr));
  }
  if (r.is_store) {
    for (unsigned i = 0; i < r.width; ++i) base[i] = static_cast<uint8_t>(r.wdata >> (8 * i));
    return 0;
  }
  uint32_t v = 0;
  for (unsigned i = 0; i < r.width; ++i) v |= uint32_t{base[i]} << (8 * i);
  return v;
}

void Cluster::finish_tcdm(Ctx& c, const MemRequest& r) {
  uint32_t v = access_memory(r);
  ++metrics_.tcdm_accesses;
  ++activity_[r.core_id].bank_accesses;
  ++activity_[r.core_id].interconnect_traversals;
  c.core.complete_access(v);
}

void Cluster::release_barrier() {
  for (auto& c : ctx_) {
    c.core.complete_access(0);
    c.st = State::Ready;
    c.ready_at = now_ + 2;
  }
  barrier_mask_ = 0;
  barrier_log_.push_back(BarrierEvent{now_, now_ + 2});
  ++metrics_.barriers;
}

void Cluster::enter_vlem() {
  mode_ = Mode::VLEM;
  enter_mask_ = 0;
  ++metrics_.vlem_entries;
  for (auto& c : ctx_) {
    c.core.complete_access(0);
    c.st = State::Ready;
    c.ready_at = now_ + 2;
    c.fetched = false;
    c.retired_at_entry = c.core.retired();
  }
  check_divergence();
}

void Cluster::check_divergence() {
  uint32_t lpc = ctx_[0].core.pc();
  for (unsigned i = 1; i < ctx_.size(); ++i) {
    uint32_t fpc = ctx_[i].core.pc();
    if (fpc == lpc) continue;
    if (cfg_.strict_divergence) throw DivergenceError(i, lpc, fpc, now_);
    ++metrics_.divergence_warnings;
    ctx_[i].core.set_pc(lpc);
  }
}

void Cluster::handle_periph_mimd(unsigned id, const MemRequest& r) {
  Ctx& c = ctx_[id];
  uint32_t off = r.addr - cfg_.periph_base;
  if (r.width != 4) trap_at(id, "peripheral registers need word accesses");
  if (off == mmap::EU_BARRIER - mmap::PERIPH_BASE) {
    if (r.is_store) trap_at(id, "store to the barrier register");
    c.st = State::Barrier;
    barrier_mask_ |= 1u << id;
    if (barrier_mask_ == all_mask()) release_barrier();
  } else if (off == mmap::VLEM_CTRL - mmap::PERIPH_BASE) {
    if (!r.is_store) {
      c.core.complete_access(0);
      c.ready_at = now_ + 1;
    } else if (r.wdata == 1) {
      c.st = State::VlemEnter;
      enter_mask_ |= 1u << id;
      if (enter_mask_ == all_mask()) enter_vlem();
    } else if (r.wdata == 0) {
      trap_at(id, "VLEM exit requested outside VLEM");
    } else {
      trap_at(id, fmt::format("invalid VLEM_CTRL value {}", r.wdata));
    }
  } else if (off == mmap::CYCLE_COUNTER - mmap::PERIPH_BASE) {
    if (r.is_store) trap_at(id, "cycle counter is read-only");
    c.core.complete_access(static_cast<uint32_t>(now_));
    c.ready_at = now_ + 1;
  } else {
    trap_at(id, fmt::format("unmapped peripheral address 0x{:08x}", r.addr));
  }
}

namespace {

enum class Target : uint8_t { Tcdm, Periph, L2 };

}  // namespace

void Cluster::cycle_mimd() {
  reqs_.clear();
  req_core_.clear();
  for (unsigned id = 0; id < ctx_.size(); ++id) {
    Ctx& c = ctx_[id];
    if (c.st == State::WaitGrant) {
      reqs_.push_back(c.req);
      req_core_.push_back(id);
      continue;
    }
    if (c.st != State::Ready || c.ready_at > now_) continue;
    if (!c.fetched) {
      uint32_t pc = c.core.pc();
      long slot = prog_->index_of(pc);
      if (slot < 0) {
        if (pc == prog_->text_end()) {
          c.st = State::Halted;
          continue;
        }
        trap_at(id, "instruction fetch outside text");
      }
      c.slot = slot;
      c.fetched = true;
      if (unsigned pen = icache_access(id, pc)) {
        c.ready_at = now_ + pen;
        continue;
      }
    }
    c.fetched = false;
    CoreEvent ev;
    try {
      ev = c.core.execute(prog_->text[static_cast<size_t>(c.slot)]);
    } catch (const SimTrap& t) {
      throw SimTrap(t.reason, t.core_id, t.pc, now_);
    }
    ++metrics_.retired_per_pc[static_cast<size_t>(c.slot)];
    if (ev.dotp) {
      ++activity_[id].simd_ops;
      metrics_.macs += ev.macs;
    }
    if (!ev.mem) {
      c.ready_at = now_ + ev.cycles;
      continue;
    }
    const MemRequest& r = *ev.mem;
    ++activity_[id].lsu_accesses;
    if (in_tcdm(cfg_, r.addr)) {
      if (r.is_store && enter_mask_ != 0) trap_at(id, "TCDM store while VLEM entry is pending");
      c.st = State::WaitGrant;
      c.req = r;
      reqs_.push_back(r);
      req_core_.push_back(id);
    } else if (r.addr >= cfg_.periph_base && r.addr - cfg_.periph_base < mmap::PERIPH_BYTES) {
      handle_periph_mimd(id, r);
    } else {
      c.core.complete_access(access_memory(r));
      c.ready_at = now_ + 1;
    }
  }
  if (reqs_.empty()) return;
  auto granted = arbitrate_mimd(reqs_, rr_ptr_, cfg_);
  std::vector<bool> won(reqs_.size(), false);
  for (size_t g : granted) {
    won[g] = true;
    Ctx& c = ctx_[req_core_[g]];
    finish_tcdm(c, reqs_[g]);
    c.st = State::Ready;
    c.ready_at = now_ + 1;
  }
  for (size_t i = 0; i < reqs_.size(); ++i) {
    if (won[i]) continue;
    ++metrics_.per_core[req_core_[i]].conflict_stall_cycles;
    ++metrics_.conflict_stall_cycles;
  }
}

void Cluster::cycle_vlem() {
  Ctx& lead = ctx_[0];
  if (lead.st == State::Halted || lead.ready_at > now_) return;
  const uint32_t lpc = lead.core.pc();
  if (!lead.fetched) {
    long slot = prog_->index_of(lpc);
    if (slot < 0) {
      if (lpc != prog_->text_end()) trap_at(0, "instruction fetch outside text");
      check_divergence();
      for (auto& c : ctx_) c.st = State::Halted;
      return;
    }
    lead.slot = slot;
    lead.fetched = true;
    if (unsigned pen = icache_access(0, lpc)) {
      for (auto& c : ctx_) c.ready_at = now_ + pen;
      return;
    }
  }
  lead.fetched = false;
  const size_t slot = static_cast<size_t>(lead.slot);
  const Instruction& in = prog_->text[slot];
  reqs_.clear();
  req_core_.clear();
  uint32_t delay = 1;
  for (unsigned id = 0; id < ctx_.size(); ++id) {
    Ctx& c = ctx_[id];
    CoreEvent ev;
    try {
      ev = c.core.execute(in);
    } catch (const SimTrap& t) {
      throw SimTrap(t.reason, t.core_id, t.pc, now_);
    }
    if (id == 0) delay = ev.cycles;
    ++metrics_.retired_per_pc[slot];
    if (ev.dotp) {
      ++activity_[id].simd_ops;
      metrics_.macs += ev.macs;
    }
    if (ev.mem) {
      ++activity_[id].lsu_accesses;
      reqs_.push_back(*ev.mem);
      req_core_.push_back(id);
    }
  }

  if (!reqs_.empty()) {
    auto target_of = [&](uint32_t a) {
      if (in_tcdm(cfg_, a)) return Target::Tcdm;
      if (a >= cfg_.periph_base && a - cfg_.periph_base < mmap::PERIPH_BYTES) return Target::Periph;
      return Target::L2;
    };
    Target t = target_of(reqs_[0].addr);
    for (const auto& r : reqs_) {
      if (target_of(r.addr) != t || (t == Target::Periph && r.addr != reqs_[0].addr)) {
        trap_at(r.core_id, "lockstep cores access different memory regions in one instruction");
      }
    }
    if (t == Target::Tcdm) {
      VlemSchedule s = arbitrate_vlem(reqs_, rr_ptr_, cfg_, cfg_.broadcast_enabled);
      if (s.broadcast) {
        uint32_t v = access_memory(reqs_[0]);
        ++metrics_.tcdm_accesses;
        ++metrics_.broadcasts;
        ++activity_[0].bank_accesses;
        ++activity_[0].broadcast_traversals;
        for (unsigned i = 0; i < reqs_.size(); ++i) ctx_[req_core_[i]].core.complete_access(v);
      } else {
        for (unsigned i : s.order) finish_tcdm(ctx_[req_core_[i]], reqs_[i]);
      }
      if (s.same_address_rw) ++metrics_.same_address_rw_warnings;
      delay = s.cycles;
      for (unsigned id = 0; id < ctx_.size(); ++id) {
        metrics_.per_core[id].conflict_stall_cycles += s.cycles - 1;
        metrics_.conflict_stall_cycles += s.cycles - 1;
      }
    } else if (t == Target::Periph) {
      const MemRequest& r = reqs_[0];
      uint32_t off = r.addr - cfg_.periph_base;
      if (r.width != 4) trap_at(0, "peripheral registers need word accesses");
      if (off == mmap::EU_BARRIER - mmap::PERIPH_BASE) {
        if (r.is_store) trap_at(0, "store to the barrier register");
        release_barrier();
        delay = 2;
      } else if (off == mmap::VLEM_CTRL - mmap::PERIPH_BASE) {
        if (!r.is_store) {
          for (auto& c : ctx_) c.core.complete_access(1);
        } else {
          for (const auto& q : reqs_) {
            if (q.wdata != 0) trap_at(q.core_id, q.wdata == 1 ? "nested VLEM entry" : "invalid VLEM_CTRL value");
          }
          for (auto& c : ctx_) c.core.complete_access(0);
          mode_ = Mode::MIMD;
          ++metrics_.vlem_exits;
          for (auto& c : ctx_) {
            c.core.set_pc(ctx_[0].core.pc());
            c.fetched = false;
          }
          delay = 2;
        }
      } else if (off == mmap::CYCLE_COUNTER - mmap::PERIPH_BASE) {
        if (r.is_store) trap_at(0, "cycle counter is read-only");
        for (auto& c : ctx_) c.core.complete_access(static_cast<uint32_t>(now_));
      } else {
        trap_at(0, fmt::format("unmapped peripheral address 0x{:08x}", r.addr));
      }
    } else {
      for (unsigned i = 0; i < reqs_.size(); ++i) ctx_[req_core_[i]].core.complete_access(access_memory(reqs_[i]));
    }
  }
  for (auto& c : ctx_) c.ready_at = now_ + delay;
  if (mode_ == Mode::VLEM) {
    check_divergence();
    uint64_t n0 = ctx_[0].core.retired() - ctx_[0].retired_at_entry;
    for (const auto& c : ctx_) {
      if (c.core.retired() - c.retired_at_entry != n0) throw std::logic_error("lockstep alignment lost");
    }
  }
}

void Cluster::account_cycle(Mode m) {
  for (unsigned id = 0; id < ctx_.size(); ++id) {
    const Ctx& c = ctx_[id];
    energy::Activity& a = activity_[id];
    if (c.st == State::Halted || c.st == State::Barrier) {
      ++a.gated_cycles;
      continue;
    }
    ++a.leak_cycles;
    ++a.idex_cycles;
    if (m == Mode::MIMD || id == 0) ++a.if_cycles;
  }
  if (m == Mode::VLEM) ++metrics_.cycles_in_vlem;
}

void Cluster::check_watchdog() {
  bool live = false, blocked = true;
  for (const auto& c : ctx_) {
    if (c.st == State::Halted) continue;
    live = true;
    if (c.st != State::Barrier && c.st != State::VlemEnter) blocked = false;
  }
  if (!(live && blocked)) {
    blocked_ = false;
    return;
  }
  if (!blocked_) {
    blocked_ = true;
    blocked_since_ = now_;
  } else if (now_ - blocked_since_ >= cfg_.watchdog_cycles) {
    std::string who;
    for (unsigned i = 0; i < ctx_.size(); ++i) {
      if (ctx_[i].st == State::Halted) continue;
      who += fmt::format(" core{}:{}", i, ctx_[i].st == State::Barrier ? "barrier" : "vlem-enter");
    }
    throw DeadlockError(fmt::format("deadlock: no progress for {} cycles at cycle {};{}", cfg_.watchdog_cycles, now_, who));
  }
}

bool Cluster::step_cycle() {
  if (!prog_) throw LoadError("no program loaded");
  if (halted()) return false;
  Mode m = mode_;
  if (m == Mode::MIMD) cycle_mimd();
  else cycle_vlem();
  if (halted()) {
    metrics_.cycles = now_;
    for (unsigned i = 0; i < ctx_.size(); ++i) metrics_.per_core[i].retired = ctx_[i].core.retired();
    metrics_.macctl_zero_warnings = 0;
    for (const auto& c : ctx_) metrics_.macctl_zero_warnings += c.core.macctl_zero_warnings();
    return false;
  }
  account_cycle(m);
  check_watchdog();
  ++now_;
  metrics_.cycles = now_;
  if (now_ >= cfg_.max_cycles) {
    for (unsigned i = 0; i < ctx_.size(); ++i) metrics_.per_core[i].retired = ctx_[i].core.retired();
    throw TimeoutError(now_, metrics_);
  }
  return true;
}

void Cluster::run() {
  while (step_cycle()) {
  }
}

uint32_t Cluster::read32(uint32_t addr) const {
  uint32_t v = 0;
  for (unsigned i = 0; i < 4; ++i) v |= uint32_t{read8(addr + i)} << (8 * i);
  return v;
}

uint8_t Cluster::read8(uint32_t addr) const {
  if (in_tcdm(cfg_, addr)) return tcdm_[addr - cfg_.tcdm_base];
  if (addr >= cfg_.l2_base && addr - cfg_.l2_base < cfg_.l2_bytes) return l2_[addr - cfg_.l2_base];
  throw std::out_of_range(fmt::format("0x{:08x} is not backed by memory", addr));
}

void Cluster::write32(uint32_t addr, uint32_t value) {
  for (unsigned i = 0; i < 4; ++i) {
    uint32_t a = addr + i;
    uint8_t b = static_cast<uint8_t>(value >> (8 * i));
    if (in_tcdm(cfg_, a)) tcdm_[a - cfg_.tcdm_base] = b;
    else if (a >= cfg_.l2_base && a - cfg_.l2_base < cfg_.l2_bytes) l2_[a - cfg_.l2_base] = b;
    else throw std::out_of_range(fmt::format("0x{:08x} is not backed by memory", a));
  }
}

std::vector<uint8_t> Cluster::read_bytes(uint32_t addr, uint32_t n) const {
  std::vector<uint8_t> out(n);
  for (uint32_t i = 0; i < n; ++i) out[i] = read8(addr + i);
  return out;
}

}  // namespace csim
