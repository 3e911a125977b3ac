#include "clustersim/kernels.h"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <iterator>
#include <map>
#include <random>
#include <sstream>

#include "clustersim/core.h"

namespace csim::kernels {

void LayoutParams::validate() const {
  if (s != 1 && s != 2 && s != 4) throw KernelError(fmt::format("element size {} not in {{1, 2, 4}}", s));
  if (w == 0 || n_cores == 0 || n_banks == 0) throw KernelError("layout parameters must be non-zero");
  if (n_banks % n_cores) throw KernelError("bank count must be a multiple of the core count");
  if (w % s) throw KernelError("word size must be a multiple of the element size");
}

unsigned min_chunk(const LayoutParams& lp) {
  lp.validate();
  return lp.w / lp.s;
}

unsigned max_chunk(const LayoutParams& lp) {
  lp.validate();
  return lp.n_banks / lp.n_cores * (lp.w / lp.s);
}

uint32_t misaligned_sub_buffer(uint32_t n, const LayoutParams& lp) {
  if (n == 0) throw KernelError("misaligned buffer of zero bytes");
  uint32_t row = lp.n_banks * lp.w;
  return (n + lp.n_cores * lp.w + row - 1) / row * row;
}

uint32_t misaligned_total(uint32_t n, const LayoutParams& lp) { return lp.n_cores * misaligned_sub_buffer(n, lp); }

uint32_t misaligned_offset(unsigned core, uint32_t n, const LayoutParams& lp) {
  return core * misaligned_sub_buffer(n, lp) + core * lp.w;
}

L1Allocator::L1Allocator(uint32_t base, uint32_t bytes, LayoutParams lp)
    : base_(base), end_(base + bytes), top_(base), lp_(lp) {}

uint32_t L1Allocator::alloc(uint32_t bytes, uint32_t align) {
  if (align == 0 || (align & (align - 1))) throw KernelError(fmt::format("alignment {} is not a power of two", align));
  uint64_t at = (uint64_t{top_} + align - 1) / align * align;
  if (at + bytes > end_) {
    throw OutOfMemory(fmt::format("L1 allocation of {} bytes failed: {} of {} bytes in use", bytes, top_ - base_,
                                  end_ - base_));
  }
  top_ = static_cast<uint32_t>(at + bytes);
  return static_cast<uint32_t>(at);
}

uint32_t L1Allocator::misaligned_alloc(uint32_t n) {
  return alloc(misaligned_total(n, lp_), lp_.n_banks * lp_.w);
}

uint32_t L1Allocator::naive_stride(uint32_t n) const { return (n + lp_.w - 1) / lp_.w * lp_.w; }

uint32_t L1Allocator::naive_alloc(uint32_t n) { return alloc(lp_.n_cores * naive_stride(n), lp_.n_banks * lp_.w); }

const char* layout_name(Layout l) { return l == Layout::Naive ? "naive" : "misaligned"; }
const char* path_name(Path p) { return p == Path::Hardware ? "hardware" : "software"; }
const char* exec_mode_name(ExecMode m) { return m == ExecMode::MIMD ? "mimd" : "vlem"; }

namespace {

bool valid_bits(unsigned b) { return b == 2 || b == 4 || b == 8 || b == 16; }

void check_precisions(unsigned ab, unsigned wb) {
  if (!valid_bits(ab)) throw KernelError(fmt::format("activation precision {} not in {{2, 4, 8, 16}}", ab));
  if (!valid_bits(wb)) throw KernelError(fmt::format("weight precision {} not in {{2, 4, 8, 16}}", wb));
}

}  // namespace

void ConvSpec::validate() const {
  if (!H || !W || !C_in || !C_out || !K) throw KernelError("conv dimensions must be >= 1");
  check_precisions(act_bits, wgt_bits);
  if (H + 2 * pad < K || W + 2 * pad < K) throw KernelError("filter larger than the padded input");
  if (pad >= K) throw KernelError("padding must be smaller than the filter");
}

void MatmulSpec::validate() const {
  if (!M || !N || !Kd) throw KernelError("matmul dimensions must be >= 1");
  check_precisions(act_bits, wgt_bits);
}

Roles roles_for(unsigned act_bits, unsigned wgt_bits, bool act_signed, bool wgt_signed) {
  check_precisions(act_bits, wgt_bits);
  Roles r;
  r.act_is_a = act_bits > wgt_bits || (act_bits == wgt_bits && !(act_signed && !wgt_signed));
  bool a_signed = r.act_is_a ? act_signed : wgt_signed;
  bool b_signed = r.act_is_a ? wgt_signed : act_signed;
  r.fmt.a = simd::Precision{r.act_is_a ? act_bits : wgt_bits};
  r.fmt.b = simd::Precision{r.act_is_a ? wgt_bits : act_bits};
  if (a_signed && b_signed) {
    r.fmt.sign = simd::SignMode::SS;
  } else if (!a_signed && !b_signed) {
    r.fmt.sign = simd::SignMode::UU;
  } else if (!a_signed) {
    r.fmt.sign = simd::SignMode::US;
  } else {
    throw KernelError(fmt::format("no sign mode for a signed {}-bit A operand with an unsigned {}-bit B operand",
                                  r.fmt.a.bits, r.fmt.b.bits));
  }
  return r;
}

std::vector<int32_t> random_values(size_t n, unsigned bits, bool is_signed, uint64_t seed) {
  if (bits == 0 || bits > 31) throw KernelError(fmt::format("cannot draw {}-bit values", bits));
  std::mt19937_64 rng(seed);
  int64_t lo = is_signed ? -(int64_t{1} << (bits - 1)) : 0;
  int64_t hi = is_signed ? (int64_t{1} << (bits - 1)) - 1 : (int64_t{1} << bits) - 1;
  std::uniform_int_distribution<int64_t> dist(lo, hi);
  std::vector<int32_t> v(n);
  for (auto& x : v) x = static_cast<int32_t>(dist(rng));
  return v;
}

namespace {

int32_t wrap32(int64_t v) { return static_cast<int32_t>(static_cast<uint32_t>(static_cast<uint64_t>(v))); }

}  // namespace

std::vector<int32_t> golden_matmul(const std::vector<int32_t>& a, const std::vector<int32_t>& b, unsigned M,
                                   unsigned N, unsigned Kd) {
  if (a.size() != size_t{M} * Kd || b.size() != size_t{N} * Kd) {
    throw KernelError(fmt::format("matmul operands of {} and {} values do not match {}x{}x{}", a.size(), b.size(), M,
                                  N, Kd));
  }
  std::vector<int32_t> c(size_t{M} * N);
  for (unsigned m = 0; m < M; ++m) {
    for (unsigned n = 0; n < N; ++n) {
      int64_t acc = 0;
      for (unsigned k = 0; k < Kd; ++k) acc += int64_t{a[size_t{m} * Kd + k]} * b[size_t{n} * Kd + k];
      c[size_t{m} * N + n] = wrap32(acc);
    }
  }
  return c;
}

std::vector<int32_t> im2col_ref(const std::vector<int32_t>& input, const ConvSpec& spec) {
  spec.validate();
  if (input.size() != size_t{spec.H} * spec.W * spec.C_in) throw KernelError("input size does not match H x W x C_in");
  const unsigned Kd = spec.reduction();
  std::vector<int32_t> out(size_t{spec.pixels()} * Kd, 0);
  for (unsigned oy = 0; oy < spec.H_out(); ++oy) {
    for (unsigned ox = 0; ox < spec.W_out(); ++ox) {
      size_t row = (size_t{oy} * spec.W_out() + ox) * Kd;
      for (unsigned ky = 0; ky < spec.K; ++ky) {
        for (unsigned kx = 0; kx < spec.K; ++kx) {
          int iy = int(oy + ky) - int(spec.pad), ix = int(ox + kx) - int(spec.pad);
          if (iy < 0 || ix < 0 || iy >= int(spec.H) || ix >= int(spec.W)) continue;
          for (unsigned ci = 0; ci < spec.C_in; ++ci) {
            out[row + (ky * spec.K + kx) * spec.C_in + ci] = input[(size_t(iy) * spec.W + size_t(ix)) * spec.C_in + ci];
          }
        }
      }
    }
  }
  return out;
}

std::vector<int32_t> golden_conv2d(const std::vector<int32_t>& input, const std::vector<int32_t>& weights,
                                   const ConvSpec& spec) {
  spec.validate();
  if (input.size() != size_t{spec.H} * spec.W * spec.C_in) throw KernelError("input size does not match H x W x C_in");
  if (weights.size() != size_t{spec.C_out} * spec.reduction()) {
    throw KernelError("weight size does not match C_out x K x K x C_in");
  }
  std::vector<int32_t> out(size_t{spec.pixels()} * spec.C_out);
  for (unsigned oy = 0; oy < spec.H_out(); ++oy) {
    for (unsigned ox = 0; ox < spec.W_out(); ++ox) {
      for (unsigned co = 0; co < spec.C_out; ++co) {
        int64_t acc = 0;
        for (unsigned ky = 0; ky < spec.K; ++ky) {
          int iy = int(oy + ky) - int(spec.pad);
          if (iy < 0 || iy >= int(spec.H)) continue;
          for (unsigned kx = 0; kx < spec.K; ++kx) {
            int ix = int(ox + kx) - int(spec.pad);
            if (ix < 0 || ix >= int(spec.W)) continue;
            const int32_t* px = &input[(size_t(iy) * spec.W + size_t(ix)) * spec.C_in];
            const int32_t* wt = &weights[((size_t{co} * spec.K + ky) * spec.K + kx) * spec.C_in];
            for (unsigned ci = 0; ci < spec.C_in; ++ci) acc += int64_t{px[ci]} * wt[ci];
          }
        }
        out[(size_t{oy} * spec.W_out() + ox) * spec.C_out + co] = wrap32(acc);
      }
    }
  }
  return out;
}

namespace {

// Registers free for operands inside the inner loop.
constexpr std::array<unsigned, 13> kPool = {2, 4, 5, 10, 11, 12, 13, 14, 15, 24, 25, 29, 30};
constexpr unsigned kAccBase = 16;
constexpr unsigned kMaxAcc = 8;

struct Operand {
  unsigned bits;
  bool is_signed;
  unsigned items;
  unsigned ptr;
};

struct Body {
  std::vector<std::string> lines;
  unsigned dotps = 0;
  unsigned macs = 0;
  unsigned elems = 0;  // reduction elements consumed per iteration
};

const char* sdotp_mnemonic(simd::SignMode m) {
  switch (m) {
    case simd::SignMode::SS: return "pv.sdotp";
    case simd::SignMode::UU: return "pv.sdotpu";
    case simd::SignMode::US: return "pv.sdotpus";
  }
  return "pv.sdotp";
}

unsigned acc_reg(const Blocking& b, unsigned p, unsigned i) { return kAccBase + p * b.channels + i; }

class RegPool {
 public:
  unsigned take() {
    if (next_ >= kPool.size()) throw KernelError("inner loop needs more registers than available");
    return kPool[next_++];
  }

 private:
  size_t next_ = 0;
};

void check_blocking(const Blocking& b) {
  auto ok = [](unsigned v) { return v == 1 || v == 2 || v == 4 || v == 8; };
  if (!ok(b.pixels) || !ok(b.channels)) throw KernelError("blocking factors must be 1, 2, 4 or 8");
  if (b.pixels * b.channels > kMaxAcc) throw KernelError("blocking needs more than 8 accumulators");
}

// Hardware path: the narrower B operand words stay in registers while the
// controller walks their slices across successive A words.
Body hardware_body(const Roles& r, unsigned ab, unsigned wb, const Blocking& bl) {
  Operand act{ab, true, bl.pixels, 8}, wgt{wb, true, bl.channels, 9};
  const Operand& A = r.act_is_a ? act : wgt;
  const Operand& B = r.act_is_a ? wgt : act;
  RegPool pool;
  std::vector<unsigned> breg(B.items);
  for (auto& x : breg) x = pool.take();
  unsigned areg = pool.take();
  const char* mn = sdotp_mnemonic(r.fmt.sign);
  Body body;
  for (unsigned j = 0; j < B.items; ++j) body.lines.push_back(fmt::format("p.lw x{}, 4(x{}!)", breg[j], B.ptr));
  for (unsigned s = 0; s < r.fmt.slice_count(); ++s) {
    for (unsigned a = 0; a < A.items; ++a) {
      body.lines.push_back(fmt::format("p.lw x{}, 4(x{}!)", areg, A.ptr));
      for (unsigned j = 0; j < B.items; ++j) {
        unsigned p = r.act_is_a ? a : j, i = r.act_is_a ? j : a;
        body.lines.push_back(fmt::format("{} x{}, x{}, x{}", mn, acc_reg(bl, p, i), areg, breg[j]));
        ++body.dotps;
      }
    }
  }
  body.macs = body.dotps * simd::lanes(r.fmt.a);
  body.elems = simd::lanes(r.fmt.b);
  return body;
}

// Software path: sub-byte operands are unpacked to 8-bit lanes with
// extract/pack and fed to uniform 8x8 dot products.
Body software_body(const Roles& r, unsigned ab, unsigned wb, bool act_signed, bool wgt_signed,
                   const Blocking& bl) {
  if (ab == 16 || wb == 16) {
    if (ab == 16 && wb == 16) return hardware_body(r, ab, wb, bl);
    throw KernelError(fmt::format("software path cannot emulate {}x{} formats", ab, wb));
  }
  Operand act{ab, act_signed, bl.pixels, 8}, wgt{wb, wgt_signed, bl.channels, 9};
  const bool act_outer = bl.pixels <= bl.channels;
  const Operand& outer = act_outer ? act : wgt;
  const Operand& inner = act_outer ? wgt : act;

  simd::SignMode mode = simd::SignMode::SS;
  bool act_rs1 = true;
  if (act_signed != wgt_signed) {
    mode = simd::SignMode::US;
    act_rs1 = !act_signed;
  } else if (!act_signed) {
    mode = simd::SignMode::UU;
  }
  const char* mn = sdotp_mnemonic(mode);

  RegPool pool;
  std::vector<unsigned> opacked(outer.bits < 8 ? outer.items : 0), ipacked(inner.bits < 8 ? inner.items : 0);
  for (auto& x : opacked) x = pool.take();
  for (auto& x : ipacked) x = pool.take();
  std::vector<unsigned> ovec(outer.items);
  for (auto& x : ovec) x = pool.take();
  unsigned ivec = pool.take();
  unsigned t0 = 0, t1 = 0;
  if (outer.bits < 8 || inner.bits < 8) {
    t0 = pool.take();
    t1 = pool.take();
  }

  Body body;
  auto vec = [&](const Operand& o, const std::vector<unsigned>& packed, unsigned item, unsigned v, unsigned dst) {
    if (o.bits == 8) {
      body.lines.push_back(fmt::format("p.lw x{}, 4(x{}!)", dst, o.ptr));
      return;
    }
    unsigned u = v % (8 / o.bits);
    if (u == 0) body.lines.push_back(fmt::format("p.lw x{}, 4(x{}!)", packed[item], o.ptr));
    const char* ext = o.is_signed ? "p.extract" : "p.extractu";
    for (unsigned h = 0; h < 2; ++h) {
      unsigned lane = 4 * u + 2 * h;
      body.lines.push_back(fmt::format("{} x{}, x{}, {}, {}", ext, t0, packed[item], o.bits, lane * o.bits));
      body.lines.push_back(fmt::format("{} x{}, x{}, {}, {}", ext, t1, packed[item], o.bits, (lane + 1) * o.bits));
      body.lines.push_back(fmt::format("{} x{}, x{}, x{}", h ? "pv.packhi.b" : "pv.packlo.b", dst, t0, t1));
    }
  };

  const unsigned elems = 32 / std::min(ab, wb);
  for (unsigned v = 0; v < elems / 4; ++v) {
    for (unsigned o = 0; o < outer.items; ++o) vec(outer, opacked, o, v, ovec[o]);
    for (unsigned n = 0; n < inner.items; ++n) {
      vec(inner, ipacked, n, v, ivec);
      for (unsigned o = 0; o < outer.items; ++o) {
        unsigned p = act_outer ? o : n, i = act_outer ? n : o;
        unsigned act_reg = act_outer ? ovec[o] : ivec, wgt_reg = act_outer ? ivec : ovec[o];
        unsigned rs1 = act_rs1 ? act_reg : wgt_reg, rs2 = act_rs1 ? wgt_reg : act_reg;
        body.lines.push_back(fmt::format("{} x{}, x{}, x{}", mn, acc_reg(bl, p, i), rs1, rs2));
        ++body.dotps;
      }
    }
  }
  body.macs = body.dotps * 4;
  body.elems = elems;
  return body;
}

Body inner_body(Path path, const Roles& r, unsigned ab, unsigned wb, bool act_signed, bool wgt_signed,
                const Blocking& bl) {
  check_blocking(bl);
  return path == Path::Hardware ? hardware_body(r, ab, wb, bl) : software_body(r, ab, wb, act_signed, wgt_signed, bl);
}

bool act_signed_of(const Roles& r) { return r.act_is_a ? r.fmt.a_signed() : r.fmt.b_signed(); }
bool wgt_signed_of(const Roles& r) { return r.act_is_a ? r.fmt.b_signed() : r.fmt.a_signed(); }

}  // namespace

InnerCost inner_cost(Path path, const Roles& r, unsigned act_bits, unsigned wgt_bits, Blocking b) {
  Body body = inner_body(path, r, act_bits, wgt_bits, act_signed_of(r), wgt_signed_of(r), b);
  return {static_cast<unsigned>(body.lines.size()), body.dotps, body.macs};
}

Blocking choose_blocking(Path path, const Roles& r, unsigned act_bits, unsigned wgt_bits, unsigned rows_per_core,
                         unsigned channels) {
  std::optional<Blocking> best;
  std::optional<KernelError> last;
  double best_cost = 0;
  for (unsigned pb : {1u, 2u, 4u, 8u}) {
    for (unsigned cb : {1u, 2u, 4u, 8u}) {
      if (pb * cb > kMaxAcc || rows_per_core % pb || channels % cb) continue;
      InnerCost c;
      try {
        c = inner_cost(path, r, act_bits, wgt_bits, Blocking{pb, cb});
      } catch (const KernelError& e) {
        last = e;
        continue;
      }
      double cost = double(c.instructions) / double(c.macs);
      bool better = !best || cost < best_cost - 1e-12;
      if (!better && cost <= best_cost + 1e-12) {
        unsigned area = pb * cb, best_area = best->pixels * best->channels;
        better = area > best_area || (area == best_area && pb < best->pixels);
      }
      if (better) {
        best = Blocking{pb, cb};
        best_cost = cost;
      }
    }
  }
  if (!best) {
    if (last) throw *last;
    throw KernelError(fmt::format("no register blocking fits {} rows per core and {} channels", rows_per_core,
                                  channels));
  }
  return *best;
}

namespace {

class Source {
 public:
  template <typename... Args>
  void op(fmt::format_string<Args...> f, Args&&... args) {
    text_ += "  ";
    fmt::format_to(std::back_inserter(text_), f, std::forward<Args>(args)...);
    text_ += '\n';
  }
  void raw(const std::string& line) { text_ += "  " + line + "\n"; }
  void label(const std::string& name) { text_ += name + ":\n"; }
  void comment(const std::string& c) { text_ += "  # " + c + "\n"; }
  std::string label_id(const std::string& stem) { return fmt::format("{}_{}", stem, ++labels_); }

  // rd = rs + imm, through a temporary when the immediate is wide.
  void add_imm(unsigned rd, unsigned rs, int64_t imm, unsigned tmp = 2) {
    if (imm >= -2048 && imm <= 2047) {
      op("addi x{}, x{}, {}", rd, rs, imm);
    } else {
      op("li x{}, {}", tmp, imm);
      op("add x{}, x{}, x{}", rd, rs, tmp);
    }
  }

  const std::string& str() const { return text_; }

 private:
  std::string text_;
  unsigned labels_ = 0;
};

// Initial TCDM contents with named positions.
class Image {
 public:
  explicit Image(uint32_t base) : base_(base) {}

  void reserve(uint32_t top) {
    if (top > base_ + bytes_.size()) bytes_.resize(top - base_, 0);
  }
  void name(uint32_t addr, const std::string& n) { labels_[addr] = n; }
  void put32(uint32_t addr, uint32_t v) {
    reserve(addr + 4);
    for (unsigned i = 0; i < 4; ++i) bytes_[addr - base_ + i] = static_cast<uint8_t>(v >> (8 * i));
  }
  void put(uint32_t addr, uint32_t v, unsigned width) {
    reserve(addr + width);
    for (unsigned i = 0; i < width; ++i) bytes_[addr - base_ + i] = static_cast<uint8_t>(v >> (8 * i));
  }

  std::string emit() const {
    std::string out = ".data .l1\n";
    size_t n = (bytes_.size() + 3) / 4 * 4;
    auto word = [&](size_t off) {
      uint32_t v = 0;
      for (unsigned i = 0; i < 4; ++i) {
        if (off + i < bytes_.size()) v |= uint32_t{bytes_[off + i]} << (8 * i);
      }
      return v;
    };
    size_t off = 0;
    while (off < n) {
      if (auto it = labels_.find(static_cast<uint32_t>(base_ + off)); it != labels_.end()) out += it->second + ":\n";
      size_t next_label = n;
      if (auto it = labels_.upper_bound(static_cast<uint32_t>(base_ + off)); it != labels_.end()) {
        next_label = std::min<size_t>(n, it->first - base_);
      }
      size_t end = off;
      if (word(off) == 0) {
        while (end < next_label && word(end) == 0) end += 4;
        out += fmt::format("  .space {}\n", end - off);
      } else {
        std::vector<std::string> ws;
        while (end < next_label && word(end) != 0 && ws.size() < 8) {
          ws.push_back(fmt::format("0x{:08x}", word(end)));
          end += 4;
        }
        out += fmt::format("  .word {}\n", fmt::join(ws, ", "));
      }
      off = end;
    }
    if (auto it = labels_.find(static_cast<uint32_t>(base_ + n)); it != labels_.end()) out += it->second + ":\n";
    return out;
  }

 private:
  uint32_t base_;
  std::vector<uint8_t> bytes_;
  std::map<uint32_t, std::string> labels_;
};

// Packs lane values, 32 / bits per word, lane 0 in the low bits.
std::vector<uint32_t> pack_words(const int32_t* v, size_t n, unsigned bits) {
  unsigned per = 32 / bits;
  uint32_t mask = bits == 32 ? 0xFFFFFFFFu : (1u << bits) - 1u;
  std::vector<uint32_t> words((n + per - 1) / per, 0);
  for (size_t i = 0; i < n; ++i) words[i / per] |= (static_cast<uint32_t>(v[i]) & mask) << ((i % per) * bits);
  return words;
}

struct MatmulShape {
  unsigned rows_per_core;  // pixels or rows handled by one core
  unsigned channels;       // output channels / columns
  unsigned Kd;
  unsigned act_bits, wgt_bits;
};

struct Plan {
  Roles roles;
  Blocking blocking;
  Body body;
  unsigned row_bytes = 0;   // one activation row
  unsigned wrow_bytes = 0;  // one weight row
  unsigned iters = 0;
  uint32_t simd_fmt = 0;
  uint32_t macctl = 1;
};

Plan make_plan(const MatmulShape& s, bool act_signed, bool wgt_signed, const GenOptions& opt) {
  Plan p;
  p.roles = roles_for(s.act_bits, s.wgt_bits, act_signed, wgt_signed);
  if (uint64_t{s.Kd} * s.act_bits % 32 || uint64_t{s.Kd} * s.wgt_bits % 32) {
    throw KernelError(fmt::format("reduction length {} does not fill whole words at {}x{} bits", s.Kd, s.act_bits,
                                  s.wgt_bits));
  }
  p.blocking = opt.blocking ? *opt.blocking
                            : choose_blocking(opt.path, p.roles, s.act_bits, s.wgt_bits, s.rows_per_core, s.channels);
  if (s.rows_per_core % p.blocking.pixels) {
    throw KernelError(fmt::format("{} rows per core not divisible by blocking {}", s.rows_per_core, p.blocking.pixels));
  }
  if (s.channels % p.blocking.channels) {
    throw KernelError(fmt::format("{} channels not divisible by blocking {}", s.channels, p.blocking.channels));
  }
  p.body = inner_body(opt.path, p.roles, s.act_bits, s.wgt_bits, act_signed, wgt_signed, p.blocking);
  if (s.Kd % p.body.elems) {
    throw KernelError(fmt::format("reduction length {} not a multiple of {}", s.Kd, p.body.elems));
  }
  p.iters = s.Kd / p.body.elems;
  p.row_bytes = s.Kd * s.act_bits / 8;
  p.wrow_bytes = s.Kd * s.wgt_bits / 8;
  bool hw = opt.path == Path::Hardware || (s.act_bits == 16 && s.wgt_bits == 16);
  if (hw) {
    p.simd_fmt = encode_simd_fmt(p.roles.fmt.a.bits, p.roles.fmt.b.bits, p.roles.fmt.sign);
    p.macctl = p.blocking.pixels * p.blocking.channels;
  } else {
    simd::SignMode m = act_signed == wgt_signed ? (act_signed ? simd::SignMode::SS : simd::SignMode::UU)
                                                : simd::SignMode::US;
    p.simd_fmt = encode_simd_fmt(8, 8, m);
    p.macctl = 1;
  }
  return p;
}

// Interleaves the activation rows of one core so that word j of row p in a
// group of P rows lands at (j * P + p) * 4.
void put_activations(Image& img, uint32_t base, const std::vector<int32_t>& rows, unsigned first_row, unsigned n_rows,
                     unsigned Kd, unsigned bits, unsigned P) {
  unsigned words = Kd * bits / 32;
  for (unsigned r = 0; r < n_rows; ++r) {
    auto w = pack_words(&rows[size_t{first_row + r} * Kd], Kd, bits);
    unsigned g = r / P, p = r % P;
    uint32_t gbase = base + g * P * words * 4;
    for (unsigned j = 0; j < words; ++j) img.put32(gbase + (j * P + p) * 4, w[j]);
  }
}

// Weights in blocks of Cb channels, word-interleaved within a block.
void put_weights(Image& img, uint32_t base, const std::vector<int32_t>& w, unsigned channels, unsigned Kd,
                 unsigned bits, unsigned Cb) {
  unsigned words = Kd * bits / 32;
  for (unsigned co = 0; co < channels; ++co) {
    auto pw = pack_words(&w[size_t{co} * Kd], Kd, bits);
    unsigned blk = co / Cb, i = co % Cb;
    for (unsigned k = 0; k < words; ++k) img.put32(base + ((blk * words + k) * Cb + i) * 4, pw[k]);
  }
}

void emit_setup(Source& src, const Plan& p) {
  src.op("csrrs x1, mhartid, x0");
  src.op("li x2, {}", p.simd_fmt);
  src.op("csrrw x0, simd_fmt, x2");
  src.op("li x2, {}", p.macctl);
  src.op("csrrw x0, mp_macctl, x2");
  src.op("csrrw x0, mp_state, x0");
}

// x6: activation group base, x7: output row base. Leaves x7 past the last block.
void emit_matmul_phase(Source& src, const Plan& p, unsigned channels) {
  const Blocking& b = p.blocking;
  std::string blocks_end = src.label_id("blocks_end");
  src.op("li x9, weights");
  src.op("li x4, {}", channels / b.channels);
  src.op("lp.setup 1, x4, {}", blocks_end);
  for (unsigned a = 0; a < b.pixels * b.channels; ++a) src.op("addi x{}, x0, 0", kAccBase + a);
  src.op("mv x8, x6");
  src.op("li x5, {}", p.iters);
  src.op("lp.setup 0, x5, {}", kInnerEnd);
  src.label(kInnerBegin);
  for (const auto& l : p.body.lines) src.raw(l);
  src.label(kInnerEnd);
  for (unsigned px = 0; px < b.pixels; ++px) {
    for (unsigned i = 0; i < b.channels; ++i) src.op("sw x{}, {}(x7)", acc_reg(b, px, i), (px * channels + i) * 4);
  }
  src.op("addi x7, x7, {}", b.channels * 4);
  src.label(blocks_end);
}

// reg = this core's buffer in an allocation of n bytes per core.
void emit_core_buffer(Source& src, unsigned reg, const char* label, Layout layout, uint32_t n, const L1Allocator& al,
                      const LayoutParams& lp) {
  uint32_t stride = layout == Layout::Misaligned ? misaligned_sub_buffer(n, lp) + lp.w : al.naive_stride(n);
  src.op("li x2, {}", stride);
  src.op("mul x{}, x1, x2", reg);
  src.op("li x2, {}", label);
  src.op("add x{}, x{}, x2", reg, reg);
}

uint32_t alloc_buffers(L1Allocator& al, Layout layout, uint32_t n) {
  return layout == Layout::Misaligned ? al.misaligned_alloc(n) : al.naive_alloc(n);
}

uint32_t buffer_of(Layout layout, uint32_t base, unsigned core, uint32_t n, const L1Allocator& al,
                   const LayoutParams& lp) {
  return base + (layout == Layout::Misaligned ? misaligned_offset(core, n, lp) : core * al.naive_stride(n));
}

void check_cores(unsigned n_cores) {
  if (n_cores == 0 || n_cores > 32) throw KernelError("core count must be in [1, 32]");
}

std::string kernel_name(const char* kind, unsigned ab, unsigned wb, const GenOptions& opt) {
  return fmt::format("{}_a{}w{}_{}_{}_{}", kind, ab, wb, exec_mode_name(opt.mode), path_name(opt.path),
                     layout_name(opt.layout));
}

// One output pixel of im2col: x26/x27 = (oy, ox), x8 = slot of this pixel in
// the interleaved buffer. Clobbers x2, x5, x9-x13, x29.
void emit_im2col_pixel(Source& src, const ConvSpec& s, unsigned cbytes, unsigned group) {
  const unsigned cw = cbytes / 4, stride = group * 4;
  src.op("mv x10, x8");
  if (s.pad == 0) {
    std::string rows_end = src.label_id("rows_end"), cols_end = src.label_id("cols_end");
    src.op("mul x9, x26, x15");
    src.op("add x9, x9, x27");
    src.op("mul x9, x9, x24");
    src.op("add x9, x9, x25");
    src.op("li x12, {}", s.K);
    src.op("lp.setup 1, x12, {}", rows_end);
    src.op("li x5, {}", s.K * cw);
    src.op("lp.setup 0, x5, {}", cols_end);
    src.op("p.lw x11, 4(x9!)");
    src.op("p.sw x11, {}(x10!)", stride);
    src.label(cols_end);
    src.add_imm(9, 9, int64_t{s.W - s.K} * cbytes, 13);
    src.label(rows_end);
    return;
  }
  std::string ky = src.label_id("ky"), kx = src.label_id("kx"), zero = src.label_id("zero"),
              next = src.label_id("tap_next");
  auto words = [&](bool copy) {
    if (cw <= 4) {
      for (unsigned j = 0; j < cw; ++j) {
        if (copy) {
          src.op("p.lw x11, 4(x9!)");
          src.op("p.sw x11, {}(x10!)", stride);
        } else {
          src.op("p.sw x0, {}(x10!)", stride);
        }
      }
      return;
    }
    std::string end = src.label_id(copy ? "copy_end" : "fill_end");
    src.op("li x29, {}", cw);
    src.op("lp.setup 0, x29, {}", end);
    if (copy) {
      src.op("p.lw x11, 4(x9!)");
      src.op("p.sw x11, {}(x10!)", stride);
    } else {
      src.op("p.sw x0, {}(x10!)", stride);
    }
    src.label(end);
  };
  src.op("addi x12, x26, {}", -int(s.pad));
  src.op("li x13, {}", s.K);
  src.label(ky);
  src.op("addi x2, x27, {}", -int(s.pad));
  src.op("li x5, {}", s.K);
  src.label(kx);
  src.op("bgeu x12, x14, {}", zero);
  src.op("bgeu x2, x15, {}", zero);
  src.op("mul x9, x12, x15");
  src.op("add x9, x9, x2");
  src.op("mul x9, x9, x24");
  src.op("add x9, x9, x25");
  words(true);
  src.op("j {}", next);
  src.label(zero);
  words(false);
  src.label(next);
  src.op("addi x2, x2, 1");
  src.op("addi x5, x5, -1");
  src.op("bne x5, x0, {}", kx);
  src.op("addi x12, x12, 1");
  src.op("addi x13, x13, -1");
  src.op("bne x13, x0, {}", ky);
}

}  // namespace

Kernel gen_conv(const ConvSpec& spec, const GenOptions& opt) {
  spec.validate();
  check_cores(opt.n_cores);
  const unsigned ab = spec.act_bits, wb = spec.wgt_bits;
  if (spec.C_in * ab % 32) {
    throw KernelError(fmt::format("{} input channels at {} bits do not fill whole words", spec.C_in, ab));
  }
  if (spec.pixels() % opt.n_cores) {
    throw KernelError(fmt::format("{} output pixels not divisible across {} cores", spec.pixels(), opt.n_cores));
  }
  const unsigned ppc = spec.pixels() / opt.n_cores, Kd = spec.reduction();
  Plan plan = make_plan({ppc, spec.C_out, Kd, ab, wb}, spec.act_signed, spec.wgt_signed, opt);
  const unsigned P = plan.blocking.pixels, cbytes = spec.C_in * ab / 8;

  LayoutParams lp;
  lp.n_cores = opt.n_cores;
  L1Allocator al(mmap::TCDM_BASE, 131072, lp);
  const uint32_t buf_bytes = P * plan.row_bytes;
  uint32_t in_addr = al.alloc(spec.H * spec.W * cbytes);
  uint32_t w_addr = al.alloc(spec.C_out * plan.wrow_bytes);
  uint32_t buf_addr = alloc_buffers(al, opt.layout, buf_bytes);
  const uint32_t out_bytes = ppc * spec.C_out * 4;
  uint32_t out_addr = alloc_buffers(al, opt.layout, out_bytes);

  auto input = random_values(size_t{spec.H} * spec.W * spec.C_in, ab, spec.act_signed, spec.seed);
  auto weights = random_values(size_t{spec.C_out} * Kd, wb, spec.wgt_signed, spec.seed + 0x9E3779B97F4A7C15ull);

  Image img(mmap::TCDM_BASE);
  img.reserve(al.top());
  img.name(in_addr, "input");
  img.name(w_addr, "weights");
  img.name(buf_addr, "im2col");
  img.name(out_addr, "output");
  auto in_words = pack_words(input.data(), input.size(), ab);
  for (size_t i = 0; i < in_words.size(); ++i) img.put32(in_addr + uint32_t(i) * 4, in_words[i]);
  put_weights(img, w_addr, weights, spec.C_out, Kd, wb, plan.blocking.channels);

  Kernel k;
  k.name = kernel_name("conv", ab, wb, opt);
  k.macs = spec.macs();
  k.blocking = plan.blocking;
  k.mixed = ab != wb;
  auto golden = golden_conv2d(input, weights, spec);
  for (unsigned q = 0; q < spec.pixels(); ++q) {
    uint32_t row = buffer_of(opt.layout, out_addr, q / ppc, out_bytes, al, lp) + (q % ppc) * spec.C_out * 4;
    for (unsigned co = 0; co < spec.C_out; ++co) {
      k.expect.push_back({row + co * 4, 4, uint32_t(golden[size_t{q} * spec.C_out + co])});
    }
  }

  Source src;
  src.comment(fmt::format("conv {}x{}x{} -> {}, {}x{} filter, pad {}, a{}w{}, {} pixels per core, blocking {}x{}",
                          spec.H, spec.W, spec.C_in, spec.C_out, spec.K, spec.K, spec.pad, ab, wb, ppc, P,
                          plan.blocking.channels));
  src.raw(".text");
  src.label("_start");
  emit_setup(src, plan);
  emit_core_buffer(src, 6, "im2col", opt.layout, buf_bytes, al, lp);
  emit_core_buffer(src, 7, "output", opt.layout, out_bytes, al, lp);
  src.op("li x2, {}", ppc);
  src.op("mul x3, x1, x2");
  src.op("li x28, {}", spec.W_out());
  src.op("div x26, x3, x28");
  src.op("rem x27, x3, x28");
  src.op("li x3, {}", ppc / P);
  src.label("group");
  src.comment("im2col");
  src.op("li x14, {}", spec.H);
  src.op("li x15, {}", spec.W);
  src.op("li x24, {}", cbytes);
  src.op("li x25, input");
  src.op("li x4, {}", P);
  src.op("mv x8, x6");
  src.label("pixel");
  emit_im2col_pixel(src, spec, cbytes, P);
  src.op("addi x8, x8, 4");
  src.op("addi x27, x27, 1");
  src.op("bne x27, x28, pixel_next");
  src.op("li x27, 0");
  src.op("addi x26, x26, 1");
  src.label("pixel_next");
  src.op("addi x4, x4, -1");
  src.op("bne x4, x0, pixel");
  src.comment("matmul");
  if (opt.mode == ExecMode::VLEM) {
    src.op("barrier");
    src.op("vlem.on");
  }
  emit_matmul_phase(src, plan, spec.C_out);
  if (opt.mode == ExecMode::VLEM) src.op("vlem.off");
  if (P > 1) src.add_imm(7, 7, int64_t{P - 1} * spec.C_out * 4);
  src.op("addi x3, x3, -1");
  src.op("bne x3, x0, group");
  k.source = src.str() + img.emit();
  return k;
}

Kernel gen_matmul(const MatmulSpec& spec, const GenOptions& opt) {
  spec.validate();
  check_cores(opt.n_cores);
  const unsigned ab = spec.act_bits, wb = spec.wgt_bits;
  if (spec.M % opt.n_cores) throw KernelError(fmt::format("{} rows not divisible across {} cores", spec.M, opt.n_cores));
  const unsigned rpc = spec.M / opt.n_cores;
  Plan plan = make_plan({rpc, spec.N, spec.Kd, ab, wb}, spec.act_signed, spec.wgt_signed, opt);
  const unsigned P = plan.blocking.pixels;

  LayoutParams lp;
  lp.n_cores = opt.n_cores;
  L1Allocator al(mmap::TCDM_BASE, 131072, lp);
  const uint32_t buf_bytes = rpc * plan.row_bytes;
  uint32_t w_addr = al.alloc(spec.N * plan.wrow_bytes);
  uint32_t a_addr = alloc_buffers(al, opt.layout, buf_bytes);
  const uint32_t out_bytes = rpc * spec.N * 4;
  uint32_t out_addr = alloc_buffers(al, opt.layout, out_bytes);

  auto a = random_values(size_t{spec.M} * spec.Kd, ab, spec.act_signed, spec.seed);
  auto b = random_values(size_t{spec.N} * spec.Kd, wb, spec.wgt_signed, spec.seed + 0x9E3779B97F4A7C15ull);

  Image img(mmap::TCDM_BASE);
  img.reserve(al.top());
  img.name(w_addr, "weights");
  img.name(a_addr, "activations");
  img.name(out_addr, "output");
  put_weights(img, w_addr, b, spec.N, spec.Kd, wb, plan.blocking.channels);
  for (unsigned c = 0; c < opt.n_cores; ++c) {
    put_activations(img, buffer_of(opt.layout, a_addr, c, buf_bytes, al, lp), a, c * rpc, rpc, spec.Kd, ab, P);
  }

  Kernel k;
  k.name = kernel_name("matmul", ab, wb, opt);
  k.macs = spec.macs();
  k.blocking = plan.blocking;
  k.mixed = ab != wb;
  auto golden = golden_matmul(a, b, spec.M, spec.N, spec.Kd);
  for (unsigned m = 0; m < spec.M; ++m) {
    uint32_t row = buffer_of(opt.layout, out_addr, m / rpc, out_bytes, al, lp) + (m % rpc) * spec.N * 4;
    for (unsigned n = 0; n < spec.N; ++n) {
      k.expect.push_back({row + n * 4, 4, uint32_t(golden[size_t{m} * spec.N + n])});
    }
  }

  Source src;
  src.comment(fmt::format("matmul {}x{}x{}, a{}w{}, {} rows per core, blocking {}x{}", spec.M, spec.N, spec.Kd, ab,
                          wb, rpc, P, plan.blocking.channels));
  src.raw(".text");
  src.label("_start");
  emit_setup(src, plan);
  emit_core_buffer(src, 6, "activations", opt.layout, buf_bytes, al, lp);
  emit_core_buffer(src, 7, "output", opt.layout, out_bytes, al, lp);
  src.op("li x3, {}", rpc / P);
  if (opt.mode == ExecMode::VLEM) {
    src.op("barrier");
    src.op("vlem.on");
  }
  src.label("group");
  emit_matmul_phase(src, plan, spec.N);
  if (P > 1) src.add_imm(7, 7, int64_t{P - 1} * spec.N * 4);
  src.add_imm(6, 6, int64_t{P} * plan.row_bytes);
  src.op("addi x3, x3, -1");
  src.op("bne x3, x0, group");
  if (opt.mode == ExecMode::VLEM) src.op("vlem.off");
  k.source = src.str() + img.emit();
  return k;
}

Kernel gen_vecadd(unsigned n, unsigned chunk, unsigned s, ExecMode mode, uint64_t seed, unsigned n_cores) {
  check_cores(n_cores);
  LayoutParams lp;
  lp.s = s;
  lp.n_cores = n_cores;
  lp.validate();
  if (chunk == 0 || n == 0 || n % (chunk * n_cores)) {
    throw KernelError(fmt::format("{} elements do not split into chunks of {} across {} cores", n, chunk, n_cores));
  }
  const unsigned rounds = n / (chunk * n_cores), bytes = n * s;
  L1Allocator al(mmap::TCDM_BASE, 131072, lp);
  uint32_t a_addr = al.alloc(bytes, 128), b_addr = al.alloc(bytes, 128), c_addr = al.alloc(bytes, 128);

  auto a = random_values(n, 8 * s - (s == 4 ? 1 : 0), false, seed);
  auto b = random_values(n, 8 * s - (s == 4 ? 1 : 0), false, seed + 1);
  Image img(mmap::TCDM_BASE);
  img.reserve(al.top());
  img.name(a_addr, "vec_a");
  img.name(b_addr, "vec_b");
  img.name(c_addr, "vec_c");
  Kernel k;
  k.name = fmt::format("vecadd_n{}_chunk{}_s{}_{}", n, chunk, s, exec_mode_name(mode));
  for (unsigned i = 0; i < n; ++i) {
    img.put(a_addr + i * s, uint32_t(a[i]), s);
    img.put(b_addr + i * s, uint32_t(b[i]), s);
    uint32_t sum = uint32_t(a[i]) + uint32_t(b[i]);
    if (s < 4) sum &= (1u << (8 * s)) - 1u;
    k.expect.push_back({c_addr + i * s, static_cast<uint8_t>(s), sum});
  }

  const char* ld = s == 1 ? "lbu" : s == 2 ? "lhu" : "lw";
  const char* st = s == 1 ? "sb" : s == 2 ? "sh" : "sw";
  Source src;
  src.comment(fmt::format("c = a + b, {} elements of {} bytes, chunks of {}", n, s, chunk));
  src.raw(".text");
  src.label("_start");
  src.op("csrrs x1, mhartid, x0");
  src.op("li x2, {}", chunk * s);
  src.op("mul x3, x1, x2");
  src.op("li x10, vec_a");
  src.op("add x10, x10, x3");
  src.op("li x11, vec_b");
  src.op("add x11, x11, x3");
  src.op("li x12, vec_c");
  src.op("add x12, x12, x3");
  src.op("li x5, {}", rounds);
  src.op("li x6, {}", chunk);
  if (mode == ExecMode::VLEM) {
    src.op("barrier");
    src.op("vlem.on");
  }
  src.op("lp.setup 1, x5, rounds_end");
  src.op("lp.setup 0, x6, chunk_end");
  src.op("{} x13, 0(x10)", ld);
  src.op("{} x14, 0(x11)", ld);
  src.op("add x13, x13, x14");
  src.op("{} x13, 0(x12)", st);
  src.op("addi x10, x10, {}", s);
  src.op("addi x11, x11, {}", s);
  src.op("addi x12, x12, {}", s);
  src.label("chunk_end");
  const int64_t skip = int64_t{n_cores - 1} * chunk * s;
  src.add_imm(10, 10, skip, 15);
  src.add_imm(11, 11, skip, 15);
  src.add_imm(12, 12, skip, 15);
  src.label("rounds_end");
  if (mode == ExecMode::VLEM) src.op("vlem.off");
  k.source = src.str() + img.emit();
  return k;
}

Verification verify(const Kernel& k, const Cluster& c) {
  Verification v;
  for (const auto& e : k.expect) {
    uint32_t got = 0;
    for (unsigned i = 0; i < e.width; ++i) got |= uint32_t{c.read8(e.addr + i)} << (8 * i);
    if (got != e.value) {
      if (v.ok) {
        v.first = fmt::format("at 0x{:08x}: expected 0x{:0{}x}, got 0x{:0{}x}", e.addr, e.value, 2 * e.width, got,
                              2 * e.width);
      }
      v.ok = false;
      ++v.mismatches;
    }
  }
  return v;
}

std::string format_expect(const std::vector<Expect>& expect) {
  std::string out = "# address width value\n";
  for (const auto& e : expect) out += fmt::format("0x{:08x} {} 0x{:0{}x}\n", e.addr, e.width, e.value, 2 * e.width);
  return out;
}

std::vector<Expect> parse_expect(std::string_view text, const std::string& origin) {
  std::vector<Expect> out;
  int line_no = 0;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t nl = std::min(text.find('\n', pos), text.size());
    std::string line(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (size_t h = line.find('#'); h != std::string::npos) line.resize(h);
    std::istringstream in(line);
    std::string a, w, v, extra;
    if (!(in >> a)) continue;
    try {
      if (!(in >> w >> v) || (in >> extra)) throw ConfigError("expected 'address width value'");
      uint64_t addr = parse_uint("address", a), width = parse_uint("width", w), value = parse_uint("value", v);
      if (addr > 0xFFFFFFFFull) throw ConfigError("address out of range");
      if (width != 1 && width != 2 && width != 4) throw ConfigError("width must be 1, 2 or 4");
      if (width < 4 && value >> (8 * width)) throw ConfigError("value does not fit the width");
      if (value > 0xFFFFFFFFull) throw ConfigError("value out of range");
      out.push_back(Expect{uint32_t(addr), uint8_t(width), uint32_t(value)});
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("{}:{}: {}", origin, line_no, e.what()));
    }
  }
  return out;
}

InnerLoopStats inner_loop_stats(const Program& p, const Metrics& m) {
  long begin = p.index_of(p.symbol(kInnerBegin)), end = p.index_of(p.symbol(kInnerEnd));
  if (begin < 0 || end < begin) throw KernelError("inner loop labels are not in the text");
  InnerLoopStats s;
  for (long i = begin; i < end && size_t(i) < m.retired_per_pc.size(); ++i) {
    s.retired += m.retired_per_pc[size_t(i)];
    Op op = p.text[size_t(i)].op;
    if (op >= Op::PV_DOTP && op <= Op::PV_SDOTPUS) s.dotps += m.retired_per_pc[size_t(i)];
  }
  return s;
}

namespace {

Program assemble_or_throw(const Kernel& k, const ClusterConfig& cfg) {
  AsmResult r = assemble(k.source, AsmOptions::from(cfg, k.name + ".s"));
  if (!r.ok()) {
    std::string msg = "generated kernel " + k.name + " does not assemble:";
    for (const auto& e : r.errors) msg += "\n" + e.to_string();
    throw KernelError(msg);
  }
  return std::move(*r.program);
}

}  // namespace

BenchResult run_bench(const Kernel& k, const ClusterConfig& cfg, const energy::Params& params) {
  Program prog = assemble_or_throw(k, cfg);
  Cluster cl(cfg);
  cl.load(prog);
  cl.run();
  BenchResult r;
  r.name = k.name;
  r.metrics = cl.metrics();
  r.activity = cl.activity();
  r.energy = energy::report(energy::price(r.activity, params), r.metrics.cycles);
  r.macs_per_cycle = r.metrics.macs_per_cycle();
  r.verification = verify(k, cl);
  return r;
}

MatmulSpec calibration_matmul() { return MatmulSpec{}; }

CalibrationReport calibrate_check(const energy::Params& params, const ClusterConfig& cfg) {
  MatmulSpec spec = calibration_matmul();
  GenOptions opt;
  opt.n_cores = cfg.n_cores;
  opt.mode = ExecMode::MIMD;
  BenchResult mimd = run_bench(gen_matmul(spec, opt), cfg, params);
  opt.mode = ExecMode::VLEM;
  BenchResult vlem = run_bench(gen_matmul(spec, opt), cfg, params);

  CalibrationReport rep;
  rep.verified = mimd.verification.ok && vlem.verification.ok;
  rep.mimd_pj_per_cycle = mimd.energy.pJ_per_cycle;
  rep.vlem_pj_per_cycle = vlem.energy.pJ_per_cycle;
  rep.ratio = rep.mimd_pj_per_cycle > 0 ? rep.vlem_pj_per_cycle / rep.mimd_pj_per_cycle : 0;
  rep.cycle_delta = mimd.metrics.cycles
                        ? (double(vlem.metrics.cycles) - double(mimd.metrics.cycles)) / double(mimd.metrics.cycles)
                        : 0;
  for (size_t u = 0; u < energy::kUnits; ++u) {
    double m = mimd.metrics.cycles ? mimd.energy.by_unit[u] / double(mimd.metrics.cycles) : 0;
    double v = vlem.metrics.cycles ? vlem.energy.by_unit[u] / double(vlem.metrics.cycles) : 0;
    rep.unit_delta[u] = v - m;
  }
  rep.vlem_largest = vlem.energy.largest();
  bool in_band = rep.ratio >= kCalibLow && rep.ratio <= kCalibHigh;
  bool fast = rep.cycle_delta <= 0.01;
  bool idex = rep.vlem_largest == energy::Unit::IDEX;
  rep.pass = rep.verified && in_band && fast && idex;
  if (!rep.verified) {
    rep.diagnostic = "calibration kernel output does not match the golden model";
  } else if (!in_band) {
    size_t most = 0;
    for (size_t u = 1; u < energy::kUnits; ++u) {
      if (std::abs(rep.unit_delta[u]) > std::abs(rep.unit_delta[most])) most = u;
    }
    rep.diagnostic = fmt::format("energy ratio {:.4f} outside [{}, {}]; largest per-cycle change in {} ({:+.3f} pJ)",
                                 rep.ratio, kCalibLow, kCalibHigh, energy::unit_name(energy::Unit(most)),
                                 rep.unit_delta[most]);
  } else if (!fast) {
    rep.diagnostic = fmt::format("VLEM is {:.2f}% slower than MIMD", 100 * rep.cycle_delta);
  } else if (!idex) {
    rep.diagnostic = fmt::format("largest VLEM energy share is {}, not IDEX", energy::unit_name(rep.vlem_largest));
  }
  return rep;
}

}  // namespace csim::kernels
