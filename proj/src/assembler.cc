#include "clustersim/assembler.h"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <stdexcept>

namespace csim {

const char* asm_error_kind_name(AsmErrorKind k) {
  switch (k) {
    case AsmErrorKind::Syntax: return "syntax";
    case AsmErrorKind::UnknownMnemonic: return "unknown-mnemonic";
    case AsmErrorKind::BadOperand: return "bad-operand";
    case AsmErrorKind::DuplicateLabel: return "duplicate-label";
    case AsmErrorKind::UndefinedLabel: return "undefined-label";
    case AsmErrorKind::SectionOverflow: return "section-overflow";
  }
  return "?";
}

std::string AsmError::to_string() const {
  return fmt::format("{}:{}:{}: {}: {}", span.file, span.line, span.column, asm_error_kind_name(kind), message);
}

AsmOptions AsmOptions::from(const ClusterConfig& c, std::string file_name) {
  AsmOptions o;
  o.file_name = std::move(file_name);
  o.text_base = c.l2_base;
  o.l1_base = c.tcdm_base;
  o.l1_bytes = c.tcdm_bytes;
  o.l2_bytes = c.l2_bytes;
  return o;
}

uint32_t Program::symbol(const std::string& name) const {
  auto it = symbols.find(name);
  if (it == symbols.end()) throw std::out_of_range("no symbol " + name);
  return it->second;
}

namespace {

struct Failure {
  AsmErrorKind kind;
  std::string message;
};

[[noreturn]] void fail(AsmErrorKind k, std::string msg) { throw Failure{k, std::move(msg)}; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$'; }

bool is_ident(std::string_view s) {
  if (s.empty() || !ident_start(s[0])) return false;
  return std::all_of(s.begin(), s.end(), ident_char);
}

std::optional<uint8_t> parse_reg(std::string_view s) {
  static const char* abi[32] = {"zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1", "a0",
                                "a1",   "a2", "a3", "a4", "a5", "a6", "a7", "s2", "s3", "s4", "s5",
                                "s6",   "s7", "s8", "s9", "s10", "s11", "t3", "t4", "t5", "t6"};
  if (s.size() >= 2 && s[0] == 'x') {
    unsigned v = 0;
    auto [p, ec] = std::from_chars(s.data() + 1, s.data() + s.size(), v);
    if (ec == std::errc() && p == s.data() + s.size() && v < 32 && !(s.size() > 2 && s[1] == '0')) {
      return static_cast<uint8_t>(v);
    }
    return std::nullopt;
  }
  if (s == "fp") return 8;
  for (uint8_t i = 0; i < 32; ++i) {
    if (s == abi[i]) return i;
  }
  return std::nullopt;
}

std::optional<int64_t> parse_number(std::string_view s) {
  bool neg = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    neg = s[0] == '-';
    s.remove_prefix(1);
  }
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  }
  if (s.empty()) return std::nullopt;
  uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc() || p != s.data() + s.size() || v > 0xFFFFFFFFull) return std::nullopt;
  return neg ? -static_cast<int64_t>(v) : static_cast<int64_t>(v);
}

enum class Seg : uint8_t { Text, L1, L2 };

struct Stmt {
  bool directive = false;
  std::string name;
  std::vector<std::string> ops;
  SourceSpan span;
  Seg seg = Seg::Text;
  uint32_t offset = 0;  // byte offset within the segment
};

// Label location before segment bases are known.
struct SymLoc {
  Seg seg;
  uint32_t offset;
  SourceSpan span;
};

std::vector<std::string> split_operands(std::string_view s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  size_t start = 0;
  int depth = 0;
  for (size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || (s[i] == ',' && depth == 0)) {
      out.emplace_back(trim(s.substr(start, i - start)));
      start = i + 1;
    } else if (s[i] == '(') {
      ++depth;
    } else if (s[i] == ')') {
      --depth;
    }
  }
  return out;
}

unsigned instr_words(const std::string& m) { return m == "vlem.on" ? 2 : 1; }

class Assembler {
 public:
  Assembler(std::string_view src, const AsmOptions& o) : src_(src), opt_(o) {}

  AsmResult run() {
    pass1();
    layout();
    Program prog;
    pass2(prog);
    AsmResult r;
    if (errors_.empty()) {
      r.program = std::move(prog);
    }
    std::stable_sort(errors_.begin(), errors_.end(),
                     [](const AsmError& a, const AsmError& b) { return a.span.line < b.span.line; });
    r.errors = std::move(errors_);
    return r;
  }

 private:
  std::string_view src_;
  AsmOptions opt_;
  std::vector<AsmError> errors_;
  std::vector<Stmt> stmts_;
  std::map<std::string, SymLoc> labels_;
  std::set<std::string> globals_;
  uint32_t size_[3] = {0, 0, 0};
  uint32_t l2_align_ = 16;
  uint32_t base_[3] = {0, 0, 0};
  bool overflow_reported_[3] = {false, false, false};

  void error(AsmErrorKind k, const SourceSpan& sp, std::string msg) {
    errors_.push_back(AsmError{k, sp, std::move(msg)});
  }

  SourceSpan span(int line, int col) const { return SourceSpan{opt_.file_name, line, col}; }

  void pass1() {
    Seg seg = Seg::Text;
    Seg data_region = Seg::L1;
    int line_no = 0;
    size_t pos = 0;
    while (pos <= src_.size()) {
      size_t nl = src_.find('\n', pos);
      if (nl == std::string_view::npos) nl = src_.size();
      std::string_view raw = src_.substr(pos, nl - pos);
      size_t line_start = pos;
      pos = nl + 1;
      ++line_no;
      size_t cut = raw.size();
      if (size_t h = raw.find('#'); h != std::string_view::npos) cut = std::min(cut, h);
      if (size_t h = raw.find("//"); h != std::string_view::npos) cut = std::min(cut, h);
      std::string_view line = raw.substr(0, cut);
      auto col_of = [&](std::string_view sub) {
        return static_cast<int>(sub.data() - src_.data() - line_start) + 1;
      };

      // Leading labels.
      for (;;) {
        std::string_view t = trim(line);
        size_t colon = t.find(':');
        if (colon == std::string_view::npos) break;
        std::string_view name = trim(t.substr(0, colon));
        if (!is_ident(name)) break;
        SourceSpan sp = span(line_no, col_of(t));
        auto [it, fresh] = labels_.emplace(std::string(name), SymLoc{seg, size_[int(seg)], sp});
        if (!fresh) {
          error(AsmErrorKind::DuplicateLabel, sp,
                fmt::format("label '{}' already defined at line {}", name, it->second.span.line));
        }
        line = t.substr(colon + 1);
      }
      std::string_view t = trim(line);
      if (t.empty()) continue;

      size_t ws = 0;
      while (ws < t.size() && !std::isspace(static_cast<unsigned char>(t[ws]))) ++ws;
      Stmt st;
      st.name = std::string(t.substr(0, ws));
      std::transform(st.name.begin(), st.name.end(), st.name.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      st.span = span(line_no, col_of(t));
      st.ops = split_operands(t.substr(ws));
      st.directive = st.name[0] == '.';

      try {
        if (st.directive) {
          directive_pass1(st, seg, data_region);
        } else {
          if (seg != Seg::Text) fail(AsmErrorKind::Syntax, "instruction outside .text");
          st.seg = seg;
          st.offset = size_[0];
          size_[0] += 4 * instr_words(st.name);
          stmts_.push_back(std::move(st));
        }
      } catch (const Failure& f) {
        error(f.kind, st.span, f.message);
      }
    }
  }

  uint32_t eval_const(const std::string& s) {
    auto v = parse_number(s);
    if (!v) fail(AsmErrorKind::BadOperand, fmt::format("expected a number, got '{}'", s));
    return static_cast<uint32_t>(*v);
  }

  void directive_pass1(Stmt& st, Seg& seg, Seg& data_region) {
    const std::string& d = st.name;
    auto region_arg = [&](const std::string& a) {
      if (a == ".l1") return Seg::L1;
      if (a == ".l2") return Seg::L2;
      fail(AsmErrorKind::BadOperand, fmt::format("expected .l1 or .l2, got '{}'", a));
    };
    if (d == ".text") {
      if (!st.ops.empty()) fail(AsmErrorKind::Syntax, ".text takes no operands");
      seg = Seg::Text;
      return;
    }
    if (d == ".data") {
      // ".data .l1" arrives as one operand token ".l1" after splitting on whitespace.
      std::string arg;
      if (!st.ops.empty()) {
        if (st.ops.size() != 1) fail(AsmErrorKind::Syntax, ".data takes at most one operand");
        arg = st.ops[0];
      }
      if (!arg.empty()) data_region = region_arg(arg);
      seg = data_region;
      return;
    }
    if (d == ".l1" || d == ".l2") {
      if (!st.ops.empty()) fail(AsmErrorKind::Syntax, d + " takes no operands");
      data_region = region_arg(d);
      seg = data_region;
      return;
    }
    if (d == ".global" || d == ".globl") {
      if (st.ops.size() != 1 || !is_ident(st.ops[0])) fail(AsmErrorKind::BadOperand, ".global expects one symbol");
      globals_.insert(st.ops[0]);
      return;
    }
    st.seg = seg;
    st.offset = size_[int(seg)];
    uint32_t add = 0;
    if (d == ".word" || d == ".byte") {
      if (seg == Seg::Text) fail(AsmErrorKind::Syntax, d + " is not allowed in .text");
      if (st.ops.empty()) fail(AsmErrorKind::Syntax, d + " expects at least one value");
      add = static_cast<uint32_t>(st.ops.size()) * (d == ".word" ? 4u : 1u);
      if (d == ".word" && st.offset % 4) fail(AsmErrorKind::BadOperand, ".word at unaligned offset; use .align 2");
    } else if (d == ".space") {
      if (seg == Seg::Text) fail(AsmErrorKind::Syntax, ".space is not allowed in .text");
      if (st.ops.size() != 1) fail(AsmErrorKind::Syntax, ".space expects a byte count");
      add = eval_const(st.ops[0]);
    } else if (d == ".align") {
      if (st.ops.size() != 1) fail(AsmErrorKind::Syntax, ".align expects an exponent");
      uint32_t n = eval_const(st.ops[0]);
      if (n > 12) fail(AsmErrorKind::BadOperand, ".align exponent must be <= 12");
      uint32_t a = 1u << n;
      if (seg == Seg::Text) a = std::max(a, 4u);
      if (seg == Seg::L2) l2_align_ = std::max(l2_align_, a);
      add = (a - st.offset % a) % a;
      st.ops = {std::to_string(add)};
    } else {
      fail(AsmErrorKind::Syntax, fmt::format("unknown directive '{}'", d));
    }
    grow(seg, add, st.span);
    stmts_.push_back(std::move(st));
  }

  void grow(Seg seg, uint32_t add, const SourceSpan& sp) {
    uint64_t next = uint64_t{size_[int(seg)]} + add;
    uint64_t limit = seg == Seg::L1 ? opt_.l1_bytes : opt_.l2_bytes;
    if (next > limit && !overflow_reported_[int(seg)]) {
      overflow_reported_[int(seg)] = true;
      error(AsmErrorKind::SectionOverflow, sp,
            fmt::format("{} section exceeds {} bytes", seg == Seg::L1 ? "L1" : (seg == Seg::L2 ? "L2 data" : "text"), limit));
    }
    size_[int(seg)] = static_cast<uint32_t>(std::min<uint64_t>(next, 0xFFFFFFFFu));
  }

  void layout() {
    base_[0] = opt_.text_base;
    base_[1] = opt_.l1_base;
    uint32_t text_end = opt_.text_base + size_[0];
    base_[2] = (text_end + l2_align_ - 1) / l2_align_ * l2_align_;
    uint64_t l2_used = uint64_t{base_[2]} - opt_.text_base + size_[2];
    if (l2_used > opt_.l2_bytes && !overflow_reported_[2] && !overflow_reported_[0]) {
      error(AsmErrorKind::SectionOverflow, span(1, 1),
            fmt::format("text plus L2 data ({} bytes) exceed L2 size {}", l2_used, opt_.l2_bytes));
    }
  }

  uint32_t addr_of(const SymLoc& l) const { return base_[int(l.seg)] + l.offset; }

  int64_t eval(std::string_view e) {
    e = trim(e);
    if (e.empty()) fail(AsmErrorKind::BadOperand, "empty expression");
    int64_t total = 0;
    size_t i = 0;
    int sign = 1;
    bool first = true;
    while (i < e.size()) {
      if (!first) {
        char op = e[i];
        if (op != '+' && op != '-') fail(AsmErrorKind::BadOperand, fmt::format("bad expression '{}'", e));
        sign = op == '-' ? -1 : 1;
        ++i;
        while (i < e.size() && std::isspace(static_cast<unsigned char>(e[i]))) ++i;
      }
      size_t j = i;
      if (j < e.size() && (e[j] == '-' || e[j] == '+') && first) ++j;
      while (j < e.size() && e[j] != '+' && e[j] != '-' && !std::isspace(static_cast<unsigned char>(e[j]))) ++j;
      std::string_view term = e.substr(i, j - i);
      int64_t v = 0;
      if (auto n = parse_number(term)) {
        v = *n;
      } else if (is_ident(term)) {
        auto it = labels_.find(std::string(term));
        if (it == labels_.end()) fail(AsmErrorKind::UndefinedLabel, fmt::format("undefined label '{}'", term));
        v = addr_of(it->second);
      } else {
        fail(AsmErrorKind::BadOperand, fmt::format("bad operand '{}'", term));
      }
      total += sign * v;
      i = j;
      while (i < e.size() && std::isspace(static_cast<unsigned char>(e[i]))) ++i;
      first = false;
    }
    if (total < -0x80000000ll || total > 0xFFFFFFFFll) fail(AsmErrorKind::BadOperand, "value does not fit in 32 bits");
    return total;
  }

  uint8_t reg(const std::string& s) {
    auto r = parse_reg(s);
    if (!r) fail(AsmErrorKind::BadOperand, fmt::format("expected a register, got '{}'", s));
    return *r;
  }

  struct MemOperand {
    int32_t offset;
    uint8_t base;
    bool post_inc;
  };

  MemOperand mem(const std::string& s) {
    size_t open = s.rfind('(');
    if (open == std::string::npos || s.back() != ')') fail(AsmErrorKind::BadOperand, fmt::format("expected imm(reg), got '{}'", s));
    std::string inner = std::string(trim(std::string_view(s).substr(open + 1, s.size() - open - 2)));
    bool post = !inner.empty() && inner.back() == '!';
    if (post) inner = std::string(trim(std::string_view(inner).substr(0, inner.size() - 1)));
    std::string off = std::string(trim(std::string_view(s).substr(0, open)));
    int32_t o = off.empty() ? 0 : static_cast<int32_t>(eval(off));
    return MemOperand{o, reg(inner), post};
  }

  int32_t csr_addr(const std::string& s) {
    if (auto c = csr::from_name(s)) return static_cast<int32_t>(*c);
    int64_t v = eval(s);
    if (v < 0 || v > 0xFFF) fail(AsmErrorKind::BadOperand, fmt::format("CSR address out of range: '{}'", s));
    return static_cast<int32_t>(v);
  }

  int32_t ranged(const std::string& s, int64_t lo, int64_t hi, const char* what) {
    int64_t v = eval(s);
    if (v < lo || v > hi) fail(AsmErrorKind::BadOperand, fmt::format("{} {} out of range [{}, {}]", what, v, lo, hi));
    return static_cast<int32_t>(v);
  }

  int32_t target(const std::string& s) {
    int64_t v = eval(s);
    if (v % 4) fail(AsmErrorKind::BadOperand, fmt::format("branch target 0x{:x} is not word aligned", v));
    return static_cast<int32_t>(v);
  }

  void want(const Stmt& st, size_t n) {
    if (st.ops.size() != n) {
      fail(AsmErrorKind::BadOperand, fmt::format("'{}' expects {} operand(s), got {}", st.name, n, st.ops.size()));
    }
  }

  Instruction encode(Op op, const Stmt& st) {
    Instruction in;
    in.op = op;
    in.span = st.span;
    const auto& o = st.ops;
    switch (op_info(op).shape) {
      case Shape::R:
        want(st, 3);
        in.rd = reg(o[0]); in.rs1 = reg(o[1]); in.rs2 = reg(o[2]);
        break;
      case Shape::I:
        want(st, 3);
        in.rd = reg(o[0]); in.rs1 = reg(o[1]);
        if (op == Op::SLLI || op == Op::SRLI || op == Op::SRAI) in.imm = ranged(o[2], 0, 31, "shift amount");
        else in.imm = static_cast<int32_t>(eval(o[2]));
        break;
      case Shape::U:
        want(st, 2);
        in.rd = reg(o[0]);
        in.imm = ranged(o[1], 0, 0xFFFFF, "upper immediate");
        break;
      case Shape::Load: case Shape::Jalr: {
        want(st, 2);
        in.rd = reg(o[0]);
        MemOperand m = mem(o[1]);
        if (m.post_inc) fail(AsmErrorKind::BadOperand, "post-increment needs the p.lw form");
        in.rs1 = m.base; in.imm = m.offset;
        break;
      }
      case Shape::Store: {
        want(st, 2);
        in.rs2 = reg(o[0]);
        MemOperand m = mem(o[1]);
        if (m.post_inc) fail(AsmErrorKind::BadOperand, "post-increment needs the p.sw form");
        in.rs1 = m.base; in.imm = m.offset;
        break;
      }
      case Shape::PLoad: case Shape::PStore: {
        want(st, 2);
        uint8_t r = reg(o[0]);
        MemOperand m = mem(o[1]);
        if (!m.post_inc) fail(AsmErrorKind::BadOperand, fmt::format("'{}' expects imm(reg!)", st.name));
        if (op == Op::P_LW) in.rd = r; else in.rs2 = r;
        in.rs1 = m.base; in.imm = m.offset;
        break;
      }
      case Shape::Branch:
        want(st, 3);
        in.rs1 = reg(o[0]); in.rs2 = reg(o[1]); in.imm = target(o[2]);
        break;
      case Shape::Jal:
        want(st, 2);
        in.rd = reg(o[0]); in.imm = target(o[1]);
        break;
      case Shape::Csr:
        want(st, 3);
        in.rd = reg(o[0]); in.imm = csr_addr(o[1]); in.rs1 = reg(o[2]);
        break;
      case Shape::CsrI:
        want(st, 3);
        in.rd = reg(o[0]); in.imm = csr_addr(o[1]); in.imm2 = ranged(o[2], 0, 31, "CSR immediate");
        break;
      case Shape::LpSetup:
        want(st, 3);
        in.imm = ranged(o[0], 0, 1, "loop level"); in.rs1 = reg(o[1]); in.imm2 = target(o[2]);
        break;
      case Shape::LpCount:
        want(st, 2);
        in.imm = ranged(o[0], 0, 1, "loop level"); in.rs1 = reg(o[1]);
        break;
      case Shape::LpAddr:
        want(st, 2);
        in.imm = ranged(o[0], 0, 1, "loop level"); in.imm2 = target(o[1]);
        break;
      case Shape::Extract: {
        want(st, 4);
        in.rd = reg(o[0]); in.rs1 = reg(o[1]);
        in.imm = ranged(o[2], 1, 32, "extract length");
        in.imm2 = ranged(o[3], 0, 31, "extract position");
        if (in.imm + in.imm2 > 32) fail(AsmErrorKind::BadOperand, "extract field exceeds 32 bits");
        break;
      }
    }
    return in;
  }

  Instruction make(Op op, uint8_t rd, uint8_t rs1, uint8_t rs2, int32_t imm, const SourceSpan& sp) {
    Instruction in;
    in.op = op; in.rd = rd; in.rs1 = rs1; in.rs2 = rs2; in.imm = imm; in.span = sp;
    return in;
  }

  void emit_instr(const Stmt& st, std::vector<Instruction>& out) {
    const std::string& m = st.name;
    const auto& o = st.ops;
    int32_t periph = static_cast<int32_t>(mmap::PERIPH_BASE);
    if (m == "nop") {
      want(st, 0);
      out.push_back(make(Op::ADDI, 0, 0, 0, 0, st.span));
    } else if (m == "j") {
      want(st, 1);
      out.push_back(make(Op::JAL, 0, 0, 0, target(o[0]), st.span));
    } else if (m == "jr") {
      want(st, 1);
      out.push_back(make(Op::JALR, 0, reg(o[0]), 0, 0, st.span));
    } else if (m == "li") {
      want(st, 2);
      out.push_back(make(Op::ADDI, reg(o[0]), 0, 0, static_cast<int32_t>(eval(o[1])), st.span));
    } else if (m == "mv") {
      want(st, 2);
      out.push_back(make(Op::ADDI, reg(o[0]), reg(o[1]), 0, 0, st.span));
    } else if (m == "barrier") {
      want(st, 0);
      out.push_back(make(Op::LW, 0, 0, 0, periph + int32_t(mmap::EU_BARRIER - mmap::PERIPH_BASE), st.span));
    } else if (m == "vlem.on") {
      want(st, 0);
      out.push_back(make(Op::ADDI, kAsmTempReg, 0, 0, 1, st.span));
      out.push_back(make(Op::SW, 0, 0, kAsmTempReg, periph + int32_t(mmap::VLEM_CTRL - mmap::PERIPH_BASE), st.span));
    } else if (m == "vlem.off") {
      want(st, 0);
      out.push_back(make(Op::SW, 0, 0, 0, periph + int32_t(mmap::VLEM_CTRL - mmap::PERIPH_BASE), st.span));
    } else if (auto op = op_from_mnemonic(m)) {
      out.push_back(encode(*op, st));
    } else {
      fail(AsmErrorKind::UnknownMnemonic, fmt::format("unknown mnemonic '{}'", m));
    }
  }

  void pass2(Program& prog) {
    prog.text_base = base_[0];
    std::vector<uint8_t> data[3];
    bool overflow = overflow_reported_[0] || overflow_reported_[1] || overflow_reported_[2];
    if (!overflow) {
      data[1].assign(size_[1], 0);
      data[2].assign(size_[2], 0);
    }
    for (const Stmt& st : stmts_) {
      try {
        if (!st.directive) {
          std::vector<Instruction> out;
          emit_instr(st, out);
          prog.text.insert(prog.text.end(), out.begin(), out.end());
          continue;
        }
        const std::string& d = st.name;
        if (overflow && st.seg != Seg::Text) continue;
        auto& buf = data[int(st.seg)];
        if (d == ".word") {
          uint32_t off = st.offset;
          for (const auto& v : st.ops) {
            uint32_t w = static_cast<uint32_t>(eval(v));
            for (int b = 0; b < 4; ++b) buf[off++] = static_cast<uint8_t>(w >> (8 * b));
          }
        } else if (d == ".byte") {
          uint32_t off = st.offset;
          for (const auto& v : st.ops) {
            int64_t b = eval(v);
            if (b < -128 || b > 255) fail(AsmErrorKind::BadOperand, fmt::format("byte value {} out of range", b));
            buf[off++] = static_cast<uint8_t>(b);
          }
        } else if (d == ".align" && st.seg == Seg::Text) {
          uint32_t pad = static_cast<uint32_t>(std::stoul(st.ops[0]));
          for (uint32_t i = 0; i < pad / 4; ++i) prog.text.push_back(make(Op::ADDI, 0, 0, 0, 0, st.span));
        }
      } catch (const Failure& f) {
        error(f.kind, st.span, f.message);
      }
    }
    if (size_[1]) prog.data.push_back(DataSection{Region::L1, base_[1], std::move(data[1])});
    if (size_[2]) prog.data.push_back(DataSection{Region::L2, base_[2], std::move(data[2])});
    for (const auto& [name, loc] : labels_) prog.symbols[name] = addr_of(loc);
    for (const auto& g : globals_) {
      if (!labels_.count(g)) error(AsmErrorKind::UndefinedLabel, span(1, 1), fmt::format(".global names undefined label '{}'", g));
    }
    prog.entry = prog.text_base;
    if (auto it = labels_.find("_start"); it != labels_.end()) {
      uint32_t e = addr_of(it->second);
      if (it->second.seg != Seg::Text) {
        error(AsmErrorKind::BadOperand, it->second.span, "_start must label an instruction");
      }
      prog.entry = e;
    }
  }
};

}  // namespace

AsmResult assemble(std::string_view source, const AsmOptions& opts) { return Assembler(source, opts).run(); }

std::string disassemble(const Program& p) {
  std::string out;
  out += fmt::format("# text at 0x{:08x}, {} instructions\n", p.text_base, p.text.size());
  out += ".text\n";
  if (!p.text.empty() && p.entry != p.text_base) out += ".global _start\n";
  for (size_t i = 0; i < p.text.size(); ++i) {
    uint32_t pc = p.text_base + 4u * static_cast<uint32_t>(i);
    if (!p.text.empty() && p.entry != p.text_base && pc == p.entry) out += "_start:\n";
    out += "    " + format_instruction(p.text[i]) + "\n";
  }
  for (const auto& sec : p.data) {
    out += fmt::format("# data at 0x{:08x}, {} bytes\n", sec.base, sec.bytes.size());
    out += sec.region == Region::L1 ? ".data .l1\n" : ".data .l2\n";
    if (sec.region == Region::L2) {
      // Reproduce the section base: the largest power-of-two alignment of the base.
      unsigned k = 4;
      while (k < 12 && sec.base % (1u << (k + 1)) == 0) ++k;
      out += fmt::format(".align {}\n", k);
    }
    size_t n = sec.bytes.size();
    size_t i = 0;
    while (i + 4 <= n) {
      // Runs of zero words become .space.
      size_t j = i;
      while (j + 4 <= n && !sec.bytes[j] && !sec.bytes[j + 1] && !sec.bytes[j + 2] && !sec.bytes[j + 3]) j += 4;
      if (j - i >= 16) {
        out += fmt::format("    .space {}\n", j - i);
        i = j;
        continue;
      }
      std::string line = "    .word ";
      for (int k = 0; k < 8 && i + 4 <= n; ++k, i += 4) {
        uint32_t w = uint32_t(sec.bytes[i]) | uint32_t(sec.bytes[i + 1]) << 8 | uint32_t(sec.bytes[i + 2]) << 16 |
                     uint32_t(sec.bytes[i + 3]) << 24;
        line += fmt::format("{}0x{:08x}", k ? ", " : "", w);
      }
      out += line + "\n";
    }
    for (; i < n; ++i) out += fmt::format("    .byte 0x{:02x}\n", sec.bytes[i]);
  }
  return out;
}

}  // namespace csim
