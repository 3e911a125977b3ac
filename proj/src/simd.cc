#include "clustersim/simd.h"

#include <fmt/format.h>

namespace csim::simd {

const char* sign_mode_name(SignMode m) {
  switch (m) {
    case SignMode::SS: return "SS";
    case SignMode::UU: return "UU";
    case SignMode::US: return "US";
  }
  return "??";
}

std::string SimdFormat::name() const {
  return fmt::format("{}x{}-{}", a.bits, b.bits, sign_mode_name(sign));
}

LaneVec unpack_lanes(uint32_t word, Precision p, bool is_signed) {
  LaneVec out;
  out.n = lanes(p);
  for (unsigned i = 0; i < out.n; ++i) out.v[i] = extend_lane(lane_bits(word, p.bits, i), p.bits, is_signed);
  return out;
}

uint32_t pack_lanes(const LaneVec& l, Precision p) {
  uint32_t mask = p.bits == 32 ? 0xFFFFFFFFu : ((1u << p.bits) - 1u);
  uint32_t word = 0;
  for (unsigned i = 0; i < l.n; ++i) word |= (static_cast<uint32_t>(l.v[i]) & mask) << (i * p.bits);
  return word;
}

LaneVec slice_extend(uint32_t b_word, const SimdFormat& fmt, unsigned slice_idx) {
  if (!fmt.valid()) throw ContractError("slice_extend: invalid format " + fmt.name());
  if (slice_idx >= fmt.slice_count()) {
    throw ContractError(fmt::format("slice_extend: slice {} out of range for {}", slice_idx, fmt.name()));
  }
  LaneVec out;
  out.n = lanes(fmt.a);
  unsigned first = slice_idx * out.n;
  for (unsigned j = 0; j < out.n; ++j) {
    out.v[j] = extend_lane(lane_bits(b_word, fmt.b.bits, first + j), fmt.b.bits, fmt.b_signed());
  }
  return out;
}

int32_t dotp(uint32_t a_word, uint32_t b_word, const SimdFormat& fmt, unsigned slice_idx) {
  LaneVec b = slice_extend(b_word, fmt, slice_idx);
  uint32_t sum = 0;
  for (unsigned j = 0; j < b.n; ++j) {
    int32_t a = extend_lane(lane_bits(a_word, fmt.a.bits, j), fmt.a.bits, fmt.a_signed());
    sum += static_cast<uint32_t>(a) * static_cast<uint32_t>(b.v[j]);
  }
  return static_cast<int32_t>(sum);
}

int32_t sdotp(uint32_t a_word, uint32_t b_word, const SimdFormat& fmt, unsigned slice_idx,
              int32_t acc) {
  return static_cast<int32_t>(static_cast<uint32_t>(acc) +
                              static_cast<uint32_t>(dotp(a_word, b_word, fmt, slice_idx)));
}

uint32_t extract(uint32_t word, Precision p, unsigned index, bool is_signed) {
  if (!p.valid()) throw ContractError(fmt::format("extract: invalid precision {}", p.bits));
  if (index >= lanes(p)) {
    throw ContractError(fmt::format("extract: index {} out of range for {}-bit lanes", index, p.bits));
  }
  return static_cast<uint32_t>(extend_lane(lane_bits(word, p.bits, index), p.bits, is_signed));
}

uint32_t pack_byte(uint32_t dest, uint32_t rs1, uint32_t rs2, Half half) {
  uint32_t pair = (rs1 & 0xFFu) | ((rs2 & 0xFFu) << 8);
  if (half == Half::LO) return (dest & 0xFFFF0000u) | pair;
  return (dest & 0x0000FFFFu) | (pair << 16);
}

int32_t oracle_dotp(std::span<const int64_t> a, std::span<const int64_t> b, int64_t acc) {
  if (a.size() != b.size()) {
    throw ContractError(fmt::format("oracle_dotp: length mismatch {} vs {}", a.size(), b.size()));
  }
  int64_t sum = acc;
  for (size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return static_cast<int32_t>(static_cast<uint32_t>(static_cast<uint64_t>(sum)));
}

}  // namespace csim::simd
