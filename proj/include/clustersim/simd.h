// Mixed-precision SIMD datapath: lane slicing, dot products, pack/extract.
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

namespace csim::simd {

class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Operand precision in bits. Only 2, 4, 8 and 16 are legal.
struct Precision {
  unsigned bits = 8;

  constexpr bool valid() const { return bits == 2 || bits == 4 || bits == 8 || bits == 16; }
  friend constexpr bool operator==(Precision, Precision) = default;
};

constexpr unsigned lanes(Precision p) { return 32u / p.bits; }

enum class SignMode : uint8_t { SS = 0, UU = 1, US = 2 };

const char* sign_mode_name(SignMode m);

struct SimdFormat {
  Precision a{8};
  Precision b{8};
  SignMode sign = SignMode::SS;

  bool valid() const { return a.valid() && b.valid() && b.bits <= a.bits; }
  bool mixed() const { return a.bits != b.bits; }
  unsigned slice_count() const { return a.bits / b.bits; }
  bool a_signed() const { return sign == SignMode::SS; }
  bool b_signed() const { return sign != SignMode::UU; }
  std::string name() const;  // e.g. "8x4-SS"

  friend bool operator==(const SimdFormat&, const SimdFormat&) = default;
};

// At most 16 lanes per 32-bit word.
struct LaneVec {
  std::array<int32_t, 16> v{};
  unsigned n = 0;

  int32_t operator[](unsigned i) const { return v[i]; }
};

// Raw lane field, no extension.
constexpr uint32_t lane_bits(uint32_t word, unsigned bits, unsigned idx) {
  uint32_t mask = bits >= 32 ? 0xFFFFFFFFu : ((1u << bits) - 1u);
  return (word >> (idx * bits)) & mask;
}

constexpr int32_t extend_lane(uint32_t field, unsigned bits, bool is_signed) {
  if (is_signed && bits < 32 && (field >> (bits - 1)) & 1u) {
    return static_cast<int32_t>(field | ~((1u << bits) - 1u));
  }
  return static_cast<int32_t>(field);
}

LaneVec unpack_lanes(uint32_t word, Precision p, bool is_signed);
uint32_t pack_lanes(const LaneVec& lanes, Precision p);

LaneVec slice_extend(uint32_t b_word, const SimdFormat& fmt, unsigned slice_idx);

int32_t dotp(uint32_t a_word, uint32_t b_word, const SimdFormat& fmt, unsigned slice_idx);
int32_t sdotp(uint32_t a_word, uint32_t b_word, const SimdFormat& fmt, unsigned slice_idx,
              int32_t acc);

uint32_t extract(uint32_t word, Precision p, unsigned index, bool is_signed);

enum class Half : uint8_t { LO, HI };
uint32_t pack_byte(uint32_t dest, uint32_t rs1, uint32_t rs2, Half half);

// Brute-force reference over already-extended lanes, computed in 64-bit and
// reduced modulo 2^32.
int32_t oracle_dotp(std::span<const int64_t> a, std::span<const int64_t> b, int64_t acc);

}  // namespace csim::simd
