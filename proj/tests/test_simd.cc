#include <doctest.h>

#include <random>
#include <vector>

#include "clustersim/simd.h"

using namespace csim::simd;

namespace {

// Independent lane expansion: arithmetic on the 64-bit value instead of masks.
std::vector<int64_t> ref_lanes(uint32_t word, unsigned bits, bool is_signed) {
  std::vector<int64_t> out;
  uint64_t w = word;
  int64_t modulus = int64_t{1} << bits;
  for (unsigned i = 0; i < 32 / bits; ++i) {
    int64_t v = static_cast<int64_t>(w % static_cast<uint64_t>(modulus));
    w /= static_cast<uint64_t>(modulus);
    if (is_signed && v >= modulus / 2) v -= modulus;
    out.push_back(v);
  }
  return out;
}

std::vector<int64_t> ref_b_slice(uint32_t b_word, const SimdFormat& f, unsigned slice) {
  auto all = ref_lanes(b_word, f.b.bits, f.sign != SignMode::UU);
  unsigned n = 32 / f.a.bits;
  return {all.begin() + slice * n, all.begin() + (slice + 1) * n};
}

const unsigned kBits[] = {16, 8, 4, 2};
const SignMode kModes[] = {SignMode::SS, SignMode::UU, SignMode::US};

}  // namespace

TEST_CASE("lanes") {
  CHECK(lanes(Precision{8}) == 4);
  CHECK(lanes(Precision{2}) == 16);
  CHECK(lanes(Precision{16}) == 2);
  CHECK(lanes(Precision{4}) == 8);
}

TEST_CASE("slice_extend examples") {
  SimdFormat f84{{8}, {4}, SignMode::SS};
  auto s = slice_extend(0x000000F1u, f84, 0);
  REQUIRE(s.n == 4);
  CHECK(s[0] == 1);
  CHECK(s[1] == -1);
  CHECK(s[2] == 0);
  CHECK(s[3] == 0);

  SimdFormat f88{{8}, {8}, SignMode::SS};
  auto id = slice_extend(0x80FF017Fu, f88, 0);
  CHECK(id[0] == 0x7F);
  CHECK(id[1] == 1);
  CHECK(id[2] == -1);
  CHECK(id[3] == -128);

  SimdFormat f82{{8}, {2}, SignMode::SS};
  auto t = slice_extend(0xAAAAAAAAu, f82, 3);
  for (unsigned j = 0; j < 4; ++j) CHECK(t[j] == -2);

  CHECK_THROWS_AS(slice_extend(0, f84, 2), ContractError);
  CHECK_THROWS_AS(slice_extend(0, f88, 1), ContractError);
}

TEST_CASE("dotp examples") {
  SimdFormat f84{{8}, {4}, SignMode::SS};
  uint32_t a = 0x04030201u;
  uint32_t b = 0xFFFF1111u;  // nibbles 1,1,1,1,-1,-1,-1,-1
  CHECK(dotp(a, b, f84, 0) == 10);
  CHECK(dotp(a, b, f84, 1) == -10);
  CHECK(dotp(0x12345678u, 0, f84, 1) == 0);
  CHECK(dotp(0x01010101u, 0x01010101u, SimdFormat{{8}, {8}, SignMode::UU}, 0) == 4);
  CHECK(sdotp(a, b, f84, 0, 100) == 110);
  CHECK(sdotp(0, b, f84, 1, 77) == 77);
}

TEST_CASE("sdotp wraps around") {
  SimdFormat f{{8}, {8}, SignMode::UU};
  CHECK(static_cast<uint32_t>(sdotp(0x00000001u, 0x00000001u, f, 0, 0x7FFFFFFF)) == 0x80000000u);
}

TEST_CASE("extract examples") {
  CHECK(extract(0x0000000Fu, Precision{4}, 0, true) == 0xFFFFFFFFu);
  CHECK(extract(0x0000000Fu, Precision{4}, 0, false) == 0x0000000Fu);
  CHECK(extract(0xABCD1234u, Precision{8}, 2, false) == 0x000000CDu);
  CHECK_THROWS_AS(extract(0, Precision{8}, 4, false), ContractError);
}

TEST_CASE("pack_byte examples") {
  CHECK(pack_byte(0x00000000u, 0xABu, 0xCDu, Half::LO) == 0x0000CDABu);
  CHECK(pack_byte(0xFFFF0000u, 0xABu, 0xCDu, Half::LO) == 0xFFFFCDABu);
  CHECK(pack_byte(0x0000BEEFu, 0x12u, 0x34u, Half::HI) == 0x3412BEEFu);
}

TEST_CASE("oracle_dotp examples") {
  std::vector<int64_t> a{1, 2}, b{3, 4}, e;
  CHECK(oracle_dotp(a, b, 0) == 11);
  CHECK(oracle_dotp(e, e, 5) == 5);
  std::vector<int64_t> c{1};
  CHECK_THROWS_AS(oracle_dotp(a, c, 0), ContractError);
}

TEST_CASE("sdotp matches the oracle for every format and sign mode") {
  std::mt19937 rng(20260101);
  int combos = 0;
  for (unsigned ab : kBits) {
    for (unsigned bb : kBits) {
      if (bb > ab) continue;
      ++combos;
      for (SignMode m : kModes) {
        SimdFormat f{{ab}, {bb}, m};
        for (int i = 0; i < 300; ++i) {
          uint32_t a = rng(), b = rng();
          int32_t acc = static_cast<int32_t>(rng());
          unsigned s = rng() % f.slice_count();
          auto la = ref_lanes(a, ab, m == SignMode::SS);
          auto lb = ref_b_slice(b, f, s);
          REQUIRE(sdotp(a, b, f, s, acc) == oracle_dotp(la, lb, acc));
        }
      }
    }
  }
  CHECK(combos == 10);
}

TEST_CASE("uniform dotp ignores slice and commutes in SS") {
  std::mt19937 rng(7);
  for (unsigned bits : kBits) {
    SimdFormat f{{bits}, {bits}, SignMode::SS};
    CHECK(f.slice_count() == 1);
    for (int i = 0; i < 200; ++i) {
      uint32_t a = rng(), b = rng();
      CHECK(dotp(a, b, f, 0) == dotp(b, a, f, 0));
    }
  }
}

TEST_CASE("negating B lanes negates the result in SS") {
  std::mt19937 rng(11);
  for (unsigned ab : kBits) {
    for (unsigned bb : kBits) {
      if (bb > ab) continue;
      SimdFormat f{{ab}, {bb}, SignMode::SS};
      Precision pb{bb};
      int32_t min_lane = -(1 << (bb - 1));
      for (int i = 0; i < 200; ++i) {
        LaneVec lb = unpack_lanes(rng(), pb, true);
        for (unsigned j = 0; j < lb.n; ++j) {
          if (lb.v[j] == min_lane) lb.v[j] = 0;
        }
        LaneVec neg = lb;
        for (unsigned j = 0; j < neg.n; ++j) neg.v[j] = -neg.v[j];
        uint32_t b = pack_lanes(lb, pb), nb = pack_lanes(neg, pb);
        uint32_t a = rng();
        unsigned s = rng() % f.slice_count();
        CHECK(static_cast<uint32_t>(dotp(a, nb, f, s)) == 0u - static_cast<uint32_t>(dotp(a, b, f, s)));
      }
    }
  }
}

TEST_CASE("extract then pack_byte reproduces the low half-words") {
  std::mt19937 rng(3);
  for (int i = 0; i < 500; ++i) {
    uint32_t w = rng();
    uint32_t e0 = extract(w, Precision{8}, 0, true), e1 = extract(w, Precision{8}, 1, false);
    uint32_t e2 = extract(w, Precision{8}, 2, true), e3 = extract(w, Precision{8}, 3, false);
    uint32_t r = pack_byte(0, e0, e1, Half::LO);
    CHECK((r & 0xFFFFu) == (w & 0xFFFFu));
    r = pack_byte(r, e2, e3, Half::HI);
    CHECK(r == w);
  }
}

TEST_CASE("lane decomposition is lossless") {
  std::mt19937 rng(5);
  for (unsigned bits : kBits) {
    for (int i = 0; i < 100; ++i) {
      uint32_t w = rng();
      CHECK(pack_lanes(unpack_lanes(w, Precision{bits}, true), Precision{bits}) == w);
      CHECK(pack_lanes(unpack_lanes(w, Precision{bits}, false), Precision{bits}) == w);
    }
  }
}
