#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>

#include "clab/numerics.hpp"
#include "clab/rng.hpp"

using clab::FloatFormat;
using clab::round_to_format;

namespace {

// Independent reference: re-derive round-to-nearest-even with integer bit
// manipulation on the binary64 encoding. Deliberately shares no code with
// the frexp/ldexp implementation under test.
double oracle_round(double x, int mant_bits, int exp_bits) {
  if (x == 0.0) return x;
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
  const bool neg = (bits >> 63) != 0;
  const std::int64_t be = static_cast<std::int64_t>((bits >> 52) & 0x7ff);
  const std::uint64_t frac = bits & ((1ull << 52) - 1);

  std::uint64_t sig;
  std::int64_t e2;  // value = sig * 2^e2
  if (be == 0) {
    sig = frac;
    e2 = 1 - 1075;
  } else {
    sig = (1ull << 52) | frac;
    e2 = be - 1075;
  }

  const int top = 63 - std::countl_zero(sig);
  const std::int64_t E = e2 + top;  // floor(log2 |x|)
  const std::int64_t bias = (1ll << (exp_bits - 1)) - 1;
  const std::int64_t emin = 1 - bias;
  const std::int64_t ulp_exp = std::max(E, emin) - mant_bits;
  const std::int64_t shift = ulp_exp - e2;

  std::uint64_t keep;
  std::int64_t out_exp = ulp_exp;
  if (shift <= 0) {
    keep = sig;
    out_exp = e2;  // already on the grid
  } else if (shift > 63) {
    keep = 0;  // far below half an ulp of the smallest representable
  } else {
    keep = sig >> shift;
    const std::uint64_t rem = sig & ((1ull << shift) - 1);
    const std::uint64_t half = 1ull << (shift - 1);
    if (rem > half || (rem == half && (keep & 1))) keep += 1;
  }

  double mag = std::ldexp(static_cast<double>(keep), static_cast<int>(out_exp));
  const double max_finite =
      std::ldexp(2.0 - std::ldexp(1.0, -mant_bits), static_cast<int>(bias));
  if (mag > max_finite) mag = std::numeric_limits<double>::infinity();
  return neg ? -mag : mag;
}

const FloatFormat kFormats[] = {FloatFormat::binary32(), FloatFormat::bfloat16(),
                                FloatFormat::binary16()};

}  // namespace

TEST_SUITE("rounding") {

TEST_CASE("frozen values") {
  CHECK(round_to_format(0.1, FloatFormat::bfloat16()) == 0.10009765625);
  CHECK(oracle_round(0.1, 7, 8) == 0.10009765625);
  CHECK(round_to_format(1.0 + std::ldexp(1.0, -9), FloatFormat::bfloat16()) == 1.0);
  CHECK(round_to_format(1.0 + std::ldexp(1.0, -8), FloatFormat::bfloat16()) == 1.0);  // tie, even
  CHECK(round_to_format(1.0 + 3 * std::ldexp(1.0, -9), FloatFormat::bfloat16()) ==
        1.0 + std::ldexp(1.0, -7));
  const double x = 0.123456789;
  CHECK(round_to_format(x, FloatFormat::binary64()) == x);
}

TEST_CASE("hardware float is the binary32 reference") {
  clab::Rng rng(7, "round-f32");
  for (int i = 0; i < 20000; ++i) {
    const int k = static_cast<int>(rng.next_below(300)) - 150;
    const double x = std::ldexp(1.0 + rng.next_uniform(), k) *
                     (rng.next_below(2) ? -1.0 : 1.0);
    const double want = static_cast<double>(static_cast<float>(x));
    const double got = round_to_format(x, FloatFormat::binary32());
    const double ref = oracle_round(x, 23, 8);
    if (std::isinf(want)) {
      CHECK(std::isinf(got));
      CHECK(std::isinf(ref));
      CHECK(std::signbit(got) == std::signbit(want));
    } else {
      CHECK(got == want);
      CHECK(ref == want);
    }
  }
}

TEST_CASE("agrees with bit-level reference on all formats") {
  clab::Rng rng(11, "round-all");
  for (int i = 0; i < 20000; ++i) {
    for (const auto& fmt : kFormats) {
      const int k = static_cast<int>(rng.next_below(80)) - 40;
      const double x = std::ldexp(1.0 + rng.next_uniform(), k) *
                       (rng.next_below(2) ? -1.0 : 1.0);
      const double got = round_to_format(x, fmt);
      const double ref = oracle_round(x, fmt.mantissa_bits, fmt.exponent_bits);
      CHECK(got == ref);
    }
  }
}

TEST_CASE("subnormal range") {
  const auto fp16 = FloatFormat::binary16();
  const double tiny = std::ldexp(1.0, -24);  // smallest positive fp16 value
  CHECK(round_to_format(tiny, fp16) == tiny);
  CHECK(round_to_format(0.5 * tiny, fp16) == 0.0);            // tie to even (zero)
  CHECK(round_to_format(0.75 * tiny, fp16) == tiny);
  CHECK(round_to_format(1.5 * tiny, fp16) == 2.0 * tiny);     // tie to even multiple
  CHECK(round_to_format(0.49 * tiny, fp16) == 0.0);
  CHECK(round_to_format(-0.75 * tiny, fp16) == -tiny);

  clab::Rng rng(13, "round-sub");
  for (int i = 0; i < 5000; ++i) {
    const int k = -13 - static_cast<int>(rng.next_below(16));
    const double x = std::ldexp(1.0 + rng.next_uniform(), k);
    CHECK(round_to_format(x, fp16) == oracle_round(x, 10, 5));
  }
}

TEST_CASE("overflow") {
  const auto fp16 = FloatFormat::binary16();
  CHECK(round_to_format(65504.0, fp16) == 65504.0);
  CHECK(round_to_format(65519.99, fp16) == 65504.0);
  CHECK(std::isinf(round_to_format(65520.0, fp16)));  // RNE carries past the top binade
  CHECK(std::isinf(round_to_format(-65520.0, fp16)));
  CHECK(std::signbit(round_to_format(-65520.0, fp16)));
  CHECK_THROWS_AS(round_to_format(65520.0, fp16, true), clab::numerical_error);

  const auto bf16 = FloatFormat::bfloat16();
  const double bf16_max = std::ldexp(255.0, 120);
  CHECK(round_to_format(bf16_max, bf16) == bf16_max);
  CHECK(std::isinf(round_to_format(3.4e38, bf16)));
  CHECK(round_to_format(3.389e38, bf16) == bf16_max);
  CHECK(round_to_format(3.38e38, bf16) == std::ldexp(254.0, 120));
}

TEST_CASE("idempotent and monotone") {
  clab::Rng rng(17, "round-prop");
  for (const auto& fmt : kFormats) {
    double prev_x = -1e30;
    double prev_r = round_to_format(prev_x, fmt);
    for (int i = 0; i < 4000; ++i) {
      const int k = static_cast<int>(rng.next_below(60)) - 30;
      const double x = std::ldexp(1.0 + rng.next_uniform(), k) *
                       (rng.next_below(2) ? -1.0 : 1.0);
      const double r = round_to_format(x, fmt);
      if (std::isfinite(r)) CHECK(round_to_format(r, fmt) == r);
      if (x >= prev_x) {
        CHECK(r >= prev_r);
      } else {
        CHECK(r <= prev_r);
      }
      prev_x = x;
      prev_r = r;
    }
  }
}

TEST_CASE("zero and sign") {
  for (const auto& fmt : kFormats) {
    CHECK(round_to_format(0.0, fmt) == 0.0);
    const double nz = round_to_format(-0.0, fmt);
    CHECK(nz == 0.0);
    CHECK(std::signbit(nz));
    CHECK(round_to_format(-0.1, FloatFormat::bfloat16()) == -0.10009765625);
  }
}

}  // TEST_SUITE
