#include <doctest.h>

#include <cmath>

#include "clab/posenc.hpp"
#include "clab/rng.hpp"

using namespace clab;

namespace {
Vec64 gaussian_vec(Rng& rng, std::size_t n) {
  Vec64 v(n);
  for (auto& x : v) x = rng.next_gaussian();
  return v;
}
}  // namespace

TEST_SUITE("posenc") {

TEST_CASE("nope score is the scaled dot product") {
  Rng rng(1, "pe-nope");
  const auto pe = PEScheme::nope(8);
  const Vec64 q = gaussian_vec(rng, 8), k = gaussian_vec(rng, 8);
  CHECK(score(q, k, 5, 2, pe) == dot(q, k) / std::sqrt(8.0));
  CHECK_THROWS_AS(score(q, k, 2, 5, pe), std::invalid_argument);
}

TEST_CASE("rope rotations cancel at equal positions") {
  Rng rng(2, "pe-rope");
  const auto pe = PEScheme::rope(16);
  const Vec64 q = gaussian_vec(rng, 16), k = gaussian_vec(rng, 16);
  for (std::size_t m : {0u, 1u, 7u, 1000u}) {
    const double s = score(q, k, m, m, pe);
    CHECK(s == doctest::Approx(dot(q, k) / 4.0).epsilon(1e-12));
  }
}

TEST_CASE("rope rotations are orthogonal") {
  Rng rng(3, "pe-rope-orth");
  const auto pe = PEScheme::rope(32);
  const Vec64 q = gaussian_vec(rng, 32);
  const double nq = norm2(q);
  for (std::size_t m : {1u, 17u, 999u, 100000u}) {
    Vec64 r = q;
    rope_rotate_inplace(r, m, pe);
    CHECK(std::abs(norm2(r) - nq) <= 1e-12 * nq);
  }
}

TEST_CASE("alibi bias") {
  Rng rng(4, "pe-alibi");
  auto pe = PEScheme::alibi(8, 0.5);
  Vec64 q = gaussian_vec(rng, 8);
  // orthogonal key: score is the bare bias
  Vec64 k(8, 0.0);
  CHECK(score(q, k, 5, 2, pe) == -1.5);
  CHECK(pe_bias(5, 5, pe) == 0.0);

  const Vec64 kk = gaussian_vec(rng, 8);
  CHECK(score(q, kk, 9, 3, pe) ==
        doctest::Approx(dot(q, kk) / std::sqrt(8.0) - 3.0).epsilon(1e-14));
}

TEST_CASE("sinusoid table bounded") {
  for (std::size_t m : {0u, 1u, 12345u, 1000000u}) {
    const Vec64 s = sinusoid_entry(m, 64, 10000.0);
    for (double v : s) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
  }
  const Vec64 s0 = sinusoid_entry(0, 8, 10000.0);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(s0[2 * t] == 0.0);
    CHECK(s0[2 * t + 1] == 1.0);
  }
}

TEST_CASE("sinusoidal score definition") {
  Rng rng(5, "pe-ape");
  const auto pe = PEScheme::sinusoidal(16);
  const Vec64 q = gaussian_vec(rng, 16), k = gaussian_vec(rng, 16);
  const Vec64 si = sinusoid_entry(11, 16, 10000.0);
  const Vec64 sj = sinusoid_entry(4, 16, 10000.0);
  Vec64 qa = q, ka = k;
  for (std::size_t t = 0; t < 16; ++t) {
    qa[t] += si[t];
    ka[t] += sj[t];
  }
  CHECK(score(q, k, 11, 4, pe) == doctest::Approx(dot(qa, ka) / 4.0).epsilon(1e-14));
}

TEST_CASE("relative schemes are shift invariant") {
  Rng rng(6, "pe-shift");
  for (auto pe : {PEScheme::rope(16), PEScheme::alibi(16, 0.25)}) {
    const Vec64 q = gaussian_vec(rng, 16), k = gaussian_vec(rng, 16);
    for (std::size_t t : {1u, 10u, 500u}) {
      const double a = score(q, k, 20, 7, pe);
      const double b = score(q, k, 20 + t, 7 + t, pe);
      CHECK(std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(a)));
    }
  }
}

TEST_CASE("score equals transform decomposition") {
  Rng rng(7, "pe-decomp");
  for (auto pe : {PEScheme::nope(16), PEScheme::sinusoidal(16), PEScheme::rope(16),
                  PEScheme::alibi(16, 0.125)}) {
    const Vec64 q = gaussian_vec(rng, 16), k = gaussian_vec(rng, 16);
    for (std::size_t j : {0u, 3u, 9u}) {
      const Vec64 tq = pe_apply_query(q, 9, pe);
      const Vec64 tk = pe_apply_key(k, j, pe);
      const double via_parts = dot(tq, tk) / 4.0 + pe_bias(9, j, pe);
      CHECK(score(q, k, 9, j, pe) == via_parts);
    }
  }
}

TEST_CASE("decay profiles") {
  Rng rng(8, "pe-decay");
  const Vec64 q = gaussian_vec(rng, 16), k = gaussian_vec(rng, 16);

  const Vec64 flat = decay_profile(PEScheme::nope(16), q, k, 50);
  for (double v : flat) CHECK(v == 0.0);

  const double slope = 0.3;
  const Vec64 lin = decay_profile(PEScheme::alibi(16, slope), q, k, 50);
  for (std::size_t delta = 0; delta < lin.size(); ++delta)
    CHECK(lin[delta] == doctest::Approx(slope * delta).epsilon(1e-12));

  // rope profile is measured, not asserted; just has to be finite
  const Vec64 rp = decay_profile(PEScheme::rope(16), q, k, 200);
  for (double v : rp) CHECK(std::isfinite(v));
  CHECK(rp[0] <= 1e-12);
}

}  // TEST_SUITE
