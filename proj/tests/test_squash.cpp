#include <doctest.h>

#include <cmath>
#include <vector>

#include "clab/posenc.hpp"
#include "clab/rng.hpp"
#include "clab/squash.hpp"

using namespace clab;

namespace {

ModelConfig small_cfg(std::size_t d, std::size_t L, std::uint64_t seed,
                      PEScheme pe) {
  ModelConfig cfg;
  cfg.d = d;
  cfg.L = L;
  cfg.seed = seed;
  cfg.pe = pe;
  return cfg;
}

// path enumeration by recursion over layers; deliberately not a matrix
// product so it can serve as an oracle for one
double path_weight_sum(const std::vector<Mat64>& abar, std::size_t layer,
                       std::size_t j, std::size_t target) {
  if (layer == abar.size()) return j == target ? 1.0 : 0.0;
  double total = 0.0;
  const Mat64& A = abar[layer];
  for (std::size_t k = j; k < A.rows; ++k)
    total += A(k, j) * path_weight_sum(abar, layer + 1, k, target);
  return total;
}

// d/dx of x -> beta * x / sqrt(mean(x^2) + eps), written from the closed form
Mat64 rms_jacobian_oracle(const Vec64& x, double beta) {
  const std::size_t d = x.size();
  double ssq = 0.0;
  for (double v : x) ssq += v * v;
  const double m = ssq / static_cast<double>(d) + kRmsEps;
  const double s = 1.0 / std::sqrt(m);
  Mat64 J(d, d);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t k = 0; k < d; ++k) {
      const double kron = (a == k) ? 1.0 : 0.0;
      J(a, k) = beta * (kron * s - x[a] * x[k] * s * s * s / static_cast<double>(d));
    }
  return J;
}

double frob_norm(const Mat64& A) {
  double s = 0.0;
  for (double v : A.data) s += v * v;
  return std::sqrt(s);
}

double max_col_l2(const Mat64& A) {
  double best = 0.0;
  for (std::size_t k = 0; k < A.cols; ++k) {
    double s = 0.0;
    for (std::size_t a = 0; a < A.rows; ++a) s += A(a, k) * A(a, k);
    best = std::max(best, std::sqrt(s));
  }
  return best;
}

double rel_frob_diff(const Mat64& A, const Mat64& B) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < A.data.size(); ++i) {
    const double d = A.data[i] - B.data[i];
    num += d * d;
    den += B.data[i] * B.data[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

TokenSequence random_tokens(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed, "tokens");
  TokenSequence seq;
  seq.vectors.resize(n, Vec64(d));
  for (auto& v : seq.vectors)
    for (auto& x : v) x = rng.next_uniform(-1.0, 1.0);
  return seq;
}

Mat64 uniform_causal(std::size_t n) {
  Mat64 A(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      A(i, j) = 1.0 / static_cast<double>(i + 1);
  return A;
}

}  // namespace

TEST_SUITE("squash") {
  TEST_CASE("bound constants from a hand-sized stack") {
    LayerWeights lw;
    lw.W1 = Mat64(1, 1);
    lw.W1(0, 0) = 2.0;
    lw.W2 = Mat64(1, 1);
    lw.W2(0, 0) = 3.0;
    ModelWeights w{lw};

    const BoundConstants c = make_bound_constants(w, 1.0, 1.0, 2.0);
    REQUIRE(c.sigma_psi.size() == 1);
    CHECK(std::abs(c.sigma_psi[0] - 6.0) <= 1e-9);
    CHECK(std::abs(c.C - 3.5) <= 1e-9);
    CHECK(c.beta_attn == c.beta1);
    CHECK(c.beta3 == 2.0);

    CHECK_THROWS_AS(make_bound_constants(w, 0.0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(make_bound_constants(w, 1.0, -1.0, 1.0), std::invalid_argument);
  }

  TEST_CASE("path bound on a two-token single layer by hand") {
    Mat64 A(2, 2);
    A(0, 0) = 1.0;
    A(1, 0) = 0.5;
    A(1, 1) = 0.5;
    AttentionStack stack{{A}};

    BoundConstants c;
    c.sigma_psi = {0.0};
    const PathBound pb = path_sum_bound(stack, c);
    REQUIRE(pb.values.size() == 2);
    CHECK(pb.values[0] == 0.5);
    CHECK(pb.values[1] == 1.5);
  }

  TEST_CASE("identity attention doubles the path mass per layer") {
    const std::size_t n = 4, L = 3;
    AttentionStack stack;
    for (std::size_t l = 0; l < L; ++l) stack.layers.push_back(Mat64::identity(n));
    BoundConstants c;
    c.sigma_psi = {0.0, 0.0, 0.0};
    const PathBound pb = path_sum_bound(stack, c);
    for (std::size_t i = 0; i + 1 < n; ++i) CHECK(pb.values[i] == 0.0);
    CHECK(pb.values[n - 1] == 8.0);
  }

  TEST_CASE("path bound agrees with explicit enumeration") {
    Rng rng(11, "path-oracle");
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t n = 2 + rng.next_below(5);  // 2..6
      const std::size_t L = 1 + rng.next_below(3);  // 1..3
      const double beta_attn = (trial % 2 == 0) ? 1.0 : 2.0;

      AttentionStack stack;
      for (std::size_t l = 0; l < L; ++l)
        stack.layers.push_back(random_row_stochastic(n, rng));

      BoundConstants c;
      c.beta_attn = beta_attn;
      c.beta2 = 1.5;
      c.beta3 = 0.5;
      double prod = 1.0;
      for (std::size_t l = 0; l < L; ++l) {
        c.sigma_psi.push_back(rng.next_uniform(0.0, 3.0));
        prod *= c.sigma_psi[l] / c.beta2 + 1.0;
      }
      c.C = prod / c.beta3;

      // enumeration walks layers bottom-up, so its stack index 0 is layer 0
      std::vector<Mat64> abar;
      for (std::size_t l = 0; l < L; ++l) {
        Mat64 B(n, n);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j <= i; ++j)
            B(i, j) = stack.layers[l](i, j) / beta_attn + (i == j ? 1.0 : 0.0);
        abar.push_back(B);
      }

      const PathBound pb = path_sum_bound(stack, c);
      for (std::size_t i = 0; i < n; ++i) {
        const double want = c.C * path_weight_sum(abar, 0, i, n - 1);
        CHECK(std::abs(pb.values[i] - want) <= 1e-10 * std::max(1.0, want));
      }
    }
  }

  TEST_CASE("path bound rejects malformed inputs") {
    Mat64 good(2, 2);
    good(0, 0) = 1.0;
    good(1, 0) = 0.5;
    good(1, 1) = 0.5;
    BoundConstants c;
    c.sigma_psi = {0.0};

    CHECK_THROWS_AS(path_sum_bound(AttentionStack{}, c), std::invalid_argument);

    Mat64 rect(2, 3);
    CHECK_THROWS_AS(path_sum_bound(AttentionStack{{rect}}, c), std::invalid_argument);

    Mat64 upper = good;
    upper(0, 1) = 1e-15;  // even a dust-sized acausal weight is rejected
    CHECK_THROWS_AS(path_sum_bound(AttentionStack{{upper}}, c), std::invalid_argument);

    Mat64 nosum = good;
    nosum(1, 1) = 0.6;
    CHECK_THROWS_AS(path_sum_bound(AttentionStack{{nosum}}, c), std::invalid_argument);

    Mat64 neg = good;
    neg(1, 0) = -0.5;
    neg(1, 1) = 1.5;
    CHECK_THROWS_AS(path_sum_bound(AttentionStack{{neg}}, c), std::invalid_argument);

    BoundConstants wrong_depth;
    wrong_depth.sigma_psi = {0.0, 0.0};
    CHECK_THROWS_AS(path_sum_bound(AttentionStack{{good}}, wrong_depth),
                    std::invalid_argument);

    BoundConstants bad_c;
    bad_c.sigma_psi = {0.0};
    bad_c.C = 5.0;
    CHECK_THROWS_AS(path_sum_bound(AttentionStack{{good}}, bad_c),
                    std::invalid_argument);

    BoundConstants bad_beta;
    bad_beta.sigma_psi = {0.0};
    bad_beta.beta_attn = 0.0;
    CHECK_THROWS_AS(path_sum_bound(AttentionStack{{good}}, bad_beta),
                    std::invalid_argument);
  }

  TEST_CASE("norm-only model reproduces the closed-form derivative") {
    ModelConfig cfg = small_cfg(4, 0, 0, PEScheme::nope(4));
    cfg.beta3 = 1.5;
    ModelWeights w;  // no layers

    TokenSequence seq;
    seq.vectors = {{0.5, -1.25, 2.0, 0.75}, {1.0, 0.25, -0.5, 0.125}};

    SUBCASE("earlier source gives an exactly zero block") {
      const Mat64 J = jacobian_analytic(cfg, w, seq, 0);
      for (double v : J.data) CHECK(v == 0.0);
      const Mat64 Jfd = jacobian_fd(cfg, w, seq, 0);
      for (double v : Jfd.data) CHECK(v == 0.0);
    }

    SUBCASE("diagonal source matches the normalization Jacobian") {
      const Mat64 J = jacobian_analytic(cfg, w, seq, 1);
      const Mat64 want = rms_jacobian_oracle(seq[1], cfg.beta3);
      for (std::size_t i = 0; i < J.data.size(); ++i)
        CHECK(std::abs(J.data[i] - want.data[i]) <= 1e-12);
    }
  }

  TEST_CASE("finite differences confirm the analytic jacobian") {
    struct Probe {
      PEScheme pe;
      std::size_t n, L, i;
      std::uint64_t seed;
    };
    const std::vector<Probe> probes = {
        {PEScheme::nope(16), 5, 1, 2, 1},    {PEScheme::rope(16), 6, 2, 0, 2},
        {PEScheme::alibi(16), 4, 3, 3, 3},   {PEScheme::sinusoidal(16), 7, 2, 4, 4},
        {PEScheme::nope(16), 2, 1, 0, 5},    {PEScheme::rope(16), 16, 3, 9, 6},
    };
    for (const Probe& p : probes) {
      CAPTURE(p.seed);
      ModelConfig cfg = small_cfg(16, p.L, p.seed, p.pe);
      const ModelWeights w = init_model(cfg);
      const TokenSequence seq = random_tokens(p.n, 16, p.seed);
      const Mat64 Ja = jacobian_analytic(cfg, w, seq, p.i);
      const Mat64 Jf = jacobian_fd(cfg, w, seq, p.i);
      CHECK(rel_frob_diff(Jf, Ja) < 1e-5);
      CHECK(frob_norm(Ja) > 0.0);
    }
  }

  TEST_CASE("derivatives ignore the requested storage precision") {
    ModelConfig cfg = small_cfg(8, 1, 9, PEScheme::nope(8));
    cfg.precision = FloatFormat::bfloat16();
    const ModelWeights w = init_model(cfg);
    const TokenSequence seq = random_tokens(3, 8, 9);
    const Mat64 Ja = jacobian_analytic(cfg, w, seq, 1);
    const Mat64 Jf = jacobian_fd(cfg, w, seq, 1);
    CHECK(rel_frob_diff(Jf, Ja) < 1e-5);
  }

  TEST_CASE("interior target blocks also agree across both routes") {
    ModelConfig cfg = small_cfg(16, 2, 12, PEScheme::rope(16));
    const ModelWeights w = init_model(cfg);
    const TokenSequence seq = random_tokens(4, 16, 12);
    const Mat64 Ja = jacobian_analytic(cfg, w, seq, 1, 2);
    const Mat64 Jf = jacobian_fd(cfg, w, seq, 1, 1e-5, 2);
    CHECK(rel_frob_diff(Jf, Ja) < 1e-5);
    CHECK(frob_norm(Ja) > 0.0);
  }

  TEST_CASE("future tokens never influence earlier outputs") {
    ModelConfig cfg = small_cfg(8, 2, 21, PEScheme::alibi(8));
    const ModelWeights w = init_model(cfg);
    const TokenSequence seq = random_tokens(5, 8, 21);

    const Mat64 Jzero = jacobian_analytic(cfg, w, seq, 3, 1);
    for (double v : Jzero.data) CHECK(v == 0.0);
    const Mat64 Jfd = jacobian_fd(cfg, w, seq, 3, 1e-5, 1);
    for (double v : Jfd.data) CHECK(v == 0.0);

    const Mat64 Jlive = jacobian_analytic(cfg, w, seq, 1, 3);
    CHECK(frob_norm(Jlive) > 0.0);
  }

  TEST_CASE("jacobian calls validate their indices") {
    ModelConfig cfg = small_cfg(4, 1, 2, PEScheme::nope(4));
    const ModelWeights w = init_model(cfg);
    const TokenSequence seq = random_tokens(3, 4, 2);
    CHECK_THROWS_AS(jacobian_analytic(cfg, w, seq, 3), std::invalid_argument);
    CHECK_THROWS_AS(jacobian_analytic(cfg, w, seq, 0, 5), std::invalid_argument);
    CHECK_THROWS_AS(jacobian_fd(cfg, w, seq, 3), std::invalid_argument);
    CHECK_THROWS_AS(jacobian_fd(cfg, w, seq, 0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(jacobian_fd(cfg, w, seq, 0, 1e-5, 5), std::invalid_argument);
  }

  TEST_CASE("sensitivity profile lines up with its per-token blocks") {
    ModelConfig cfg = small_cfg(8, 1, 31, PEScheme::nope(8));
    const ModelWeights w = init_model(cfg);
    const TokenSequence seq = random_tokens(2, 8, 31);

    const SensitivityProfile prof = sensitivity_profile(cfg, w, seq);
    REQUIRE(prof.values.size() == 2);
    REQUIRE(prof.frob.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(prof.values[i] > 0.0);
      CHECK(prof.frob[i] >= prof.values[i]);
      CHECK(prof.frob[i] <=
            std::sqrt(static_cast<double>(cfg.d)) * prof.values[i] + 1e-12);
      const Mat64 J = jacobian_analytic(cfg, w, seq, i);
      CHECK(prof.values[i] == max_col_l2(J));
      CHECK(std::abs(prof.frob[i] - frob_norm(J)) <= 1e-12);
    }

    TokenSequence lone;
    lone.vectors = {Vec64(8, 0.5)};
    CHECK_THROWS_AS(sensitivity_profile(cfg, w, lone), std::invalid_argument);
  }

  TEST_CASE("linear surrogate under uniform attention meets its bound exactly") {
    const std::size_t n = 8, L = 3, d = 6;
    SurrogateModel m;
    for (std::size_t l = 0; l < L; ++l) m.attn.layers.push_back(uniform_causal(n));
    m.use_mlp = false;

    TokenSequence seq = random_tokens(n, d, 77);
    const std::vector<Mat64> blocks = surrogate_jacobians(m, seq);
    REQUIRE(blocks.size() == n);

    BoundConstants c;
    c.sigma_psi = Vec64(L, 0.0);
    const PathBound pb = path_sum_bound(m.attn, c);

    for (std::size_t i = 0; i < n; ++i) {
      const Mat64& J = blocks[i];
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t k = 0; k < d; ++k)
          if (a != k) CHECK(J(a, k) == 0.0);
      for (std::size_t a = 1; a < d; ++a) CHECK(J(a, a) == J(0, 0));
      CHECK(std::abs(J(0, 0) - pb.values[i]) <= 1e-12 * pb.values[i]);
    }

    // interior influence decays with distance; the last token spikes from its
    // residual path
    for (std::size_t i = 0; i + 2 < n; ++i)
      CHECK(blocks[i](0, 0) >= blocks[i + 1](0, 0) - 1e-15);
    CHECK(blocks[n - 1](0, 0) > blocks[n - 2](0, 0));
  }

  TEST_CASE("surrogate reverse sweep matches finite differences") {
    const std::size_t n = 5, L = 2, d = 8;
    ModelConfig cfg = small_cfg(d, L, 55, PEScheme::nope(d));
    SurrogateModel m;
    m.weights = init_model(cfg);
    Rng rng(55, "surrogate-attn");
    for (std::size_t l = 0; l < L; ++l)
      m.attn.layers.push_back(random_row_stochastic(n, rng, 0.1));
    m.beta1 = 1.25;
    m.beta2 = 0.75;
    m.beta3 = 1.5;

    TokenSequence seq = random_tokens(n, d, 56);
    const std::vector<Mat64> blocks = surrogate_jacobians(m, seq, 3);

    const double delta = 1e-6;
    for (std::size_t i = 0; i < n; ++i) {
      Mat64 fd(d, d);
      for (std::size_t k = 0; k < d; ++k) {
        TokenSequence work = seq;
        work[i][k] += delta;
        const Vec64 yp = surrogate_outputs(m, work)[3];
        work[i][k] -= 2.0 * delta;
        const Vec64 ym = surrogate_outputs(m, work)[3];
        for (std::size_t a = 0; a < d; ++a) fd(a, k) = (yp[a] - ym[a]) / (2.0 * delta);
      }
      if (i > 3) {
        for (double v : blocks[i].data) CHECK(v == 0.0);
        continue;
      }
      CHECK(rel_frob_diff(fd, blocks[i]) < 1e-7);
    }
  }

  TEST_CASE("measured blocks stay below the path bound across random instances") {
    ModelConfig cfg = small_cfg(16, 1, 0, PEScheme::nope(16));
    std::vector<std::uint64_t> seeds;
    for (std::uint64_t s = 0; s < 10; ++s) seeds.push_back(s);

    const BoundCheckReport report = bound_check(cfg, seeds);
    REQUIRE(report.instances.size() == 10);
    CHECK(report.violations == 0);
    for (const BoundCheckInstance& inst : report.instances) {
      CHECK(!inst.violated);
      CHECK(inst.n >= 2);
      CHECK(inst.n <= 16);
      CHECK(inst.L >= 1);
      CHECK(inst.L <= 3);
      CHECK(inst.worst_spectral_ratio > 0.0);
      CHECK(inst.worst_spectral_ratio <= 1.0 + 1e-9);
      CHECK(inst.worst_column_ratio <= inst.worst_spectral_ratio + 1e-12);
      CHECK(inst.worst_frob_ratio <= 1.0 + 1e-9);
    }

    const BoundCheckReport again = bound_check(cfg, {3});
    CHECK(again.instances[0].worst_spectral_ratio ==
          report.instances[3].worst_spectral_ratio);

    CHECK_THROWS_AS(bound_check(cfg, {}), std::invalid_argument);
  }

  TEST_CASE("two-token averaging contracts at rate three quarters") {
    Mat64 A(2, 2);
    A(0, 0) = 1.0;
    A(1, 0) = 0.5;
    A(1, 1) = 0.5;

    const LimitCaseResult res = limit_case(A, 4096);
    CHECK(res.hypothesis_ok);
    CHECK(res.converged);
    CHECK(res.iterations == 65);
    REQUIRE(res.trace.size() == 65);
    CHECK(res.trace[0] == 0.75);
    CHECK(res.distance < 1e-8);
    CHECK(res.trace.back() == res.distance);
    // the distance passes through 1 - M(1,0), so ulp-of-one noise sets an
    // absolute floor once the geometric term falls under ~1e-13
    double expect = 0.75;
    for (std::size_t k = 0; k < res.trace.size(); ++k) {
      CHECK(std::abs(res.trace[k] - expect) <= 1e-12 * expect + 1e-13);
      expect *= 0.75;
    }
  }

  TEST_CASE("identity attention is flagged and exits on its fixed point") {
    const LimitCaseResult res = limit_case(Mat64::identity(3), 4096);
    CHECK(!res.hypothesis_ok);
    CHECK(!res.converged);
    CHECK(res.iterations == 6);
    CHECK(res.distance == 1.0);
    for (double v : res.trace) CHECK(v == 1.0);
  }

  TEST_CASE("a single stranded row blocks convergence and is flagged") {
    Mat64 A(3, 3);
    A(0, 0) = 1.0;
    A(1, 1) = 1.0;
    for (std::size_t j = 0; j < 3; ++j) A(2, j) = 1.0 / 3.0;

    const LimitCaseResult res = limit_case(A, 4096);
    CHECK(!res.hypothesis_ok);
    CHECK(!res.converged);
    CHECK(res.distance == 1.0);
    CHECK(res.iterations == 6);
  }

  TEST_CASE("wide random attention converges and the distance never rises") {
    Rng rng(7, "limit");
    const Mat64 A = random_row_stochastic(64, rng, 0.05);
    const LimitCaseResult res = limit_case(A, 4096);
    CHECK(res.hypothesis_ok);
    CHECK(res.converged);
    CHECK(res.iterations <= 4096);
    for (std::size_t k = 0; k + 1 < res.trace.size(); ++k)
      CHECK(res.trace[k + 1] <= res.trace[k] + 1e-12);
  }

  TEST_CASE("limit case validates its inputs") {
    Mat64 A(2, 2);
    A(0, 0) = 1.0;
    A(1, 0) = 0.5;
    A(1, 1) = 0.5;
    CHECK_THROWS_AS(limit_case(A, 0), std::invalid_argument);
    CHECK_THROWS_AS(limit_case(A, 100, 0.0), std::invalid_argument);
    Mat64 bad = A;
    bad(0, 1) = 0.25;
    CHECK_THROWS_AS(limit_case(bad, 100), std::invalid_argument);
  }

  TEST_CASE("random stochastic rows have the promised shape") {
    Rng rng(5, "rows");
    const Mat64 A = random_row_stochastic(5, rng, 0.3);
    CHECK(A(0, 0) == 1.0);
    for (std::size_t i = 0; i < 5; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < 5; ++j) {
        if (j > i) {
          CHECK(A(i, j) == 0.0);
        } else {
          CHECK(A(i, j) > 0.0);
          CHECK(A(i, j) >= 0.3 / static_cast<double>(i + 1) - 1e-12);
          sum += A(i, j);
        }
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }

    Rng r1(9, "rows"), r2(9, "rows");
    const Mat64 B1 = random_row_stochastic(4, r1, 0.1);
    const Mat64 B2 = random_row_stochastic(4, r2, 0.1);
    for (std::size_t i = 0; i < B1.data.size(); ++i) CHECK(B1.data[i] == B2.data[i]);

    CHECK_THROWS_AS(random_row_stochastic(0, rng), std::invalid_argument);
    CHECK_THROWS_AS(random_row_stochastic(3, rng, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(random_row_stochastic(3, rng, -0.1), std::invalid_argument);
  }

  TEST_CASE("stochastic matrix facts hold over many samples") {
    const StochasticLemmaReport rep = stochastic_lemma_checks(200);
    CHECK(rep.ok);
    CHECK(rep.samples == 200);
    CHECK(rep.max_eigen_residual <= 1e-12);
    CHECK(rep.max_spectral_estimate <= 1.0 + 1e-9);
    CHECK(rep.max_spectral_estimate >= 0.9);
    CHECK(rep.max_product_row_sum_error <= 1e-12);
    CHECK(rep.max_product_upper_entry == 0.0);

    CHECK_THROWS_AS(stochastic_lemma_checks(0), std::invalid_argument);
  }
}
