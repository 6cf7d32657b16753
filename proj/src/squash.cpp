#include "clab/squash.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "clab/common.hpp"
#include "clab/posenc.hpp"

namespace clab {

namespace {

void require_attention_matrix(const Mat64& A) {
  require(A.rows == A.cols && A.rows >= 1, "attention matrix must be square");
  for (std::size_t i = 0; i < A.rows; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < A.cols; ++j) {
      if (j > i) {
        require(A(i, j) == 0.0, "strict upper triangle must be exactly zero");
      } else {
        require(A(i, j) >= 0.0, "attention weights must be nonnegative");
        sum += A(i, j);
      }
    }
    require(std::abs(sum - 1.0) <= 1e-9, "attention rows must sum to one");
  }
}

void require_stack(const AttentionStack& attn) {
  require(!attn.layers.empty(), "attention stack must have at least one layer");
  const std::size_t n = attn.layers.front().rows;
  for (const Mat64& A : attn.layers) {
    require(A.rows == n, "attention layers must share one size");
    require_attention_matrix(A);
  }
}

// tangent of x -> rms_norm(x, beta) applied to one direction t, added into out
void rms_tangent_col(const Vec64& x, double beta, const double* t, double* out) {
  const std::size_t d = x.size();
  Vec64 sq(d);
  for (std::size_t a = 0; a < d; ++a) sq[a] = x[a] * x[a];
  const double m = pairwise_sum(sq) / static_cast<double>(d) + kRmsEps;
  const double s = 1.0 / std::sqrt(m);
  double xt = 0.0;
  for (std::size_t a = 0; a < d; ++a) xt += x[a] * t[a];
  const double c = s * s * s / static_cast<double>(d);
  for (std::size_t a = 0; a < d; ++a) out[a] = beta * (t[a] * s - x[a] * xt * c);
}

struct RichLayer {
  std::vector<Vec64> v_in;
  std::vector<Vec64> u;
  std::vector<Vec64> tq, tk;
  std::vector<Vec64> alpha;  // row i holds i+1 weights
  std::vector<Vec64> z;
  std::vector<Vec64> h;
  std::vector<Vec64> a1;  // tanh(W1 h)
};

struct RichTrace {
  std::vector<RichLayer> layers;
  std::vector<Vec64> v_out;
};

// mirror of the forward pass, keeping every intermediate the chain rule needs
RichTrace rich_forward(const ModelConfig& cfg, const ModelWeights& w,
                       const TokenSequence& seq) {
  cfg.validate();
  require(w.size() == cfg.L, "weight stack depth must match config");
  const std::size_t n = seq.size();
  require(n > 0, "token sequence must be non-empty");
  for (std::size_t i = 0; i < n; ++i)
    require(seq[i].size() == cfg.d, "token vector dimension must match config");

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.d));
  RichTrace trace;
  trace.layers.resize(cfg.L);
  std::vector<Vec64> v = seq.vectors;

  for (std::size_t l = 0; l < cfg.L; ++l) {
    RichLayer& rl = trace.layers[l];
    rl.v_in = v;
    rl.u.resize(n);
    rl.tq.resize(n);
    rl.tk.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      rl.u[j] = rms_norm(v[j], cfg.beta1);
      rl.tq[j] = pe_apply_query(matvec(w[l].Wq, rl.u[j]), j, cfg.pe);
      rl.tk[j] = pe_apply_key(matvec(w[l].Wk, rl.u[j]), j, cfg.pe);
    }
    rl.alpha.resize(n);
    rl.z.resize(n);
    Vec64 srow;
    for (std::size_t i = 0; i < n; ++i) {
      srow.resize(i + 1);
      for (std::size_t j = 0; j <= i; ++j)
        srow[j] = dot(rl.tq[i], rl.tk[j]) * inv_sqrt_d + pe_bias(i, j, cfg.pe);
      rl.alpha[i] = softmax(srow);
      Vec64 zi(cfg.d, 0.0);
      for (std::size_t j = 0; j <= i; ++j) {
        const double a = rl.alpha[i][j];
        const double* uj = rl.u[j].data();
        for (std::size_t t = 0; t < cfg.d; ++t) zi[t] += a * uj[t];
      }
      for (std::size_t t = 0; t < cfg.d; ++t) zi[t] += v[i][t];
      rl.z[i] = std::move(zi);
    }
    rl.h.resize(n);
    rl.a1.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      rl.h[i] = rms_norm(rl.z[i], cfg.beta2);
      Vec64 pre = matvec(w[l].W1, rl.h[i]);
      for (auto& t : pre) t = std::tanh(t);
      rl.a1[i] = std::move(pre);
      Vec64 vi = matvec(w[l].W2, rl.a1[i]);
      for (std::size_t t = 0; t < cfg.d; ++t) vi[t] += rl.z[i][t];
      v[i] = std::move(vi);
    }
  }
  trace.v_out = std::move(v);
  return trace;
}

// propagates all d tangent directions at once; tangent matrices are stored
// as Mat64 with (row = component, col = direction)
Mat64 analytic_block(const ModelConfig& cfg, const ModelWeights& w,
                     const RichTrace& rt, std::size_t n, std::size_t source,
                     std::size_t target) {
  const std::size_t d = cfg.d;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  std::vector<Mat64> T(n);
  for (std::size_t j = 0; j < n; ++j) T[j] = Mat64(d, d);
  T[source] = Mat64::identity(d);

  std::vector<Mat64> Tuu(n), Tq(n), Tk(n);
  Vec64 ts;

  for (std::size_t l = 0; l < cfg.L; ++l) {
    const RichLayer& rl = rt.layers[l];
    // tokens before the source never acquire a tangent
    for (std::size_t j = source; j < n; ++j) {
      Tuu[j] = Mat64(d, d);
      Tq[j] = Mat64(d, d);
      Tk[j] = Mat64(d, d);
      for (std::size_t k = 0; k < d; ++k) {
        Vec64 col(d), out(d);
        for (std::size_t a = 0; a < d; ++a) col[a] = T[j](a, k);
        rms_tangent_col(rl.v_in[j], cfg.beta1, col.data(), out.data());
        for (std::size_t a = 0; a < d; ++a) Tuu[j](a, k) = out[a];
        Vec64 q = matvec(w[l].Wq, out);
        Vec64 kk = matvec(w[l].Wk, out);
        if (cfg.pe.tag == PETag::RoPE) {
          rope_rotate_inplace(q, j, cfg.pe);
          rope_rotate_inplace(kk, j, cfg.pe);
        }
        for (std::size_t a = 0; a < d; ++a) {
          Tq[j](a, k) = q[a];
          Tk[j](a, k) = kk[a];
        }
      }
    }

    std::vector<Mat64> Tz(n);
    for (std::size_t i = source; i < n; ++i) {
      Tz[i] = Mat64(d, d);
      ts.assign((i + 1) * d, 0.0);  // score tangents, direction-major rows
      for (std::size_t k = 0; k < d; ++k) {
        for (std::size_t j = 0; j <= i; ++j) {
          double v1 = 0.0;
          for (std::size_t a = 0; a < d; ++a) v1 += Tq[i](a, k) * rl.tk[j][a];
          double v2 = 0.0;
          if (j >= source)
            for (std::size_t a = 0; a < d; ++a) v2 += rl.tq[i][a] * Tk[j](a, k);
          ts[k * (i + 1) + j] = (v1 + v2) * inv_sqrt_d;
        }
      }
      for (std::size_t k = 0; k < d; ++k) {
        const double* tsr = ts.data() + k * (i + 1);
        double mean = 0.0;
        for (std::size_t j = 0; j <= i; ++j) mean += rl.alpha[i][j] * tsr[j];
        for (std::size_t j = 0; j <= i; ++j) {
          const double ta = rl.alpha[i][j] * (tsr[j] - mean);
          if (ta != 0.0)
            for (std::size_t a = 0; a < d; ++a)
              Tz[i](a, k) += ta * rl.u[j][a];
        }
        for (std::size_t j = source; j <= i; ++j) {
          const double a_ij = rl.alpha[i][j];
          for (std::size_t a = 0; a < d; ++a)
            Tz[i](a, k) += a_ij * Tuu[j](a, k);
        }
        for (std::size_t a = 0; a < d; ++a) Tz[i](a, k) += T[i](a, k);
      }
    }

    for (std::size_t i = source; i < n; ++i) {
      Mat64 Tnext(d, d);
      for (std::size_t k = 0; k < d; ++k) {
        Vec64 col(d), th(d);
        for (std::size_t a = 0; a < d; ++a) col[a] = Tz[i](a, k);
        rms_tangent_col(rl.z[i], cfg.beta2, col.data(), th.data());
        Vec64 pre = matvec(w[l].W1, th);
        for (std::size_t b = 0; b < pre.size(); ++b)
          pre[b] *= 1.0 - rl.a1[i][b] * rl.a1[i][b];
        Vec64 mo = matvec(w[l].W2, pre);
        for (std::size_t a = 0; a < d; ++a) Tnext(a, k) = mo[a] + Tz[i](a, k);
      }
      T[i] = std::move(Tnext);
    }
  }

  Mat64 J(d, d);
  const Vec64& vt = rt.v_out[target];
  for (std::size_t k = 0; k < d; ++k) {
    Vec64 col(d), out(d);
    for (std::size_t a = 0; a < d; ++a) col[a] = T[target](a, k);
    rms_tangent_col(vt, cfg.beta3, col.data(), out.data());
    for (std::size_t a = 0; a < d; ++a) J(a, k) = out[a];
  }
  return J;
}

double col_l2(const Mat64& J, std::size_t k) {
  double s = 0.0;
  for (std::size_t a = 0; a < J.rows; ++a) s += J(a, k) * J(a, k);
  return std::sqrt(s);
}

}  // namespace

BoundConstants make_bound_constants(const ModelWeights& w, double beta1, double beta2,
                                    double beta3) {
  require(beta1 > 0.0 && beta2 > 0.0 && beta3 > 0.0, "norm scales must be positive");
  BoundConstants c;
  c.beta1 = beta1;
  c.beta2 = beta2;
  c.beta3 = beta3;
  c.beta_attn = beta1;
  c.sigma_psi.reserve(w.size());
  double prod = 1.0;
  for (const LayerWeights& lw : w) {
    const double s = operator_norm_2(lw.W2) * operator_norm_2(lw.W1);
    c.sigma_psi.push_back(s);
    prod *= s / beta2 + 1.0;
  }
  c.C = prod / beta3;
  return c;
}

PathBound path_sum_bound(const AttentionStack& attn, const BoundConstants& consts) {
  require_stack(attn);
  require(consts.beta_attn > 0.0, "beta_attn must be positive");
  require(consts.beta2 > 0.0 && consts.beta3 > 0.0, "norm scales must be positive");
  require(consts.sigma_psi.size() == attn.layers.size(),
          "one Lipschitz constant per layer required");
  double expect_c = 1.0;
  for (double s : consts.sigma_psi) {
    require(s >= 0.0, "Lipschitz constants must be nonnegative");
    expect_c *= s / consts.beta2 + 1.0;
  }
  expect_c /= consts.beta3;
  require(std::abs(consts.C - expect_c) <= 1e-9 * std::abs(expect_c),
          "composite constant is inconsistent with its factors");

  const std::size_t n = attn.layers.front().rows;
  auto abar = [&](const Mat64& A) {
    Mat64 B(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        B(i, j) = A(i, j) / consts.beta_attn + (i == j ? 1.0 : 0.0);
    return B;
  };
  Mat64 M = abar(attn.layers.back());
  for (std::size_t l = attn.layers.size() - 1; l-- > 0;)
    M = matmul(M, abar(attn.layers[l]));

  PathBound pb;
  pb.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) pb.values[i] = consts.C * M(n - 1, i);
  return pb;
}

Mat64 jacobian_fd(const ModelConfig& cfg, const ModelWeights& w,
                  const TokenSequence& seq, std::size_t i, double delta,
                  std::size_t target) {
  const std::size_t n = seq.size();
  require(i < n, "source token index out of range");
  const std::size_t tgt = (target == kLastToken) ? n - 1 : target;
  require(tgt < n, "target token index out of range");
  require(delta > 0.0, "step must be positive");

  ForwardOptions lean;
  lean.record_attention = false;
  lean.record_states = false;

  Mat64 J(cfg.d, cfg.d);
  TokenSequence work = seq;
  for (std::size_t k = 0; k < cfg.d; ++k) {
    const double saved = work[i][k];
    work[i][k] = saved + delta;
    const Vec64 yp = forward(cfg, w, work, lean).outputs[tgt];
    work[i][k] = saved - delta;
    const Vec64 ym = forward(cfg, w, work, lean).outputs[tgt];
    work[i][k] = saved;
    for (std::size_t a = 0; a < cfg.d; ++a) {
      J(a, k) = (yp[a] - ym[a]) / (2.0 * delta);
      require_finite(J(a, k), "finite-difference Jacobian");
    }
  }
  return J;
}

Mat64 jacobian_analytic(const ModelConfig& cfg, const ModelWeights& w,
                        const TokenSequence& seq, std::size_t i,
                        std::size_t target) {
  const std::size_t n = seq.size();
  require(i < n, "source token index out of range");
  const std::size_t tgt = (target == kLastToken) ? n - 1 : target;
  require(tgt < n, "target token index out of range");
  const RichTrace rt = rich_forward(cfg, w, seq);
  return analytic_block(cfg, w, rt, n, i, tgt);
}

SensitivityProfile sensitivity_profile(const ModelConfig& cfg, const ModelWeights& w,
                                       const TokenSequence& seq) {
  const std::size_t n = seq.size();
  require(n >= 2, "profile needs at least two tokens");
  const RichTrace rt = rich_forward(cfg, w, seq);

  SensitivityProfile prof;
  prof.values.resize(n);
  prof.frob.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Mat64 J = analytic_block(cfg, w, rt, n, i, n - 1);
    double best = 0.0, fsum = 0.0;
    for (std::size_t k = 0; k < cfg.d; ++k) {
      const double c = col_l2(J, k);
      best = std::max(best, c);
      fsum += c * c;
    }
    prof.values[i] = best;
    prof.frob[i] = std::sqrt(fsum);
    require_finite(prof.values[i], "sensitivity profile");
  }
  return prof;
}

namespace {

struct SurrogatePrimal {
  std::vector<std::vector<Vec64>> a1;  // per layer per token, tanh(W1 z/beta2)
  std::vector<Vec64> v_out;
};

SurrogatePrimal surrogate_primal(const SurrogateModel& m, const TokenSequence& seq) {
  require_stack(m.attn);
  const std::size_t L = m.attn.layers.size();
  const std::size_t n = m.attn.layers.front().rows;
  require(seq.size() == n, "sequence length must match the attention stack");
  require(m.beta1 > 0.0 && m.beta2 > 0.0 && m.beta3 > 0.0,
          "norm scales must be positive");
  if (m.use_mlp)
    require(m.weights.size() == L, "one weight layer per attention layer required");
  const std::size_t d = seq[0].size();

  SurrogatePrimal p;
  p.a1.resize(L);
  std::vector<Vec64> v = seq.vectors;
  for (std::size_t l = 0; l < L; ++l) {
    const Mat64& A = m.attn.layers[l];
    std::vector<Vec64> z(n, Vec64(d, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        const double a = A(i, j) / m.beta1;
        if (a == 0.0) continue;
        for (std::size_t t = 0; t < d; ++t) z[i][t] += a * v[j][t];
      }
      for (std::size_t t = 0; t < d; ++t) z[i][t] += v[i][t];
    }
    p.a1[l].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (m.use_mlp) {
        Vec64 h(d);
        for (std::size_t t = 0; t < d; ++t) h[t] = z[i][t] / m.beta2;
        Vec64 pre = matvec(m.weights[l].W1, h);
        for (auto& t : pre) t = std::tanh(t);
        p.a1[l][i] = pre;
        Vec64 vi = matvec(m.weights[l].W2, p.a1[l][i]);
        for (std::size_t t = 0; t < d; ++t) vi[t] += z[i][t];
        v[i] = std::move(vi);
      } else {
        v[i] = z[i];
      }
    }
  }
  p.v_out = std::move(v);
  return p;
}

}  // namespace

std::vector<Vec64> surrogate_outputs(const SurrogateModel& m, const TokenSequence& seq) {
  SurrogatePrimal p = surrogate_primal(m, seq);
  for (auto& v : p.v_out)
    for (auto& x : v) x /= m.beta3;
  return p.v_out;
}

std::vector<Mat64> surrogate_jacobians(const SurrogateModel& m,
                                       const TokenSequence& seq,
                                       std::size_t target) {
  const SurrogatePrimal p = surrogate_primal(m, seq);
  const std::size_t L = m.attn.layers.size();
  const std::size_t n = m.attn.layers.front().rows;
  const std::size_t d = seq[0].size();
  const std::size_t tgt = (target == kLastToken) ? n - 1 : target;
  require(tgt < n, "target token index out of range");

  std::vector<Mat64> blocks(n, Mat64(d, d));
  std::vector<Vec64> g(n, Vec64(d, 0.0));

  for (std::size_t a = 0; a < d; ++a) {
    for (auto& gv : g) std::fill(gv.begin(), gv.end(), 0.0);
    g[tgt].assign(d, 0.0);
    g[tgt][a] = 1.0 / m.beta3;

    for (std::size_t l = L; l-- > 0;) {
      const Mat64& A = m.attn.layers[l];
      // back through v' = W2 tanh(W1 z/beta2) + z
      std::vector<Vec64> gz(n);
      for (std::size_t i = 0; i < n; ++i) {
        gz[i] = g[i];
        if (m.use_mlp) {
          Vec64 t(m.weights[l].W2.cols, 0.0);
          for (std::size_t r = 0; r < m.weights[l].W2.rows; ++r) {
            const double gr = g[i][r];
            if (gr == 0.0) continue;
            const double* row = m.weights[l].W2.data.data() + r * m.weights[l].W2.cols;
            for (std::size_t cidx = 0; cidx < m.weights[l].W2.cols; ++cidx)
              t[cidx] += gr * row[cidx];
          }
          for (std::size_t b = 0; b < t.size(); ++b)
            t[b] *= 1.0 - p.a1[l][i][b] * p.a1[l][i][b];
          Vec64 back(d, 0.0);
          for (std::size_t r = 0; r < m.weights[l].W1.rows; ++r) {
            const double tr = t[r];
            if (tr == 0.0) continue;
            const double* row = m.weights[l].W1.data.data() + r * m.weights[l].W1.cols;
            for (std::size_t cidx = 0; cidx < d; ++cidx) back[cidx] += tr * row[cidx];
          }
          for (std::size_t cidx = 0; cidx < d; ++cidx)
            gz[i][cidx] += back[cidx] / m.beta2;
        }
      }
      // back through z_i = sum_j (A_ij/beta1) v_j + v_i
      for (std::size_t j = 0; j < n; ++j) {
        Vec64 gv = gz[j];
        for (std::size_t i = j; i < n; ++i) {
          const double w_ij = A(i, j) / m.beta1;
          if (w_ij == 0.0) continue;
          for (std::size_t t = 0; t < d; ++t) gv[t] += w_ij * gz[i][t];
        }
        g[j] = std::move(gv);
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k) blocks[i](a, k) = g[i][k];
  }
  return blocks;
}

BoundCheckReport bound_check(const ModelConfig& cfg,
                             const std::vector<std::uint64_t>& seeds) {
  require(!seeds.empty(), "need at least one seed");
  BoundCheckReport report;
  report.instances.reserve(seeds.size());

  for (std::uint64_t seed : seeds) {
    Rng shape(seed, "bound-shape");
    BoundCheckInstance inst;
    inst.seed = seed;
    inst.n = 2 + shape.next_below(15);  // 2..16
    inst.L = 1 + shape.next_below(3);   // 1..3

    ModelConfig c = cfg;
    c.seed = seed;
    c.L = inst.L;
    ModelWeights w = init_model(c);

    Rng data(seed, "symbols");
    TokenSequence seq;
    seq.vectors.resize(inst.n, Vec64(c.d));
    for (auto& v : seq.vectors)
      for (auto& x : v) x = data.next_uniform(-1.0, 1.0);

    ForwardOptions opts;
    opts.record_attention = true;
    opts.record_states = false;
    const ForwardTrace ref = forward(c, w, seq, opts);

    const BoundConstants consts =
        make_bound_constants(w, c.beta1, c.beta2, c.beta3);
    const PathBound bound = path_sum_bound(ref.attn, consts);
    SurrogateModel sm;
    sm.attn = ref.attn;
    sm.weights = w;
    sm.beta1 = c.beta1;
    sm.beta2 = c.beta2;
    sm.beta3 = c.beta3;
    const std::vector<Mat64> blocks = surrogate_jacobians(sm, seq);

    const double sqrt_d = std::sqrt(static_cast<double>(c.d));
    for (std::size_t i = 0; i < inst.n; ++i) {
      const double spec = operator_norm_2(blocks[i]);
      double best = 0.0, fsum = 0.0;
      for (std::size_t k = 0; k < c.d; ++k) {
        const double cl = col_l2(blocks[i], k);
        best = std::max(best, cl);
        fsum += cl * cl;
      }
      const double frob = std::sqrt(fsum);
      const double b = bound.values[i];
      inst.worst_spectral_ratio = std::max(inst.worst_spectral_ratio, spec / b);
      inst.worst_column_ratio = std::max(inst.worst_column_ratio, best / b);
      inst.worst_frob_ratio = std::max(inst.worst_frob_ratio, frob / (sqrt_d * b));
    }
    const double tol = 1.0 + 1e-9;
    inst.violated = inst.worst_spectral_ratio > tol ||
                    inst.worst_column_ratio > tol || inst.worst_frob_ratio > tol;
    if (inst.violated) ++report.violations;
    report.instances.push_back(std::move(inst));
  }
  return report;
}

LimitCaseResult limit_case(const Mat64& attn, std::size_t L_max, double tol) {
  require_attention_matrix(attn);
  require(L_max >= 1, "L_max must be positive");
  require(tol > 0.0, "tolerance must be positive");
  const std::size_t n = attn.rows;

  LimitCaseResult res;
  for (std::size_t i = 1; i < n; ++i) {
    std::size_t nonzeros = 0;
    for (std::size_t j = 0; j <= i; ++j)
      if (attn(i, j) > 0.0) ++nonzeros;
    if (nonzeros < 2) res.hypothesis_ok = false;
  }

  Mat64 B(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j)
      B(i, j) = (attn(i, j) + (i == j ? 1.0 : 0.0)) / 2.0;

  auto dist_to_e1 = [n](const Mat64& M) {
    double dmax = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double want = (j == 0) ? 1.0 : 0.0;
        dmax = std::max(dmax, std::abs(M(i, j) - want));
      }
    return dmax;
  };

  Mat64 M = B;
  std::size_t L = 1;
  double dist = dist_to_e1(M);
  res.trace.push_back(dist);
  double prev = std::numeric_limits<double>::infinity();
  while (dist >= tol && L < L_max) {
    if (dist == prev && L >= 2 * n) break;  // exact fixed point, going nowhere
    prev = dist;
    M = matmul(B, M);
    ++L;
    dist = dist_to_e1(M);
    res.trace.push_back(dist);
  }
  res.converged = dist < tol;
  res.iterations = L;
  res.distance = dist;
  return res;
}

Mat64 random_row_stochastic(std::size_t n, Rng& rng, double floor) {
  require(n >= 1, "size must be positive");
  require(floor >= 0.0 && floor < 1.0, "floor must lie in [0, 1)");
  Mat64 A(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j <= i; ++j) {
      A(i, j) = floor + (1.0 - floor) * rng.next_uniform();
      sum += A(i, j);
    }
    for (std::size_t j = 0; j <= i; ++j) A(i, j) /= sum;
  }
  return A;
}

StochasticLemmaReport stochastic_lemma_checks(std::size_t samples, std::uint64_t seed) {
  require(samples >= 1, "need at least one sample");
  Rng rng(seed, "stochastic-lemmas");
  StochasticLemmaReport rep;
  rep.samples = samples;

  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t n = 2 + rng.next_below(11);
    const Mat64 A = random_row_stochastic(n, rng);
    const Mat64 B = random_row_stochastic(n, rng);

    // ones is an eigenvector with eigenvalue one
    const Vec64 w = matvec(A, Vec64(n, 1.0));
    for (double x : w)
      rep.max_eigen_residual = std::max(rep.max_eigen_residual, std::abs(x - 1.0));

    // power iteration for the dominant eigenvalue
    Vec64 v(n);
    for (auto& x : v) x = rng.next_uniform(0.5, 1.5);
    double est = 0.0;
    for (int it = 0; it < 50; ++it) {
      Vec64 av = matvec(A, v);
      double mx = 0.0;
      for (double x : av) mx = std::max(mx, std::abs(x));
      require(mx > 0.0, "power iteration collapsed to zero");
      est = mx;
      double vmx = 0.0;
      for (double x : v) vmx = std::max(vmx, std::abs(x));
      est = mx / vmx;
      v = std::move(av);
      for (auto& x : v) x /= mx;
    }
    rep.max_spectral_estimate = std::max(rep.max_spectral_estimate, est);

    const Mat64 P = matmul(A, B);
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j > i)
          rep.max_product_upper_entry =
              std::max(rep.max_product_upper_entry, std::abs(P(i, j)));
        else
          sum += P(i, j);
      }
      rep.max_product_row_sum_error =
          std::max(rep.max_product_row_sum_error, std::abs(sum - 1.0));
    }
  }

  rep.ok = rep.max_eigen_residual <= 1e-12 &&
           rep.max_spectral_estimate <= 1.0 + 1e-9 &&
           rep.max_product_row_sum_error <= 1e-12 &&
           rep.max_product_upper_entry == 0.0;
  return rep;
}

}  // namespace clab
