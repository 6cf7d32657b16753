#include "clab/counting.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "clab/collapse.hpp"
#include "clab/common.hpp"

namespace clab {

void TwoSymbolSequence::validate() const {
  require(n0 + n1 >= 1, "sequence must hold at least one token");
  require(arrangement.size() == n0 + n1, "arrangement length must match counts");
  std::size_t c0 = 0, c1 = 0;
  for (int a : arrangement) {
    require(a == 0 || a == 1, "arrangement entries must be 0 or 1");
    if (a == 0) ++c0; else ++c1;
  }
  require(c0 == n0 && c1 == n1, "arrangement does not match the stated counts");
  if (n0 > 0) require(!zero_token.empty(), "zero-class token vector missing");
  if (n1 > 0) require(!one_token.empty(), "one-class token vector missing");
  if (n0 > 0 && n1 > 0)
    require(zero_token.size() == one_token.size(),
            "class token dimensions must agree");
}

TokenSequence TwoSymbolSequence::materialize() const {
  validate();
  TokenSequence s;
  s.vectors.reserve(arrangement.size());
  for (int a : arrangement) s.vectors.push_back(a == 0 ? zero_token : one_token);
  return s;
}

TwoSymbolSequence make_two_symbol(std::size_t n0, std::size_t n1,
                                  const Vec64& zero_token, const Vec64& one_token) {
  TwoSymbolSequence s;
  s.n0 = n0;
  s.n1 = n1;
  s.zero_token = zero_token;
  s.one_token = one_token;
  s.arrangement.reserve(n0 + n1);
  for (std::size_t i = 0; i < n0; ++i) s.arrangement.push_back(0);
  for (std::size_t i = 0; i < n1; ++i) s.arrangement.push_back(1);
  s.validate();
  return s;
}

std::pair<Vec64, Vec64> two_symbol_tokens(std::size_t d, std::uint64_t symbol_seed) {
  require(d > 0, "dimension must be positive");
  Rng rng(symbol_seed, "symbol-table");
  Vec64 zero = unit_gaussian(rng, d);
  Vec64 one = unit_gaussian(rng, d);
  return {std::move(zero), std::move(one)};
}

ClassReps nope_bidirectional_forward(const ModelWeights& w,
                                     const TwoSymbolSequence& seq, std::size_t L,
                                     const BidirectionalOptions& opts) {
  seq.validate();
  require(L <= w.size(), "weight stack too shallow for the requested depth");
  const std::size_t d = seq.n0 > 0 ? seq.zero_token.size() : seq.one_token.size();
  for (std::size_t l = 0; l < L; ++l) {
    require(w[l].Wq.rows == d && w[l].Wq.cols == d, "Wq dimension mismatch");
    require(w[l].Wk.rows == d && w[l].Wk.cols == d, "Wk dimension mismatch");
    require(w[l].W1.cols == d && w[l].W2.rows == d, "MLP dimension mismatch");
  }
  if (opts.use_norms)
    require(opts.beta1 > 0.0 && opts.beta2 > 0.0, "norm scales must be positive");

  std::vector<Vec64> v = seq.materialize().vectors;
  const std::size_t n = v.size();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  ClassReps reps;
  auto check_uniform = [&](std::size_t layer) {
    for (int cls = 0; cls < 2; ++cls) {
      std::size_t first = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (seq.arrangement[i] != cls) continue;
        if (first == n) {
          first = i;
          continue;
        }
        double gap = 0.0;
        for (std::size_t t = 0; t < d; ++t)
          gap = std::max(gap, std::abs(v[i][t] - v[first][t]));
        reps.max_intra_gap = std::max(reps.max_intra_gap, gap);
        if (gap > 1e-12)
          throw numerical_error("same-class representations diverged at layer " +
                                std::to_string(layer));
      }
    }
  };

  std::vector<Vec64> u(n), q(n), k(n);
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t j = 0; j < n; ++j) {
      u[j] = opts.use_norms ? rms_norm(v[j], opts.beta1) : v[j];
      q[j] = matvec(w[l].Wq, u[j]);
      k[j] = matvec(w[l].Wk, u[j]);
    }
    std::vector<Vec64> next(n);
    Vec64 srow(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j)
        srow[j] = dot(q[i], k[j]) * inv_sqrt_d;
      const Vec64 alpha = softmax(srow);
      Vec64 z(d, 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        const double a = alpha[j];
        for (std::size_t t = 0; t < d; ++t) z[t] += a * u[j][t];
      }
      for (std::size_t t = 0; t < d; ++t) z[t] += v[i][t];
      const Vec64 h = opts.use_norms ? rms_norm(z, opts.beta2) : z;
      Vec64 m = mlp_apply(w[l], h);
      for (std::size_t t = 0; t < d; ++t) m[t] += z[t];
      next[i] = std::move(m);
    }
    v = std::move(next);
    check_uniform(l + 1);
  }
  if (L == 0) check_uniform(0);

  for (std::size_t i = 0; i < n; ++i) {
    if (seq.arrangement[i] == 0 && reps.zero.empty()) reps.zero = v[i];
    if (seq.arrangement[i] == 1 && reps.one.empty()) reps.one = v[i];
  }
  return reps;
}

namespace {

double class_gap(const Vec64& a, const Vec64& b) {
  double gap = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t)
    gap = std::max(gap, std::abs(a[t] - b[t]));
  return gap;
}

double reps_gap(const ClassReps& a, const ClassReps& b) {
  double gap = 0.0;
  if (!a.zero.empty() && !b.zero.empty()) gap = std::max(gap, class_gap(a.zero, b.zero));
  if (!a.one.empty() && !b.one.empty()) gap = std::max(gap, class_gap(a.one, b.one));
  return gap;
}

}  // namespace

RatioInvarianceReport ratio_invariance_check(
    const ModelWeights& w,
    const std::vector<std::pair<std::size_t, std::size_t>>& ratios,
    const std::vector<std::size_t>& multipliers, std::size_t L,
    const Vec64& zero_token, const Vec64& one_token) {
  require(!w.empty(), "weight stack must be non-empty");
  require(L >= 1 && L <= w.size(), "depth must address the weight stack");
  require(!ratios.empty(), "need at least one ratio");
  require(!multipliers.empty(), "need at least one multiplier");
  for (std::size_t m : multipliers) require(m >= 1, "multipliers must be >= 1");

  Vec64 zero = zero_token, one = one_token;
  if (zero.empty() || one.empty()) {
    auto pair = two_symbol_tokens(w[0].Wq.rows, 0);
    if (zero.empty()) zero = pair.first;
    if (one.empty()) one = pair.second;
  }

  RatioInvarianceReport report;
  BidirectionalOptions plain;
  BidirectionalOptions normed;
  normed.use_norms = true;

  for (const auto& [n0, n1] : ratios) {
    require(n0 + n1 >= 1, "ratio counts must not both be zero");
    const ClassReps base =
        nope_bidirectional_forward(w, make_two_symbol(n0, n1, zero, one), L, plain);
    const ClassReps base_n =
        nope_bidirectional_forward(w, make_two_symbol(n0, n1, zero, one), L, normed);
    for (std::size_t m : multipliers) {
      const TwoSymbolSequence scaled = make_two_symbol(m * n0, m * n1, zero, one);
      RatioCell cell;
      cell.n0 = n0;
      cell.n1 = n1;
      cell.multiplier = m;
      cell.gap = reps_gap(base, nope_bidirectional_forward(w, scaled, L, plain));
      cell.normed_gap =
          reps_gap(base_n, nope_bidirectional_forward(w, scaled, L, normed));
      report.max_gap = std::max(report.max_gap, cell.gap);
      report.max_normed_gap = std::max(report.max_normed_gap, cell.normed_gap);
      report.cells.push_back(cell);
    }
  }
  report.ok = report.max_gap < 1e-10 && report.max_normed_gap < 1e-10;
  return report;
}

GenericWeightsDraw draw_generic_weights(std::size_t d, std::size_t L,
                                        std::uint64_t seed, const Vec64& zero_token,
                                        const Vec64& one_token) {
  require(d > 0 && L >= 1, "need a positive dimension and depth");
  require(zero_token.size() == d && one_token.size() == d,
          "class tokens must match the dimension");

  ModelConfig cfg;
  cfg.d = d;
  cfg.L = L;
  cfg.pe = PEScheme::nope(d);
  const TwoSymbolSequence probe = make_two_symbol(1, 1, zero_token, one_token);

  for (int attempt = 1; attempt <= 16; ++attempt) {
    cfg.seed = seed + static_cast<std::uint64_t>(attempt - 1);
    ModelWeights w = init_model(cfg);
    const ClassReps reps = nope_bidirectional_forward(w, probe, 1);
    if (class_gap(reps.zero, reps.one) > 1e-8)
      return {std::move(w), cfg.seed, attempt};
  }
  throw numerical_error(
      "class representations stayed degenerate across 16 weight draws");
}

double readout_estimate(const CountReadout& readout, const Vec64& y) {
  require(!readout.w.empty() && readout.w.size() == y.size(),
          "readout dimension mismatch");
  return dot(readout.w, y) + readout.b;
}

namespace {

// gaussian elimination with partial pivoting; false on a vanishing pivot
bool solve_inplace(Mat64& A, Vec64& x) {
  const std::size_t n = A.rows;
  double scale = 0.0;
  for (double v : A.data) scale = std::max(scale, std::abs(v));
  const double tol = 1e-12 * std::max(scale, 1.0);
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(A(r, c)) > std::abs(A(piv, c))) piv = r;
    if (std::abs(A(piv, c)) < tol) return false;
    if (piv != c) {
      for (std::size_t j = 0; j < n; ++j) std::swap(A(c, j), A(piv, j));
      std::swap(x[c], x[piv]);
    }
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = A(r, c) / A(c, c);
      if (f == 0.0) continue;
      for (std::size_t j = c; j < n; ++j) A(r, j) -= f * A(c, j);
      x[r] -= f * x[c];
    }
  }
  for (std::size_t c = n; c-- > 0;) {
    double s = x[c];
    for (std::size_t j = c + 1; j < n; ++j) s -= A(c, j) * x[j];
    x[c] = s / A(c, c);
  }
  return true;
}

}  // namespace

ReadoutFit fit_count_readout(const ModelConfig& cfg,
                             const std::vector<std::size_t>& train_lengths,
                             std::uint64_t seed, const Vec64& target_token) {
  ModelConfig c = cfg;
  c.seed = seed;
  c.validate();
  require(!train_lengths.empty(), "need at least one training length");
  std::vector<std::size_t> lengths = train_lengths;
  std::sort(lengths.begin(), lengths.end());
  lengths.erase(std::unique(lengths.begin(), lengths.end()), lengths.end());
  require(lengths.front() >= 1, "training lengths must be positive");

  Vec64 tok = target_token.empty() ? Vec64(c.d, 1.0) : target_token;
  require(tok.size() == c.d, "target token dimension mismatch");

  const ModelWeights w = init_model(c);
  ForwardOptions lean;
  lean.record_attention = false;
  lean.record_states = false;

  std::vector<Vec64> rows;
  rows.reserve(lengths.size());
  TokenSequence seq;
  for (std::size_t n : lengths) {
    while (seq.vectors.size() < n) seq.vectors.push_back(tok);
    rows.push_back(forward(c, w, seq, lean).outputs.back());
  }

  const std::size_t p = c.d + 1;
  Mat64 gram(p, p);
  Vec64 rhs(p, 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    Vec64 x = rows[r];
    x.push_back(1.0);
    const double t = static_cast<double>(lengths[r]);
    for (std::size_t a = 0; a < p; ++a) {
      rhs[a] += x[a] * t;
      for (std::size_t b = 0; b < p; ++b) gram(a, b) += x[a] * x[b];
    }
  }

  ReadoutFit fit;
  Mat64 A = gram;
  Vec64 theta = rhs;
  if (!solve_inplace(A, theta)) {
    fit.ridge_used = true;
    A = gram;
    for (std::size_t a = 0; a < p; ++a) A(a, a) += 1e-8;
    theta = rhs;
    if (!solve_inplace(A, theta))
      throw numerical_error("normal equations unsolvable even with ridge");
  }

  fit.readout.w.assign(theta.begin(), theta.begin() + c.d);
  fit.readout.b = theta[c.d];
  for (double v : fit.readout.w) require_finite(v, "count readout");
  require_finite(fit.readout.b, "count readout");

  double ss = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double e =
        readout_estimate(fit.readout, rows[r]) - static_cast<double>(lengths[r]);
    ss += e * e;
  }
  fit.residual = std::sqrt(ss);
  return fit;
}

CollapseDemoReport counting_collapse_demo(const ModelConfig& cfg,
                                          const CountReadout& readout,
                                          FloatFormat fmt, std::size_t n_max,
                                          const Vec64& target_token) {
  ModelConfig c = cfg;
  c.precision = fmt;
  c.validate();
  require(readout.w.size() == c.d, "readout dimension mismatch");
  require(n_max >= 2, "need room for at least one comparison");
  Vec64 tok = target_token.empty() ? Vec64(c.d, 1.0) : target_token;
  require(tok.size() == c.d, "target token dimension mismatch");

  const ModelWeights w = init_model(c);
  ForwardOptions lean;
  lean.record_attention = false;
  lean.record_states = false;

  CollapseDemoReport report;
  report.precision_tag = fmt.name();

  TokenSequence seq;
  seq.vectors.push_back(tok);
  Vec64 prev = forward_quantized(c, w, seq, lean).outputs.back();
  for (std::size_t n = 2; n <= n_max; ++n) {
    seq.vectors.push_back(tok);
    Vec64 cur = forward_quantized(c, w, seq, lean).outputs.back();
    report.scanned = n;
    bool same = true;
    for (std::size_t t = 0; t < c.d; ++t)
      if (cur[t] != prev[t]) {
        same = false;
        break;
      }
    if (same) {
      report.detected = true;
      report.n = n - 1;
      report.prediction = readout_estimate(readout, cur);
      report.rounded = std::llround(report.prediction);
      return report;
    }
    prev = std::move(cur);
  }
  return report;
}

}  // namespace clab
