#include "clab/collapse.hpp"

#include <algorithm>
#include <cmath>

#include "clab/common.hpp"
#include "clab/rng.hpp"

namespace clab {

SequencePair build_repeated_pair(const TokenSequence& base) {
  require(base.size() >= 1, "base sequence must be non-empty");
  SequencePair p;
  p.base = base;
  p.extended = base;
  p.extended.vectors.push_back(base.vectors.back());
  return p;
}

TailGap softmax_tail_gap(const Vec64& a, double b, double c, double bound) {
  require(bound > 0.0, "bound must be positive");
  auto check = [bound](double x) {
    require_finite(x, "softmax_tail_gap input");
    require(std::abs(x) <= bound, "score entry exceeds the configured bound");
  };
  for (double x : a) check(x);
  check(b);
  check(c);

  double m = std::max(b, c);
  for (double x : a) m = std::max(m, x);

  Vec64 ea(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) ea[i] = std::exp(a[i] - m);
  const double sum_a = pairwise_sum(ea);
  const double eb = std::exp(b - m);
  const double ec = std::exp(c - m);

  const double z1 = sum_a + ec;       // partition of [a, c]
  const double z2 = z1 + eb;          // partition of [a, b, c]
  TailGap g;
  g.s_n = ec / z1;
  g.s_star = ec / z2;
  g.gap = (ec * eb) / (z1 * z2);
  return g;
}

static void sort_records(std::vector<CollapseRecord>& r) {
  std::sort(r.begin(), r.end(), [](const CollapseRecord& x, const CollapseRecord& y) {
    if (x.pe_tag != y.pe_tag) return x.pe_tag < y.pe_tag;
    if (x.precision_tag != y.precision_tag) return x.precision_tag < y.precision_tag;
    if (x.seed != y.seed) return x.seed < y.seed;
    return x.n < y.n;
  });
}

static std::vector<std::size_t> sorted_unique(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

CollapseCurve tv_decay_experiment(const std::vector<std::size_t>& n_values,
                                  std::size_t k, double noise,
                                  const std::vector<std::uint64_t>& seeds) {
  require(!n_values.empty(), "need at least one sequence length");
  require(!seeds.empty(), "need at least one seed");
  require(noise >= 0.0, "noise must be nonnegative");
  const auto ns = sorted_unique(n_values);
  require(k < ns.front(), "k must be below the shortest sequence length");

  CollapseCurve curve;
  for (std::uint64_t seed : seeds) {
    for (std::size_t n : ns) {
      // restarting the streams nests the draws: shorter sequences are
      // prefixes of longer ones, which keeps per-seed length comparisons
      // free of resampling noise
      Rng data(seed, "symbols");
      Vec64 x(n);
      for (auto& t : x) t = data.next_uniform();
      Vec64 xs = x;
      Rng nz(seed, "noise");
      for (std::size_t i = 0; i < k; ++i) xs[i] += nz.next_uniform(0.0, noise);

      const Vec64 p = softmax(x);
      const Vec64 q = softmax(xs);
      CollapseRecord rec;
      rec.n = n;
      rec.seed = seed;
      rec.pe_tag = "none";
      rec.precision_tag = "fp64";
      rec.l1 = total_variation(p, q);
      rec.linf = linf_dist(p, q);
      curve.records.push_back(rec);
    }
  }
  sort_records(curve.records);
  return curve;
}

double alternating_tv(std::size_t n) {
  require(n >= 2 && n % 2 == 0, "length must be even and >= 2");
  Vec64 x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = (i % 2 == 0) ? 1.0 : 0.0;
    y[i] = 1.0 - x[i];
  }
  return total_variation(softmax(x), softmax(y));
}

TokenMaker make_ones_preset(std::size_t d) {
  require(d > 0, "dimension must be positive");
  return [d](std::size_t n, std::uint64_t) {
    TokenSequence s;
    s.vectors.assign(n, Vec64(d, 1.0));
    return s;
  };
}

Vec64 unit_gaussian(Rng& rng, std::size_t d) {
  Vec64 v(d);
  for (auto& x : v) x = rng.next_gaussian();
  const double nrm = norm2(v);
  for (auto& x : v) x /= nrm;
  return v;
}

TokenMaker make_digits_preset(std::size_t d, std::uint64_t symbol_seed) {
  require(d > 0, "dimension must be positive");
  // table stream is distinct from the per-cell arrangement stream
  Rng rng(symbol_seed, "symbol-table");
  std::vector<Vec64> symbols(10);
  for (auto& s : symbols) s = unit_gaussian(rng, d);
  return [symbols](std::size_t n, std::uint64_t seed) {
    Rng pick(seed, "symbols");
    TokenSequence s;
    s.vectors.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      s.vectors.push_back(symbols[pick.next_below(10)]);
    return s;
  };
}

TokenMaker make_commas_preset(std::size_t d, std::uint64_t symbol_seed,
                              std::size_t period) {
  require(d > 0, "dimension must be positive");
  require(period >= 2, "separator period must be >= 2");
  Rng rng(symbol_seed, "separator");
  const Vec64 sep = unit_gaussian(rng, d);
  return [d, period, sep](std::size_t n, std::uint64_t) {
    TokenSequence s;
    s.vectors.reserve(n + n / period);
    const Vec64 one(d, 1.0);
    for (std::size_t i = 1; i <= n; ++i) {
      s.vectors.push_back(one);
      if (i % period == 0) s.vectors.push_back(sep);
    }
    return s;
  };
}

TokenMaker preset_by_name(std::string_view name, std::size_t d,
                          std::uint64_t symbol_seed, std::size_t period) {
  if (name == "ones") return make_ones_preset(d);
  if (name == "digits") return make_digits_preset(d, symbol_seed);
  if (name == "commas") return make_commas_preset(d, symbol_seed, period);
  throw std::invalid_argument("unknown preset: " + std::string(name));
}

static CollapseRecord curve_cell(const ModelConfig& cfg, const ModelWeights& w,
                                 std::size_t n, std::uint64_t seed,
                                 const TokenMaker& token_maker,
                                 const CollapseOptions& opts) {
  TokenSequence base = token_maker(n, seed);
  require(base.size() >= 1, "token maker produced an empty sequence");
  SequencePair pair = build_repeated_pair(base);

  ForwardOptions lean;
  lean.record_attention = false;
  lean.record_states = opts.pre_norm;
  ForwardTrace tb = forward_quantized(cfg, w, pair.base, lean);
  ForwardTrace te = forward_quantized(cfg, w, pair.extended, lean);

  const Vec64& yb = opts.pre_norm ? tb.states.back().back() : tb.outputs.back();
  const Vec64& ye = opts.pre_norm ? te.states.back().back() : te.outputs.back();

  CollapseRecord rec;
  rec.n = n;
  rec.seed = seed;
  rec.pe_tag = cfg.pe.name();
  rec.precision_tag = cfg.precision.name();
  rec.l1 = l1_dist(yb, ye);
  rec.linf = linf_dist(yb, ye);
  require_finite(rec.l1, "collapse distance");
  return rec;
}

CollapseCurve collapse_curve(const ModelConfig& cfg,
                             const std::vector<std::size_t>& n_values,
                             const std::vector<std::uint64_t>& seeds,
                             const TokenMaker& token_maker,
                             const CollapseOptions& opts) {
  require(static_cast<bool>(token_maker), "token maker must be set");
  require(!n_values.empty(), "need at least one sequence length");
  require(!seeds.empty(), "need at least one seed");
  const auto ns = sorted_unique(n_values);

  CollapseCurve curve;
  curve.records.reserve(ns.size() * seeds.size());
  for (std::uint64_t seed : seeds) {
    ModelConfig c = cfg;
    c.seed = seed;
    ModelWeights w = init_model(c);
    for (std::size_t n : ns)
      curve.records.push_back(curve_cell(c, w, n, seed, token_maker, opts));
  }
  sort_records(curve.records);
  return curve;
}

SeparatorCurves separator_experiment(const ModelConfig& cfg,
                                     const std::vector<std::size_t>& n_values,
                                     std::size_t period,
                                     const std::vector<std::uint64_t>& seeds) {
  require(period >= 2, "separator period must be >= 2");
  SeparatorCurves out;
  out.plain = collapse_curve(cfg, n_values, seeds, make_ones_preset(cfg.d));
  out.separated = collapse_curve(cfg, n_values, seeds,
                                 make_commas_preset(cfg.d, cfg.seed, period));
  return out;
}

std::vector<ThresholdResult> precision_threshold(
    const ModelConfig& cfg, const std::vector<std::size_t>& n_values,
    const FloatFormat& fmt, const std::vector<std::uint64_t>& seeds,
    const TokenMaker& token_maker) {
  require(!n_values.empty(), "need at least one sequence length");
  require(!seeds.empty(), "need at least one seed");
  const auto ns = sorted_unique(n_values);
  TokenMaker maker = token_maker ? token_maker : make_ones_preset(cfg.d);

  std::vector<ThresholdResult> out;
  out.reserve(seeds.size());
  for (std::uint64_t seed : seeds) {
    ModelConfig c = cfg;
    c.seed = seed;
    c.precision = fmt;
    ModelWeights w = init_model(c);
    ThresholdResult r;
    r.seed = seed;
    for (std::size_t n : ns) {
      CollapseRecord rec = curve_cell(c, w, n, seed, maker, {});
      if (rec.linf == 0.0) {
        r.collapsed = true;
        r.n = n;
        break;
      }
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace clab
