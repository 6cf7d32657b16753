#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "clab/model.hpp"
#include "clab/rng.hpp"

namespace clab {

// unit-norm gaussian draw, the alphabet builder shared by the symbol presets
Vec64 unit_gaussian(Rng& rng, std::size_t d);

struct SequencePair {
  TokenSequence base;
  TokenSequence extended;  // base plus its last token repeated once
};

struct CollapseRecord {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string pe_tag;
  std::string precision_tag;
  double l1 = 0.0;
  double linf = 0.0;
};

struct CollapseCurve {
  std::vector<CollapseRecord> records;
};

SequencePair build_repeated_pair(const TokenSequence& base);

// s_n = softmax([a, c]).back(), s_star = softmax([a, b, c]).back(). The gap is
// evaluated as a product of positive terms, so it stays strictly positive in
// floating point instead of cancelling to zero when the tail mass is tiny.
struct TailGap {
  double s_n;
  double s_star;
  double gap;
};
TailGap softmax_tail_gap(const Vec64& a, double b, double c, double bound = 10.0);

// TV between softmax of a Uniform[0,1] sequence and the same sequence with
// Uniform[0,noise] added to its first k entries. pe_tag is "none": no model
// is involved. l1 holds the total variation, linf the largest single
// probability shift.
CollapseCurve tv_decay_experiment(const std::vector<std::size_t>& n_values,
                                  std::size_t k = 200, double noise = 0.1,
                                  const std::vector<std::uint64_t>& seeds = {0, 1, 2,
                                                                            3, 4});

// TV between softmax(1,0,1,0,...) and softmax(0,1,0,1,...): equals
// 2(e-1)/(e+1) at every even n, not just in the limit.
double alternating_tv(std::size_t n);

using TokenMaker = std::function<TokenSequence(std::size_t n, std::uint64_t seed)>;

// symbol vectors are fixed by symbol_seed so a seed sweep varies the weights
// while the data stays put
TokenMaker make_ones_preset(std::size_t d);
TokenMaker make_digits_preset(std::size_t d, std::uint64_t symbol_seed);
TokenMaker make_commas_preset(std::size_t d, std::uint64_t symbol_seed,
                              std::size_t period = 3);
TokenMaker preset_by_name(std::string_view name, std::size_t d,
                          std::uint64_t symbol_seed, std::size_t period = 3);

struct CollapseOptions {
  bool pre_norm = false;  // measure v_n before the final norm instead of y_n
};

// Per (n, seed): distance between the last-token representation of a base
// sequence and of the same sequence with its last token repeated. Runs under
// cfg.precision (binary64 is the exact path).
CollapseCurve collapse_curve(const ModelConfig& cfg,
                             const std::vector<std::size_t>& n_values,
                             const std::vector<std::uint64_t>& seeds,
                             const TokenMaker& token_maker,
                             const CollapseOptions& opts = {});

struct SeparatorCurves {
  CollapseCurve plain;      // constant token only
  CollapseCurve separated;  // a fixed distinct vector inserted every `period`
};
SeparatorCurves separator_experiment(const ModelConfig& cfg,
                                     const std::vector<std::size_t>& n_values,
                                     std::size_t period = 3,
                                     const std::vector<std::uint64_t>& seeds = {
                                         0, 1, 2, 3, 4});

struct ThresholdResult {
  std::uint64_t seed = 0;
  bool collapsed = false;
  std::size_t n = 0;  // smallest tested n with bitwise-equal quantized reps
};

// Walks n_values in ascending order per seed and stops at the first length
// where the two quantized representations agree exactly. Empty token_maker
// means the constant-ones preset.
std::vector<ThresholdResult> precision_threshold(
    const ModelConfig& cfg, const std::vector<std::size_t>& n_values,
    const FloatFormat& fmt, const std::vector<std::uint64_t>& seeds,
    const TokenMaker& token_maker = {});

}  // namespace clab
