#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "clab/model.hpp"

namespace clab {

// A sequence over a two-token alphabet, tracked by class counts plus the
// concrete arrangement (0 = zero-class, 1 = one-class per position).
struct TwoSymbolSequence {
  std::size_t n0 = 0;
  std::size_t n1 = 0;
  std::vector<int> arrangement;
  Vec64 zero_token;
  Vec64 one_token;

  void validate() const;
  TokenSequence materialize() const;
};

// zeros first, then ones
TwoSymbolSequence make_two_symbol(std::size_t n0, std::size_t n1,
                                  const Vec64& zero_token, const Vec64& one_token);

// the first two entries of the symbol alphabet used by the repetition presets
std::pair<Vec64, Vec64> two_symbol_tokens(std::size_t d, std::uint64_t symbol_seed);

struct ClassReps {
  Vec64 zero;                  // empty when n0 == 0
  Vec64 one;                   // empty when n1 == 0
  double max_intra_gap = 0.0;  // worst same-class deviation observed, any layer
};

struct BidirectionalOptions {
  bool use_norms = false;  // the exact-invariance variant runs without norms
  double beta1 = 1.0;
  double beta2 = 1.0;
};

// Attention over all positions (no mask), no positional terms. Same-class
// tokens must come out identical; a spread beyond 1e-12 at any layer throws.
ClassReps nope_bidirectional_forward(const ModelWeights& w,
                                     const TwoSymbolSequence& seq, std::size_t L,
                                     const BidirectionalOptions& opts = {});

struct RatioCell {
  std::size_t n0 = 0, n1 = 0;  // base counts
  std::size_t multiplier = 1;
  double gap = 0.0;         // class-rep distance of (m*n0, m*n1) vs base
  double normed_gap = 0.0;  // same comparison with per-token norms switched on
};

struct RatioInvarianceReport {
  std::vector<RatioCell> cells;
  double max_gap = 0.0;
  double max_normed_gap = 0.0;
  bool ok = false;  // every gap below 1e-10
};

RatioInvarianceReport ratio_invariance_check(
    const ModelWeights& w,
    const std::vector<std::pair<std::size_t, std::size_t>>& ratios,
    const std::vector<std::size_t>& multipliers, std::size_t L,
    const Vec64& zero_token = {}, const Vec64& one_token = {});

// weights that keep the two classes separated after one layer; near-collisions
// are re-drawn from successive seeds
struct GenericWeightsDraw {
  ModelWeights weights;
  std::uint64_t seed_used = 0;
  int attempts = 1;
};

GenericWeightsDraw draw_generic_weights(std::size_t d, std::size_t L,
                                        std::uint64_t seed, const Vec64& zero_token,
                                        const Vec64& one_token);

struct CountReadout {
  Vec64 w;
  double b = 0.0;
};

double readout_estimate(const CountReadout& readout, const Vec64& y);

struct ReadoutFit {
  CountReadout readout;
  double residual = 0.0;  // L2 misfit over the training rows
  bool ridge_used = false;
};

// least squares from last-token representations of length-n repetition runs
// to the count n itself, in 64-bit arithmetic
ReadoutFit fit_count_readout(const ModelConfig& cfg,
                             const std::vector<std::size_t>& train_lengths,
                             std::uint64_t seed, const Vec64& target_token = {});

struct CollapseDemoReport {
  bool detected = false;
  std::size_t n = 0;          // counts n and n+1 share one representation
  std::size_t scanned = 0;    // largest count examined
  double prediction = 0.0;    // the shared readout estimate
  long long rounded = 0;      // round(prediction); wrong for n or for n+1
  std::string precision_tag;
};

// walks count n upward until the stored representations of n and n+1
// repetitions agree bit for bit; an identical representation forces an
// identical readout, so at least one of the two counts is answered wrongly
CollapseDemoReport counting_collapse_demo(const ModelConfig& cfg,
                                          const CountReadout& readout,
                                          FloatFormat fmt, std::size_t n_max,
                                          const Vec64& target_token = {});

}  // namespace clab
