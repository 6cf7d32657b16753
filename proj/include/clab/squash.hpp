#pragma once

#include <cstdint>
#include <vector>

#include "clab/model.hpp"
#include "clab/rng.hpp"

namespace clab {

inline constexpr std::size_t kLastToken = static_cast<std::size_t>(-1);

// Per source token i: norms of the block dy_target/dv_i of the full model.
// `values` is the operator estimate max_k ||J e_k||_2 over basis directions,
// `frob` the Frobenius norm of the same block.
struct SensitivityProfile {
  Vec64 values;
  Vec64 frob;
};

struct BoundConstants {
  Vec64 sigma_psi;         // per-layer Lipschitz bound of the MLP
  double beta1 = 1.0;      // pre-attention norm scale
  double beta2 = 1.0;      // pre-MLP norm scale
  double beta3 = 1.0;      // final norm scale
  double beta_attn = 1.0;  // scale entering the path weights; defaults to
                           // beta1 (the two appear interchangeably in the
                           // bound's two statements, so it stays adjustable)
  double C = 1.0;          // (1/beta3) * prod(sigma_psi/beta2 + 1)
};

// sigma_psi from operator norms ||W2||*||W1|| (tanh is 1-Lipschitz)
BoundConstants make_bound_constants(const ModelWeights& w, double beta1 = 1.0,
                                    double beta2 = 1.0, double beta3 = 1.0);

struct PathBound {
  Vec64 values;  // C * last row of prod_l (attn_l/beta_attn + I)
};
PathBound path_sum_bound(const AttentionStack& attn, const BoundConstants& consts);

// central differences on the 64-bit forward; column k approximates
// d y_target / d v_i[k]
Mat64 jacobian_fd(const ModelConfig& cfg, const ModelWeights& w,
                  const TokenSequence& seq, std::size_t i, double delta = 1e-5,
                  std::size_t target = kLastToken);

// exact derivative of the implemented forward via tangent propagation
Mat64 jacobian_analytic(const ModelConfig& cfg, const ModelWeights& w,
                        const TokenSequence& seq, std::size_t i,
                        std::size_t target = kLastToken);

SensitivityProfile sensitivity_profile(const ModelConfig& cfg, const ModelWeights& w,
                                       const TokenSequence& seq);

// The bound's own model: attention frozen to the given stack, norms replaced
// by plain division, MLP optional. This is the regime in which the path-sum
// inequality is a theorem rather than a heuristic.
struct SurrogateModel {
  AttentionStack attn;
  ModelWeights weights;  // only W1/W2 are consulted
  double beta1 = 1.0;
  double beta2 = 1.0;
  double beta3 = 1.0;
  bool use_mlp = true;
};

std::vector<Vec64> surrogate_outputs(const SurrogateModel& m, const TokenSequence& seq);

// d x d blocks dy_target/dv_i for every source token i, by reverse
// accumulation (one sweep per output component)
std::vector<Mat64> surrogate_jacobians(const SurrogateModel& m,
                                       const TokenSequence& seq,
                                       std::size_t target = kLastToken);

struct BoundCheckInstance {
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::size_t L = 0;
  double worst_spectral_ratio = 0.0;  // max_i spectral / bound_i
  double worst_column_ratio = 0.0;    // max_i max-col-L2 / bound_i
  double worst_frob_ratio = 0.0;      // max_i frobenius / (sqrt(d) * bound_i)
  bool violated = false;
};

struct BoundCheckReport {
  std::vector<BoundCheckInstance> instances;
  std::size_t violations = 0;
};

// One instance per seed: sizes drawn from the seed, attention frozen from a
// reference forward of the full model, Jacobians measured on the surrogate.
BoundCheckReport bound_check(const ModelConfig& cfg,
                             const std::vector<std::uint64_t>& seeds);

struct LimitCaseResult {
  bool hypothesis_ok = true;  // every row but the first has >= 2 nonzeros
  bool converged = false;
  std::size_t iterations = 0;  // exponent L reached
  double distance = 0.0;       // Linf distance of ((A+I)/2)^L to E1
  Vec64 trace;                 // distance at each L = 1..iterations
};

// E1 is the matrix with first column all ones. Stops early on convergence or
// on an exact fixed point (which is how a flagged identity input exits).
LimitCaseResult limit_case(const Mat64& attn, std::size_t L_max, double tol = 1e-8);

struct StochasticLemmaReport {
  std::size_t samples = 0;
  double max_eigen_residual = 0.0;      // |A*ones - ones|_inf
  double max_spectral_estimate = 0.0;   // power-iteration dominant eigenvalue
  double max_product_row_sum_error = 0.0;
  double max_product_upper_entry = 0.0;
  bool ok = false;
};

StochasticLemmaReport stochastic_lemma_checks(std::size_t samples,
                                              std::uint64_t seed = 0);

// lower-triangular rows drawn from U[floor,1] and normalized; floor > 0 keeps
// rows away from degenerate single-entry masses
Mat64 random_row_stochastic(std::size_t n, Rng& rng, double floor = 0.0);

}  // namespace clab
