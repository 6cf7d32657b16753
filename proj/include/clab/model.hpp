#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clab/numerics.hpp"
#include "clab/posenc.hpp"

namespace clab {

struct ModelConfig {
  std::size_t d = 64;
  std::size_t L = 1;
  std::size_t hidden = 0;  // 0 means 4*d
  std::uint64_t seed = 0;
  PEScheme pe = PEScheme::nope(64);
  double beta1 = 1.0;  // pre-attention norm scale
  double beta2 = 1.0;  // pre-MLP norm scale
  double beta3 = 1.0;  // final norm scale
  FloatFormat precision = FloatFormat::binary64();

  std::size_t hidden_dim() const { return hidden ? hidden : 4 * d; }
  void validate() const;
};

struct LayerWeights {
  Mat64 Wq, Wk, Wv;  // d x d
  Mat64 W1;          // hidden x d
  Mat64 W2;          // d x hidden
};

using ModelWeights = std::vector<LayerWeights>;

struct TokenSequence {
  std::vector<Vec64> vectors;

  std::size_t size() const { return vectors.size(); }
  const Vec64& operator[](std::size_t i) const { return vectors[i]; }
  Vec64& operator[](std::size_t i) { return vectors[i]; }
};

struct AttentionStack {
  std::vector<Mat64> layers;  // each n x n, lower triangular, rows sum to 1
};

struct ForwardOptions {
  bool record_attention = true;  // n x n per layer; disable for long sweeps
  bool record_states = true;     // per-layer token states
};

struct ForwardTrace {
  // states[l][i] = token i entering layer l; states.back() leaves the stack.
  // Empty unless record_states.
  std::vector<std::vector<Vec64>> states;
  AttentionStack attn;        // empty unless record_attention
  std::vector<Vec64> outputs; // final normalized representations, all tokens

  const Vec64& last_token_rep() const { return outputs.back(); }
};

ModelWeights init_model(const ModelConfig& cfg);

ForwardTrace forward(const ModelConfig& cfg, const ModelWeights& weights,
                     const TokenSequence& seq, const ForwardOptions& opts = {});

// Same computation graph with every stored activation rounded into
// cfg.precision (attention mix, MLP residual, each norm output).
ForwardTrace forward_quantized(const ModelConfig& cfg, const ModelWeights& weights,
                               const TokenSequence& seq,
                               const ForwardOptions& opts = {});

Vec64 last_token_rep(const ForwardTrace& trace);

// two-layer tanh MLP: W2 * tanh(W1 * x)
Vec64 mlp_apply(const LayerWeights& w, const Vec64& x);

void export_attention_csv(const ForwardTrace& trace, const std::string& path);
void export_outputs_csv(const ForwardTrace& trace, const std::string& path);

}  // namespace clab
