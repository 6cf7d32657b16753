#pragma once

#include <cstddef>
#include <string_view>

#include "clab/numerics.hpp"

namespace clab {

enum class PETag { NoPE, Sinusoidal, RoPE, ALiBi };

struct PEScheme {
  PETag tag = PETag::NoPE;
  std::size_t dim = 64;
  double base_theta = 10000.0;  // Sinusoidal / RoPE frequency base
  double slope = 1.0 / 256.0;   // ALiBi distance penalty

  static PEScheme nope(std::size_t dim) { return {PETag::NoPE, dim, 10000.0, 0.0}; }
  static PEScheme sinusoidal(std::size_t dim, double theta = 10000.0) {
    return {PETag::Sinusoidal, dim, theta, 0.0};
  }
  static PEScheme rope(std::size_t dim, double theta = 10000.0) {
    return {PETag::RoPE, dim, theta, 0.0};
  }
  static PEScheme alibi(std::size_t dim, double slope = 1.0 / 256.0) {
    return {PETag::ALiBi, dim, 10000.0, slope};
  }
  static PEScheme from_name(std::string_view name, std::size_t dim,
                            double theta = 10000.0, double slope = 1.0 / 256.0);

  const char* name() const;
  void validate() const;
};

// sinusoid table row for position m: [sin(m/theta^0), cos(m/theta^0),
// sin(m/theta^(2/d)), cos(...), ...]
Vec64 sinusoid_entry(std::size_t m, std::size_t dim, double theta);

// rotates coordinate pairs (2t, 2t+1) by angle m * theta^(-2t/dim)
void rope_rotate_inplace(Vec64& v, std::size_t m, const PEScheme& scheme);

// Position-dependent transforms of query/key plus an additive bias. The
// scalar attention score is exactly
//   dot(pe_apply_query(q, i), pe_apply_key(k, j)) / sqrt(dim) + pe_bias(i, j)
// which lets a forward pass transform each token once instead of per pair.
Vec64 pe_apply_query(const Vec64& q, std::size_t i, const PEScheme& scheme);
Vec64 pe_apply_key(const Vec64& k, std::size_t j, const PEScheme& scheme);
double pe_bias(std::size_t i, std::size_t j, const PEScheme& scheme);

double score(const Vec64& q, const Vec64& k, std::size_t i, std::size_t j,
             const PEScheme& scheme);

// |score(q, k, i, i - delta) - score_nope| for delta = 0..max_dist, at the
// fixed query position i = max_dist
Vec64 decay_profile(const PEScheme& scheme, const Vec64& q, const Vec64& k,
                    std::size_t max_dist);

}  // namespace clab
