#include "clab/posenc.hpp"

#include <cmath>

namespace clab {

PEScheme PEScheme::from_name(std::string_view name, std::size_t dim, double theta,
                             double slope) {
  if (name == "nope") return nope(dim);
  if (name == "ape" || name == "sinusoidal") return sinusoidal(dim, theta);
  if (name == "rope") return rope(dim, theta);
  if (name == "alibi") return alibi(dim, slope);
  throw std::invalid_argument("unknown positional encoding: " + std::string(name) +
                              " (expected nope|ape|rope|alibi)");
}

const char* PEScheme::name() const {
  switch (tag) {
    case PETag::NoPE: return "nope";
    case PETag::Sinusoidal: return "ape";
    case PETag::RoPE: return "rope";
    case PETag::ALiBi: return "alibi";
  }
  return "?";
}

void PEScheme::validate() const {
  require(dim >= 2 && dim % 2 == 0, "positional encoding dim must be even and >= 2");
  if (tag == PETag::Sinusoidal || tag == PETag::RoPE)
    require(base_theta > 1.0, "base theta must be > 1");
  if (tag == PETag::ALiBi) require(slope > 0.0, "alibi slope must be > 0");
}

Vec64 sinusoid_entry(std::size_t m, std::size_t dim, double theta) {
  Vec64 s(dim);
  const double pos = static_cast<double>(m);
  for (std::size_t t = 0; 2 * t < dim; ++t) {
    const double freq = std::pow(theta, -2.0 * static_cast<double>(t) /
                                            static_cast<double>(dim));
    s[2 * t] = std::sin(pos * freq);
    s[2 * t + 1] = std::cos(pos * freq);
  }
  return s;
}

void rope_rotate_inplace(Vec64& v, std::size_t m, const PEScheme& scheme) {
  const double pos = static_cast<double>(m);
  for (std::size_t t = 0; 2 * t < v.size(); ++t) {
    const double freq = std::pow(scheme.base_theta,
                                 -2.0 * static_cast<double>(t) /
                                     static_cast<double>(scheme.dim));
    const double a = pos * freq;
    const double c = std::cos(a), s = std::sin(a);
    const double x = v[2 * t], y = v[2 * t + 1];
    v[2 * t] = c * x - s * y;
    v[2 * t + 1] = s * x + c * y;
  }
}

Vec64 pe_apply_query(const Vec64& q, std::size_t i, const PEScheme& scheme) {
  require(q.size() == scheme.dim, "query length does not match encoding dim");
  Vec64 out = q;
  switch (scheme.tag) {
    case PETag::NoPE:
    case PETag::ALiBi:
      break;
    case PETag::Sinusoidal: {
      const Vec64 s = sinusoid_entry(i, scheme.dim, scheme.base_theta);
      for (std::size_t t = 0; t < out.size(); ++t) out[t] += s[t];
      break;
    }
    case PETag::RoPE:
      rope_rotate_inplace(out, i, scheme);
      break;
  }
  return out;
}

Vec64 pe_apply_key(const Vec64& k, std::size_t j, const PEScheme& scheme) {
  // queries and keys receive the same position-wise treatment in all four
  // schemes considered here
  return pe_apply_query(k, j, scheme);
}

double pe_bias(std::size_t i, std::size_t j, const PEScheme& scheme) {
  if (scheme.tag != PETag::ALiBi) return 0.0;
  return -scheme.slope * (static_cast<double>(i) - static_cast<double>(j));
}

double score(const Vec64& q, const Vec64& k, std::size_t i, std::size_t j,
             const PEScheme& scheme) {
  require(j <= i, "causal violation: key position exceeds query position");
  scheme.validate();
  const Vec64 tq = pe_apply_query(q, i, scheme);
  const Vec64 tk = pe_apply_key(k, j, scheme);
  return dot(tq, tk) / std::sqrt(static_cast<double>(scheme.dim)) +
         pe_bias(i, j, scheme);
}

Vec64 decay_profile(const PEScheme& scheme, const Vec64& q, const Vec64& k,
                    std::size_t max_dist) {
  require(max_dist >= 1, "decay_profile: max_dist must be >= 1");
  const PEScheme plain = PEScheme::nope(scheme.dim);
  const double base = score(q, k, max_dist, 0, plain);
  Vec64 profile(max_dist + 1);
  for (std::size_t delta = 0; delta <= max_dist; ++delta)
    profile[delta] = std::abs(score(q, k, max_dist, max_dist - delta, scheme) - base);
  return profile;
}

}  // namespace clab
