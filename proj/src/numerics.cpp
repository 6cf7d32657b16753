#include "clab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace clab {

FloatFormat FloatFormat::from_name(std::string_view name) {
  if (name == "fp64" || name == "binary64" || name == "f64") return binary64();
  if (name == "fp32" || name == "binary32" || name == "f32") return binary32();
  if (name == "bf16" || name == "bfloat16") return bfloat16();
  if (name == "fp16" || name == "binary16" || name == "f16") return binary16();
  throw std::invalid_argument("unknown float format: " + std::string(name) +
                              " (expected fp64|fp32|bf16|fp16)");
}

const char* FloatFormat::name() const {
  switch (tag) {
    case FloatTag::Binary64: return "fp64";
    case FloatTag::Binary32: return "fp32";
    case FloatTag::BFloat16: return "bf16";
    case FloatTag::Binary16: return "fp16";
  }
  return "?";
}

double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

double pairwise_sum(const Vec64& x) { return pairwise_sum(x.data(), x.size()); }

Vec64 softmax(const Vec64& x) {
  require(!x.empty(), "softmax: empty input");
  double m = x[0];
  for (double v : x) {
    require_finite(v, "softmax input");
    m = std::max(m, v);
  }
  Vec64 e(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) e[i] = std::exp(x[i] - m);
  const double z = pairwise_sum(e);
  for (double& v : e) v /= z;
  return e;
}

static void check_distribution(const Vec64& p, const char* who) {
  const double s = pairwise_sum(p);
  if (std::abs(s - 1.0) > 1e-9)
    throw std::invalid_argument(std::string(who) + ": input does not sum to 1");
}

double total_variation(const Vec64& p, const Vec64& q) {
  require(p.size() == q.size(), "total_variation: length mismatch");
  require(!p.empty(), "total_variation: empty input");
  check_distribution(p, "total_variation");
  check_distribution(q, "total_variation");
  Vec64 diff(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) diff[i] = std::abs(p[i] - q[i]);
  return pairwise_sum(diff);
}

double l1_dist(const Vec64& a, const Vec64& b) {
  require(a.size() == b.size(), "l1_dist: length mismatch");
  Vec64 diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = std::abs(a[i] - b[i]);
  return pairwise_sum(diff);
}

double linf_dist(const Vec64& a, const Vec64& b) {
  require(a.size() == b.size(), "linf_dist: length mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Vec64 rms_norm(const Vec64& x, double scale) {
  require(!x.empty(), "rms_norm: empty input");
  require(scale > 0.0, "rms_norm: scale must be positive");
  Vec64 sq(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) sq[i] = x[i] * x[i];
  const double mean = pairwise_sum(sq) / static_cast<double>(x.size());
  const double inv = scale / std::sqrt(mean + kRmsEps);
  Vec64 out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * inv;
  return out;
}

// Rounds |m|*2^prec to an integer, ties to even. prec is small enough here
// that the scaled value is exact and below 2^25.
static double round_half_even(double v) {
  const double f = std::floor(v);
  const double diff = v - f;
  if (diff > 0.5) return f + 1.0;
  if (diff < 0.5) return f;
  return (std::fmod(f, 2.0) == 0.0) ? f : f + 1.0;
}

double round_to_format(double x, const FloatFormat& fmt, bool strict) {
  require_finite(x, "round_to_format");
  if (fmt.tag == FloatTag::Binary64) return x;
  if (x == 0.0) return x;

  int e;
  const double m = std::frexp(x, &e);  // x = m * 2^e, 0.5 <= |m| < 1
  const int bias = (1 << (fmt.exponent_bits - 1)) - 1;
  const int emin = 1 - bias;
  const int emax = bias;
  const int ieee_e = e - 1;

  // full precision for normals, reduced near/below the normal range
  int prec = fmt.mantissa_bits + 1;
  if (ieee_e < emin) prec -= emin - ieee_e;

  const double scaled = std::ldexp(m, prec);
  const double r = round_half_even(scaled);
  const double y = std::ldexp(r, e - prec);

  const double max_finite =
      std::ldexp(2.0 - std::ldexp(1.0, -fmt.mantissa_bits), emax);
  if (std::abs(y) > max_finite) {
    if (strict)
      throw numerical_error(std::string("overflow rounding to ") + fmt.name());
    return std::copysign(HUGE_VAL, x);
  }
  return y;
}

double dot(const Vec64& a, const Vec64& b) {
  require(a.size() == b.size(), "dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Vec64& a) { return std::sqrt(dot(a, a)); }

Vec64 matvec(const Mat64& A, const Vec64& x) {
  require(A.cols == x.size(), "matvec: shape mismatch");
  Vec64 y(A.rows, 0.0);
  for (std::size_t i = 0; i < A.rows; ++i) {
    const double* row = A.data.data() + i * A.cols;
    double s = 0.0;
    for (std::size_t j = 0; j < A.cols; ++j) s += row[j] * x[j];
    y[i] = s;
  }
  return y;
}

Mat64 matmul(const Mat64& A, const Mat64& B) {
  require(A.cols == B.rows, "matmul: shape mismatch");
  Mat64 C(A.rows, B.cols);
  for (std::size_t i = 0; i < A.rows; ++i) {
    for (std::size_t k = 0; k < A.cols; ++k) {
      const double a = A(i, k);
      if (a == 0.0) continue;
      const double* brow = B.data.data() + k * B.cols;
      double* crow = C.data.data() + i * B.cols;
      for (std::size_t j = 0; j < B.cols; ++j) crow[j] += a * brow[j];
    }
  }
  return C;
}

double frobenius_norm(const Mat64& A) {
  double s = 0.0;
  for (double v : A.data) s += v * v;
  return std::sqrt(s);
}

double operator_norm_2(const Mat64& A, int steps, double tol) {
  require(A.rows > 0 && A.cols > 0, "operator_norm_2: empty matrix");
  // power iteration on A^T A, deterministic start
  Vec64 v(A.cols, 1.0);
  double prev = 0.0;
  for (int it = 0; it < steps; ++it) {
    Vec64 av(A.rows, 0.0);
    for (std::size_t i = 0; i < A.rows; ++i) {
      const double* row = A.data.data() + i * A.cols;
      double s = 0.0;
      for (std::size_t j = 0; j < A.cols; ++j) s += row[j] * v[j];
      av[i] = s;
    }
    Vec64 w(A.cols, 0.0);
    for (std::size_t i = 0; i < A.rows; ++i) {
      const double* row = A.data.data() + i * A.cols;
      for (std::size_t j = 0; j < A.cols; ++j) w[j] += row[j] * av[i];
    }
    const double nw = norm2(w);
    if (nw == 0.0) return 0.0;
    for (double& u : w) u /= nw;
    v = w;
    const double est = std::sqrt(nw);
    if (it > 0 && std::abs(est - prev) <= tol * std::max(1.0, est)) return est;
    prev = est;
  }
  return prev;
}

}  // namespace clab
