#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "clab/common.hpp"

namespace clab {

using Vec64 = std::vector<double>;

struct Mat64 {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  Mat64() = default;
  Mat64(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  static Mat64 identity(std::size_t n) {
    Mat64 m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

enum class FloatTag { Binary64, Binary32, BFloat16, Binary16 };

struct FloatFormat {
  FloatTag tag = FloatTag::Binary64;
  int mantissa_bits = 52;
  int exponent_bits = 11;

  static FloatFormat binary64() { return {FloatTag::Binary64, 52, 11}; }
  static FloatFormat binary32() { return {FloatTag::Binary32, 23, 8}; }
  static FloatFormat bfloat16() { return {FloatTag::BFloat16, 7, 8}; }
  static FloatFormat binary16() { return {FloatTag::Binary16, 10, 5}; }
  static FloatFormat from_name(std::string_view name);

  const char* name() const;
  bool is_binary64() const { return tag == FloatTag::Binary64; }
};

// Summation over a balanced tree. Worst-case rounding error grows with
// log2(n) instead of n, which the long-sequence softmax and distance
// tolerances rely on.
double pairwise_sum(const double* x, std::size_t n);
double pairwise_sum(const Vec64& x);

Vec64 softmax(const Vec64& x);
double total_variation(const Vec64& p, const Vec64& q);
double l1_dist(const Vec64& a, const Vec64& b);
double linf_dist(const Vec64& a, const Vec64& b);
Vec64 rms_norm(const Vec64& x, double scale);

inline constexpr double kRmsEps = 1e-6;

// Round-to-nearest-even into the format's mantissa/exponent budget, result
// kept as a 64-bit float. strict=true turns overflow into an error instead
// of a signed infinity.
double round_to_format(double x, const FloatFormat& fmt, bool strict = false);

double dot(const Vec64& a, const Vec64& b);
double norm2(const Vec64& a);
Vec64 matvec(const Mat64& A, const Vec64& x);
Mat64 matmul(const Mat64& A, const Mat64& B);
double frobenius_norm(const Mat64& A);
// largest singular value via power iteration on A^T A
double operator_norm_2(const Mat64& A, int steps = 50, double tol = 1e-10);

}  // namespace clab
