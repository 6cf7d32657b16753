#include "clab/model.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <string>
#include <utility>

#include "clab/common.hpp"
#include "clab/rng.hpp"

namespace clab {

void ModelConfig::validate() const {
  require(d > 0, "model dimension must be positive");
  require(pe.dim == d, "positional scheme dimension must match model dimension");
  pe.validate();
  require(beta1 > 0.0 && beta2 > 0.0 && beta3 > 0.0, "norm scales must be positive");
}

static Mat64 gaussian_matrix(Rng& rng, std::size_t rows, std::size_t cols,
                             double stddev) {
  Mat64 m(rows, cols);
  for (auto& x : m.data) x = rng.next_gaussian() * stddev;
  return m;
}

ModelWeights init_model(const ModelConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed, "weights");
  const double sd = 1.0 / std::sqrt(static_cast<double>(cfg.d));
  ModelWeights w;
  w.reserve(cfg.L);
  for (std::size_t l = 0; l < cfg.L; ++l) {
    LayerWeights lw;
    lw.Wq = gaussian_matrix(rng, cfg.d, cfg.d, sd);
    lw.Wk = gaussian_matrix(rng, cfg.d, cfg.d, sd);
    lw.Wv = gaussian_matrix(rng, cfg.d, cfg.d, sd);
    lw.W1 = gaussian_matrix(rng, cfg.hidden_dim(), cfg.d, sd);
    lw.W2 = gaussian_matrix(rng, cfg.d, cfg.hidden_dim(), sd);
    w.push_back(std::move(lw));
  }
  return w;
}

Vec64 mlp_apply(const LayerWeights& w, const Vec64& x) {
  Vec64 h = matvec(w.W1, x);
  for (auto& t : h) t = std::tanh(t);
  return matvec(w.W2, h);
}

static ForwardTrace forward_impl(const ModelConfig& cfg, const ModelWeights& weights,
                                 const TokenSequence& seq, const ForwardOptions& opts,
                                 const FloatFormat& fmt) {
  cfg.validate();
  require(weights.size() == cfg.L, "weight stack depth must match config");
  const std::size_t n = seq.size();
  require(n > 0, "token sequence must be non-empty");
  for (std::size_t i = 0; i < n; ++i)
    require(seq[i].size() == cfg.d, "token vector dimension must match config");

  const bool quantize = !fmt.is_binary64();
  auto qround = [&](Vec64& vec, std::size_t layer, const char* stage) {
    if (!quantize) return;
    for (auto& x : vec) {
      try {
        x = round_to_format(x, fmt, /*strict=*/true);
      } catch (const numerical_error& e) {
        throw numerical_error(std::string(e.what()) + " (layer " +
                              std::to_string(layer) + ", " + stage + ")");
      }
    }
  };

  std::vector<Vec64> v = seq.vectors;
  ForwardTrace trace;
  if (opts.record_states) {
    trace.states.reserve(cfg.L + 1);
    trace.states.push_back(v);
  }
  if (opts.record_attention) trace.attn.layers.reserve(cfg.L);

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.d));

  for (std::size_t l = 0; l < cfg.L; ++l) {
    const LayerWeights& w = weights[l];

    std::vector<Vec64> u(n);
    for (std::size_t j = 0; j < n; ++j) {
      u[j] = rms_norm(v[j], cfg.beta1);
      qround(u[j], l, "pre-attention norm");
    }

    std::vector<Vec64> tq(n), tk(n);
    for (std::size_t j = 0; j < n; ++j) {
      tq[j] = pe_apply_query(matvec(w.Wq, u[j]), j, cfg.pe);
      tk[j] = pe_apply_key(matvec(w.Wk, u[j]), j, cfg.pe);
    }

    Mat64 attn;
    if (opts.record_attention) attn = Mat64(n, n);  // upper triangle stays 0

    std::vector<Vec64> z(n);
    Vec64 srow;
    for (std::size_t i = 0; i < n; ++i) {
      srow.resize(i + 1);
      const Vec64& qi = tq[i];
      for (std::size_t j = 0; j <= i; ++j)
        srow[j] = dot(qi, tk[j]) * inv_sqrt_d + pe_bias(i, j, cfg.pe);

      Vec64 alpha = softmax(srow);
      if (opts.record_attention)
        for (std::size_t j = 0; j <= i; ++j) attn(i, j) = alpha[j];

      // mix first, residual second, so equal mixes stay bitwise equal no
      // matter how the attention mass is split
      Vec64 zi(cfg.d, 0.0);
      for (std::size_t j = 0; j <= i; ++j) {
        const double a = alpha[j];
        const double* uj = u[j].data();
        double* zp = zi.data();
        for (std::size_t t = 0; t < cfg.d; ++t) zp[t] += a * uj[t];
      }
      {
        const double* vi = v[i].data();
        double* zp = zi.data();
        for (std::size_t t = 0; t < cfg.d; ++t) zp[t] += vi[t];
      }
      qround(zi, l, "attention mix");
      z[i] = std::move(zi);
    }
    if (opts.record_attention) trace.attn.layers.push_back(std::move(attn));

    for (std::size_t i = 0; i < n; ++i) {
      Vec64 h = rms_norm(z[i], cfg.beta2);
      qround(h, l, "pre-MLP norm");
      Vec64 m = mlp_apply(w, h);
      Vec64 vi(cfg.d);
      for (std::size_t t = 0; t < cfg.d; ++t) vi[t] = m[t] + z[i][t];
      qround(vi, l, "MLP residual");
      v[i] = std::move(vi);
    }
    if (opts.record_states) trace.states.push_back(v);
  }

  trace.outputs.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    trace.outputs[i] = rms_norm(v[i], cfg.beta3);
    qround(trace.outputs[i], cfg.L, "final norm");
    for (double x : trace.outputs[i]) require_finite(x, "forward output");
  }
  return trace;
}

ForwardTrace forward(const ModelConfig& cfg, const ModelWeights& weights,
                     const TokenSequence& seq, const ForwardOptions& opts) {
  return forward_impl(cfg, weights, seq, opts, FloatFormat::binary64());
}

ForwardTrace forward_quantized(const ModelConfig& cfg, const ModelWeights& weights,
                               const TokenSequence& seq, const ForwardOptions& opts) {
  return forward_impl(cfg, weights, seq, opts, cfg.precision);
}

Vec64 last_token_rep(const ForwardTrace& trace) {
  require(!trace.outputs.empty(), "trace has no outputs");
  return trace.outputs.back();
}

static void append_double(std::string& out, double x) {
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  out.append(buf, r.ptr);
}

void export_attention_csv(const ForwardTrace& trace, const std::string& path) {
  require(!trace.attn.layers.empty(), "trace has no recorded attention");
  std::string out = "layer,row,col,value\n";
  for (std::size_t l = 0; l < trace.attn.layers.size(); ++l) {
    const Mat64& A = trace.attn.layers[l];
    for (std::size_t i = 0; i < A.rows; ++i)
      for (std::size_t j = 0; j <= i; ++j) {
        out += std::to_string(l);
        out += ',';
        out += std::to_string(i);
        out += ',';
        out += std::to_string(j);
        out += ',';
        append_double(out, A(i, j));
        out += '\n';
      }
  }
  std::ofstream f(path, std::ios::binary);
  require(f.good(), "cannot open " + path);
  f << out;
}

void export_outputs_csv(const ForwardTrace& trace, const std::string& path) {
  require(!trace.outputs.empty(), "trace has no outputs");
  std::string out = "row,col,value\n";
  for (std::size_t i = 0; i < trace.outputs.size(); ++i)
    for (std::size_t t = 0; t < trace.outputs[i].size(); ++t) {
      out += std::to_string(i);
      out += ',';
      out += std::to_string(t);
      out += ',';
      append_double(out, trace.outputs[i][t]);
      out += '\n';
    }
  std::ofstream f(path, std::ios::binary);
  require(f.good(), "cannot open " + path);
  f << out;
}

}  // namespace clab
