// collapse-lab: command-line front end for the sweep harness and the
// single-instance checks. Exit codes: 0 success, 1 bad input, 2 numerical
// failure or violated property, 3 selftest failure.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "clab/collapse.hpp"
#include "clab/common.hpp"
#include "clab/counting.hpp"
#include "clab/harness.hpp"
#include "clab/model.hpp"
#include "clab/rng.hpp"
#include "clab/selftest.hpp"
#include "clab/squash.hpp"

namespace {

using namespace clab;

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = text.find(sep, start);
    if (pos == std::string::npos) {
      parts.push_back(text.substr(start));
      return parts;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

std::size_t parse_size(const std::string& text) {
  std::size_t value = 0;
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  require(ec == std::errc() && ptr == last && !text.empty(),
          "not a whole number: '" + text + "'");
  return value;
}

// "16..8192" walks the doubling grid from the left end, capped at the right;
// "1000,10000,100000" is taken literally
std::vector<std::size_t> parse_lengths(const std::string& text) {
  std::vector<std::size_t> out;
  std::size_t dots = text.find("..");
  if (dots != std::string::npos) {
    std::size_t lo = parse_size(text.substr(0, dots));
    std::size_t hi = parse_size(text.substr(dots + 2));
    require(lo >= 1 && hi >= lo, "length range must satisfy 1 <= lo <= hi");
    for (std::size_t v = lo; v <= hi; v *= 2) {
      out.push_back(v);
      if (v > hi / 2) break;  // next doubling leaves the range
    }
    return out;
  }
  for (const std::string& part : split(text, ',')) out.push_back(parse_size(part));
  require(!out.empty(), "no lengths given");
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> parse_ratios(const std::string& text) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const std::string& part : split(text, ',')) {
    std::vector<std::string> halves = split(part, ':');
    require(halves.size() == 2, "ratio must look like a:b, got '" + part + "'");
    std::size_t a = parse_size(halves[0]);
    std::size_t b = parse_size(halves[1]);
    require(a + b >= 1, "ratio 0:0 names the empty sequence");
    out.emplace_back(a, b);
  }
  return out;
}

std::vector<std::uint64_t> seed_range(std::uint64_t base, std::size_t count) {
  require(count >= 1, "at least one seed required");
  std::vector<std::uint64_t> seeds(count);
  for (std::size_t i = 0; i < count; ++i) seeds[i] = base + i;
  return seeds;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

void print_registry() {
  for (const RegistryEntry& e : preset_registry()) {
    std::printf("%s\n  usage: %s\n  claim: %s\n\n", e.family.c_str(),
                e.command.c_str(), e.anchor.c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"collapse-lab: representation-collapse and sensitivity experiments"};
  app.require_subcommand(0, 1);
  app.set_config("--config", "", "key=value file; command-line flags win");

  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool list = false;
  app.add_option("--seed", seed, "base seed; sweeps use seed..seed+count-1")
      ->envname("COLLAPSE_LAB_SEED");
  app.add_option("--threads", threads, "worker threads for sweeps")
      ->envname("COLLAPSE_LAB_THREADS");
  app.add_flag("--list", list, "print the experiment registry and exit");

  const std::vector<std::string> kPeNames = {"nope", "ape", "rope", "alibi"};
  const std::vector<std::string> kFmtNames = {"fp64", "fp32", "bf16", "fp16"};

  // ---- collapse run / collapse separator -------------------------------
  CLI::App* collapse = app.add_subcommand("collapse", "length sweeps of the final-token distance");
  collapse->require_subcommand(1);

  struct SweepArgs {
    std::string preset = "ones";
    std::vector<std::string> pe = {"rope"};
    std::vector<std::string> precision = {"fp64"};
    std::string lengths = "16..8192";
    std::size_t seeds = 5;
    std::size_t d = 64;
    std::size_t layers = 1;
    double beta1 = 1.0, beta2 = 1.0, beta3 = 1.0;
    double theta = 10000.0;
    double slope = 1.0 / 256.0;
    std::uint64_t symbol_seed = 0;
    std::size_t period = 3;
    std::string out = "curve.csv";
  } sweep;

  auto add_model_flags = [&](CLI::App* sub, SweepArgs& a) {
    sub->add_option("--pe", a.pe, "positional schemes, comma separated")
        ->delimiter(',')
        ->check(CLI::IsMember(kPeNames));
    sub->add_option("--precision", a.precision, "storage formats, comma separated")
        ->delimiter(',')
        ->check(CLI::IsMember(kFmtNames));
    sub->add_option("--lengths", a.lengths, "doubling range lo..hi or explicit list");
    sub->add_option("--seeds", a.seeds, "number of seeds");
    sub->add_option("--d", a.d, "model width");
    sub->add_option("--layers", a.layers, "attention layers");
    sub->add_option("--beta1", a.beta1, "pre-attention norm scale");
    sub->add_option("--beta2", a.beta2, "pre-MLP norm scale");
    sub->add_option("--beta3", a.beta3, "final norm scale");
    sub->add_option("--theta", a.theta, "frequency base for ape/rope");
    sub->add_option("--slope", a.slope, "alibi distance penalty");
    sub->add_option("--symbol-seed", a.symbol_seed, "seed of the symbol table");
    sub->add_option("--out", a.out, "output CSV path");
  };

  CLI::App* collapse_run = collapse->add_subcommand(
      "run", "distance between a repeated sequence and its one-token extension");
  collapse_run->add_option("--preset", sweep.preset, "token preset")
      ->check(CLI::IsMember({"ones", "digits", "commas"}));
  collapse_run->add_option("--period", sweep.period, "separator spacing (commas preset)");
  add_model_flags(collapse_run, sweep);

  CLI::App* collapse_sep = collapse->add_subcommand(
      "separator", "same sweep with and without periodic separator tokens");
  collapse_sep->add_option("--period", sweep.period, "separator spacing");
  add_model_flags(collapse_sep, sweep);

  auto run_sweep = [&](const std::string& experiment) {
    ExperimentSpec spec;
    spec.experiment = experiment;
    spec.preset = experiment == "separator" ? "run" : sweep.preset;
    spec.cfg.d = sweep.d;
    spec.cfg.L = sweep.layers;
    spec.cfg.beta1 = sweep.beta1;
    spec.cfg.beta2 = sweep.beta2;
    spec.cfg.beta3 = sweep.beta3;
    spec.lengths = parse_lengths(sweep.lengths);
    spec.seeds = seed_range(seed, sweep.seeds);
    spec.pe_names = sweep.pe;
    spec.precision_names = sweep.precision;
    spec.threads = threads;
    spec.symbol_seed = sweep.symbol_seed;
    spec.period = sweep.period;
    spec.theta = sweep.theta;
    spec.slope = sweep.slope;
    spec.validate();
    std::vector<ResultRow> rows = run(spec);
    write_text_file(sweep.out, rows_to_curve_csv(rows));
    std::printf("wrote %s (%zu curve rows)\n", sweep.out.c_str(), rows.size() / 2);
    return 0;
  };

  // ---- tv --------------------------------------------------------------
  CLI::App* tv = app.add_subcommand(
      "tv", "total-variation distance of a length-n sample under score noise");
  struct TvArgs {
    std::string lengths = "1000,10000,100000";
    std::size_t k = 200;
    double noise = 0.1;
    std::size_t seeds = 5;
    std::string out = "tv.csv";
  } tva;
  tv->add_option("--lengths", tva.lengths, "sample sizes, list or lo..hi doubling");
  tv->add_option("--k", tva.k, "support size of the perturbed scores");
  tv->add_option("--noise", tva.noise, "uniform score shift magnitude");
  tv->add_option("--seeds", tva.seeds, "number of seeds");
  tv->add_option("--out", tva.out, "output CSV path");

  // ---- alt-tv ----------------------------------------------------------
  CLI::App* alt = app.add_subcommand(
      "alt-tv", "exact distance of the alternating two-token distribution");
  std::size_t alt_max = 10000;
  alt->add_option("--max-n", alt_max, "largest even length checked");

  // ---- squash ----------------------------------------------------------
  CLI::App* squash = app.add_subcommand("squash", "token-sensitivity profiles and the path-sum bound");
  squash->require_subcommand(1);

  CLI::App* profile = squash->add_subcommand(
      "profile", "per-token Jacobian norms of the full model next to the bound");
  struct ProfileArgs {
    std::size_t n = 64;
    std::size_t layers = 2;
    std::size_t d = 64;
    std::size_t seeds = 5;
    std::string pe = "rope";
    double beta1 = 1.0, beta2 = 1.0, beta3 = 1.0;
    double theta = 10000.0;
    double slope = 1.0 / 256.0;
    std::string out = "profile.csv";
  } pra;
  profile->add_option("--n", pra.n, "sequence length");
  profile->add_option("--layers", pra.layers, "attention layers");
  profile->add_option("--d", pra.d, "model width");
  profile->add_option("--seeds", pra.seeds, "instances; blocks are appended in seed order");
  profile->add_option("--pe", pra.pe, "positional scheme")->check(CLI::IsMember(kPeNames));
  profile->add_option("--beta1", pra.beta1, "pre-attention norm scale");
  profile->add_option("--beta2", pra.beta2, "pre-MLP norm scale");
  profile->add_option("--beta3", pra.beta3, "final norm scale");
  profile->add_option("--theta", pra.theta, "frequency base for ape/rope");
  profile->add_option("--slope", pra.slope, "alibi distance penalty");
  profile->add_option("--out", pra.out, "output CSV path");

  CLI::App* bound_cmd = squash->add_subcommand(
      "bound-check", "random instances of the frozen-attention model against the bound");
  struct BoundArgs {
    std::string mode = "consistent";
    std::size_t seeds = 100;
    std::size_t d = 16;
    std::string pe = "rope";
    double beta1 = 1.0, beta2 = 1.0, beta3 = 1.0;
  } bca;
  bound_cmd->add_option("--mode", bca.mode, "only 'consistent' exists: attention frozen, norms exact")
      ->check(CLI::IsMember({"consistent"}));
  bound_cmd->add_option("--seeds", bca.seeds, "number of instances");
  bound_cmd->add_option("--d", bca.d, "model width");
  bound_cmd->add_option("--pe", bca.pe, "positional scheme")->check(CLI::IsMember(kPeNames));
  bound_cmd->add_option("--beta1", bca.beta1, "pre-attention norm scale");
  bound_cmd->add_option("--beta2", bca.beta2, "pre-MLP norm scale");
  bound_cmd->add_option("--beta3", bca.beta3, "final norm scale");

  struct LimitArgs {
    std::size_t n = 64;
    std::size_t lmax = 4096;
    double tol = 1e-8;
    double floor = 0.0;
  } lca;
  auto add_limit_flags = [&](CLI::App* sub) {
    sub->add_option("--n", lca.n, "matrix size");
    sub->add_option("--lmax", lca.lmax, "largest exponent tried");
    sub->add_option("--tol", lca.tol, "Linf convergence tolerance");
    sub->add_option("--floor", lca.floor, "row entries drawn from U[floor,1] before normalizing");
  };
  CLI::App* squash_limit = squash->add_subcommand(
      "limit-case", "repeated identity-averaged mixing of one random row-stochastic matrix");
  add_limit_flags(squash_limit);
  CLI::App* limit_top = app.add_subcommand(
      "limit-case", "alias for squash limit-case");
  add_limit_flags(limit_top);

  // ---- counting --------------------------------------------------------
  CLI::App* counting = app.add_subcommand("counting", "two-symbol ratio invariance and the count readout");
  counting->require_subcommand(1);

  CLI::App* ratio_cmd = counting->add_subcommand(
      "ratio-check", "class representatives depend on the count ratio only");
  struct RatioArgs {
    std::string ratios = "1:1,1:2,2:3";
    std::string multipliers = "1,2,4,8";
    std::size_t layers = 2;
    std::size_t d = 8;
    std::uint64_t symbol_seed = 0;
  } rca;
  ratio_cmd->add_option("--ratios", rca.ratios, "count pairs a:b, comma separated");
  ratio_cmd->add_option("--multipliers", rca.multipliers, "scale factors applied to each pair");
  ratio_cmd->add_option("--layers", rca.layers, "attention layers");
  ratio_cmd->add_option("--d", rca.d, "model width");
  ratio_cmd->add_option("--symbol-seed", rca.symbol_seed, "seed of the two-symbol table");

  CLI::App* demo_cmd = counting->add_subcommand(
      "collapse-demo", "walk the count upward until low precision merges two answers");
  struct DemoArgs {
    std::string precision = "bf16";
    std::size_t nmax = 8192;
    std::size_t d = 8;
    std::size_t layers = 1;
    std::string pe = "rope";
    std::string train = "2,3,4,5,6";
  } dma;
  demo_cmd->add_option("--precision", dma.precision, "storage format for the demo")
      ->check(CLI::IsMember(kFmtNames));
  demo_cmd->add_option("--nmax", dma.nmax, "largest count examined");
  demo_cmd->add_option("--d", dma.d, "model width");
  demo_cmd->add_option("--layers", dma.layers, "attention layers");
  demo_cmd->add_option("--pe", dma.pe, "positional scheme")->check(CLI::IsMember(kPeNames));
  demo_cmd->add_option("--train", dma.train, "lengths the readout is fitted on");

  // ---- plot ------------------------------------------------------------
  CLI::App* plot = app.add_subcommand("plot", "render a curve CSV as an SVG");
  struct PlotArgs {
    std::string in;
    std::string out;
    std::string metric = "l1";
    bool log_y = false;
    double floor = 1e-16;
    std::string title;
  } pla;
  plot->add_option("--in", pla.in, "curve CSV to read")->required();
  plot->add_option("--out", pla.out, "SVG path to write")->required();
  plot->add_option("--metric", pla.metric, "column to draw")->check(CLI::IsMember({"l1", "linf"}));
  plot->add_flag("--log-y", pla.log_y, "log scale on the value axis");
  plot->add_option("--floor", pla.floor, "clamp for values at or below zero under log scale");
  plot->add_option("--title", pla.title, "plot title");

  // ---- selftest --------------------------------------------------------
  CLI::App* selftest = app.add_subcommand("selftest", "run every acceptance criterion");
  std::string selftest_out = "acceptance_out";
  selftest->add_option("--out", selftest_out, "directory for the generated CSVs");

  std::function<void(CLI::App*)> enable_fallthrough = [&](CLI::App* node) {
    for (CLI::App* sub : node->get_subcommands({})) {
      sub->fallthrough();
      enable_fallthrough(sub);
    }
  };
  enable_fallthrough(&app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (list) {
      print_registry();
      return 0;
    }

    if (collapse_run->parsed()) return run_sweep("collapse");
    if (collapse_sep->parsed()) return run_sweep("separator");

    if (tv->parsed()) {
      ExperimentSpec spec;
      spec.experiment = "tv";
      spec.preset = "uniform-shift";
      spec.lengths = parse_lengths(tva.lengths);
      spec.seeds = seed_range(seed, tva.seeds);
      spec.threads = threads;
      spec.tv_k = tva.k;
      spec.tv_noise = tva.noise;
      spec.validate();
      std::vector<ResultRow> rows = run(spec);
      write_text_file(tva.out, rows_to_curve_csv(rows));
      std::printf("wrote %s (%zu curve rows)\n", tva.out.c_str(), rows.size() / 2);
      return 0;
    }

    if (alt->parsed()) {
      require(alt_max >= 2, "--max-n must be at least 2");
      const double target = 2.0 * std::tanh(0.5);
      double worst = 0.0;
      std::size_t checked = 0;
      for (std::size_t n = 2; n <= alt_max; n += 2) {
        worst = std::max(worst, std::fabs(alternating_tv(n) - target));
        ++checked;
      }
      std::printf("alternating two-token distance over %zu even lengths up to %zu\n",
                  checked, alt_max);
      std::printf("target 2*tanh(1/2) = %.15f, worst deviation %.3e\n", target, worst);
      if (worst > 1e-12)
        throw numerical_error("alternating distance drifted from 2*tanh(1/2)");
      return 0;
    }

    if (profile->parsed()) {
      require(pra.n >= 1, "--n must be positive");
      std::string csv = "token_index,measured_norm,bound_value\n";
      char buf[160];
      for (std::uint64_t s : seed_range(seed, pra.seeds)) {
        ModelConfig cfg;
        cfg.d = pra.d;
        cfg.L = pra.layers;
        cfg.seed = s;
        cfg.pe = PEScheme::from_name(pra.pe, pra.d, pra.theta, pra.slope);
        cfg.beta1 = pra.beta1;
        cfg.beta2 = pra.beta2;
        cfg.beta3 = pra.beta3;
        cfg.validate();
        ModelWeights w = init_model(cfg);
        Rng rng(s, "symbols");
        TokenSequence seq;
        for (std::size_t i = 0; i < pra.n; ++i) {
          Vec64 v(pra.d);
          for (std::size_t k = 0; k < pra.d; ++k) v[k] = rng.next_uniform(-1.0, 1.0);
          seq.vectors.push_back(std::move(v));
        }
        ForwardTrace trace = forward(cfg, w, seq);
        SensitivityProfile prof = sensitivity_profile(cfg, w, seq);
        BoundConstants consts = make_bound_constants(w, pra.beta1, pra.beta2, pra.beta3);
        PathBound bound = path_sum_bound(trace.attn, consts);
        double worst_ratio = 0.0;
        for (std::size_t i = 0; i < pra.n; ++i) {
          std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i, prof.values[i],
                        bound.values[i]);
          csv += buf;
          worst_ratio = std::max(worst_ratio, prof.values[i] / bound.values[i]);
        }
        std::printf("seed %llu: max measured/bound ratio %.3f\n",
                    static_cast<unsigned long long>(s), worst_ratio);
      }
      write_text_file(pra.out, csv);
      std::printf("wrote %s (%zu tokens x %zu seeds)\n", pra.out.c_str(), pra.n, pra.seeds);
      return 0;
    }

    if (bound_cmd->parsed()) {
      ModelConfig cfg;
      cfg.d = bca.d;
      cfg.pe = PEScheme::from_name(bca.pe, bca.d);
      cfg.beta1 = bca.beta1;
      cfg.beta2 = bca.beta2;
      cfg.beta3 = bca.beta3;
      cfg.validate();
      BoundCheckReport rep = bound_check(cfg, seed_range(seed, bca.seeds));
      double spectral = 0.0, column = 0.0, frob = 0.0;
      for (const BoundCheckInstance& inst : rep.instances) {
        spectral = std::max(spectral, inst.worst_spectral_ratio);
        column = std::max(column, inst.worst_column_ratio);
        frob = std::max(frob, inst.worst_frob_ratio);
      }
      std::printf("checked %zu instances (d=%zu, pe=%s): %zu violations\n",
                  rep.instances.size(), bca.d, bca.pe.c_str(), rep.violations);
      std::printf("worst measured/bound ratios: spectral %.3e, column %.3e, frobenius %.3e\n",
                  spectral, column, frob);
      if (rep.violations > 0) throw numerical_error("path-sum bound violated");
      return 0;
    }

    if (squash_limit->parsed() || limit_top->parsed()) {
      require(lca.n >= 1, "--n must be positive");
      require(lca.floor >= 0.0 && lca.floor < 1.0, "--floor must lie in [0,1)");
      Rng rng(seed, "limit-shapes");
      Mat64 attn = random_row_stochastic(lca.n, rng, lca.floor);
      LimitCaseResult res = limit_case(attn, lca.lmax, lca.tol);
      if (!res.hypothesis_ok)
        std::printf("input flagged: some row past the first has fewer than two nonzeros\n");
      if (res.converged)
        std::printf("converged to the first-column limit after L=%zu (Linf distance %.3e, tol %.1e)\n",
                    res.iterations, res.distance, lca.tol);
      else
        std::printf("no convergence within L=%zu (Linf distance %.3e, tol %.1e)\n",
                    res.iterations, res.distance, lca.tol);
      return 0;
    }

    if (ratio_cmd->parsed()) {
      auto ratios = parse_ratios(rca.ratios);
      std::vector<std::size_t> multipliers = parse_lengths(rca.multipliers);
      auto [zero, one] = two_symbol_tokens(rca.d, rca.symbol_seed);
      GenericWeightsDraw draw = draw_generic_weights(rca.d, rca.layers, seed, zero, one);
      RatioInvarianceReport rep =
          ratio_invariance_check(draw.weights, ratios, multipliers, rca.layers, zero, one);
      if (draw.attempts > 1)
        std::printf("weights drawn from seed %llu after %d attempts\n",
                    static_cast<unsigned long long>(draw.seed_used), draw.attempts);
      std::printf("%-8s %-11s %-12s %s\n", "ratio", "multiplier", "gap", "normed-gap");
      for (const RatioCell& c : rep.cells)
        std::printf("%zu:%-6zu %-11zu %-12.3e %.3e\n", c.n0, c.n1, c.multiplier, c.gap,
                    c.normed_gap);
      std::printf("max gap %.3e, max normed gap %.3e: %s\n", rep.max_gap,
                  rep.max_normed_gap, rep.ok ? "ok" : "violated");
      if (!rep.ok) throw numerical_error("ratio invariance violated");
      return 0;
    }

    if (demo_cmd->parsed()) {
      ModelConfig cfg;
      cfg.d = dma.d;
      cfg.L = dma.layers;
      cfg.seed = seed;
      cfg.pe = PEScheme::from_name(dma.pe, dma.d);
      cfg.validate();
      std::vector<std::size_t> train = parse_lengths(dma.train);
      ReadoutFit fit = fit_count_readout(cfg, train, seed);
      std::printf("readout fitted on lengths %s: residual %.3e%s\n", join(train).c_str(),
                  fit.residual, fit.ridge_used ? " (ridge)" : "");
      CollapseDemoReport rep = counting_collapse_demo(
          cfg, fit.readout, FloatFormat::from_name(dma.precision), dma.nmax);
      if (rep.detected) {
        std::printf("%s storage: counts %zu and %zu share one representation\n",
                    rep.precision_tag.c_str(), rep.n, rep.n + 1);
        std::printf("shared readout estimate %.6f rounds to %lld, wrong for at least one count\n",
                    rep.prediction, rep.rounded);
      } else {
        std::printf("%s storage: no shared representation up to n=%zu\n",
                    rep.precision_tag.c_str(), rep.scanned);
      }
      return 0;
    }

    if (plot->parsed()) {
      PlotSpec spec;
      spec.metric = pla.metric;
      spec.log_y = pla.log_y;
      spec.floor = pla.floor;
      spec.title = pla.title;
      PlotResult res = emit_svg(read_text_file(pla.in), spec);
      for (const std::string& wmsg : res.warnings)
        std::fprintf(stderr, "warning: %s\n", wmsg.c_str());
      write_text_file(pla.out, res.svg);
      std::printf("wrote %s (%zu series)\n", pla.out.c_str(), res.series);
      return 0;
    }

    if (selftest->parsed()) {
      SelftestReport rep = run_selftest(selftest_out);
      std::fputs(render_report(rep).c_str(), stdout);
      std::puts(rep.all_pass ? "selftest: PASS" : "selftest: FAIL");
      return rep.all_pass ? 0 : 3;
    }

    std::fputs(app.help().c_str(), stdout);
    return 1;
  } catch (const numerical_error& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid argument: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
