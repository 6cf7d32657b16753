#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clab/collapse.hpp"
#include "clab/model.hpp"

namespace clab {

// One sweep: an experiment family crossed over lengths, seeds, positional
// schemes, and storage precisions.
struct ExperimentSpec {
  std::string experiment;  // "collapse", "separator", or "tv"
  std::string preset;      // token preset for collapse; free label otherwise
  ModelConfig cfg;         // d, L, betas; pe/precision/seed come from the sweep
  std::vector<std::size_t> lengths;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> pe_names;
  std::vector<std::string> precision_names;
  std::size_t threads = 1;

  std::uint64_t symbol_seed = 0;
  std::size_t period = 3;         // separator spacing for the commas preset
  double theta = 10000.0;         // frequency base for ape / rope
  double slope = 1.0 / 256.0;     // alibi distance penalty
  std::size_t tv_k = 200;
  double tv_noise = 0.1;

  void validate() const;
};

struct ResultRow {
  std::string experiment;
  std::string preset;
  std::string pe;
  std::string precision;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string metric;  // "l1" or "linf"
  double value = 0.0;
};

// executes every sweep cell (worker pool when spec.threads > 1) and returns
// rows sorted by (experiment, preset, pe, precision, n, seed, metric); a cell
// failure aborts with an error naming the cell
std::vector<ResultRow> run(const ExperimentSpec& spec);

// long form: experiment,preset,pe,precision,n,seed,metric,value
std::string rows_to_csv(const std::vector<ResultRow>& rows);

// wide form: experiment,preset,pe,precision,n,seed,l1,linf; requires exactly
// the two standard metrics per cell
std::string rows_to_curve_csv(const std::vector<ResultRow>& rows);

void write_text_file(const std::string& path, const std::string& body);
std::string read_text_file(const std::string& path);

struct PlotSpec {
  std::string metric = "l1";  // which wide column to draw
  bool log_y = false;
  double floor = 1e-16;  // replaces nonpositive values under log scaling
  double width = 860.0;
  double height = 520.0;
  std::string title;
};

struct PlotResult {
  std::size_t series = 0;  // polylines drawn, one per (preset, pe, precision)
  std::vector<std::string> warnings;
  std::string svg;
};

// renders a wide curve CSV: per group a median polyline over seeds plus a
// min/max band, log-x over lengths
PlotResult emit_svg(const std::string& curve_csv_text, const PlotSpec& spec = {});

struct RegistryEntry {
  std::string family;
  std::string command;
  std::string anchor;  // the claim this family demonstrates
};

const std::vector<RegistryEntry>& preset_registry();

}  // namespace clab
