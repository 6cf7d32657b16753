#include "clab/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <thread>

#include "clab/common.hpp"

namespace clab {

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

void append_size(std::string& out, std::uint64_t v) {
  char buf[24];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

bool row_less(const ResultRow& a, const ResultRow& b) {
  if (a.experiment != b.experiment) return a.experiment < b.experiment;
  if (a.preset != b.preset) return a.preset < b.preset;
  if (a.pe != b.pe) return a.pe < b.pe;
  if (a.precision != b.precision) return a.precision < b.precision;
  if (a.n != b.n) return a.n < b.n;
  if (a.seed != b.seed) return a.seed < b.seed;
  return a.metric < b.metric;
}

std::vector<ResultRow> records_to_rows(const std::vector<CollapseRecord>& records,
                                       const std::string& experiment,
                                       const std::string& preset) {
  std::vector<ResultRow> rows;
  rows.reserve(records.size() * 2);
  for (const CollapseRecord& rec : records) {
    ResultRow row;
    row.experiment = experiment;
    row.preset = preset;
    row.pe = rec.pe_tag;
    row.precision = rec.precision_tag;
    row.n = rec.n;
    row.seed = rec.seed;
    row.metric = "l1";
    row.value = rec.l1;
    rows.push_back(row);
    row.metric = "linf";
    row.value = rec.linf;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

void ExperimentSpec::validate() const {
  require(experiment == "collapse" || experiment == "separator" ||
              experiment == "tv",
          "unknown experiment: " + experiment);
  require(!preset.empty(), "preset label must be non-empty");
  require(!lengths.empty(), "lengths sweep must be non-empty");
  require(!seeds.empty(), "seeds sweep must be non-empty");
  require(threads >= 1, "thread count must be positive");
  if (experiment != "tv") {
    cfg.validate();
    require(!pe_names.empty(), "positional-scheme sweep must be non-empty");
    require(!precision_names.empty(), "precision sweep must be non-empty");
    for (const std::string& p : pe_names) PEScheme::from_name(p, cfg.d, theta, slope);
    for (const std::string& f : precision_names) FloatFormat::from_name(f);
  }
  if (experiment == "collapse") preset_by_name(preset, cfg.d, symbol_seed, period);
  if (experiment == "tv") {
    require(tv_k >= 1, "perturbation count must be positive");
    require(tv_noise > 0.0, "noise level must be positive");
    require(tv_k < *std::min_element(lengths.begin(), lengths.end()),
            "perturbation count must stay below every length");
  }
}

std::vector<ResultRow> run(const ExperimentSpec& spec) {
  spec.validate();

  struct Cell {
    std::string label;
    std::function<std::vector<ResultRow>()> work;
  };
  std::vector<Cell> cells;

  if (spec.experiment == "tv") {
    for (std::uint64_t seed : spec.seeds) {
      std::string label = "tv/" + spec.preset + "/seed=" + std::to_string(seed);
      cells.push_back({std::move(label), [&spec, seed]() {
                         const CollapseCurve curve = tv_decay_experiment(
                             spec.lengths, spec.tv_k, spec.tv_noise, {seed});
                         return records_to_rows(curve.records, "tv", spec.preset);
                       }});
    }
  } else {
    for (const std::string& pe : spec.pe_names) {
      for (const std::string& fmt : spec.precision_names) {
        ModelConfig cfg = spec.cfg;
        cfg.pe = PEScheme::from_name(pe, spec.cfg.d, spec.theta, spec.slope);
        cfg.precision = FloatFormat::from_name(fmt);
        if (spec.experiment == "collapse") {
          for (std::uint64_t seed : spec.seeds) {
            std::string label =
                "collapse/" + spec.preset + "/" + pe + "/" + fmt +
                "/seed=" + std::to_string(seed);
            cells.push_back({std::move(label), [&spec, cfg, seed]() {
                               const CollapseCurve curve = collapse_curve(
                                   cfg, spec.lengths, {seed},
                                   preset_by_name(spec.preset, cfg.d,
                                                  spec.symbol_seed, spec.period));
                               return records_to_rows(curve.records, "collapse",
                                                      spec.preset);
                             }});
          }
        } else {
          std::string label = "separator/" + spec.preset + "/" + pe + "/" + fmt;
          cells.push_back({std::move(label), [&spec, cfg]() {
                             const SeparatorCurves curves = separator_experiment(
                                 cfg, spec.lengths, spec.period, spec.seeds);
                             std::vector<ResultRow> rows = records_to_rows(
                                 curves.plain.records, "separator", "ones");
                             std::vector<ResultRow> sep = records_to_rows(
                                 curves.separated.records, "separator", "commas");
                             rows.insert(rows.end(), sep.begin(), sep.end());
                             return rows;
                           }});
        }
      }
    }
  }

  std::vector<std::vector<ResultRow>> results(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());

  const std::size_t workers = std::min(spec.threads, cells.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      try {
        results[i] = cells[i].work();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&, t]() {
        for (std::size_t i = t; i < cells.size(); i += workers) {
          try {
            results[i] = cells[i].work();
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw numerical_error("cell " + cells[i].label + " failed: " + e.what());
    }
  }

  std::vector<ResultRow> rows;
  for (auto& part : results)
    rows.insert(rows.end(), std::make_move_iterator(part.begin()),
                std::make_move_iterator(part.end()));
  std::sort(rows.begin(), rows.end(), row_less);
  return rows;
}

std::string rows_to_csv(const std::vector<ResultRow>& rows) {
  std::string out = "experiment,preset,pe,precision,n,seed,metric,value\n";
  for (const ResultRow& r : rows) {
    if (!std::isfinite(r.value))
      throw numerical_error("refusing to write non-finite value for " +
                            r.experiment + "/" + r.preset + " n=" +
                            std::to_string(r.n));
    out += r.experiment;
    out += ',';
    out += r.preset;
    out += ',';
    out += r.pe;
    out += ',';
    out += r.precision;
    out += ',';
    append_size(out, r.n);
    out += ',';
    append_size(out, r.seed);
    out += ',';
    out += r.metric;
    out += ',';
    append_double(out, r.value);
    out += '\n';
  }
  return out;
}

std::string rows_to_curve_csv(const std::vector<ResultRow>& rows) {
  std::vector<ResultRow> sorted = rows;
  std::sort(sorted.begin(), sorted.end(), row_less);
  std::string out = "experiment,preset,pe,precision,n,seed,l1,linf\n";
  for (std::size_t i = 0; i < sorted.size(); i += 2) {
    require(i + 1 < sorted.size(), "odd metric count; expected l1/linf pairs");
    const ResultRow& a = sorted[i];
    const ResultRow& b = sorted[i + 1];
    require(a.metric == "l1" && b.metric == "linf" && a.n == b.n &&
                a.seed == b.seed && a.preset == b.preset && a.pe == b.pe &&
                a.precision == b.precision && a.experiment == b.experiment,
            "metrics do not pair into l1/linf cells");
    if (!std::isfinite(a.value) || !std::isfinite(b.value))
      throw numerical_error("refusing to write non-finite value for " +
                            a.experiment + "/" + a.preset + " n=" +
                            std::to_string(a.n));
    out += a.experiment;
    out += ',';
    out += a.preset;
    out += ',';
    out += a.pe;
    out += ',';
    out += a.precision;
    out += ',';
    append_size(out, a.n);
    out += ',';
    append_size(out, a.seed);
    out += ',';
    append_double(out, a.value);
    out += ',';
    append_double(out, b.value);
    out += '\n';
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& body) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  require(f != nullptr, "cannot open for writing: " + path);
  const std::size_t written = std::fwrite(body.data(), 1, body.size(), f);
  std::fclose(f);
  require(written == body.size(), "short write to " + path);
}

std::string read_text_file(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  require(f != nullptr, "cannot open for reading: " + path);
  std::string body;
  char buf[65536];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof(buf), f)) > 0) body.append(buf, got);
  std::fclose(f);
  return body;
}

namespace {

struct CurvePoint {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double value = 0.0;
};

double parse_double_field(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size(),
          "malformed numeric field: " + s);
  return v;
}

std::uint64_t parse_uint_field(const std::string& s) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  require(res.ec == std::errc() && res.ptr == s.data() + s.size(),
          "malformed integer field: " + s);
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

std::string format_tick(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v,
                                 std::chars_format::general, 3);
  return std::string(buf, res.ptr);
}

const char* kPalette[] = {"#1f6fb2", "#c23b22", "#2e8540", "#7d3fa8",
                          "#b8860b", "#0e7c7b", "#9c2f5d", "#555555"};

}  // namespace

PlotResult emit_svg(const std::string& curve_csv_text, const PlotSpec& spec) {
  require(spec.metric == "l1" || spec.metric == "linf",
          "metric must be l1 or linf");
  require(spec.floor > 0.0, "log floor must be positive");

  // header + rows
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < curve_csv_text.size()) {
    std::size_t end = curve_csv_text.find('\n', start);
    if (end == std::string::npos) end = curve_csv_text.size();
    if (end > start) lines.push_back(curve_csv_text.substr(start, end - start));
    start = end + 1;
  }
  require(!lines.empty(), "empty CSV");
  require(lines[0] == "experiment,preset,pe,precision,n,seed,l1,linf",
          "unrecognized CSV header: " + lines[0]);
  require(lines.size() > 1, "CSV has a header but no rows");

  std::map<std::string, std::vector<CurvePoint>> groups;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::vector<std::string> f = split_csv_line(lines[i]);
    require(f.size() == 8, "malformed CSV row: " + lines[i]);
    CurvePoint p;
    p.n = static_cast<std::size_t>(parse_uint_field(f[4]));
    p.seed = parse_uint_field(f[5]);
    p.value = parse_double_field(spec.metric == "l1" ? f[6] : f[7]);
    groups[f[1] + " " + f[2] + " " + f[3]].push_back(p);
  }

  PlotResult result;
  result.series = groups.size();

  // collect per-group medians and bands
  struct Band {
    std::vector<std::size_t> ns;
    std::vector<double> med, lo, hi;
  };
  std::map<std::string, Band> bands;
  double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
  bool first_pt = true;
  std::size_t clamped = 0;

  for (auto& [key, pts] : groups) {
    std::map<std::size_t, std::vector<double>> by_n;
    for (const CurvePoint& p : pts) by_n[p.n].push_back(p.value);
    Band band;
    for (auto& [n, vals] : by_n) {
      if (spec.log_y)
        for (double v : vals)
          if (v < spec.floor) ++clamped;
      std::sort(vals.begin(), vals.end());
      double med = vals[vals.size() / 2];
      if (vals.size() % 2 == 0) med = 0.5 * (med + vals[vals.size() / 2 - 1]);
      double lo = vals.front(), hi = vals.back();
      if (spec.log_y)
        for (double* v : {&med, &lo, &hi}) *v = std::max(*v, spec.floor);
      band.ns.push_back(n);
      band.med.push_back(med);
      band.lo.push_back(lo);
      band.hi.push_back(hi);
      const double x = std::log10(static_cast<double>(n));
      const double ylo = spec.log_y ? std::log10(lo) : lo;
      const double yhi = spec.log_y ? std::log10(hi) : hi;
      if (first_pt) {
        xmin = xmax = x;
        ymin = ylo;
        ymax = yhi;
        first_pt = false;
      } else {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, ylo);
        ymax = std::max(ymax, yhi);
      }
    }
    bands[key] = std::move(band);
  }
  if (clamped > 0)
    result.warnings.push_back(std::to_string(clamped) +
                              " values at or below the log floor were clamped");

  if (xmax - xmin < 1e-12) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax - ymin < 1e-12) {
    ymin -= 0.5;
    ymax += 0.5;
  }

  const double ml = 70.0, mr = 20.0, mt = spec.title.empty() ? 16.0 : 36.0,
               mb = 48.0;
  const double pw = spec.width - ml - mr, ph = spec.height - mt - mb;
  auto sx = [&](double n_log) {
    return ml + (n_log - xmin) / (xmax - xmin) * pw;
  };
  auto sy = [&](double v) {
    const double t = spec.log_y ? std::log10(v) : v;
    return mt + (ymax - t) / (ymax - ymin) * ph;
  };

  std::string& svg = result.svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"";
  append_double(svg, spec.width);
  svg += "\" height=\"";
  append_double(svg, spec.height);
  svg += "\" viewBox=\"0 0 ";
  append_double(svg, spec.width);
  svg += ' ';
  append_double(svg, spec.height);
  svg += "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!spec.title.empty())
    svg += "<text x=\"" + std::to_string(ml) +
           "\" y=\"22\" font-family=\"sans-serif\" font-size=\"15\">" +
           spec.title + "</text>\n";

  // frame
  svg += "<rect x=\"" + std::to_string(ml) + "\" y=\"" + std::to_string(mt) +
         "\" width=\"" + std::to_string(pw) + "\" height=\"" +
         std::to_string(ph) +
         "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";

  // y ticks
  for (int t = 0; t <= 4; ++t) {
    const double ty = ymin + (ymax - ymin) * t / 4.0;
    const double vy = spec.log_y ? std::pow(10.0, ty) : ty;
    const double py = mt + (ymax - ty) / (ymax - ymin) * ph;
    svg += "<line x1=\"" + std::to_string(ml - 4) + "\" y1=\"" +
           std::to_string(py) + "\" x2=\"" + std::to_string(ml) + "\" y2=\"" +
           std::to_string(py) + "\" stroke=\"#333\"/>\n";
    svg += "<text x=\"" + std::to_string(ml - 8) + "\" y=\"" +
           std::to_string(py + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
           format_tick(vy) + "</text>\n";
  }
  // x ticks at observed lengths (thinned to at most 10)
  std::vector<std::size_t> all_n;
  for (const auto& [key, band] : bands)
    all_n.insert(all_n.end(), band.ns.begin(), band.ns.end());
  std::sort(all_n.begin(), all_n.end());
  all_n.erase(std::unique(all_n.begin(), all_n.end()), all_n.end());
  const std::size_t step = all_n.size() > 10 ? (all_n.size() + 9) / 10 : 1;
  for (std::size_t i = 0; i < all_n.size(); i += step) {
    const double px = sx(std::log10(static_cast<double>(all_n[i])));
    svg += "<line x1=\"" + std::to_string(px) + "\" y1=\"" +
           std::to_string(mt + ph) + "\" x2=\"" + std::to_string(px) +
           "\" y2=\"" + std::to_string(mt + ph + 4) + "\" stroke=\"#333\"/>\n";
    svg += "<text x=\"" + std::to_string(px) + "\" y=\"" +
           std::to_string(mt + ph + 18) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">" +
           std::to_string(all_n[i]) + "</text>\n";
  }
  svg += "<text x=\"" + std::to_string(ml + pw / 2) + "\" y=\"" +
         std::to_string(spec.height - 10) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\">sequence length n</text>\n";
  svg += "<text transform=\"translate(16," + std::to_string(mt + ph / 2) +
         ") rotate(-90)\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"12\">" +
         spec.metric + (spec.log_y ? " (log scale)" : "") + "</text>\n";

  std::size_t color = 0;
  double legend_y = mt + 14.0;
  for (const auto& [key, band] : bands) {
    const char* stroke = kPalette[color % 8];
    ++color;
    // min/max band
    std::string poly;
    for (std::size_t i = 0; i < band.ns.size(); ++i) {
      append_double(poly, sx(std::log10(static_cast<double>(band.ns[i]))));
      poly += ',';
      append_double(poly, sy(band.hi[i]));
      poly += ' ';
    }
    for (std::size_t i = band.ns.size(); i-- > 0;) {
      append_double(poly, sx(std::log10(static_cast<double>(band.ns[i]))));
      poly += ',';
      append_double(poly, sy(band.lo[i]));
      poly += ' ';
    }
    svg += "<polygon points=\"" + poly + "\" fill=\"" + stroke +
           "\" opacity=\"0.12\" stroke=\"none\"/>\n";
    // median line + markers
    std::string line;
    for (std::size_t i = 0; i < band.ns.size(); ++i) {
      append_double(line, sx(std::log10(static_cast<double>(band.ns[i]))));
      line += ',';
      append_double(line, sy(band.med[i]));
      line += ' ';
    }
    svg += "<polyline points=\"" + line + "\" fill=\"none\" stroke=\"" + stroke +
           "\" stroke-width=\"1.8\"/>\n";
    for (std::size_t i = 0; i < band.ns.size(); ++i) {
      svg += "<circle cx=\"";
      append_double(svg, sx(std::log10(static_cast<double>(band.ns[i]))));
      svg += "\" cy=\"";
      append_double(svg, sy(band.med[i]));
      svg += "\" r=\"2.5\" fill=\"";
      svg += stroke;
      svg += "\"/>\n";
    }
    svg += "<rect x=\"" + std::to_string(ml + 8) + "\" y=\"" +
           std::to_string(legend_y - 8) + "\" width=\"14\" height=\"4\" fill=\"" +
           stroke + "\"/>\n";
    svg += "<text x=\"" + std::to_string(ml + 26) + "\" y=\"" +
           std::to_string(legend_y) +
           "\" font-family=\"sans-serif\" font-size=\"11\">" + key + "</text>\n";
    legend_y += 16.0;
  }
  svg += "</svg>\n";
  return result;
}

const std::vector<RegistryEntry>& preset_registry() {
  static const std::vector<RegistryEntry> entries = {
      {"collapse",
       "collapse run --preset {ones|digits|commas} --pe rope --lengths 16..8192",
       "final-token distance between a repeated sequence and its one-token "
       "extension decays toward zero as length grows"},
      {"separator",
       "collapse separator --lengths 64..2048 --period 3",
       "periodic separator tokens keep the extension distance measurably "
       "larger at matched lengths"},
      {"tv",
       "tv --lengths 1000,10000,100000 --k 200 --noise 0.1",
       "total variation between a softmax weighting and a k-entry "
       "perturbation of it decays like 1/n"},
      {"alt-tv",
       "alt-tv --max-n 10000",
       "the alternating two-symbol construction pins total variation at "
       "2*tanh(1/2) for every even length"},
      {"squash",
       "squash profile | squash bound-check --mode consistent",
       "the operator norm of d(output)/d(token) stays below the weighted "
       "attention-path sum bound"},
      {"limit-case",
       "limit-case --n 64 --lmax 4096",
       "averaged attention powers contract to the first-column-ones matrix "
       "whenever every later row keeps at least two routes open"},
      {"counting",
       "counting ratio-check | counting collapse-demo --precision bf16",
       "equal symbol ratios force equal class representations, and coarse "
       "storage merges neighbouring counts onto one readout"},
  };
  return entries;
}

}  // namespace clab
