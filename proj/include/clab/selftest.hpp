#pragma once

#include <string>
#include <vector>

namespace clab {

struct CriterionResult {
  std::string id;     // "C1".."C14"
  std::string label;
  bool pass = false;
  double seconds = 0.0;
  std::string detail;  // the numbers backing the verdict
};

struct SelftestReport {
  std::vector<CriterionResult> results;
  bool all_pass = false;
};

// Runs the full acceptance suite end to end, writing the experiment CSVs under
// out_dir (created if missing). A criterion that throws is recorded as failed;
// the remaining criteria still run.
SelftestReport run_selftest(const std::string& out_dir);

// one line per criterion: id, PASS/FAIL, elapsed seconds, detail
std::string render_report(const SelftestReport& report);

}  // namespace clab
