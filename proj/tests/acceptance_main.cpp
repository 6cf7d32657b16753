// Runs the full acceptance suite and prints one verdict line per criterion.
// Exit status 0 only when every criterion passes.
#include <cstdio>

#include "clab/selftest.hpp"

int main() {
  const clab::SelftestReport report = clab::run_selftest("acceptance_out");
  std::fputs(clab::render_report(report).c_str(), stdout);
  std::puts(report.all_pass ? "acceptance: PASS" : "acceptance: FAIL");
  return report.all_pass ? 0 : 1;
}
