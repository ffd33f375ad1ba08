// Runs the acceptance suite, one line per criterion. Failing metrics are
// listed under their criterion.

#include <cstdio>
#include <cstdlib>

#include "fpb/validation.hpp"

int main() {
  fpb::ValidationConfig cfg;
  if (const char* s = std::getenv("FPB_SEED")) cfg.seed = std::strtoull(s, nullptr, 10);
  auto report = fpb::run_validation(cfg);
  for (const auto& c : report.checks) {
    std::printf("criterion %d %-34s %s  (%.1fs, budget %.0fs)\n", c.id, c.name.c_str(), c.pass ? "PASS" : "FAIL",
                c.seconds, c.budget);
    if (!c.error.empty()) std::printf("    error: %s\n", c.error.c_str());
    for (const auto& m : c.metrics) {
      if (m.pass) continue;
      if (m.rule == "+-") {
        std::printf("    %s: %.6g, expected %.6g +- %.3g\n", m.name.c_str(), m.value, m.expected, m.tolerance);
      } else {
        std::printf("    %s: %.6g, required %s %.3g\n", m.name.c_str(), m.value, m.rule.c_str(), m.expected);
      }
    }
  }
  std::printf("acceptance %s (%.1fs)\n", report.pass() ? "PASS" : "FAIL", report.seconds);
  return report.pass() ? 0 : 1;
}
