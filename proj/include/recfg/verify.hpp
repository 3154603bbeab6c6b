#pragma once

#include <string>
#include <vector>

namespace recfg {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;  // measured values or the failure reason
};

// Runs the cross-module invariant suite at a scale sized for an interactive
// check (seconds, not minutes). Each entry is independent; a thrown error
// inside a check is converted into a failing result rather than aborting
// the suite.
std::vector<CheckResult> verify_suite(int workers);

// True when every entry passed.
bool all_passed(const std::vector<CheckResult>& results);

// One line per check: "PASS <name> -- <detail>".
std::string render_report(const std::vector<CheckResult>& results);

// CSV export: name,pass,detail (detail has commas replaced by ';').
std::string report_csv(const std::vector<CheckResult>& results);

}  // namespace recfg
