#pragma once

#include <string>
#include <vector>

namespace udslab::verify {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
};

/// Runs one named suite: "theorem1", "theorem2", "theorem3", "cases",
/// "solver", "determinism", or "all". Every criterion is deterministic
/// (pinned seeds).
std::vector<CriterionResult> run_suite(const std::string& suite);

/// Prints one pass/fail line per criterion; returns the failure count.
int print_results(const std::vector<CriterionResult>& results);

} // namespace udslab::verify
