#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ahocda::selfcheck {

struct CheckResult {
    std::string name;
    double measured = 0.0;
    double tolerance = 0.0;
    bool passed = false;
    std::string detail;
};

struct Options {
    std::uint64_t seed = 0;
    /// Perturbs one analytic gradient entry before the comparison, so the
    /// gradient check must fail. Used as a negative control.
    bool inject_gradient_fault = false;
};

/// Runs the numeric checks: DFT against the direct sum, Parseval, two-pattern
/// softmax retrieval, finite-difference gradients of the joint objective
/// (including the frozen-memory case) and curriculum split cardinalities.
std::vector<CheckResult> run(const Options& options = {});

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace ahocda::selfcheck
