#pragma once

// Acceptance suite: eleven end-to-end criteria, each with its own tolerance
// and wall-clock limit. Shared by the acceptance test binary and `arw verify`.

#include <functional>
#include <string>
#include <vector>

namespace arw {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
    double limit_seconds = 0.0;  ///< 0 when no runtime bound applies
};

struct AcceptanceOptions {
    /// Smaller ensembles for a fast smoke run; tolerances are unchanged.
    bool quick = false;
    unsigned threads = 1;
};

int acceptance_criteria_count();

CriterionResult run_criterion(int id, const AcceptanceOptions& options);

/// Runs criteria 1..N in order, calling `on_result` after each one.
std::vector<CriterionResult>
run_acceptance(const AcceptanceOptions& options,
               const std::function<void(const CriterionResult&)>& on_result = {});

/// "PASS [3] name (1.2 s): detail"
std::string format_result(const CriterionResult& r);

}  // namespace arw
