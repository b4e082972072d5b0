#pragma once

// Seeded Monte Carlo ensembles over a parameter grid.
//
// Every trial is a pure function of (cell parameters, trial seed), with
// cell seed = derive_seed(master, cell) and trial seed = derive_seed(cell seed,
// trial). Trials run on a small thread pool and are folded in (cell, trial)
// order, so results do not depend on the number of threads.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "arw/carpet_hole.hpp"
#include "arw/sitewise.hpp"

namespace arw {

enum class ExperimentKind : std::uint8_t { carpet_hole, stabilize_origin };
const char* to_string(ExperimentKind k);
ExperimentKind parse_experiment_kind(const std::string& s);

struct BlockSize {
    std::int64_t a = 6;
    std::int64_t K = 36;

    bool operator==(const BlockSize&) const = default;
};

struct EnsembleSpec {
    ExperimentKind kind = ExperimentKind::carpet_hole;
    std::vector<double> lambdas{1.0};
    // carpet-hole grid
    std::vector<BlockSize> sizes{BlockSize{}};
    std::vector<int> ns{8};
    std::int64_t m_boundary = 0;  ///< extra particles at nK + a (boundary snapshots)
    // stabilize-origin grid
    std::vector<double> zetas{0.5};
    std::vector<std::int64_t> Ls{100};
    std::vector<std::uint64_t> ks{10};
    /// "bernoulli" (density zeta) or "neat" (empty on 2 neat_K Z; zeta ignored).
    std::string sampler = "bernoulli";
    std::int64_t neat_K = 3;

    std::uint64_t trials = 100;
    std::uint64_t master_seed = 1;
    unsigned threads = 1;  ///< parallelism hint; never affects results

    CheckMode check = CheckMode::automatic;
    bool trace = true;          ///< keep attempt traces in retained records
    bool keep_records = false;  ///< retain every RunRecord / odometer
    std::uint64_t budget = kDefaultToppleBudget;
};

/// Validates ranges; throws ParameterError.
void validate(const EnsembleSpec& spec);

struct CellParams {
    ExperimentKind kind = ExperimentKind::carpet_hole;
    double lambda = 1.0;
    std::int64_t a = 0;
    std::int64_t K = 0;
    int n = 0;
    double zeta = 0.0;
    std::int64_t L = 0;
};

/// Cells in grid order: lambda outermost, then (a, K), then n; or lambda,
/// then zeta, then L.
std::vector<CellParams> expand_cells(const EnsembleSpec& spec);

struct ValueEstimate {
    double value = 0.0;
    double se = 0.0;
};

struct CellSummary {
    std::size_t index = 0;
    CellParams params;
    std::uint64_t trials = 0;
    std::uint64_t completed = 0;
    // carpet-hole
    ValueEstimate p_frozen_quarter;  ///< P(Frozen >= n/4)
    ValueEstimate frozen_fraction;   ///< Frozen / n
    ValueEstimate exit_fraction;     ///< Exit / n
    std::uint64_t identity_violations = 0;
    std::uint64_t property_violations = 0;
    // stabilize-origin
    std::vector<std::uint64_t> ks;
    std::vector<ValueEstimate> activity;  ///< P(m(0) >= k) per k
    ValueEstimate odometer;
    std::uint64_t budget_exceeded = 0;

    bool aborted = false;
    std::string diagnostic;
};

struct EnsembleResult {
    EnsembleSpec spec;
    std::vector<CellSummary> cells;
    /// Per cell, per trial, when keep_records is set.
    std::vector<std::vector<RunRecord>> records;
    std::vector<std::vector<std::uint64_t>> odometers;
    double runtime_seconds = 0.0;
};

std::uint64_t cell_seed(std::uint64_t master, std::size_t cell);
std::uint64_t trial_seed(std::uint64_t cell_seed, std::uint64_t trial);

EnsembleResult run_ensemble(const EnsembleSpec& spec);

/// Mean and standard error (sample SD over sqrt(n)) of a sample.
ValueEstimate mean_se(const std::vector<double>& xs);

// ---------------------------------------------------------------------------

struct MomentEstimate {
    double theta = 0.0;
    double log_mean = 0.0;  ///< log of the sample mean of e^{theta X}
    double log_se = 0.0;    ///< log of its standard error (-inf when zero)
};

struct BlockSumRow {
    std::uint64_t ell = 0;
    std::uint64_t runs = 0;  ///< runs whose snapshot range reached L > ell
    double mean = 0.0;       ///< mean of sum_m e^{theta S(m)} 1{L(m) = ell}
    double se = 0.0;
};

struct MomentReport {
    std::vector<MomentEstimate> frozen_moments;
    double block_theta = 1.0;
    std::vector<BlockSumRow> block_sums;
    double reference = 0.0;  ///< e^3
};

/// E[e^{theta Frozen}] for each theta (log-sum-exp), and for the last block of
/// each run the sum over boundary masses m of e^{theta S(m)} 1{L(m) = ell},
/// read from the boundary snapshots. A run enters the row for ell only when
/// its snapshot range reaches L > ell, so no row is truncated.
MomentReport exponential_moment_probe(const std::vector<RunRecord>& runs,
                                      const std::vector<double>& thetas = {0.5, 1.0, 2.0, 16.0},
                                      double block_theta = 1.0);

// ---------------------------------------------------------------------------

struct PhaseGrid {
    std::vector<double> lambdas;
    std::vector<double> zetas;
    std::int64_t L = 0;
    std::uint64_t k = 0;
    std::uint64_t trials = 0;
    std::uint64_t seed = 0;
    /// estimates[i][j] for lambdas[i], zetas[j].
    std::vector<std::vector<ValueEstimate>> estimates;
};

PhaseGrid sweep_phase(const std::vector<double>& lambdas, const std::vector<double>& zetas,
                      std::int64_t L, std::uint64_t k, std::uint64_t trials, std::uint64_t seed,
                      unsigned threads = 1);

}  // namespace arw
