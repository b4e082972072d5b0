#include "arw/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "arw/errors.hpp"
#include "arw/rng.hpp"

namespace arw {

const char* to_string(ExperimentKind k)
{
    return k == ExperimentKind::carpet_hole ? "carpet-hole" : "stabilize-origin";
}

ExperimentKind parse_experiment_kind(const std::string& s)
{
    if (s == "carpet-hole") {
        return ExperimentKind::carpet_hole;
    }
    if (s == "stabilize-origin") {
        return ExperimentKind::stabilize_origin;
    }
    throw ParameterError("unknown experiment kind '" + s + "'");
}

void validate(const EnsembleSpec& spec)
{
    if (spec.trials == 0) {
        throw ParameterError("trials must be positive");
    }
    if (spec.lambdas.empty()) {
        throw ParameterError("lambda list is empty");
    }
    for (double l : spec.lambdas) {
        if (!(l >= 0.0) || !std::isfinite(l)) {
            throw ParameterError("lambda must be finite and non-negative");
        }
    }
    if (spec.kind == ExperimentKind::carpet_hole) {
        if (spec.m_boundary < 0) {
            throw ParameterError("boundary mass must be non-negative");
        }
        if (spec.sizes.empty() || spec.ns.empty()) {
            throw ParameterError("carpet-hole grid needs (a, K) sizes and n values");
        }
        for (const auto& s : spec.sizes) {
            for (int n : spec.ns) {
                BlockLayout::make(n, s.K, s.a);
            }
        }
        return;
    }
    if (spec.Ls.empty() || spec.ks.empty()) {
        throw ParameterError("stabilize-origin grid needs L and k values");
    }
    for (auto L : spec.Ls) {
        if (L < 1) {
            throw ParameterError("L must be at least 1");
        }
    }
    if (spec.sampler == "bernoulli") {
        if (spec.zetas.empty()) {
            throw ParameterError("zeta list is empty");
        }
        for (double z : spec.zetas) {
            InitialSampler::bernoulli(z);
        }
    } else if (spec.sampler == "neat") {
        InitialSampler::neat(spec.neat_K);
    } else {
        throw ParameterError("unknown sampler '" + spec.sampler + "'");
    }
}

std::vector<CellParams> expand_cells(const EnsembleSpec& spec)
{
    std::vector<CellParams> cells;
    for (double lambda : spec.lambdas) {
        if (spec.kind == ExperimentKind::carpet_hole) {
            for (const auto& s : spec.sizes) {
                for (int n : spec.ns) {
                    cells.push_back(CellParams{spec.kind, lambda, s.a, s.K, n, 0.0, 0});
                }
            }
        } else {
            const std::vector<double> zetas =
                spec.sampler == "neat" ? std::vector<double>{0.0} : spec.zetas;
            for (double z : zetas) {
                for (auto L : spec.Ls) {
                    cells.push_back(CellParams{spec.kind, lambda, 0, 0, 0, z, L});
                }
            }
        }
    }
    return cells;
}

std::uint64_t cell_seed(std::uint64_t master, std::size_t cell)
{
    return derive_seed(master, cell);
}

std::uint64_t trial_seed(std::uint64_t cseed, std::uint64_t trial)
{
    return derive_seed(cseed, trial);
}

ValueEstimate mean_se(const std::vector<double>& xs)
{
    if (xs.empty()) {
        return {};
    }
    const double n = static_cast<double>(xs.size());
    double sum = 0;
    for (double x : xs) {
        sum += x;
    }
    const double mean = sum / n;
    if (xs.size() < 2) {
        return {mean, 0.0};
    }
    double ss = 0;
    for (double x : xs) {
        ss += (x - mean) * (x - mean);
    }
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

namespace {

struct TrialSlot {
    std::optional<RunRecord> record;
    std::uint64_t odometer = 0;
    bool budget_exceeded = false;
    std::string error;
};

template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn)
{
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                fn(i);
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
}

void run_trial(const EnsembleSpec& spec, const CellParams& cell, std::uint64_t seed,
               TrialSlot& slot)
{
    try {
        if (cell.kind == ExperimentKind::carpet_hole) {
            RunOptions opt;
            opt.check = spec.check;
            opt.trace = spec.trace;
            opt.throw_on_violation = false;
            opt.budget = spec.budget;
            slot.record = run_carpet_hole(CarpetParams{cell.lambda, cell.n, cell.K, cell.a, spec.m_boundary},
                                          seed, opt);
        } else {
            const auto sampler = spec.sampler == "neat" ? InitialSampler::neat(spec.neat_K)
                                                        : InitialSampler::bernoulli(cell.zeta);
            slot.odometer = odometer_at_origin(cell.lambda, sampler, cell.L, seed, spec.budget);
        }
    } catch (const BudgetExceeded& e) {
        slot.budget_exceeded = true;
        slot.error = e.what();
    } catch (const std::logic_error& e) {
        slot.error = e.what();
    }
}

void summarize_carpet(CellSummary& cs, const std::vector<TrialSlot>& slots, std::uint64_t cseed)
{
    std::vector<double> quarter, frozen, exits;
    const auto& p = cs.params;
    const double n = static_cast<double>(p.n);
    for (std::size_t t = 0; t < slots.size(); ++t) {
        const auto& s = slots[t];
        if (!s.record) {
            cs.aborted = true;
            if (cs.diagnostic.empty()) {
                cs.diagnostic = "trial " + std::to_string(t) + " (seed " +
                                std::to_string(trial_seed(cseed, t)) + "): " + s.error;
            }
            continue;
        }
        const auto& r = *s.record;
        // Conservation identities, re-checked at aggregation time.
        std::uint64_t sum_s = 0;
        for (auto x : r.S) {
            sum_s += x;
        }
        if (r.exit + r.frozen != static_cast<std::uint64_t>(p.n / 2 + r.params.m_boundary) ||
            sum_s != r.frozen) {
            ++cs.identity_violations;
        }
        if (!r.property_violations.empty()) {
            ++cs.property_violations;
            if (cs.diagnostic.empty()) {
                cs.diagnostic = "trial " + std::to_string(t) + " (seed " +
                                std::to_string(r.seed) + "): " + r.property_violations.front();
            }
        }
        ++cs.completed;
        quarter.push_back(4 * r.frozen >= static_cast<std::uint64_t>(p.n) ? 1.0 : 0.0);
        frozen.push_back(static_cast<double>(r.frozen) / n);
        exits.push_back(static_cast<double>(r.exit) / n);
    }
    if (cs.identity_violations > 0 || cs.property_violations > 0) {
        cs.aborted = true;
    }
    cs.p_frozen_quarter = mean_se(quarter);
    cs.frozen_fraction = mean_se(frozen);
    cs.exit_fraction = mean_se(exits);
}

void summarize_stabilize(CellSummary& cs, const std::vector<TrialSlot>& slots,
                         const EnsembleSpec& spec, std::uint64_t cseed)
{
    cs.ks = spec.ks;
    std::vector<std::vector<double>> hits(spec.ks.size());
    std::vector<double> odo;
    for (std::size_t t = 0; t < slots.size(); ++t) {
        const auto& s = slots[t];
        if (!s.error.empty()) {
            cs.budget_exceeded += s.budget_exceeded ? 1 : 0;
            if (!s.budget_exceeded) {
                cs.aborted = true;
            }
            if (cs.diagnostic.empty()) {
                cs.diagnostic = "trial " + std::to_string(t) + " (seed " +
                                std::to_string(trial_seed(cseed, t)) + "): " + s.error;
            }
            continue;
        }
        ++cs.completed;
        odo.push_back(static_cast<double>(s.odometer));
        for (std::size_t j = 0; j < spec.ks.size(); ++j) {
            hits[j].push_back(s.odometer >= spec.ks[j] ? 1.0 : 0.0);
        }
    }
    for (auto& h : hits) {
        cs.activity.push_back(mean_se(h));
    }
    cs.odometer = mean_se(odo);
}

}  // namespace

EnsembleResult run_ensemble(const EnsembleSpec& spec)
{
    validate(spec);
    const auto start = std::chrono::steady_clock::now();
    const auto cells = expand_cells(spec);
    const std::size_t T = spec.trials;
    std::vector<std::vector<TrialSlot>> slots(cells.size(), std::vector<TrialSlot>(T));

    parallel_for(cells.size() * T, spec.threads, [&](std::size_t task) {
        const std::size_t c = task / T;
        const std::uint64_t t = task % T;
        run_trial(spec, cells[c], trial_seed(cell_seed(spec.master_seed, c), t), slots[c][t]);
    });

    EnsembleResult out;
    out.spec = spec;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        CellSummary cs;
        cs.index = c;
        cs.params = cells[c];
        cs.trials = T;
        const auto cseed = cell_seed(spec.master_seed, c);
        if (cells[c].kind == ExperimentKind::carpet_hole) {
            summarize_carpet(cs, slots[c], cseed);
        } else {
            summarize_stabilize(cs, slots[c], spec, cseed);
        }
        out.cells.push_back(std::move(cs));
        if (spec.keep_records) {
            if (cells[c].kind == ExperimentKind::carpet_hole) {
                auto& recs = out.records.emplace_back();
                for (auto& s : slots[c]) {
                    if (s.record) {
                        recs.push_back(std::move(*s.record));
                    }
                }
            } else {
                auto& odos = out.odometers.emplace_back();
                for (const auto& s : slots[c]) {
                    odos.push_back(s.odometer);
                }
            }
        }
        slots[c].clear();
        slots[c].shrink_to_fit();
    }
    out.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

// ---------------------------------------------------------------------------

namespace {

double log_sum_exp(const std::vector<double>& xs)
{
    if (xs.empty()) {
        return -std::numeric_limits<double>::infinity();
    }
    const double m = *std::max_element(xs.begin(), xs.end());
    if (!std::isfinite(m)) {
        return m;
    }
    double s = 0;
    for (double x : xs) {
        s += std::exp(x - m);
    }
    return m + std::log(s);
}

}  // namespace

MomentReport exponential_moment_probe(const std::vector<RunRecord>& runs,
                                      const std::vector<double>& thetas, double block_theta)
{
    MomentReport rep;
    rep.reference = std::exp(3.0);
    rep.block_theta = block_theta;
    if (runs.empty()) {
        return rep;
    }
    const double N = static_cast<double>(runs.size());
    for (double theta : thetas) {
        std::vector<double> logs;
        for (const auto& r : runs) {
            logs.push_back(theta * static_cast<double>(r.frozen));
        }
        MomentEstimate m;
        m.theta = theta;
        m.log_mean = log_sum_exp(logs) - std::log(N);
        // Var = mean(e^{2x}) - mean(e^x)^2, evaluated relative to the mean.
        std::vector<double> dev;
        for (double x : logs) {
            dev.push_back(2.0 * std::log(std::abs(std::expm1(x - m.log_mean))));
        }
        const double log_ss = log_sum_exp(dev);
        m.log_se = runs.size() < 2 ? -std::numeric_limits<double>::infinity()
                                   : m.log_mean + 0.5 * (log_ss - std::log(N - 1.0) - std::log(N));
        rep.frozen_moments.push_back(m);
    }

    // Per-block sums over boundary masses. L(m) is non-decreasing in m, so a
    // run whose last snapshot has L > ell has seen every m with L(m) = ell.
    std::uint64_t ell_top = 0;
    for (const auto& r : runs) {
        if (!r.boundary_snapshots.empty()) {
            ell_top = std::max(ell_top, r.boundary_snapshots.back().left_emissions);
        }
    }
    for (std::uint64_t ell = 0; ell < ell_top; ++ell) {
        std::vector<double> sums;
        for (const auto& r : runs) {
            if (r.boundary_snapshots.empty() || r.boundary_snapshots.back().left_emissions <= ell) {
                continue;
            }
            double s = 0;
            for (const auto& snap : r.boundary_snapshots) {
                if (snap.left_emissions == ell) {
                    s += std::exp(block_theta * snap.frozen);
                }
            }
            sums.push_back(s);
        }
        const auto e = mean_se(sums);
        rep.block_sums.push_back(BlockSumRow{ell, sums.size(), e.value, e.se});
    }
    return rep;
}

// ---------------------------------------------------------------------------

PhaseGrid sweep_phase(const std::vector<double>& lambdas, const std::vector<double>& zetas,
                      std::int64_t L, std::uint64_t k, std::uint64_t trials, std::uint64_t seed,
                      unsigned threads)
{
    EnsembleSpec spec;
    spec.kind = ExperimentKind::stabilize_origin;
    spec.lambdas = lambdas;
    spec.zetas = zetas;
    spec.Ls = {L};
    spec.ks = {k};
    spec.trials = trials;
    spec.master_seed = seed;
    spec.threads = threads;
    const auto res = run_ensemble(spec);

    PhaseGrid g{lambdas, zetas, L, k, trials, seed, {}};
    g.estimates.assign(lambdas.size(), std::vector<ValueEstimate>(zetas.size()));
    for (const auto& c : res.cells) {
        if (c.aborted) {
            throw InvariantViolation("phase sweep cell " + std::to_string(c.index) +
                                     " aborted: " + c.diagnostic);
        }
        const std::size_t i = c.index / zetas.size();
        const std::size_t j = c.index % zetas.size();
        g.estimates[i][j] = c.activity.front();
    }
    return g;
}

}  // namespace arw
