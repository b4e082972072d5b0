#include "arw/acceptance.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "arw/block_stats.hpp"
#include "arw/carpet_hole.hpp"
#include "arw/ensemble.hpp"
#include "arw/record_io.hpp"
#include "arw/rng.hpp"
#include "arw/sitewise.hpp"

namespace arw {

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt(const char* f, double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

// Independent SRW excursion: first step +-1, then walk until back at 0 or
// until |x| reaches the cap. Returns the largest |x| reached.
std::int64_t srw_excursion_max(Rng& rng, std::int64_t cap)
{
    std::int64_t x = (rng() >> 63) != 0 ? 1 : -1;
    std::int64_t best = 1;
    while (x != 0 && best < cap) {
        x += (rng() >> 63) != 0 ? 1 : -1;
        best = std::max<std::int64_t>(best, x < 0 ? -x : x);
    }
    return best;
}

// --------------------------------------------------------------------------

CriterionResult abelian(const AcceptanceOptions& o)
{
    CriterionResult r{1, "abelian property", false, "", 0, 30};
    const int configs = o.quick ? 50 : 200;
    const int orders = 50;
    Rng rng(derive_seed(0xab, 1));
    const std::array<double, 5> lambdas{0.2, 0.5, 1.0, 2.0, 5.0};
    int mismatches = 0;
    std::uint64_t topplings = 0;
    for (int c = 0; c < configs; ++c) {
        const Site len = 1 + static_cast<Site>(rng.below(12));
        Configuration start(0, len - 1);
        const auto particles = 1 + rng.below(6);
        for (std::uint64_t p = 0; p < particles; ++p) {
            start.add_active(static_cast<Site>(rng.below(static_cast<std::uint64_t>(len))), 1);
        }
        const double lambda = lambdas[rng.below(lambdas.size())];
        const StackSystem stacks(rng(), lambda, 0, len - 1);
        StackSystem s0 = stacks;
        const auto ref = stabilize(start, s0, {ToppleOrder::leftmost, 0});
        topplings += ref.topplings;
        for (int k = 0; k < orders; ++k) {
            StackSystem s = stacks;
            const auto res = stabilize(start, s, {ToppleOrder::random, rng()});
            if (!(res.config == ref.config) || !(res.odometer == ref.odometer)) {
                ++mismatches;
            }
        }
    }
    r.pass = mismatches == 0;
    r.detail = std::to_string(configs) + " configurations x " + std::to_string(orders) +
               " random orders vs leftmost, " + std::to_string(mismatches) +
               " mismatches, " + std::to_string(topplings) + " reference topplings";
    return r;
}

const EnsembleResult& conservation_ensemble(const AcceptanceOptions& o, double& seconds)
{
    static std::map<bool, std::pair<EnsembleResult, double>> cache;
    auto it = cache.find(o.quick);
    if (it == cache.end()) {
        const auto t0 = Clock::now();
        EnsembleSpec spec;
        spec.kind = ExperimentKind::carpet_hole;
        spec.lambdas = {0.0, 0.2, 1.0, 5.0};
        spec.sizes.clear();
        for (std::int64_t a = 3; a <= 6; ++a) {
            spec.sizes.push_back(BlockSize{a, a * a});
        }
        spec.ns = {4, 8, 16, 32};
        spec.trials = o.quick ? 4 : 16;
        spec.master_seed = 0xc0;
        spec.threads = o.threads;
        spec.check = CheckMode::on;
        spec.trace = false;
        auto res = run_ensemble(spec);
        const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
        it = cache.emplace(o.quick, std::make_pair(std::move(res), dt)).first;
    }
    seconds = it->second.second;
    return it->second.first;
}

CriterionResult conservation(const AcceptanceOptions& o)
{
    CriterionResult r{2, "conservation identities", false, "", 0, 120};
    double secs = 0;
    const auto& res = conservation_ensemble(o, secs);
    std::uint64_t runs = 0, violations = 0, aborted = 0;
    for (const auto& c : res.cells) {
        runs += c.completed;
        violations += c.identity_violations;
        aborted += c.aborted && c.property_violations == 0 && c.identity_violations == 0 ? 1 : 0;
    }
    r.pass = violations == 0 && aborted == 0 && runs >= (o.quick ? 256u : 1000u);
    r.seconds = secs;
    r.detail = std::to_string(runs) + " runs over " + std::to_string(res.cells.size()) +
               " cells, " + std::to_string(violations) +
               " violations of Exit + Frozen = n/2 or Frozen = sum S";
    if (aborted > 0) {
        r.detail += ", " + std::to_string(aborted) + " cells aborted";
    }
    return r;
}

CriterionResult properties(const AcceptanceOptions& o)
{
    CriterionResult r{3, "P1-P9 after every attempt", false, "", 0, 120};
    double secs = 0;
    const auto& res = conservation_ensemble(o, secs);
    std::uint64_t runs = 0, bad = 0;
    std::string first;
    for (const auto& c : res.cells) {
        runs += c.completed;
        bad += c.property_violations;
        if (c.property_violations > 0 && first.empty()) {
            first = c.diagnostic;
        }
    }
    r.pass = bad == 0 && runs > 0;
    r.seconds = secs;
    r.detail = std::to_string(runs) + " checked runs (shared ensemble), " + std::to_string(bad) +
               " with violations" + (first.empty() ? "" : ": " + first);
    return r;
}

CriterionResult replay(const AcceptanceOptions& o)
{
    CriterionResult r{4, "mass-balance replay", false, "", 0, 120};
    const int runs = o.quick ? 30 : 100;
    const std::array<double, 3> lambdas{0.2, 1.0, 5.0};
    const std::array<int, 3> ns{4, 8, 16};
    int failures = 0;
    std::string first;
    std::uint64_t blocks = 0;
    for (int k = 0; k < runs; ++k) {
        const std::int64_t a = 3 + k % 4;
        const CarpetParams p{lambdas[static_cast<std::size_t>(k / 4) % 3], ns[static_cast<std::size_t>(k / 12) % 3], a * a, a, 0};
        const auto rep = mass_balance_replay(p, derive_seed(0x4e, k));
        blocks += static_cast<std::uint64_t>(p.n);
        if (!rep.ok()) {
            ++failures;
            if (first.empty()) {
                first = rep.describe();
            }
        }
    }
    r.pass = failures == 0;
    r.detail = std::to_string(runs) + " runs, " + std::to_string(blocks) + " block replays, " +
               std::to_string(failures) + " failures" + (first.empty() ? "" : ": " + first);
    return r;
}

CriterionResult excursion_law(const AcceptanceOptions&)
{
    CriterionResult r{5, "excursion-max law", false, "", 0, 60};
    const int trials = 1'000'000;
    std::array<std::uint64_t, 12> direct{}, sampled{};
    Rng r1(derive_seed(0x5a, 1)), r2(derive_seed(0x5a, 2));
    for (int t = 0; t < trials; ++t) {
        ++direct[static_cast<std::size_t>(srw_excursion_max(r1, 11))];
        ++sampled[static_cast<std::size_t>(std::min<std::int64_t>(sample_excursion_max(r2), 11))];
    }
    double worst = 0;
    for (std::int64_t z = 1; z <= 10; ++z) {
        const double p = 1.0 / static_cast<double>(z * (z + 1));
        const double se = std::sqrt(p * (1 - p) / trials);
        for (const auto* h : {&direct, &sampled}) {
            const double f = static_cast<double>((*h)[static_cast<std::size_t>(z)]) / trials;
            worst = std::max(worst, std::abs(f - p) / se);
        }
    }
    r.pass = worst < 4.0;
    r.detail = "10^6 direct excursions and 10^6 inverse-CDF draws, bins z = 1..10, max |z-score| " +
               fmt("%.2f", worst) + " (limit 4)";
    return r;
}

CriterionResult drift_identities(const AcceptanceOptions& o)
{
    CriterionResult r{6, "drift identities", false, "", 0, 60};
    int exact_checks = 0, exact_fail = 0;
    for (double lambda : {0.0, 0.2, 0.5, 1.0, 2.0, 5.0}) {
        for (std::int64_t a : {3, 4, 6, 12, 24, 48}) {
            for (std::int64_t v = 0; v <= a; ++v) {
                const auto spec = JumpLawSpec::make(lambda, a, a * a, v);
                const auto d = drift(spec);
                ++exact_checks;
                if (d.E_Ytilde - d.E_Y != (v + 1) * spec.delta() ||
                    y_law(spec).total_mass() != 1 || y_tilde_law(spec).total_mass() != 1 ||
                    y_law(spec).mean() != d.E_Y || y_tilde_law(spec).mean() != d.E_Ytilde) {
                    ++exact_fail;
                }
            }
        }
    }
    const int samples = o.quick ? 200'000 : 1'000'000;
    double worst = 0;
    int cases = 0;
    for (auto [lambda, a, v] : {std::tuple{0.2, 6, 6}, std::tuple{1.0, 6, 2}, std::tuple{5.0, 12, 4},
                                std::tuple{0.2, 48, 16}}) {
        const auto spec = JumpLawSpec::make(lambda, a, a * a, v);
        const auto d = drift(spec);
        const auto law = y_tilde_law(spec);
        Rng rng(derive_seed(0x6d, a, v));
        std::vector<double> ys, yts;
        for (int k = 0; k < samples; ++k) {
            ys.push_back(static_cast<double>(sample_Y(spec, rng)));
            yts.push_back(static_cast<double>(law.sample(rng)));
        }
        const auto my = mean_se(ys), myt = mean_se(yts);
        worst = std::max(worst, std::abs(my.value - to_double(d.E_Y)) / my.se);
        worst = std::max(worst, std::abs(myt.value - to_double(d.E_Ytilde)) / myt.se);
        ++cases;
    }
    double chain_max = -1e300;
    for (double lambda : {1.0, 2.0, 5.0}) {
        const auto b = large_scale_drift(lambda, large_scale_log_a(lambda));
        chain_max = std::max({chain_max, b.bound_Y, b.bound_Ytilde});
    }
    r.pass = exact_fail == 0 && worst < 4.0 && chain_max <= -48.0;
    r.detail = std::to_string(exact_checks) + " exact rational identities (" +
               std::to_string(exact_fail) + " failed); " + std::to_string(cases) +
               " sampler pairs, max |z| " + fmt("%.2f", worst) +
               "; large-scale bound chain max " + fmt("%.3f", chain_max) + " (<= -48)";
    return r;
}

CriterionResult hoeffding(const AcceptanceOptions&)
{
    CriterionResult r{7, "Hoeffding formula", false, "", 0, 0};
    int checked = 0, bad = 0;
    double worst_rel = 0;
    for (double b : {1.0, 2.0, 6.5, 10.0}) {
        for (double gamma : {0.5, 1.0, 2.0}) {
            if (std::abs(gamma * b - std::round(gamma * b)) > 0) {
                continue;
            }
            for (double nu : {-2.5, -5.0, -40.0}) {
                if (!(nu < -1.0 / gamma)) {
                    continue;
                }
                const double want = std::exp(-2.0 * gamma * std::pow(1.0 + gamma * nu, 2) * b);
                const double got = hoeffding_tail(b, gamma, nu);
                const double rel = want == 0.0 ? std::abs(got) : std::abs(got - want) / want;
                worst_rel = std::max(worst_rel, rel);
                ++checked;
            }
        }
    }
    int instances = 0;
    for (std::int64_t a = 12; a <= 10'000; ++a) {
        const double A = static_cast<double>(a);
        if (a % 6 == 0) {
            ++instances;
            bad += log_hoeffding_tail(A / 6.0, 1.0, -40.0) <= -A ? 0 : 1;
        }
        if (a % 2 == 0) {
            ++instances;
            bad += log_hoeffding_tail(2.0 * A / 3.0, 0.75, -40.0) <= -A ? 0 : 1;
        }
    }
    r.pass = worst_rel < 1e-12 && bad == 0;
    r.detail = std::to_string(checked) + " formula evaluations (max rel err " +
               fmt("%.1e", worst_rel) + "); " + std::to_string(instances) +
               " instances a in [12, 10^4] with integral gamma*b, " + std::to_string(bad) +
               " above e^-a";
    return r;
}

CriterionResult gamblers_ruin(const AcceptanceOptions& o)
{
    CriterionResult r{8, "left emission within two attempts", false, "", 0, 120};
    const std::uint64_t target = o.quick ? 10'000 : 40'000;
    std::vector<RunRecord> runs;
    RunOptions opt;
    opt.check = CheckMode::off;
    std::uint64_t attempts = 0;
    for (std::uint64_t s = 0; attempts < target; ++s) {
        runs.push_back(run_carpet_hole(CarpetParams{0.5, 16, 36, 6, 0}, derive_seed(0x8b, s), opt));
        attempts += runs.back().attempts.size();
    }
    const auto stats = hole_lemma_stats(runs);
    const auto& e = stats.get("left_within_two_attempts");
    r.pass = attempts >= 10'000 && e.estimate >= 1.0 / 3.0 - 3.0 * e.se;
    r.detail = std::to_string(attempts) + " attempts in " + std::to_string(runs.size()) +
               " runs, " + std::to_string(e.trials) + " windows, frequency " +
               fmt("%.4f", e.estimate) + " +- " + fmt("%.4f", e.se) + " (>= 1/3 - 3 SE)";
    return r;
}

CriterionResult determinism(const AcceptanceOptions&)
{
    CriterionResult r{9, "parallel determinism", false, "", 0, 0};
    auto csv = [](const EnsembleSpec& spec) {
        std::ostringstream os;
        OutputMeta meta{"acceptance", {{"experiment", to_string(spec.kind)}}, spec.master_seed};
        write_summary_csv(os, run_ensemble(spec), meta);
        return os.str();
    };
    EnsembleSpec carpet;
    carpet.lambdas = {0.2, 1.0};
    carpet.sizes = {BlockSize{4, 16}, BlockSize{5, 25}};
    carpet.ns = {4, 8};
    carpet.trials = 24;
    carpet.master_seed = 0x9d;
    carpet.check = CheckMode::off;
    EnsembleSpec stab;
    stab.kind = ExperimentKind::stabilize_origin;
    stab.lambdas = {0.5, 2.0};
    stab.zetas = {0.3, 0.7};
    stab.Ls = {40};
    stab.ks = {5, 10};
    stab.trials = 40;
    stab.master_seed = 0x9e;
    bool same = true;
    std::size_t bytes = 0;
    for (auto spec : {carpet, stab}) {
        spec.threads = 1;
        const auto one = csv(spec);
        spec.threads = 8;
        const auto eight = csv(spec);
        same = same && one == eight;
        bytes += one.size();
    }
    r.pass = same;
    r.detail = std::string("carpet-hole and stabilize-origin summaries at 1 and 8 threads ") +
               (same ? "byte-identical" : "DIFFER") + " (" + std::to_string(bytes) + " bytes)";
    return r;
}

bool non_increasing(const ValueEstimate& prev, const ValueEstimate& next)
{
    return next.value <= prev.value + 3.0 * std::hypot(prev.se, next.se);
}

CriterionResult decay_shape(const AcceptanceOptions& o)
{
    CriterionResult r{10, "desk-scale decay shape", false, "", 0, 180};
    EnsembleSpec spec;
    spec.lambdas = {0.1};
    spec.sizes = {BlockSize{6, 36}};
    spec.ns = {8, 16, 32};
    spec.trials = o.quick ? 60 : 300;
    spec.master_seed = 0x10a;
    spec.threads = o.threads;
    spec.check = CheckMode::off;
    const auto res = run_ensemble(spec);
    bool ok = true;
    std::string d;
    for (std::size_t i = 0; i < res.cells.size(); ++i) {
        const auto& c = res.cells[i];
        ok = ok && !c.aborted && c.identity_violations == 0;
        if (i > 0) {
            ok = ok && non_increasing(res.cells[i - 1].p_frozen_quarter, c.p_frozen_quarter);
        }
        d += (i ? "; " : "") + std::string("n=") + std::to_string(c.params.n) + " P=" +
             fmt("%.4f", c.p_frozen_quarter.value) + "+-" + fmt("%.4f", c.p_frozen_quarter.se) +
             " Frozen/n=" + fmt("%.4f", c.frozen_fraction.value);
    }
    r.pass = ok;
    r.detail = std::to_string(spec.trials) + " trials per n; " + d;
    return r;
}

CriterionResult phase_sweep(const AcceptanceOptions& o)
{
    CriterionResult r{11, "phase-sweep monotonicity", false, "", 0, 300};
    std::vector<double> zetas;
    for (int k = 1; k <= 9; ++k) {
        zetas.push_back(k / 10.0);
    }
    const auto g = sweep_phase({0.2, 2.0}, zetas, 200, 10, o.quick ? 40 : 200, 0x11b, o.threads);
    int breaks = 0;
    std::string d;
    for (std::size_t i = 0; i < g.lambdas.size(); ++i) {
        d += (i ? "; " : "") + std::string("lambda=") + fmt("%g", g.lambdas[i]) + ":";
        for (std::size_t j = 0; j < zetas.size(); ++j) {
            d += " " + fmt("%.2f", g.estimates[i][j].value);
            if (j > 0 && !non_increasing(g.estimates[i][j], g.estimates[i][j - 1])) {
                ++breaks;
            }
        }
    }
    r.pass = breaks == 0;
    r.detail = std::to_string(g.trials) + " trials per cell, L=200, k=10, " +
               std::to_string(breaks) + " monotonicity breaks; " + d;
    return r;
}

}  // namespace

int acceptance_criteria_count()
{
    return 11;
}

CriterionResult run_criterion(int id, const AcceptanceOptions& options)
{
    using Fn = CriterionResult (*)(const AcceptanceOptions&);
    static const std::array<Fn, 11> table{abelian,  conservation,  properties,   replay,
                                          excursion_law, drift_identities, hoeffding,
                                          gamblers_ruin, determinism, decay_shape, phase_sweep};
    const auto t0 = Clock::now();
    auto r = table.at(static_cast<std::size_t>(id - 1))(options);
    const double dt = std::chrono::duration<double>(Clock::now() - t0).count();
    if (r.seconds == 0.0) {
        r.seconds = dt;
    }
    if (r.limit_seconds > 0 && r.seconds >= r.limit_seconds) {
        r.pass = false;
        r.detail += "; exceeded the " + fmt("%.0f", r.limit_seconds) + " s limit";
    }
    return r;
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options,
                                            const std::function<void(const CriterionResult&)>& on_result)
{
    std::vector<CriterionResult> out;
    for (int id = 1; id <= acceptance_criteria_count(); ++id) {
        out.push_back(run_criterion(id, options));
        if (on_result) {
            on_result(out.back());
        }
    }
    return out;
}

std::string format_result(const CriterionResult& r)
{
    std::string s = r.pass ? "PASS" : "FAIL";
    s += " [" + std::to_string(r.id) + "] " + r.name + " (" + fmt("%.1f", r.seconds) + " s";
    if (r.limit_seconds > 0) {
        s += " / " + fmt("%.0f", r.limit_seconds) + " s";
    }
    s += "): " + r.detail;
    return s;
}

}  // namespace arw
