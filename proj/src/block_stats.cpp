#include "arw/block_stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "arw/errors.hpp"

namespace arw {

double to_double(const Rational& q)
{
    return q.convert_to<double>();
}

Rational excursion_max_pmf(std::int64_t z)
{
    if (z < 1) {
        return Rational(0);
    }
    return Rational(1, z) - Rational(1, z + 1);
}

Rational excursion_max_cdf(std::int64_t z)
{
    if (z < 1) {
        return Rational(0);
    }
    return Rational(z, z + 1);
}

std::int64_t sample_excursion_max(Rng& rng)
{
    // Smallest z with z / (z + 1) > u, i.e. z > u / (1 - u).
    const double u = rng.uniform();
    const double t = std::floor(u / (1.0 - u)) + 1.0;
    if (t >= 9.0e18) {
        return std::numeric_limits<std::int64_t>::max();
    }
    return static_cast<std::int64_t>(t);
}

// ---------------------------------------------------------------------------

DiscreteLaw::DiscreteLaw(std::vector<Atom> atoms) : atoms_(std::move(atoms))
{
    std::sort(atoms_.begin(), atoms_.end(),
              [](const Atom& x, const Atom& y) { return x.value < y.value; });
    Rational acc = 0;
    for (const auto& at : atoms_) {
        if (at.mass < 0) {
            throw ParameterError("negative probability mass at " + std::to_string(at.value));
        }
        acc += at.mass;
        cumulative_.push_back(to_double(acc));
    }
}

Rational DiscreteLaw::total_mass() const
{
    Rational acc = 0;
    for (const auto& at : atoms_) {
        acc += at.mass;
    }
    return acc;
}

Rational DiscreteLaw::mean() const
{
    Rational acc = 0;
    for (const auto& at : atoms_) {
        acc += at.mass * at.value;
    }
    return acc;
}

Rational DiscreteLaw::cdf(std::int64_t x) const
{
    Rational acc = 0;
    for (const auto& at : atoms_) {
        if (at.value > x) {
            break;
        }
        acc += at.mass;
    }
    return acc;
}

std::int64_t DiscreteLaw::sample(Rng& rng) const
{
    const double u = rng.uniform() * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()),
                                         atoms_.size() - 1);
    return atoms_[k].value;
}

// ---------------------------------------------------------------------------

JumpLawSpec JumpLawSpec::make(double lambda, std::int64_t a, std::int64_t K, std::int64_t v)
{
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw ParameterError("sleep rate must be finite and non-negative");
    }
    if (a < 1 || K <= 2 * a) {
        throw ParameterError("need a >= 1 and K > 2a");
    }
    if (v < 0 || v > a) {
        throw ParameterError("hole offset v must lie in [0, a]");
    }
    JumpLawSpec spec{lambda, a, K, v};
    // Residual mass of Y~_v at -v is 1/(2(l+1) v) - delta >= 0 iff v <= K - 2a.
    if (v > K - 2 * a) {
        throw ParameterError("negative residual mass in Y~_v: need v <= K - 2a");
    }
    return spec;
}

Rational JumpLawSpec::delta() const
{
    return Rational(1) / (2 * (lambda_q() + 1) * (K - 2 * a));
}

Rational harmonic(std::int64_t v)
{
    Rational h = 0;
    for (std::int64_t k = 1; k <= v; ++k) {
        h += Rational(1, k);
    }
    return h;
}

DiscreteLaw y_law(const JumpLawSpec& spec)
{
    const Rational l = spec.lambda_q();
    const Rational half = Rational(1, 2) / (l + 1);
    std::map<std::int64_t, Rational> mass;
    mass[1] += l / (l + 1);
    mass[0] += half;
    if (spec.v == 0) {
        mass[0] += half;
    } else {
        for (std::int64_t k = 1; k < spec.v; ++k) {
            mass[-k] += half * excursion_max_pmf(k);
        }
        mass[-spec.v] += half * (1 - excursion_max_cdf(spec.v - 1));
    }
    std::vector<Atom> atoms;
    for (auto& [value, m] : mass) {
        atoms.push_back(Atom{value, m});
    }
    return DiscreteLaw(std::move(atoms));
}

DiscreteLaw y_tilde_law(const JumpLawSpec& spec)
{
    const Rational l = spec.lambda_q();
    const Rational half = Rational(1, 2) / (l + 1);
    const Rational d = spec.delta();
    std::map<std::int64_t, Rational> mass;
    mass[1] += l / (l + 1) + d;
    mass[0] += half;
    for (std::int64_t k = 1; k < spec.v; ++k) {
        mass[-k] += half * excursion_max_pmf(k);
    }
    // For v = 0 the whole left branch collapses onto 0.
    const Rational tail = spec.v == 0 ? Rational(1) : 1 - excursion_max_cdf(spec.v - 1);
    mass[-spec.v] += half * tail - d;
    std::vector<Atom> atoms;
    for (auto& [value, m] : mass) {
        atoms.push_back(Atom{value, m});
    }
    return DiscreteLaw(std::move(atoms));
}

std::int64_t sample_Y(const JumpLawSpec& spec, Rng& rng)
{
    const double p_up = spec.lambda / (spec.lambda + 1.0);
    const double p_zero = 0.5 / (spec.lambda + 1.0);
    const double u = rng.uniform();
    if (u < p_up) {
        return 1;
    }
    if (u < p_up + p_zero) {
        return 0;
    }
    return -std::min(sample_excursion_max(rng), spec.v);
}

std::int64_t sample_Y_tilde(const JumpLawSpec& spec, Rng& rng)
{
    return y_tilde_law(spec).sample(rng);
}

Drift drift(const JumpLawSpec& spec)
{
    const Rational l = spec.lambda_q();
    const Rational ey = (l - harmonic(spec.v) / 2) / (l + 1);
    return Drift{ey, ey + (spec.v + 1) * spec.delta()};
}

LargeScaleDrift large_scale_drift(double lambda, double log_a)
{
    const double lp1 = lambda + 1.0;
    const double bound_y =
        1.0 - 1.0 / lp1 - (log_a - std::log(3.0) - std::log(2.0)) / (2.0 * lp1);
    // (a + 1) delta with K = a^2 is (a + 1) / (2 (l + 1) (a^2 - 2a)).
    const double inv_a = std::exp(-log_a);
    const double correction = inv_a * (1.0 + inv_a) / (1.0 - 2.0 * inv_a) / (2.0 * lp1);
    return LargeScaleDrift{log_a, bound_y, bound_y + correction};
}

double large_scale_log_a(double lambda)
{
    // ceil(e^x) = e^x (1 + O(e^{-x})), invisible in double precision here.
    return std::log(12.0) + 100.0 * (lambda + 1.0);
}

double log_hoeffding_tail(double b, double gamma, double nu)
{
    if (!(b > 0.0) || !(gamma > 0.0)) {
        throw ParameterError("Hoeffding tail needs b > 0 and gamma > 0");
    }
    const double n = gamma * b;
    if (std::abs(n - std::round(n)) > 1e-9 * std::max(1.0, n)) {
        throw ParameterError("gamma * b must be an integer");
    }
    if (!(nu < -1.0 / gamma)) {
        throw ParameterError("Hoeffding tail needs nu < -1/gamma");
    }
    const double s = 1.0 + gamma * nu;
    return -2.0 * gamma * s * s * b;
}

double hoeffding_tail(double b, double gamma, double nu)
{
    return std::exp(log_hoeffding_tail(b, gamma, nu));
}

// ---------------------------------------------------------------------------

std::vector<std::int64_t> simulate_W(double lambda, std::size_t steps, Rng& rng)
{
    std::vector<std::int64_t> w;
    w.reserve(steps + 1);
    w.push_back(0);
    const double p_up = lambda / (lambda + 1.0);
    const double p_zero = 0.5 / (lambda + 1.0);
    for (std::size_t t = 0; t < steps; ++t) {
        const std::int64_t v = w.back();
        const double u = rng.uniform();
        std::int64_t jump;
        if (u < p_up) {
            jump = 1;
        } else if (u < p_up + p_zero) {
            jump = 0;
        } else {
            jump = -std::min(sample_excursion_max(rng), v);
        }
        w.push_back(v + jump);
    }
    return w;
}

double occupation_fraction(const std::vector<std::int64_t>& trajectory, double lo, double hi)
{
    if (trajectory.size() < 2) {
        return 0.0;
    }
    std::size_t inside = 0;
    for (std::size_t t = 1; t < trajectory.size(); ++t) {
        const auto w = static_cast<double>(trajectory[t]);
        inside += (w >= lo && w <= hi) ? 1 : 0;
    }
    return static_cast<double>(inside) / static_cast<double>(trajectory.size() - 1);
}

// ---------------------------------------------------------------------------

Estimate make_estimate(std::string name, std::uint64_t hits, std::uint64_t trials,
                       double reference, std::string reference_kind)
{
    Estimate e;
    e.name = std::move(name);
    e.trials = trials;
    e.hits = hits;
    e.reference = reference;
    e.reference_kind = std::move(reference_kind);
    if (trials > 0) {
        const double n = static_cast<double>(trials);
        e.estimate = static_cast<double>(hits) / n;
        // Sample SD of the indicator over sqrt(n).
        const double var = trials > 1 ? e.estimate * (1.0 - e.estimate) * n / (n - 1.0) : 0.0;
        e.se = std::sqrt(var / n);
    }
    e.wide_ci = trials < 30;
    return e;
}

const Estimate& HoleProcessStats::get(const std::string& name) const
{
    for (const auto& e : estimates) {
        if (e.name == name) {
            return e;
        }
    }
    throw std::out_of_range("no estimate named " + name);
}

HoleProcessStats hole_lemma_stats(const std::vector<RunRecord>& runs)
{
    HoleProcessStats rep;
    if (runs.empty()) {
        return rep;
    }
    rep.a = runs.front().params.a;
    rep.K = runs.front().params.K;
    rep.lambda = runs.front().params.lambda;
    const auto a = rep.a;
    const double ad = static_cast<double>(a);

    std::uint64_t low_prev = 0, high_after_low = 0;
    std::uint64_t all = 0, middle = 0;
    std::uint64_t windows = 0, windows_left = 0;
    std::uint64_t long_t = 0;
    std::uint64_t low_start = 0, short_t = 0;
    std::uint64_t successes = 0, lefts = 0;

    for (const auto& run : runs) {
        if (run.params.a != a || run.params.K != rep.K || run.params.lambda != rep.lambda) {
            throw ParameterError("hole statistics need runs with identical (lambda, a, K)");
        }
        std::map<int, std::vector<const AttemptRecord*>> by_block;
        for (const auto& at : run.attempts) {
            by_block[at.block].push_back(&at);
        }
        for (const auto& [block, seq] : by_block) {
            std::uint64_t prev_left = 0;
            for (std::size_t j = 0; j < seq.size(); ++j) {
                const auto& at = *seq[j];
                const auto before = static_cast<double>(at.hole_before);
                const auto after = static_cast<double>(at.hole_after);
                ++all;
                if (before <= ad / 2 || at.hole_before == a) {
                    ++low_prev;
                    high_after_low += after > ad / 2 ? 1 : 0;
                }
                middle += (after > ad / 2 && after < ad) ? 1 : 0;
                long_t += static_cast<double>(at.steps) > ad * ad * ad ? 1 : 0;
                if (before <= ad / 2) {
                    ++low_start;
                    short_t += static_cast<double>(at.steps) < ad / 2 ? 1 : 0;
                }
                if (at.outcome != Outcome::failure) {
                    ++successes;
                    lefts += at.outcome == Outcome::emit_left ? 1 : 0;
                }
                if ((at.hole_after == a) != (at.frozen_after == 1)) {
                    ++rep.frozen_iff_edge_violations;
                }
                const std::uint64_t expect =
                    prev_left + (at.outcome == Outcome::emit_left ? 1 : 0);
                if (at.left_total != expect) {
                    ++rep.tau_order_violations;
                }
                prev_left = at.left_total;
            }
            // Windows (j, j + 2] starting at j = 0 (before the first attempt).
            for (std::size_t j = 0; j + 2 <= seq.size(); ++j) {
                ++windows;
                const bool left = seq[j]->outcome == Outcome::emit_left ||
                                  seq[j + 1]->outcome == Outcome::emit_left;
                windows_left += left ? 1 : 0;
            }
        }
    }

    const double K = static_cast<double>(rep.K);
    const double tiny = std::exp(-100.0);
    rep.estimates.push_back(make_estimate("hole_high_after_low", high_after_low, low_prev,
                                          tiny, ""));
    rep.estimates.push_back(make_estimate("hole_in_middle", middle, all, tiny, ""));
    rep.estimates.push_back(
        make_estimate("left_within_two_attempts", windows_left, windows, 1.0 / 3.0, "lower"));
    rep.estimates.push_back(make_estimate("steps_above_a3", long_t, all, 1.0 / ad, "upper"));
    rep.estimates.push_back(
        make_estimate("steps_below_half_a", short_t, low_start, 1.0 / (4.0 * ad), "upper"));
    rep.estimates.push_back(make_estimate("left_given_success", lefts, successes,
                                          0.5 - ad / (2.0 * K), "lower"));
    return rep;
}

std::vector<DominancePoint> dominance_check(const std::vector<RunRecord>& runs,
                                            std::uint64_t min_samples)
{
    std::vector<DominancePoint> out;
    if (runs.empty()) {
        return out;
    }
    const auto& p = runs.front().params;
    std::map<std::int64_t, std::map<std::int64_t, std::uint64_t>> hist;
    std::map<std::int64_t, std::uint64_t> totals;
    for (const auto& run : runs) {
        for (const auto& s : run.hole_steps) {
            if (s.emitted) {
                continue;
            }
            ++hist[s.hole_before][s.delta];
            ++totals[s.hole_before];
        }
    }
    for (const auto& [v, counts] : hist) {
        const auto n = totals[v];
        if (n < min_samples) {
            continue;
        }
        const auto law = y_tilde_law(JumpLawSpec::make(p.lambda, p.a, p.K, v));
        std::uint64_t below = 0;
        for (std::int64_t x = -v; x <= 1; ++x) {
            auto it = counts.find(x);
            below += it == counts.end() ? 0 : it->second;
            const double f = static_cast<double>(below) / static_cast<double>(n);
            const double se = std::sqrt(std::max(f * (1.0 - f), 1.0 / static_cast<double>(n)) /
                                        static_cast<double>(n));
            const double ft = to_double(law.cdf(x));
            out.push_back(DominancePoint{v, x, n, ft, f, se, ft <= f + 3.0 * se});
        }
    }
    return out;
}

}  // namespace arw
