#pragma once

// Single-block analysis layer: the excursion-maximum law Z, the hole jump laws
// Y_v and Y~_v, their drifts (exact rationals), the Hoeffding tail formula,
// the auxiliary chain W and empirical hole-process statistics from runs.

#include <cstdint>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "arw/carpet_hole.hpp"
#include "arw/rng.hpp"

namespace arw {

using Rational = boost::multiprecision::cpp_rational;

double to_double(const Rational& q);

/// P(Z = z) = 1 / (z (z + 1)), z >= 1.
Rational excursion_max_pmf(std::int64_t z);
/// P(Z <= z) = z / (z + 1).
Rational excursion_max_cdf(std::int64_t z);
/// Inverse-CDF sample of Z.
std::int64_t sample_excursion_max(Rng& rng);

struct Atom {
    std::int64_t value;
    Rational mass;
};

/// Discrete law with exact masses and a floating-point CDF for sampling.
class DiscreteLaw {
public:
    explicit DiscreteLaw(std::vector<Atom> atoms);

    const std::vector<Atom>& atoms() const { return atoms_; }
    Rational total_mass() const;
    Rational mean() const;
    /// P(X <= x), exact.
    Rational cdf(std::int64_t x) const;
    std::int64_t sample(Rng& rng) const;

private:
    std::vector<Atom> atoms_;  // sorted by value
    std::vector<double> cumulative_;
};

/// Parameters of the jump laws for a hole at offset v from iK.
struct JumpLawSpec {
    double lambda;
    std::int64_t a;
    std::int64_t K;
    std::int64_t v;

    /// Validates v in [0, a], K > 2a and a non-negative residual mass for Y~_v.
    static JumpLawSpec make(double lambda, std::int64_t a, std::int64_t K, std::int64_t v);

    Rational lambda_q() const { return Rational(lambda); }
    /// delta = 1 / (2 (lambda + 1) (K - 2a)).
    Rational delta() const;
};

/// +1 w.p. l/(l+1); 0 w.p. (1/2)/(l+1); -min(Z, v) w.p. (1/2)/(l+1).
DiscreteLaw y_law(const JumpLawSpec& spec);
/// +1 w.p. l/(l+1) + delta; 0 w.p. (1/2)/(l+1); -k w.p. (1/2)/(l+1)/(k(k+1)) for
/// k < v; -v carries the remaining left mass minus delta.
DiscreteLaw y_tilde_law(const JumpLawSpec& spec);

/// Direct sampler of Y_v: draws Z afresh for the left branch.
std::int64_t sample_Y(const JumpLawSpec& spec, Rng& rng);
std::int64_t sample_Y_tilde(const JumpLawSpec& spec, Rng& rng);

/// H_v = sum_{k=1}^v 1/k, exact.
Rational harmonic(std::int64_t v);

struct Drift {
    Rational E_Y;
    Rational E_Ytilde;
};

/// Closed forms: E[Y_v] = (l - H_v / 2) / (l + 1), E[Y~_v] = E[Y_v] + (v + 1) delta.
Drift drift(const JumpLawSpec& spec);

/// Upper bound chain for E[Y_v], v >= a/3, evaluated from log(a) only:
/// 1 - 1/(l+1) - (log(a/3) - log 2) / (2(l+1)); the Y~ bound adds (a+1) delta
/// with K = a^2.
struct LargeScaleDrift {
    double log_a;
    double bound_Y;
    double bound_Ytilde;
};
LargeScaleDrift large_scale_drift(double lambda, double log_a);
/// log a for a = 12 ceil(e^{100 (lambda + 1)}), to double precision.
double large_scale_log_a(double lambda);

/// exp(-2 gamma (1 + gamma nu)^2 b). Requires b > 0, gamma > 0, gamma b integral
/// and nu < -1/gamma.
double hoeffding_tail(double b, double gamma, double nu);
double log_hoeffding_tail(double b, double gamma, double nu);

/// Auxiliary chain: W_0 = 0, W_{t+1} - W_t ~ Y_{W_t}. Returns W_0..W_steps.
std::vector<std::int64_t> simulate_W(double lambda, std::size_t steps, Rng& rng);
/// Fraction of times t >= 1 with lo <= W_t <= hi.
double occupation_fraction(const std::vector<std::int64_t>& trajectory, double lo, double hi);

struct Estimate {
    std::string name;
    std::uint64_t trials = 0;
    std::uint64_t hits = 0;
    double estimate = 0.0;
    double se = 0.0;
    double reference = 0.0;
    std::string reference_kind;  ///< "upper", "lower" or "" (report only)
    bool wide_ci = false;        ///< fewer than 30 trials
};

Estimate make_estimate(std::string name, std::uint64_t hits, std::uint64_t trials,
                       double reference, std::string reference_kind);

struct HoleProcessStats {
    std::int64_t a = 0;
    std::int64_t K = 0;
    double lambda = 0.0;
    std::vector<Estimate> estimates;
    /// Attempts where Hole(j) = a and S(j) = 1 disagree (must be 0).
    std::uint64_t frozen_iff_edge_violations = 0;
    /// Blocks whose L(j) is not a unit-step counter (must be 0).
    std::uint64_t tau_order_violations = 0;

    const Estimate& get(const std::string& name) const;
};

/// Pools the per-block attempt sequences of all runs. Records must carry
/// attempt traces and share (lambda, a, K).
HoleProcessStats hole_lemma_stats(const std::vector<RunRecord>& runs);

struct DominancePoint {
    std::int64_t v;
    std::int64_t x;
    std::uint64_t samples;
    double cdf_tilde;
    double cdf_empirical;
    double se;
    bool ok;  ///< cdf_tilde <= cdf_empirical + 3 se
};

/// Compares the CDF of Y~_v with the empirical CDF of non-emitting hole steps
/// from hole offset v, for every v with at least `min_samples` steps.
std::vector<DominancePoint> dominance_check(const std::vector<RunRecord>& runs,
                                            std::uint64_t min_samples = 200);

}  // namespace arw
