#pragma once

// Site-wise representation of Activated Random Walk on a finite interval of Z.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "arw/errors.hpp"
#include "arw/rng.hpp"

namespace arw {

using Site = std::int64_t;

/// Occupation of one site: empty, a single sleeping particle, or n >= 1 active.
class SiteState {
public:
    constexpr SiteState() = default;

    static constexpr SiteState empty() { return SiteState{0}; }
    static constexpr SiteState sleeping() { return SiteState{kSleeping}; }
    static SiteState active(std::int32_t count)
    {
        if (count < 1) {
            throw ParameterError("active site needs at least one particle");
        }
        return SiteState{count};
    }

    constexpr bool is_empty() const { return raw_ == 0; }
    constexpr bool is_sleeping() const { return raw_ == kSleeping; }
    constexpr bool is_active() const { return raw_ > 0; }
    constexpr bool is_stable() const { return raw_ <= 0; }

    /// Number of particles present, sleeping or not.
    constexpr std::int32_t particles() const { return raw_ == kSleeping ? 1 : raw_; }
    constexpr std::int32_t active_count() const { return raw_ > 0 ? raw_ : 0; }

    /// Arrival of one active particle; a sleeping particle is woken (s + 1 = 2).
    constexpr void receive() { raw_ = raw_ == kSleeping ? 2 : raw_ + 1; }
    /// Departure of one active particle.
    constexpr void release() { --raw_; }
    constexpr void fall_asleep() { raw_ = kSleeping; }

    constexpr bool operator==(const SiteState&) const = default;

    std::string to_string() const;

private:
    static constexpr std::int32_t kSleeping = -1;
    explicit constexpr SiteState(std::int32_t raw) : raw_(raw) {}

    std::int32_t raw_ = 0;
};

enum class Instruction : std::uint8_t { step_right, step_left, sleep };

/// Which stack of a site is read. Transit-region sites carry two stacks.
enum class Lane : std::uint8_t { single = 0, left = 1, right = 2 };

const char* to_string(Instruction ins);
const char* to_string(Lane lane);

/// Three-point instruction law for sleep rate `lambda`.
class InstructionLaw {
public:
    explicit InstructionLaw(double lambda);

    double lambda() const { return lambda_; }
    double p_right() const { return p_step_; }
    double p_left() const { return p_step_; }
    double p_sleep() const { return 1.0 - 2.0 * p_step_; }

    /// Maps u in [0, 1) to an instruction: [0, p) right, [p, 2p) left, rest sleep.
    Instruction from_unit(double u) const
    {
        if (u < p_step_) {
            return Instruction::step_right;
        }
        if (u < 2.0 * p_step_) {
            return Instruction::step_left;
        }
        return Instruction::sleep;
    }

    Instruction sample(Rng& rng) const { return from_unit(rng.uniform()); }

private:
    double lambda_;
    double p_step_;
};

/// Convenience form of InstructionLaw::sample.
Instruction sample_instruction(double lambda, Rng& rng);

/// Lazily generated instruction stacks with consumption cursors.
///
/// The k-th instruction of (site, lane) is a pure function of
/// (seed, site, lane, k), so two systems built from the same seed and law
/// hand out the same instructions regardless of their interval.
class StackSystem {
public:
    StackSystem(std::uint64_t seed, double lambda, Site lo, Site hi);

    /// Instruction at (site, lane, index) without consuming it.
    Instruction peek(Site x, Lane lane, std::uint64_t index) const;
    /// Consumes and returns the next instruction of (site, lane).
    Instruction next(Site x, Lane lane);
    /// Number of instructions consumed so far from (site, lane).
    std::uint64_t cursor(Site x, Lane lane) const;

    std::uint64_t seed() const { return seed_; }
    const InstructionLaw& law() const { return law_; }
    Site lo() const { return lo_; }
    Site hi() const { return hi_; }

private:
    std::size_t slot(Site x, Lane lane) const;

    std::uint64_t seed_;
    InstructionLaw law_;
    Site lo_;
    Site hi_;
    std::vector<std::uint64_t> cursors_;
};

enum class BoundaryPolicy : std::uint8_t { absorb, closed };

/// Particle configuration on [lo, hi].
///
/// Under `absorb`, a particle stepping outside the interval is removed and
/// tallied on that side. Under `closed`, such steps are suppressed.
class Configuration {
public:
    Configuration(Site lo, Site hi, BoundaryPolicy policy = BoundaryPolicy::absorb);

    Site lo() const { return lo_; }
    Site hi() const { return hi_; }
    BoundaryPolicy policy() const { return policy_; }
    bool contains(Site x) const { return x >= lo_ && x <= hi_; }

    const SiteState& operator[](Site x) const { return states_[index(x)]; }
    SiteState& operator[](Site x) { return states_[index(x)]; }
    const std::vector<SiteState>& states() const { return states_; }

    void set(Site x, SiteState s) { states_[index(x)] = s; }
    /// Adds `count` active particles at x (waking a sleeping particle).
    void add_active(Site x, std::int32_t count);

    std::uint64_t exited_left() const { return exited_left_; }
    std::uint64_t exited_right() const { return exited_right_; }
    std::uint64_t exited() const { return exited_left_ + exited_right_; }
    void note_exit(bool left) { ++(left ? exited_left_ : exited_right_); }

    std::uint64_t particles_inside() const;
    /// Particles inside plus particles absorbed at either side.
    std::uint64_t total_mass() const { return particles_inside() + exited(); }
    bool is_stable() const;

    bool operator==(const Configuration&) const = default;

    std::string to_string() const;

private:
    std::size_t index(Site x) const;

    Site lo_;
    Site hi_;
    BoundaryPolicy policy_;
    std::vector<SiteState> states_;
    std::uint64_t exited_left_ = 0;
    std::uint64_t exited_right_ = 0;
};

/// Number of topplings performed at each site of [lo, hi].
class Odometer {
public:
    Odometer(Site lo, Site hi) : lo_(lo), counts_(static_cast<std::size_t>(hi - lo + 1), 0) {}

    std::uint64_t at(Site x) const { return counts_.at(static_cast<std::size_t>(x - lo_)); }
    void increment(Site x) { ++counts_.at(static_cast<std::size_t>(x - lo_)); }
    std::uint64_t total() const;
    const std::vector<std::uint64_t>& counts() const { return counts_; }
    Site lo() const { return lo_; }

    bool operator==(const Odometer&) const = default;

private:
    Site lo_;
    std::vector<std::uint64_t> counts_;
};

struct ToppleResult {
    Instruction instruction;
    /// Destination of the moved particle, if a step happened.
    std::optional<Site> moved_to;
    bool exited = false;
};

/// Legal toppling of x: applies the next unused instruction of (x, lane).
/// Throws IllegalToppling if x is stable.
ToppleResult topple(Configuration& config, StackSystem& stacks, Site x,
                    Lane lane = Lane::single);

enum class ToppleOrder : std::uint8_t {
    leftmost,  ///< smallest unstable site first
    random,    ///< uniformly random unstable site, seeded
    worklist,  ///< last-in first-out, toppling a site until it is stable
};

struct OrderPolicy {
    ToppleOrder order = ToppleOrder::worklist;
    std::uint64_t seed = 0;
};

inline constexpr std::uint64_t kDefaultToppleBudget = 1'000'000'000ULL;

struct Stabilization {
    Odometer odometer;
    Configuration config;
    std::uint64_t topplings = 0;
};

/// Thrown when the budget runs out; carries the partial state.
class StabilizationBudgetExceeded : public BudgetExceeded {
public:
    StabilizationBudgetExceeded(Stabilization partial);
    const Stabilization& partial() const { return partial_; }

private:
    Stabilization partial_;
};

/// Topples unstable sites in the order given by `policy` until the interval
/// is stable. Stacks are consumed in place.
Stabilization stabilize(Configuration config, StackSystem& stacks, OrderPolicy policy = {},
                        std::uint64_t budget = kDefaultToppleBudget);

/// I.i.d. initial occupation sampler.
///
/// `bernoulli`: Bernoulli(zeta) for zeta <= 1, 1 + Bernoulli(zeta - 1) for
/// zeta in (1, 2]. `neat`: one particle everywhere except sites of 2K Z.
struct InitialSampler {
    enum class Kind : std::uint8_t { bernoulli, neat };
    Kind kind = Kind::bernoulli;
    double zeta = 0.0;
    std::int64_t neat_K = 0;

    static InitialSampler bernoulli(double zeta);
    static InitialSampler neat(std::int64_t K);

    Configuration sample(Site lo, Site hi, Rng& rng) const;
};

/// Stabilizes [-L, L] from a sampled configuration and returns the number of
/// topplings at the origin. Uses derive_seed(seed, 1) for the configuration
/// and derive_seed(seed, 2) for the stacks.
std::uint64_t odometer_at_origin(double lambda, const InitialSampler& sampler, Site half_width,
                                 std::uint64_t seed,
                                 std::uint64_t budget = kDefaultToppleBudget);

}  // namespace arw
