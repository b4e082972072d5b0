#include "arw/sitewise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace arw {

std::string SiteState::to_string() const
{
    if (is_sleeping()) {
        return "s";
    }
    return std::to_string(raw_);
}

const char* to_string(Instruction ins)
{
    switch (ins) {
    case Instruction::step_right:
        return "R";
    case Instruction::step_left:
        return "L";
    case Instruction::sleep:
        return "S";
    }
    return "?";
}

const char* to_string(Lane lane)
{
    switch (lane) {
    case Lane::single:
        return "single";
    case Lane::left:
        return "L";
    case Lane::right:
        return "R";
    }
    return "?";
}

InstructionLaw::InstructionLaw(double lambda) : lambda_(lambda)
{
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw ParameterError("sleep rate must be finite and non-negative");
    }
    p_step_ = 1.0 / (2.0 * (1.0 + lambda));
}

Instruction sample_instruction(double lambda, Rng& rng)
{
    return InstructionLaw(lambda).sample(rng);
}

// ---------------------------------------------------------------------------

StackSystem::StackSystem(std::uint64_t seed, double lambda, Site lo, Site hi)
    : seed_(seed), law_(lambda), lo_(lo), hi_(hi)
{
    if (hi < lo) {
        throw ParameterError("empty stack interval");
    }
    cursors_.assign(static_cast<std::size_t>(hi - lo + 1) * 3, 0);
}

std::size_t StackSystem::slot(Site x, Lane lane) const
{
    if (x < lo_ || x > hi_) {
        throw ParameterError("site " + std::to_string(x) + " outside stack interval");
    }
    return static_cast<std::size_t>(x - lo_) * 3 + static_cast<std::size_t>(lane);
}

Instruction StackSystem::peek(Site x, Lane lane, std::uint64_t index) const
{
    const auto bits = derive_seed(seed_, static_cast<std::uint64_t>(x),
                                  static_cast<std::uint64_t>(lane), index);
    return law_.from_unit(to_unit(bits));
}

Instruction StackSystem::next(Site x, Lane lane)
{
    auto& c = cursors_[slot(x, lane)];
    return peek(x, lane, c++);
}

std::uint64_t StackSystem::cursor(Site x, Lane lane) const
{
    return cursors_[slot(x, lane)];
}

// ---------------------------------------------------------------------------

Configuration::Configuration(Site lo, Site hi, BoundaryPolicy policy)
    : lo_(lo), hi_(hi), policy_(policy)
{
    if (hi < lo) {
        throw ParameterError("empty configuration interval");
    }
    states_.assign(static_cast<std::size_t>(hi - lo + 1), SiteState::empty());
}

std::size_t Configuration::index(Site x) const
{
    if (x < lo_ || x > hi_) {
        throw ParameterError("site " + std::to_string(x) + " outside configuration");
    }
    return static_cast<std::size_t>(x - lo_);
}

void Configuration::add_active(Site x, std::int32_t count)
{
    auto& s = states_[index(x)];
    for (std::int32_t k = 0; k < count; ++k) {
        s.receive();
    }
}

std::uint64_t Configuration::particles_inside() const
{
    std::uint64_t total = 0;
    for (const auto& s : states_) {
        total += static_cast<std::uint64_t>(s.particles());
    }
    return total;
}

bool Configuration::is_stable() const
{
    return std::all_of(states_.begin(), states_.end(),
                       [](const SiteState& s) { return s.is_stable(); });
}

std::string Configuration::to_string() const
{
    std::ostringstream os;
    os << "[" << lo_ << "," << hi_ << "] ";
    for (const auto& s : states_) {
        os << s.to_string() << ' ';
    }
    os << "| exited " << exited_left_ << "/" << exited_right_;
    return os.str();
}

std::uint64_t Odometer::total() const
{
    return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

// ---------------------------------------------------------------------------

ToppleResult topple(Configuration& config, StackSystem& stacks, Site x, Lane lane)
{
    auto& here = config[x];
    if (here.is_stable()) {
        throw IllegalToppling("toppling stable site " + std::to_string(x) + " (" +
                              here.to_string() + ")");
    }
    const Instruction ins = stacks.next(x, lane);
    ToppleResult result{ins, std::nullopt, false};
    if (ins == Instruction::sleep) {
        if (here.active_count() == 1) {
            here.fall_asleep();
        }
        return result;
    }
    const Site target = ins == Instruction::step_right ? x + 1 : x - 1;
    if (config.contains(target)) {
        here.release();
        config[target].receive();
        result.moved_to = target;
    } else if (config.policy() == BoundaryPolicy::absorb) {
        here.release();
        config.note_exit(target < config.lo());
        result.moved_to = target;
        result.exited = true;
    }
    return result;
}

namespace {

// Set of unstable sites with O(1) insert, erase and random access.
class UnstableSet {
public:
    UnstableSet(Site lo, Site hi)
        : lo_(lo), position_(static_cast<std::size_t>(hi - lo + 1), kAbsent)
    {}

    bool empty() const { return sites_.empty(); }

    void insert(Site x)
    {
        auto& p = position_[offset(x)];
        if (p == kAbsent) {
            p = sites_.size();
            sites_.push_back(x);
        }
    }

    void erase(Site x)
    {
        auto& p = position_[offset(x)];
        if (p == kAbsent) {
            return;
        }
        const Site last = sites_.back();
        sites_[p] = last;
        position_[offset(last)] = p;
        sites_.pop_back();
        p = kAbsent;
    }

    Site pick(ToppleOrder order, Rng& rng) const
    {
        switch (order) {
        case ToppleOrder::leftmost:
            return *std::min_element(sites_.begin(), sites_.end());
        case ToppleOrder::random:
            return sites_[rng.below(sites_.size())];
        case ToppleOrder::worklist:
            break;
        }
        return sites_.back();
    }

private:
    static constexpr std::size_t kAbsent = static_cast<std::size_t>(-1);
    std::size_t offset(Site x) const { return static_cast<std::size_t>(x - lo_); }

    Site lo_;
    std::vector<std::size_t> position_;
    std::vector<Site> sites_;
};

}  // namespace

StabilizationBudgetExceeded::StabilizationBudgetExceeded(Stabilization partial)
    : BudgetExceeded("toppling budget exhausted after " + std::to_string(partial.topplings) +
                         " topplings",
                     partial.topplings),
      partial_(std::move(partial))
{}

Stabilization stabilize(Configuration config, StackSystem& stacks, OrderPolicy policy,
                        std::uint64_t budget)
{
    Stabilization out{Odometer(config.lo(), config.hi()), std::move(config), 0};
    auto& cfg = out.config;
    UnstableSet unstable(cfg.lo(), cfg.hi());
    for (Site x = cfg.lo(); x <= cfg.hi(); ++x) {
        if (!cfg[x].is_stable()) {
            unstable.insert(x);
        }
    }
    Rng order_rng(policy.seed);
    while (!unstable.empty()) {
        const Site x = unstable.pick(policy.order, order_rng);
        // Under the worklist order a site is drained before moving on; the
        // other orders re-pick after every toppling.
        do {
            if (out.topplings >= budget) {
                throw StabilizationBudgetExceeded(std::move(out));
            }
            const auto r = topple(cfg, stacks, x);
            out.odometer.increment(x);
            ++out.topplings;
            if (r.moved_to && !r.exited) {
                unstable.insert(*r.moved_to);
            }
        } while (policy.order == ToppleOrder::worklist && !cfg[x].is_stable());
        if (cfg[x].is_stable()) {
            unstable.erase(x);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

InitialSampler InitialSampler::bernoulli(double zeta)
{
    if (!(zeta >= 0.0 && zeta <= 2.0)) {
        throw ParameterError("density must lie in [0, 2]");
    }
    return InitialSampler{Kind::bernoulli, zeta, 0};
}

InitialSampler InitialSampler::neat(std::int64_t K)
{
    if (K < 1) {
        throw ParameterError("neat sampler needs K >= 1");
    }
    return InitialSampler{Kind::neat, 1.0 - 1.0 / (2.0 * static_cast<double>(K)), K};
}

Configuration InitialSampler::sample(Site lo, Site hi, Rng& rng) const
{
    Configuration config(lo, hi);
    for (Site x = lo; x <= hi; ++x) {
        std::int32_t count = 0;
        if (kind == Kind::neat) {
            const std::int64_t period = 2 * neat_K;
            count = ((x % period) + period) % period == 0 ? 0 : 1;
        } else if (zeta <= 1.0) {
            count = rng.bernoulli(zeta) ? 1 : 0;
        } else {
            count = 1 + (rng.bernoulli(zeta - 1.0) ? 1 : 0);
        }
        if (count > 0) {
            config.set(x, SiteState::active(count));
        }
    }
    return config;
}

std::uint64_t odometer_at_origin(double lambda, const InitialSampler& sampler, Site half_width,
                                 std::uint64_t seed, std::uint64_t budget)
{
    if (half_width < 1) {
        throw ParameterError("half-width must be at least 1");
    }
    Rng init_rng(derive_seed(seed, 1));
    StackSystem stacks(derive_seed(seed, 2), lambda, -half_width, half_width);
    auto result = stabilize(sampler.sample(-half_width, half_width, init_rng), stacks,
                            OrderPolicy{ToppleOrder::worklist, 0}, budget);
    return result.odometer.at(0);
}

}  // namespace arw
