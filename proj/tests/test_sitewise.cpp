#include "doctest.h"

#include <array>
#include <cmath>
#include <set>
#include <string>

#include "arw/sitewise.hpp"

using namespace arw;

namespace {

std::string key_of(const Configuration& c, const StackSystem& s)
{
    std::string k = c.to_string();
    for (Site x = s.lo(); x <= s.hi(); ++x) {
        k += ',' + std::to_string(s.cursor(x, Lane::single));
    }
    return k;
}

// Explores every legal toppling sequence and collects the distinct stable
// outcomes (configuration plus per-site cursors, which equal the odometer).
void explore_all_orders(const Configuration& c, const StackSystem& s,
                        std::set<std::string>& seen, std::set<std::string>& finals)
{
    const auto key = key_of(c, s);
    if (!seen.insert(key).second) {
        return;
    }
    bool any = false;
    for (Site x = c.lo(); x <= c.hi(); ++x) {
        if (c[x].is_stable()) {
            continue;
        }
        any = true;
        Configuration c2 = c;
        StackSystem s2 = s;
        topple(c2, s2, x);
        explore_all_orders(c2, s2, seen, finals);
    }
    if (!any) {
        finals.insert(key);
    }
}

// First seed whose instruction at (x, single, 0) equals `want`.
std::uint64_t seed_with_first(double lambda, Site x, Instruction want)
{
    for (std::uint64_t seed = 1;; ++seed) {
        StackSystem s(seed, lambda, x, x);
        if (s.peek(x, Lane::single, 0) == want) {
            return seed;
        }
    }
}

}  // namespace

TEST_CASE("instruction law probabilities")
{
    InstructionLaw zero(0.0);
    CHECK(zero.p_sleep() == 0.0);
    CHECK(zero.p_left() == 0.5);
    CHECK(zero.p_right() == 0.5);

    InstructionLaw one(1.0);
    CHECK(one.p_sleep() == doctest::Approx(0.5));
    CHECK(one.p_left() == doctest::Approx(0.25));

    CHECK_THROWS_AS(InstructionLaw(-0.1), ParameterError);
}

TEST_CASE("empirical instruction frequencies at lambda = 2")
{
    Rng rng(derive_seed(2024, 7));
    const int draws = 1'000'000;
    std::array<int, 3> counts{};
    for (int k = 0; k < draws; ++k) {
        ++counts[static_cast<std::size_t>(sample_instruction(2.0, rng))];
    }
    const std::array<double, 3> p{1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0};
    for (std::size_t k = 0; k < 3; ++k) {
        const double phat = static_cast<double>(counts[k]) / draws;
        const double se = std::sqrt(p[k] * (1 - p[k]) / draws);
        CHECK(std::abs(phat - p[k]) < 4 * se);
    }
}

TEST_CASE("lambda = 0 stacks never contain sleep")
{
    StackSystem s(99, 0.0, -5, 5);
    for (Site x = -5; x <= 5; ++x) {
        for (std::uint64_t k = 0; k < 2000; ++k) {
            CHECK_NE(s.peek(x, Lane::single, k), Instruction::sleep);
        }
    }
}

TEST_CASE("stacks depend only on seed, site, lane and index")
{
    StackSystem wide(5, 1.0, -20, 20);
    StackSystem narrow(5, 1.0, 0, 3);
    for (Site x = 0; x <= 3; ++x) {
        for (auto lane : {Lane::single, Lane::left, Lane::right}) {
            for (std::uint64_t k = 0; k < 50; ++k) {
                CHECK(wide.peek(x, lane, k) == narrow.peek(x, lane, k));
            }
        }
    }
    // Lanes are independent streams.
    int differ = 0;
    for (std::uint64_t k = 0; k < 200; ++k) {
        differ += wide.peek(1, Lane::left, k) != wide.peek(1, Lane::right, k);
    }
    CHECK(differ > 0);
}

TEST_CASE("cursor advances by one per consumed instruction")
{
    StackSystem s(3, 1.0, 0, 2);
    for (std::uint64_t k = 0; k < 10; ++k) {
        CHECK(s.cursor(1, Lane::left) == k);
        CHECK(s.next(1, Lane::left) == s.peek(1, Lane::left, k));
    }
    CHECK(s.cursor(1, Lane::right) == 0);
    CHECK(s.cursor(1, Lane::single) == 0);
}

TEST_CASE("topple semantics")
{
    SUBCASE("sleeping site is stable")
    {
        Configuration c(0, 2);
        c.set(1, SiteState::sleeping());
        StackSystem s(1, 1.0, 0, 2);
        CHECK_THROWS_AS(topple(c, s, 1), IllegalToppling);
        CHECK(s.cursor(1, Lane::single) == 0);
    }
    SUBCASE("empty site is stable")
    {
        Configuration c(0, 2);
        StackSystem s(1, 1.0, 0, 2);
        CHECK_THROWS_AS(topple(c, s, 0), IllegalToppling);
    }
    SUBCASE("lone particle falls asleep")
    {
        const auto seed = seed_with_first(1.0, 1, Instruction::sleep);
        Configuration c(0, 2);
        c.set(1, SiteState::active(1));
        StackSystem s(seed, 1.0, 0, 2);
        const auto r = topple(c, s, 1);
        CHECK(r.instruction == Instruction::sleep);
        CHECK(c[1].is_sleeping());
    }
    SUBCASE("sleep with two particles is consumed without effect")
    {
        const auto seed = seed_with_first(1.0, 1, Instruction::sleep);
        Configuration c(0, 2);
        c.set(1, SiteState::active(2));
        StackSystem s(seed, 1.0, 0, 2);
        topple(c, s, 1);
        CHECK(c[1] == SiteState::active(2));
        CHECK(s.cursor(1, Lane::single) == 1);
    }
    SUBCASE("arrival wakes a sleeping particle")
    {
        const auto seed = seed_with_first(1.0, 1, Instruction::step_right);
        Configuration c(0, 2);
        c.set(1, SiteState::active(1));
        c.set(2, SiteState::sleeping());
        StackSystem s(seed, 1.0, 0, 2);
        topple(c, s, 1);
        CHECK(c[1].is_empty());
        CHECK(c[2] == SiteState::active(2));
    }
    SUBCASE("absorbing boundary tallies exits")
    {
        const auto seed = seed_with_first(1.0, 0, Instruction::step_left);
        Configuration c(0, 2);
        c.set(0, SiteState::active(1));
        StackSystem s(seed, 1.0, 0, 2);
        const auto r = topple(c, s, 0);
        CHECK(r.exited);
        CHECK(c.exited_left() == 1);
        CHECK(c.total_mass() == 1);
    }
}

TEST_CASE("stabilize trivial cases")
{
    SUBCASE("empty configuration")
    {
        StackSystem s(1, 1.0, -3, 3);
        auto r = stabilize(Configuration(-3, 3), s);
        CHECK(r.odometer.total() == 0);
        CHECK(r.config == Configuration(-3, 3));
    }
    SUBCASE("single particle whose first instruction is sleep")
    {
        const auto seed = seed_with_first(50.0, 0, Instruction::sleep);
        Configuration c(-3, 3);
        c.set(0, SiteState::active(1));
        StackSystem s(seed, 50.0, -3, 3);
        auto r = stabilize(c, s);
        CHECK(r.odometer.at(0) == 1);
        CHECK(r.odometer.total() == 1);
        CHECK(r.config[0].is_sleeping());
    }
    SUBCASE("budget watchdog carries partial state")
    {
        Configuration c(-3, 3, BoundaryPolicy::closed);
        c.set(0, SiteState::active(3));
        StackSystem s(1, 0.0, -3, 3);
        try {
            stabilize(c, s, {}, 1000);
            FAIL("expected budget exhaustion");
        } catch (const StabilizationBudgetExceeded& e) {
            CHECK(e.topplings() == 1000);
            CHECK(e.partial().odometer.total() == 1000);
            CHECK(e.partial().config.total_mass() == 3);
        }
    }
}

TEST_CASE("abelian property: every legal order on tiny instances")
{
    Rng rng(derive_seed(11, 0));
    for (int trial = 0; trial < 25; ++trial) {
        Configuration c(0, 3);
        const int particles = 1 + static_cast<int>(rng.below(3));
        for (int k = 0; k < particles; ++k) {
            c.add_active(static_cast<Site>(rng.below(4)), 1);
        }
        const double lambda = trial % 2 == 0 ? 0.5 : 2.0;
        const std::uint64_t seed = rng();
        StackSystem s(seed, lambda, 0, 3);
        std::set<std::string> seen, finals;
        explore_all_orders(c, s, seen, finals);
        REQUIRE(finals.size() == 1);

        StackSystem s2(seed, lambda, 0, 3);
        auto r = stabilize(c, s2, {ToppleOrder::leftmost, 0});
        CHECK(*finals.begin() == key_of(r.config, s2));
    }
}

TEST_CASE("abelian property: two particles at the origin, leftmost vs 50 random orders")
{
    Configuration c(-3, 3);
    c.set(0, SiteState::active(2));
    StackSystem base(1234, 1.0, -3, 3);
    StackSystem s0 = base;
    const auto ref = stabilize(c, s0, {ToppleOrder::leftmost, 0});
    for (std::uint64_t k = 0; k < 50; ++k) {
        StackSystem s = base;
        const auto r = stabilize(c, s, {ToppleOrder::random, derive_seed(77, k)});
        CHECK(r.config == ref.config);
        CHECK(r.odometer == ref.odometer);
    }
    StackSystem sw = base;
    const auto w = stabilize(c, sw, {ToppleOrder::worklist, 0});
    CHECK(w.config == ref.config);
    CHECK(w.odometer == ref.odometer);
}

TEST_CASE("particle conservation under stabilization")
{
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        auto c = InitialSampler::bernoulli(0.8).sample(-10, 10, rng);
        const auto mass = c.total_mass();
        StackSystem s(rng(), 0.7, -10, 10);
        auto r = stabilize(c, s, {ToppleOrder::random, rng()});
        CHECK(r.config.total_mass() == mass);
        CHECK(r.config.is_stable());
        CHECK(r.odometer.total() == r.topplings);
        for (Site x = -10; x <= 10; ++x) {
            CHECK(r.odometer.at(x) == s.cursor(x, Lane::single));
        }
    }
}

TEST_CASE("initial samplers")
{
    Rng rng(1);
    CHECK(InitialSampler::bernoulli(0.0).sample(-5, 5, rng).particles_inside() == 0);
    const auto full = InitialSampler::bernoulli(2.0).sample(-5, 5, rng);
    CHECK(full.particles_inside() == 22);
    const auto neat = InitialSampler::neat(3).sample(0, 11, rng);
    CHECK(neat[0].is_empty());
    CHECK(neat[6].is_empty());
    CHECK(neat[3] == SiteState::active(1));
    CHECK(neat.particles_inside() == 10);
    CHECK_THROWS_AS(InitialSampler::bernoulli(-1.0), ParameterError);
}

TEST_CASE("odometer at the origin")
{
    CHECK(odometer_at_origin(1.0, InitialSampler::bernoulli(0.0), 50, 3) == 0);
    CHECK(odometer_at_origin(1.0, InitialSampler::bernoulli(0.4), 30, 3) ==
          odometer_at_origin(1.0, InitialSampler::bernoulli(0.4), 30, 3));
    CHECK_THROWS_AS(odometer_at_origin(1.0, InitialSampler::bernoulli(0.4), 0, 3),
                    ParameterError);
}
