#include "doctest.h"

#include <numeric>

#include "arw/carpet_hole.hpp"
#include "reference_carpet.hpp"

using namespace arw;

namespace {

std::uint64_t sum(const std::vector<std::uint64_t>& v)
{
    return std::accumulate(v.begin(), v.end(), std::uint64_t{0});
}

}  // namespace

TEST_CASE("block layout")
{
    const auto L = BlockLayout::make(4, 16, 4);
    CHECK(L.domain_lo() == 5);
    CHECK(L.domain_hi() == 4 * 16 + 16 - 4 - 1);
    CHECK(L.block_of(16) == 1);
    CHECK(L.block_of(12) == 1);
    CHECK(L.block_of(20) == 1);
    CHECK(L.block_of(21) == 0);
    CHECK(L.block_of(27) == 0);
    CHECK(L.block_of(28) == 2);
    CHECK(L.block_of(68) == 4);
    CHECK_THROWS_AS(BlockLayout::make(3, 16, 4), ParameterError);
    CHECK_THROWS_AS(BlockLayout::make(4, 9, 4), ParameterError);
    CHECK_THROWS_AS(BlockLayout::make(4, 16, 0), ParameterError);
    CHECK_NOTHROW(BlockLayout::prefix(3, 16, 4));
}

TEST_CASE("neat configuration")
{
    SUBCASE("density of the periodic pattern")
    {
        Rng rng(0);
        const auto c = InitialSampler::neat(9).sample(1, 18 * 50, rng);
        CHECK(static_cast<double>(c.particles_inside()) / (18 * 50) ==
              doctest::Approx(1.0 - 1.0 / 18.0));
        const auto window = InitialSampler::neat(9).sample(0, 36, rng);
        CHECK(window[0].is_empty());
        CHECK(window[18].is_empty());
        CHECK(window[36].is_empty());
        CHECK(window[9] == SiteState::active(1));
        CHECK(window[27] == SiteState::active(1));
    }
    SUBCASE("n = 2, K = 9, a = 3")
    {
        const auto layout = BlockLayout::make(2, 9, 3);
        const auto st = build_neat(layout);
        CHECK(st.config.lo() == 4);
        CHECK(st.config.hi() == 23);
        CHECK(st.config[18].is_empty());
        CHECK(st.config.particles_inside() == 19);
        REQUIRE(st.ledger.free.size() == 1);
        CHECK(st.ledger.free[0].site == 9);
        CHECK(st.ledger.holes[1] == 9);
        CHECK(st.ledger.holes[2] == 18);
        CHECK(!st.ledger.has_carpet(9));
        CHECK(!st.ledger.has_carpet(18));
        CHECK(st.ledger.has_carpet(10));

        CarpetHole engine(CarpetParams{1.0, 2, 9, 3, 0}, 1);
        REQUIRE(engine.designate_hot());
        CHECK(engine.ledger().free[*engine.ledger().hot].site == 9);
        CHECK(engine.check_properties().empty());
    }
    SUBCASE("properties hold on fresh states")
    {
        for (int n : {2, 4, 8}) {
            for (std::int64_t m : {0, 1, 5}) {
                CarpetHole engine(CarpetParams{0.5, n, 25, 5, m}, 9);
                CHECK(engine.check_properties().empty());
                engine.designate_hot();
                CHECK(engine.check_properties().empty());
            }
        }
    }
    SUBCASE("extra mass at the right boundary")
    {
        const auto layout = BlockLayout::prefix(1, 9, 3);
        const auto st = build_neat_with_mass(layout, 3);
        CHECK(st.config[12] == SiteState::active(4));
        CHECK(st.ledger.has_carpet(12));
        CHECK(st.ledger.free.size() == 4);
        const auto plain = build_neat_with_mass(BlockLayout::make(2, 9, 3), 0);
        const auto ref = build_neat(BlockLayout::make(2, 9, 3));
        CHECK(plain.config == ref.config);
        CHECK(plain.ledger.carpet == ref.ledger.carpet);
        CHECK(CarpetHole(layout, 1.0, 3, 4).check_properties().empty());
    }
}

TEST_CASE("hot particle selection")
{
    const auto layout = BlockLayout::make(6, 16, 4);
    ParticleLedger led = build_neat(layout).ledger;
    led.free.clear();
    auto add = [&](Site site, int block, FreeState st = FreeState::thawed) {
        led.free.push_back(FreeParticle{led.next_id++, site, st, block, -1});
        return led.free.size() - 1;
    };

    SUBCASE("left-most block wins")
    {
        add(5 * 16, 5);
        const auto k = add(2 * 16 + 4, 2);
        CHECK(choose_hot(led, layout) == k);
    }
    SUBCASE("iK - a before iK + a")
    {
        add(2 * 16 + 4, 2);
        const auto k = add(2 * 16 - 4, 2);
        CHECK(choose_hot(led, layout) == k);
    }
    SUBCASE("iK before everything")
    {
        add(3 * 16 - 4, 3);
        const auto k = add(3 * 16, 3);
        CHECK(choose_hot(led, layout) == k);
    }
    SUBCASE("ties at iK + a by creation order")
    {
        const auto first = add(2 * 16 + 4, 2);
        add(2 * 16 + 4, 2);
        CHECK(choose_hot(led, layout) == first);
    }
    SUBCASE("frozen particles are skipped")
    {
        add(16 + 4, 1, FreeState::frozen);
        const auto k = add(4 * 16, 4);
        CHECK(choose_hot(led, layout) == k);
    }
    SUBCASE("no thawed particle terminates")
    {
        add(16 + 4, 1, FreeState::frozen);
        CHECK(!choose_hot(led, layout));
    }
}

TEST_CASE("case 2 failure when the hole sits at iK + a - 1")
{
    // With a = 1 the initial hole at iK is already at iK + a - 1.
    std::uint64_t seed = 1;
    while (StackSystem(seed, 1.0, 2, 6).peek(4, Lane::single, 0) != Instruction::sleep) {
        ++seed;
    }
    CarpetHole engine(CarpetParams{1.0, 2, 4, 1, 0}, seed);
    REQUIRE(engine.designate_hot());
    const auto rec = engine.attempt_emission();
    CHECK(rec.outcome == Outcome::failure);
    CHECK(rec.hole_after == 1);
    CHECK(rec.steps == 1);
    CHECK(engine.ledger().holes[1] == 5);
    CHECK(engine.config()[4].is_sleeping());
    const auto frozen = engine.frozen_per_block();
    CHECK(frozen[1] == 1);
    CHECK(engine.check_properties().empty());
}

TEST_CASE("zero sleep rate never freezes")
{
    for (int n : {2, 4, 8, 16}) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto r = run_carpet_hole(CarpetParams{0.0, n, 16, 4, 0}, seed);
            CHECK(r.frozen == 0);
            CHECK(r.exit == static_cast<std::uint64_t>(n / 2));
            for (const auto& a : r.attempts) {
                CHECK(a.outcome != Outcome::failure);
            }
        }
    }
}

TEST_CASE("attempt trace matches the straight-line reference")
{
    for (double lambda : {0.0, 0.3, 1.0, 4.0}) {
        for (auto [n, K, a] : {std::tuple{2, 9, 3}, std::tuple{4, 16, 4}, std::tuple{6, 9, 2},
                               std::tuple{8, 36, 6}}) {
            for (std::uint64_t seed = 0; seed < 8; ++seed) {
                const auto rec = run_carpet_hole(
                    CarpetParams{lambda, n, static_cast<std::int64_t>(K),
                                 static_cast<std::int64_t>(a), 0},
                    seed);
                const auto ref = testing::reference_carpet_hole(lambda, n, K, a, seed);
                REQUIRE(rec.attempts.size() == ref.attempts.size());
                for (std::size_t j = 0; j < ref.attempts.size(); ++j) {
                    const auto& x = rec.attempts[j];
                    const testing::RefAttempt mine{x.block, static_cast<int>(x.outcome),
                                                   x.hole_after};
                    CHECK(mine == ref.attempts[j]);
                }
                CHECK(rec.exit == ref.exit);
                CHECK(rec.frozen == ref.frozen);
            }
        }
    }
}

TEST_CASE("conservation identities and determinism")
{
    for (double lambda : {0.0, 0.2, 1.0, 5.0}) {
        for (int n : {2, 4, 8}) {
            for (std::uint64_t seed = 100; seed < 106; ++seed) {
                const CarpetParams p{lambda, n, 16, 4, 0};
                RunOptions opts;
                opts.check = CheckMode::on;
                const auto r = run_carpet_hole(p, seed, opts);
                CHECK(r.exit + r.frozen == static_cast<std::uint64_t>(n / 2));
                CHECK(r.frozen == sum(r.S));
                CHECK(r.property_violations.empty());
                CHECK(r.M.back() == 0);
                for (int i = 1; i <= n; ++i) {
                    CHECK(r.L[static_cast<std::size_t>(i)] ==
                          r.M[static_cast<std::size_t>(i - 1)]);
                    CHECK(r.S[static_cast<std::size_t>(i)] <= 1);
                }
                CHECK(r == run_carpet_hole(p, seed, opts));
            }
        }
    }
}

TEST_CASE("left emissions equal left steps read from the transit R stack")
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const CarpetParams p{0.7, 6, 16, 4, 0};
        CarpetHole engine(p, seed);
        const auto r = engine.run();
        const auto layout = BlockLayout::make(p.n, p.K, p.a);
        for (int i = 1; i <= p.n; ++i) {
            const Site y = layout.block_hi(i - 1) + 1;
            const auto used = engine.stacks().cursor(y, Lane::right);
            std::uint64_t lefts = 0;
            for (std::uint64_t k = 0; k < used; ++k) {
                lefts += engine.stacks().peek(y, Lane::right, k) == Instruction::step_left;
            }
            CHECK(lefts == r.L[static_cast<std::size_t>(i)]);
        }
    }
}

TEST_CASE("every move is a legal toppling and mass is conserved")
{
    const CarpetParams p{1.0, 8, 25, 5, 2};
    CarpetHole engine(p, 77);
    const auto mass = engine.config().total_mass();
    while (engine.designate_hot()) {
        engine.attempt_emission();
        CHECK(engine.config().total_mass() == mass);
    }
    CHECK(engine.exit_count() + sum(engine.frozen_per_block()) == 4 + 2);
}

TEST_CASE("boundary snapshots agree with fresh runs")
{
    const auto layout = BlockLayout::prefix(3, 16, 4);
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const std::int64_t m_max = 6;
        CarpetHole big(layout, 0.5, m_max, seed);
        const auto r = big.run();
        REQUIRE(r.boundary_snapshots.size() == static_cast<std::size_t>(m_max) + 1);
        for (std::int64_t m = 0; m <= m_max; ++m) {
            const auto& snap = r.boundary_snapshots[static_cast<std::size_t>(m)];
            CHECK(snap.m == m);
            CarpetHole small(layout, 0.5, m, seed);
            const auto s = small.run();
            CHECK(snap.left_emissions == s.L[3]);
            CHECK(snap.frozen == static_cast<int>(s.S[3]));
        }
    }
}

TEST_CASE("mass balance replay")
{
    for (double lambda : {0.2, 1.0, 5.0}) {
        for (std::int64_t a = 3; a <= 6; ++a) {
            for (int n : {4, 8}) {
                for (std::uint64_t seed = 0; seed < 3; ++seed) {
                    const auto rep =
                        mass_balance_replay(CarpetParams{lambda, n, a * a, a, 0}, seed);
                    INFO(rep.describe());
                    CHECK(rep.ok());
                }
            }
        }
    }
    SUBCASE("zero sleep rate leaves nothing frozen")
    {
        const auto rep = mass_balance_replay(CarpetParams{0.0, 8, 16, 4, 0}, 4);
        CHECK(rep.ok());
        for (int i = 1; i <= 8; ++i) {
            CHECK(rep.S_replay[static_cast<std::size_t>(i)] == 0);
        }
    }
    CHECK_THROWS_AS(mass_balance_replay(CarpetParams{1.0, 4, 16, 4, 2}, 0), ParameterError);
}

TEST_CASE("hole steps; frozen iff the hole sits at the block edge")
{
    RunOptions opts;
    opts.hole_steps = true;
    const auto r = run_carpet_hole(CarpetParams{1.0, 8, 36, 6, 0}, 3, opts);
    CHECK(!r.hole_steps.empty());
    for (const auto& s : r.hole_steps) {
        CHECK(s.hole_before >= 0);
        CHECK(s.hole_before < 6);
        CHECK(s.delta <= 1);
        CHECK(s.hole_before + s.delta >= 0);
        if (s.emitted) {
            CHECK(s.delta == 0);
        }
    }
    for (const auto& a : r.attempts) {
        CHECK((a.hole_after == 6) == (a.frozen_after == 1));
        CHECK(a.steps >= 1);
    }
}

TEST_CASE("budget exhaustion")
{
    RunOptions opts;
    opts.budget = 10;
    CHECK_THROWS_AS(run_carpet_hole(CarpetParams{0.0, 4, 16, 4, 0}, 1, opts), BudgetExceeded);
}
