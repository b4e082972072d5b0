#include "arw/carpet_hole.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>

namespace arw {

BlockLayout BlockLayout::prefix(int blocks, std::int64_t K, std::int64_t a)
{
    if (blocks < 1) {
        throw ParameterError("need at least one block");
    }
    if (a < 1) {
        throw ParameterError("block half-width a must be >= 1");
    }
    if (K < 2 * a + 2) {
        throw ParameterError("need K >= 2a + 2 so that transit regions are non-empty");
    }
    return BlockLayout(blocks, K, a);
}

BlockLayout BlockLayout::make(int n, std::int64_t K, std::int64_t a)
{
    if (n < 2 || n % 2 != 0) {
        throw ParameterError("block count n must be even and positive");
    }
    return prefix(n, K, a);
}

int BlockLayout::block_of(Site x) const
{
    // Nearest center; blocks are disjoint since K > 2a.
    const Site i = (x + K_ / 2) / K_;
    if (i >= 1 && i <= n_ && x >= block_lo(static_cast<int>(i)) &&
        x <= block_hi(static_cast<int>(i))) {
        return static_cast<int>(i);
    }
    return 0;
}

const char* to_string(Outcome o)
{
    switch (o) {
    case Outcome::emit_left:
        return "emit-left";
    case Outcome::emit_right:
        return "emit-right";
    case Outcome::failure:
        return "failure";
    }
    return "?";
}

// ---------------------------------------------------------------------------

NeatState build_neat_with_mass(const BlockLayout& layout, std::int64_t m)
{
    if (m < 0) {
        throw ParameterError("boundary mass must be non-negative");
    }
    const Site lo = layout.domain_lo();
    const Site hi = layout.domain_hi();
    NeatState st{Configuration(lo, hi), ParticleLedger{}};
    auto& led = st.ledger;
    led.lo = lo;
    led.carpet.assign(static_cast<std::size_t>(hi - lo + 1), 1);
    led.holes.assign(static_cast<std::size_t>(layout.blocks()) + 1, 0);

    for (Site x = lo; x <= hi; ++x) {
        if (x % (2 * layout.K()) != 0) {
            st.config.set(x, SiteState::active(1));
        }
    }
    for (int i = 1; i <= layout.blocks(); ++i) {
        const Site c = layout.center(i);
        led.holes[static_cast<std::size_t>(i)] = c;
        led.set_carpet(c, false);
        if (i % 2 == 1) {
            led.free.push_back(FreeParticle{led.next_id++, c, FreeState::thawed, i, -1});
        }
    }
    const int last = layout.blocks();
    const Site boundary = layout.block_hi(last);
    for (std::int64_t k = 0; k < m; ++k) {
        st.config.add_active(boundary, 1);
        led.free.push_back(
            FreeParticle{led.next_id++, boundary, FreeState::thawed, last, static_cast<int>(k)});
    }
    return st;
}

NeatState build_neat(const BlockLayout& layout)
{
    return build_neat_with_mass(layout, 0);
}

std::optional<std::size_t> choose_hot(const ParticleLedger& ledger, const BlockLayout& layout)
{
    std::optional<std::size_t> best;
    std::tuple<int, int, std::uint64_t> best_key{};
    for (std::size_t k = 0; k < ledger.free.size(); ++k) {
        const auto& p = ledger.free[k];
        if (p.state != FreeState::thawed) {
            continue;
        }
        const Site offset = p.site - layout.center(p.block);
        const int rank = offset == 0 ? 0 : (offset < 0 ? 1 : 2);
        const std::tuple key{p.block, rank, p.id};
        if (!best || key < best_key) {
            best = k;
            best_key = key;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------

CarpetHole::CarpetHole(const CarpetParams& params, std::uint64_t seed)
    : CarpetHole(BlockLayout::make(params.n, params.K, params.a), params.lambda,
                 params.m_boundary, seed)
{}

CarpetHole::CarpetHole(const BlockLayout& layout, double lambda, std::int64_t m_boundary,
                       std::uint64_t seed)
    : CarpetHole(layout, lambda, m_boundary, seed, build_neat_with_mass(layout, m_boundary))
{}

CarpetHole::CarpetHole(const BlockLayout& layout, double lambda, std::int64_t m_boundary,
                       std::uint64_t seed, NeatState&& start)
    : layout_(layout),
      lambda_(lambda),
      seed_(seed),
      m_boundary_(m_boundary),
      config_(std::move(start.config)),
      ledger_(std::move(start.ledger)),
      stacks_(seed, lambda, layout.domain_lo(), layout.domain_hi())
{
    initial_free_ = ledger_.free.size();
    M_.assign(static_cast<std::size_t>(layout.blocks()) + 1, 0);
    L_.assign(static_cast<std::size_t>(layout.blocks()) + 1, 0);
}

Lane CarpetHole::lane_at(Site y, int block) const
{
    // The hot particle's last visited block is always its own block.
    if (y > layout_.block_hi(block)) {
        return Lane::left;
    }
    if (y < layout_.block_lo(block)) {
        return Lane::right;
    }
    return Lane::single;
}

Instruction CarpetHole::move_hot(Site& pos)
{
    if (topplings_ >= budget_) {
        throw BudgetExceeded("carpet-hole run exceeded its toppling budget", topplings_);
    }
    auto& hot = ledger_.free[*ledger_.hot];
    const auto r = topple(config_, stacks_, pos, lane_at(pos, hot.block));
    ++topplings_;
    if (r.moved_to) {
        pos = *r.moved_to;
        hot.site = pos;
    }
    return r.instruction;
}

void CarpetHole::renew(FreeParticle& p, Site site)
{
    // The free role passes to a different physical particle.
    p.id = ledger_.next_id++;
    p.site = site;
    p.extra_ordinal = -1;
}

int CarpetHole::frozen_in_block(int block) const
{
    return static_cast<int>(std::count_if(ledger_.free.begin(), ledger_.free.end(),
                                          [&](const FreeParticle& p) {
                                              return p.block == block &&
                                                     p.state == FreeState::frozen;
                                          }));
}

std::vector<std::uint64_t> CarpetHole::frozen_per_block() const
{
    std::vector<std::uint64_t> s(static_cast<std::size_t>(layout_.blocks()) + 1, 0);
    for (const auto& p : ledger_.free) {
        if (p.state == FreeState::frozen) {
            ++s[static_cast<std::size_t>(p.block)];
        }
    }
    return s;
}

void CarpetHole::emit(FreeParticle& hot, bool left, AttemptRecord& rec)
{
    const int from = hot.block;
    const int to = left ? from - 1 : from + 1;
    rec.outcome = left ? Outcome::emit_left : Outcome::emit_right;
    if (left) {
        ++M_[static_cast<std::size_t>(from - 1)];
        ++L_[static_cast<std::size_t>(from)];
    }
    if (to < 1 || to > layout_.blocks()) {
        hot.state = FreeState::exited;
        ++exit_;
    }
    hot.block = to;
    ledger_.hot.reset();
}

bool CarpetHole::designate_hot()
{
    ledger_.hot = choose_hot(ledger_, layout_);
    return ledger_.hot.has_value();
}

AttemptRecord CarpetHole::attempt_emission()
{
    if (!ledger_.hot) {
        throw InvariantViolation("attempted emission without a hot particle");
    }
    const std::size_t hot_index = *ledger_.hot;
    const int i = ledger_.free[hot_index].block;
    const Site c = layout_.center(i);
    const Site a = layout_.a();
    const Site left_target = c - layout_.K() + a;
    const Site right_target = c + layout_.K() - a;
    Site& hole = ledger_.holes[static_cast<std::size_t>(i)];
    const std::uint64_t topplings_before = topplings_;

    AttemptRecord rec;
    rec.block = i;
    rec.hot_start = ledger_.free[hot_index].site - c;
    rec.hole_before = hole - c;
    rec.case_kind = frozen_in_block(i) > 0 ? 1 : 2;

    Site pos = ledger_.free[hot_index].site;
    auto hot = [&]() -> FreeParticle& { return ledger_.free[hot_index]; };
    auto finish = [&]() {
        rec.hole_after = hole - c;
        rec.left_total = L_[static_cast<std::size_t>(i)];
        rec.frozen_after = frozen_in_block(i);
        rec.topplings = topplings_ - topplings_before;
        return rec;
    };
    auto record_step = [&](Site before, Site delta, bool emitted) {
        if (record_steps_) {
            steps_.push_back(HoleStep{i, before - c, delta, emitted});
        }
    };

    if (rec.case_kind == 1) {
        // Every site of the block holds a particle other than the hot one, so
        // sleep instructions are no-ops; walk until a neighbouring block.
        std::vector<bool> seen(static_cast<std::size_t>(a) + 1, false);
        auto mark = [&](Site y) {
            if (y >= c && y <= c + a) {
                seen[static_cast<std::size_t>(y - c)] = true;
            }
        };
        mark(pos);
        while (pos != left_target && pos != right_target) {
            move_hot(pos);
            mark(pos);
        }
        rec.steps = 1;
        emit(hot(), pos == left_target, rec);
        if (std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
            auto frozen = std::find_if(ledger_.free.begin(), ledger_.free.end(),
                                       [&](const FreeParticle& p) {
                                           return p.block == i && p.state == FreeState::frozen;
                                       });
            ledger_.set_carpet(c + a, true);
            ledger_.set_carpet(c, false);
            hole = c;
            frozen->state = FreeState::thawed;
            renew(*frozen, c);
        }
        return finish();
    }

    // Case 2: the hole is vacant or holds the hot particle. Approach it first.
    while (pos != hole) {
        move_hot(pos);
        if (pos == left_target || pos == right_target) {
            rec.steps = 1;
            emit(hot(), pos == left_target, rec);
            return finish();
        }
    }
    for (;;) {
        ++rec.steps;
        const Site start = hole;
        const Instruction ins = move_hot(pos);
        if (ins == Instruction::sleep) {
            // The hot particle was alone at the hole and is now asleep: it
            // becomes carpet and the carpet particle to its right takes over.
            ledger_.set_carpet(hole, true);
            ++hole;
            ledger_.set_carpet(hole, false);
            pos = hole;
            renew(hot(), hole);
            record_step(start, 1, false);
            if (hole == c + a) {
                hot().state = FreeState::frozen;
                ledger_.hot.reset();
                rec.outcome = Outcome::failure;
                return finish();
            }
            continue;
        }
        Site leftmost = pos;
        while (pos != start && pos != left_target && pos != right_target) {
            move_hot(pos);
            leftmost = std::min(leftmost, pos);
        }
        if (pos != start) {
            record_step(start, 0, true);
            emit(hot(), pos == left_target, rec);
            return finish();
        }
        if (ins == Instruction::step_left) {
            const Site moved = std::max(c, leftmost);
            if (moved < hole) {
                ledger_.set_carpet(hole, true);
                hole = moved;
                ledger_.set_carpet(hole, false);
                pos = hole;
                renew(hot(), hole);
            }
        }
        record_step(start, hole - start, false);
    }
}

std::vector<std::string> CarpetHole::check_properties() const
{
    std::vector<std::string> bad;
    auto fail = [&](const std::string& msg) { bad.push_back(msg); };
    const Site lo = layout_.domain_lo();
    const Site hi = layout_.domain_hi();
    const Site a = layout_.a();

    std::vector<int> free_at(static_cast<std::size_t>(hi - lo + 1), 0);
    std::uint64_t alive = 0;
    for (const auto& p : ledger_.free) {
        if (p.state == FreeState::exited) {
            continue;
        }
        ++alive;
        if (p.site < lo || p.site > hi) {
            fail("free particle " + std::to_string(p.id) + " outside D_n");
            continue;
        }
        ++free_at[static_cast<std::size_t>(p.site - lo)];
    }
    if (alive + exit_ != initial_free_) {
        fail("free particle count not conserved");
    }
    if (exit_ != config_.exited()) {
        fail("exit tally differs from absorbed particles");
    }
    for (Site x = lo; x <= hi; ++x) {
        const auto& s = config_[x];
        const int carpet = ledger_.has_carpet(x) ? 1 : 0;
        const int fr = free_at[static_cast<std::size_t>(x - lo)];
        if (s.particles() != carpet + fr) {
            fail("site " + std::to_string(x) + ": configuration holds " +
                 std::to_string(s.particles()) + " particles, ledger " +
                 std::to_string(carpet + fr));
        }
        if (s.is_sleeping() && fr != 0) {
            fail("P4: sleeping free particle at " + std::to_string(x));
        }
        if (layout_.in_transit(x) && !carpet) {
            fail("P2: transit site " + std::to_string(x) + " without carpet");
        }
    }

    const FreeParticle* hot = ledger_.hot ? &ledger_.free[*ledger_.hot] : nullptr;
    for (int i = 1; i <= layout_.blocks(); ++i) {
        const Site c = layout_.center(i);
        const Site hole = ledger_.holes[static_cast<std::size_t>(i)];
        const std::string tag = "block " + std::to_string(i) + ": ";
        if (hole < c || hole > c + a) {
            fail("P1: " + tag + "hole at " + std::to_string(hole) + " outside [iK, iK+a]");
        }
        for (Site x = layout_.block_lo(i); x <= layout_.block_hi(i); ++x) {
            if (x == hole && ledger_.has_carpet(x)) {
                fail("P1: " + tag + "hole holds a carpet particle");
            }
            if (x != hole && !ledger_.has_carpet(x)) {
                fail("P2: " + tag + "site " + std::to_string(x) + " lacks carpet");
            }
        }
        for (Site x = hole + 1; x <= c + a; ++x) {
            if (!config_[x].is_active()) {
                fail("P3: " + tag + "inactive carpet at " + std::to_string(x));
            }
        }
        int frozen = 0;
        int free_at_center = 0;
        bool frozen_at_edge = false;
        for (const auto& p : ledger_.free) {
            if (p.state == FreeState::exited || p.block != i) {
                continue;
            }
            if (p.state == FreeState::frozen) {
                ++frozen;
                frozen_at_edge = frozen_at_edge || p.site == c + a;
            }
            if (&p == hot) {
                continue;
            }
            if (p.site != c && p.site != c - a && p.site != c + a) {
                fail("P5: " + tag + "free particle at " + std::to_string(p.site));
            }
            free_at_center += p.site == c ? 1 : 0;
        }
        if (free_at_center > 1) {
            fail("P5: " + tag + "several free particles at iK");
        }
        if (frozen > 1) {
            fail("P6: " + tag + std::to_string(frozen) + " frozen particles");
        }
        if ((frozen > 0) != (hole == c + a && frozen_at_edge)) {
            fail("P7: " + tag + "frozen particle and hole at iK+a disagree");
        }
        if (hot && hot->block == i && hole != c + a) {
            const int held = config_[hole].particles();
            if (!(held == 0 || (held == 1 && hot->site == hole))) {
                fail("P8: " + tag + "hole occupied by a particle other than the hot one");
            }
        }
    }
    if (hot && hot->state != FreeState::thawed) {
        fail("P9: hot particle is not thawed");
    }
    return bad;
}

std::string CarpetHole::dump() const
{
    std::ostringstream os;
    os << "layout n=" << layout_.blocks() << " K=" << layout_.K() << " a=" << layout_.a()
       << " lambda=" << lambda_ << " seed=" << seed_ << "\n";
    os << "holes:";
    for (int i = 1; i <= layout_.blocks(); ++i) {
        os << ' ' << ledger_.holes[static_cast<std::size_t>(i)];
    }
    os << "\nfree:";
    for (const auto& p : ledger_.free) {
        const char* st = p.state == FreeState::thawed   ? "thawed"
                         : p.state == FreeState::frozen ? "frozen"
                                                        : "exited";
        os << " #" << p.id << "@" << p.site << "/b" << p.block << "/" << st;
    }
    if (ledger_.hot) {
        os << "\nhot: #" << ledger_.free[*ledger_.hot].id;
    }
    os << "\nconfig: " << config_.to_string() << "\n";
    return os.str();
}

RunRecord CarpetHole::run(const RunOptions& options)
{
    const bool check = options.check == CheckMode::on ||
                       (options.check == CheckMode::automatic && layout_.blocks() <= 64);
    budget_ = options.budget;
    record_steps_ = options.hole_steps;

    RunRecord out;
    out.params = CarpetParams{lambda_, layout_.blocks(), layout_.K(), layout_.a(), m_boundary_};
    out.seed = seed_;

    auto verify = [&](const char* when) {
        if (!check) {
            return true;
        }
        auto bad = check_properties();
        if (bad.empty()) {
            return true;
        }
        if (options.throw_on_violation) {
            std::string msg = std::string("property violation ") + when + ": " + bad.front() +
                              "\n" + dump();
            throw InvariantViolation(msg);
        }
        for (auto& b : bad) {
            out.property_violations.push_back(std::string(when) + ": " + b);
        }
        return false;
    };

    auto snapshot = [&](std::int64_t m) {
        const auto last = static_cast<std::size_t>(layout_.blocks());
        out.boundary_snapshots.push_back(
            BoundarySnapshot{m, L_[last], frozen_in_block(layout_.blocks())});
    };

    bool healthy = verify("initially");
    while (healthy && designate_hot()) {
        auto& hot = ledger_.free[*ledger_.hot];
        if (hot.extra_ordinal >= 0) {
            snapshot(hot.extra_ordinal);
            hot.extra_ordinal = -1;
        }
        if (!verify("after designation")) {
            break;
        }
        auto rec = attempt_emission();
        if (options.trace) {
            out.attempts.push_back(rec);
        }
        healthy = verify("after attempt");
    }
    snapshot(out.params.m_boundary);

    out.exit = exit_;
    out.M = M_;
    out.L = L_;
    out.S = frozen_per_block();
    out.frozen = 0;
    for (auto s : out.S) {
        out.frozen += s;
    }
    out.hole_steps = std::move(steps_);
    steps_.clear();
    out.topplings = topplings_;
    return out;
}

RunRecord run_carpet_hole(const CarpetParams& params, std::uint64_t seed,
                          const RunOptions& options)
{
    CarpetHole engine(params, seed);
    return engine.run(options);
}

// ---------------------------------------------------------------------------

std::string ReplayReport::describe() const
{
    std::ostringstream os;
    if (ok()) {
        os << "all replay equalities hold (" << full.params.n << " blocks)";
        return os.str();
    }
    for (const auto& m : mismatches) {
        os << "block " << m.block << ": " << m.quantity << " expected " << m.expected
           << " got " << m.actual << "\n";
    }
    return os.str();
}

ReplayReport mass_balance_replay(const CarpetParams& params, std::uint64_t seed)
{
    if (params.m_boundary != 0) {
        throw ParameterError("replay starts from the neat configuration without extra mass");
    }
    ReplayReport rep;
    RunOptions opts;
    opts.trace = false;
    rep.full = run_carpet_hole(params, seed, opts);
    const int n = params.n;
    const auto& M = rep.full.M;
    rep.S_replay.assign(static_cast<std::size_t>(n) + 1, 0);
    rep.L_replay.assign(static_cast<std::size_t>(n) + 1, 0);

    auto mismatch = [&](int block, const char* what, std::uint64_t expected,
                        std::uint64_t actual) {
        if (expected != actual) {
            rep.mismatches.push_back(ReplayMismatch{block, what,
                                                    static_cast<std::int64_t>(expected),
                                                    static_cast<std::int64_t>(actual)});
        }
    };

    for (int i = 1; i <= n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        CarpetHole prefix(BlockLayout::prefix(i, params.K, params.a), params.lambda,
                          static_cast<std::int64_t>(M[ui]), seed);
        auto sub = prefix.run(opts);
        rep.S_replay[ui] = sub.S[ui];
        rep.L_replay[ui] = sub.L[ui];
        mismatch(i, "S_i^n(0) vs S_i(M_i)", rep.full.S[ui], sub.S[ui]);
        mismatch(i, "L_i^n(0) vs L_i(M_i)", rep.full.L[ui], sub.L[ui]);
        mismatch(i, "L_i(M_i) vs M_{i-1}", M[ui - 1], sub.L[ui]);
    }
    mismatch(n, "M_n", 0, M[static_cast<std::size_t>(n)]);
    if (M[0] > static_cast<std::uint64_t>(n / 2)) {
        rep.mismatches.push_back(
            ReplayMismatch{0, "M_0 <= n/2", n / 2, static_cast<std::int64_t>(M[0])});
    }
    return rep;
}

}  // namespace arw
