#pragma once

// Carpet-hole toppling procedure on D_n = (a, nK + K - a).
//
// Block i is [iK - a, iK + a], transit region i is (iK + a, iK + K - a). Every
// site of D_n carries one carpet particle except the holes (one per block,
// always inside [iK, iK + a]). Free particles start at K, 3K, 5K, ...; only the
// hot particle ever moves. Each move is a legal toppling of the underlying
// site-wise configuration, so the procedure doubles as a legal ARW toppling
// sequence driven by the same stacks.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "arw/sitewise.hpp"

namespace arw {

class BlockLayout {
public:
    /// n even, a >= 1, K >= 2a + 2 (so transit regions are non-empty).
    static BlockLayout make(int n, std::int64_t K, std::int64_t a);
    /// Same constraints except that the block count may be odd (used for D_i).
    static BlockLayout prefix(int blocks, std::int64_t K, std::int64_t a);

    int blocks() const { return n_; }
    std::int64_t K() const { return K_; }
    std::int64_t a() const { return a_; }

    Site center(int i) const { return static_cast<Site>(i) * K_; }
    Site block_lo(int i) const { return center(i) - a_; }
    Site block_hi(int i) const { return center(i) + a_; }
    /// D_n as a closed interval of sites.
    Site domain_lo() const { return a_ + 1; }
    Site domain_hi() const { return static_cast<Site>(n_) * K_ + K_ - a_ - 1; }

    /// Block containing x, or 0 when x lies in a transit region.
    int block_of(Site x) const;
    bool in_transit(Site x) const { return block_of(x) == 0; }

private:
    BlockLayout(int n, std::int64_t K, std::int64_t a) : n_(n), K_(K), a_(a) {}

    int n_;
    std::int64_t K_;
    std::int64_t a_;
};

enum class FreeState : std::uint8_t { thawed, frozen, exited };

struct FreeParticle {
    std::uint64_t id;  ///< creation order; ties in hot selection go to the lowest
    Site site;
    FreeState state = FreeState::thawed;
    int block;              ///< block the particle currently belongs to
    int extra_ordinal = -1; ///< >= 0 for boundary mass that has not yet been hot
};

/// Roles of all particles: carpet flags per site, free particles, holes.
struct ParticleLedger {
    Site lo = 0;
    std::vector<std::uint8_t> carpet;   ///< per site of D_n
    std::vector<FreeParticle> free;     ///< exited particles are kept, marked exited
    std::vector<Site> holes;            ///< index 1..n; holes[0] unused
    std::optional<std::size_t> hot;
    std::uint64_t next_id = 0;

    bool has_carpet(Site x) const { return carpet[static_cast<std::size_t>(x - lo)] != 0; }
    void set_carpet(Site x, bool on) { carpet[static_cast<std::size_t>(x - lo)] = on ? 1 : 0; }
};

struct NeatState {
    Configuration config;
    ParticleLedger ledger;
};

/// Neat configuration on D_n with its particle roles; holes at iK.
NeatState build_neat(const BlockLayout& layout);
/// Neat configuration plus `m` extra thawed free particles at nK + a, ordered
/// by creation and eligible only after all other thawed particles.
NeatState build_neat_with_mass(const BlockLayout& layout, std::int64_t m);

/// Left-most block with a thawed free particle; within it iK, then iK - a,
/// then iK + a; ties by lowest id. Returns an index into `ledger.free`.
std::optional<std::size_t> choose_hot(const ParticleLedger& ledger, const BlockLayout& layout);

enum class Outcome : std::uint8_t { emit_left, emit_right, failure };
const char* to_string(Outcome o);

struct AttemptRecord {
    int block = 0;
    Outcome outcome = Outcome::failure;
    int case_kind = 2;             ///< 1: frozen particle present, 2: otherwise
    std::int64_t hot_start = 0;    ///< relative to iK
    std::int64_t hole_before = 0;  ///< relative to iK
    std::int64_t hole_after = 0;   ///< relative to iK
    std::uint64_t steps = 0;       ///< T_j
    std::uint64_t left_total = 0;  ///< left emissions of the block so far
    int frozen_after = 0;          ///< frozen particles in the block afterwards
    std::uint64_t topplings = 0;

    bool operator==(const AttemptRecord&) const = default;
};

/// One departure of the hot particle from the hole (Case 2 only).
struct HoleStep {
    int block = 0;
    std::int64_t hole_before = 0;  ///< relative to iK
    std::int64_t delta = 0;        ///< hole displacement; 0 when emitted
    bool emitted = false;

    bool operator==(const HoleStep&) const = default;
};

/// Block-n observables at the moment the boundary particle with ordinal m is
/// about to become hot, i.e. the final state of the same run with m extras.
struct BoundarySnapshot {
    std::int64_t m = 0;
    std::uint64_t left_emissions = 0;
    int frozen = 0;

    bool operator==(const BoundarySnapshot&) const = default;
};

struct CarpetParams {
    double lambda = 1.0;
    int n = 2;
    std::int64_t K = 9;
    std::int64_t a = 3;
    std::int64_t m_boundary = 0;

    bool operator==(const CarpetParams&) const = default;
};

struct RunRecord {
    CarpetParams params;
    std::uint64_t seed = 0;
    std::uint64_t frozen = 0;
    std::uint64_t exit = 0;
    std::vector<std::uint64_t> M;      ///< M_0..M_n: emissions from block i+1 into block i
    std::vector<std::uint64_t> L;      ///< L_0..L_n: left emissions of block i (L_0 = 0)
    std::vector<std::uint64_t> S;      ///< S_0..S_n: frozen particles left in block i
    std::vector<AttemptRecord> attempts;
    std::vector<HoleStep> hole_steps;
    std::vector<BoundarySnapshot> boundary_snapshots;
    std::vector<std::string> property_violations;
    std::uint64_t topplings = 0;

    bool operator==(const RunRecord&) const = default;
};

enum class CheckMode : std::uint8_t { automatic, on, off };

struct RunOptions {
    CheckMode check = CheckMode::automatic;  ///< automatic: on iff n <= 64
    bool trace = true;                       ///< keep per-attempt records
    bool hole_steps = false;                 ///< keep per-step hole displacements
    bool throw_on_violation = true;          ///< else stop and report in the record
    std::uint64_t budget = kDefaultToppleBudget;
};

class CarpetHole {
public:
    CarpetHole(const CarpetParams& params, std::uint64_t seed);
    /// Runs on an explicit layout (any block count), e.g. D_i for replays.
    CarpetHole(const BlockLayout& layout, double lambda, std::int64_t m_boundary,
               std::uint64_t seed);

    const BlockLayout& layout() const { return layout_; }
    const Configuration& config() const { return config_; }
    const StackSystem& stacks() const { return stacks_; }
    const ParticleLedger& ledger() const { return ledger_; }

    /// Designates the next hot particle; false when none is thawed (Case 3).
    bool designate_hot();
    /// One attempted emission of the designated hot particle.
    AttemptRecord attempt_emission();
    /// Violated properties (P1-P9 plus ledger/configuration consistency).
    std::vector<std::string> check_properties() const;
    std::string dump() const;

    /// Runs until no thawed particle remains.
    RunRecord run(const RunOptions& options = {});

    std::uint64_t exit_count() const { return exit_; }
    std::uint64_t topplings() const { return topplings_; }
    const std::vector<std::uint64_t>& M() const { return M_; }
    const std::vector<std::uint64_t>& left_emissions() const { return L_; }
    std::vector<std::uint64_t> frozen_per_block() const;

private:
    CarpetHole(const BlockLayout& layout, double lambda, std::int64_t m_boundary,
               std::uint64_t seed, NeatState&& start);
    Instruction move_hot(Site& pos);
    Lane lane_at(Site y, int block) const;
    void emit(FreeParticle& hot, bool left, AttemptRecord& rec);
    int frozen_in_block(int block) const;
    void renew(FreeParticle& p, Site site);

    BlockLayout layout_;
    double lambda_;
    std::uint64_t seed_;
    std::int64_t m_boundary_;
    Configuration config_;
    ParticleLedger ledger_;
    StackSystem stacks_;
    std::uint64_t initial_free_ = 0;
    std::uint64_t exit_ = 0;
    std::vector<std::uint64_t> M_;
    std::vector<std::uint64_t> L_;
    std::uint64_t topplings_ = 0;
    std::uint64_t budget_ = kDefaultToppleBudget;
    bool record_steps_ = false;
    std::vector<HoleStep> steps_;
};

RunRecord run_carpet_hole(const CarpetParams& params, std::uint64_t seed,
                          const RunOptions& options = {});

struct ReplayMismatch {
    int block = 0;
    std::string quantity;
    std::int64_t expected = 0;
    std::int64_t actual = 0;
};

struct ReplayReport {
    RunRecord full;
    std::vector<std::uint64_t> S_replay;  ///< S_i(M_i) from D_i, index 1..n
    std::vector<std::uint64_t> L_replay;  ///< L_i(M_i) from D_i, index 1..n
    std::vector<ReplayMismatch> mismatches;

    bool ok() const { return mismatches.empty(); }
    std::string describe() const;
};

/// Reruns every prefix D_i from the neat configuration with M_i extra particles
/// at iK + a on the same stacks and compares the block-i observables.
ReplayReport mass_balance_replay(const CarpetParams& params, std::uint64_t seed);

}  // namespace arw
