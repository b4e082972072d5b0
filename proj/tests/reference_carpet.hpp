#pragma once

// Straight-line re-implementation of the carpet-hole procedure used as an
// oracle. It tracks only hole positions and free particles, reads the stacks
// through peek() with its own cursors and never touches the site-wise
// configuration or the ledger.

#include <algorithm>
#include <cstdint>
#include <map>
#include <tuple>
#include <vector>

#include "arw/sitewise.hpp"

namespace arw::testing {

struct RefAttempt {
    int block;
    int outcome;  // 0 left, 1 right, 2 failure
    std::int64_t hole_after;

    bool operator==(const RefAttempt&) const = default;
};

struct RefResult {
    std::vector<RefAttempt> attempts;
    std::uint64_t exit = 0;
    std::uint64_t frozen = 0;
};

inline RefResult reference_carpet_hole(double lambda, int n, std::int64_t K, std::int64_t a,
                                       std::uint64_t seed, std::int64_t extra = 0)
{
    struct P {
        std::uint64_t id;
        std::int64_t site;
        int block;
        int state;  // 0 thawed, 1 frozen, 2 gone
    };
    StackSystem stacks(seed, lambda, a + 1, n * K + K - a - 1);
    std::map<std::pair<std::int64_t, int>, std::uint64_t> cursor;
    auto draw = [&](std::int64_t y, int block) {
        int lane = 0;
        if (y > block * K + a) {
            lane = 1;
        } else if (y < block * K - a) {
            lane = 2;
        }
        auto& k = cursor[{y, lane}];
        return stacks.peek(y, static_cast<Lane>(lane), k++);
    };
    std::vector<std::int64_t> hole(static_cast<std::size_t>(n) + 1);
    std::vector<P> ps;
    std::uint64_t next_id = 0;
    for (int i = 1; i <= n; ++i) {
        hole[static_cast<std::size_t>(i)] = i * K;
        if (i % 2 == 1) {
            ps.push_back({next_id++, i * K, i, 0});
        }
    }
    for (std::int64_t k = 0; k < extra; ++k) {
        ps.push_back({next_id++, n * K + a, n, 0});
    }

    RefResult out;
    for (;;) {
        P* hot = nullptr;
        std::tuple<int, int, std::uint64_t> best{};
        for (auto& p : ps) {
            if (p.state != 0) {
                continue;
            }
            const auto off = p.site - p.block * K;
            const std::tuple key{p.block, off == 0 ? 0 : (off < 0 ? 1 : 2), p.id};
            if (!hot || key < best) {
                hot = &p;
                best = key;
            }
        }
        if (!hot) {
            break;
        }
        const int i = hot->block;
        const std::int64_t c = i * K;
        auto& h = hole[static_cast<std::size_t>(i)];
        const bool frozen_here = std::any_of(ps.begin(), ps.end(), [&](const P& p) {
            return p.block == i && p.state == 1;
        });
        std::int64_t y = hot->site;
        auto step = [&]() {
            const auto ins = draw(y, i);
            if (ins == Instruction::step_right) {
                ++y;
            } else if (ins == Instruction::step_left) {
                --y;
            }
            return ins;
        };
        auto done = [&](std::int64_t pos) { return pos == c - K + a || pos == c + K - a; };
        int outcome = -1;

        if (frozen_here) {
            std::vector<bool> seen(static_cast<std::size_t>(a) + 1, false);
            if (y >= c && y <= c + a) {
                seen[static_cast<std::size_t>(y - c)] = true;
            }
            while (!done(y)) {
                step();
                if (y >= c && y <= c + a) {
                    seen[static_cast<std::size_t>(y - c)] = true;
                }
            }
            outcome = y < c ? 0 : 1;
            if (std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
                for (auto& p : ps) {
                    if (p.block == i && p.state == 1) {
                        p = P{next_id++, c, i, 0};
                    }
                }
                h = c;
            }
        } else {
            while (y != h && !done(y)) {
                step();
            }
            while (outcome < 0 && y == h) {
                const auto ins = step();
                if (ins == Instruction::sleep) {
                    ++h;
                    y = h;
                    hot->id = next_id++;
                    if (h == c + a) {
                        outcome = 2;
                    }
                    continue;
                }
                std::int64_t low = y;
                while (y != h && !done(y)) {
                    step();
                    low = std::min(low, y);
                }
                if (y == h && ins == Instruction::step_left && std::max(c, low) < h) {
                    h = std::max(c, low);
                    y = h;
                    hot->id = next_id++;
                }
            }
            if (outcome < 0) {
                outcome = y < c ? 0 : 1;
            }
        }

        hot->site = y;
        if (outcome == 2) {
            hot->state = 1;
        } else {
            hot->block += outcome == 0 ? -1 : 1;
            if (hot->block < 1 || hot->block > n) {
                hot->state = 2;
                ++out.exit;
            }
        }
        out.attempts.push_back({i, outcome, h - c});
    }
    for (const auto& p : ps) {
        out.frozen += p.state == 1 ? 1 : 0;
    }
    return out;
}

}  // namespace arw::testing
