#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "bml/grid.hpp"
#include "bml/rng.hpp"

namespace bml {

enum class Engine { Deterministic2D, DDim, Poisson };

/// Simulation clock: completed sub-steps, plus continuous time for the
/// Poisson engine.
struct SimClock {
    std::int64_t substep = 0;
    double tau = 0.0;
};

struct SimOptions {
    std::int64_t max_substeps = 0; // for Poisson: maximum number of events
    bool record_series = true;     // keep the per-substep move series
    bool early_halt = true;        // stop once the configuration is frozen
    RngSeed seed;                  // Poisson engine only
};

/// Per-run statistics. Cars get stable ids 0..n-1 assigned by scanning the
/// initial grid in site order; ids follow cars through moves.
struct SimStats {
    Engine engine = Engine::Deterministic2D;
    std::int64_t substeps = 0;  // completed sub-steps (Poisson: events)
    std::int64_t car_count = 0;
    std::int64_t total_moves = 0;
    std::int64_t failed_attempts = 0; // Poisson only
    double tau = 0.0;                 // Poisson only
    std::vector<std::int32_t> moves_per_substep; // empty unless recorded
    std::vector<std::int64_t> first_move;        // car id -> substep, -1 never
    std::vector<std::int64_t> move_counts;       // car id -> successful moves
    std::vector<SiteIndex> initial_site;         // car id -> site at t=0
    std::optional<std::int64_t> frozen_at;

    /// First-move time of the car initially at `site`, or -1 if that car
    /// never moved. Throws if the site was initially empty.
    std::int64_t first_move_time_at(SiteIndex site) const {
        auto it = std::lower_bound(initial_site.begin(), initial_site.end(), site);
        if (it == initial_site.end() || *it != site)
            throw std::invalid_argument("first_move_time_at: site initially empty");
        return first_move[static_cast<std::size_t>(it - initial_site.begin())];
    }

    bool initially_occupied(SiteIndex site) const {
        return std::binary_search(initial_site.begin(), initial_site.end(), site);
    }
};

/// True iff no car has a vacant forward neighbor; such a configuration
/// never changes again under any engine.
inline bool is_frozen(const TorusGrid& g) {
    for (SiteIndex i = 0, n = g.size(); i < n; ++i) {
        SiteState s = g.at(i);
        if (s.is_car() && g.at(g.neighbor(i, s.axis())).is_empty())
            return false;
    }
    return true;
}

/// One deterministic sub-step on a 2D torus. Sub-steps are numbered from 1;
/// odd t moves North cars, even t moves East cars. All eligible cars move
/// simultaneously (eligibility read from the pre-step configuration).
/// Returns the number of moves.
inline int step_deterministic(TorusGrid& g, std::int64_t t) {
    if (g.dim() != 2)
        throw std::invalid_argument("step_deterministic: requires d=2");
    const int axis = (t % 2 == 1) ? 1 : 0;
    const SiteState active = SiteState::car(axis);
    std::vector<std::pair<SiteIndex, SiteIndex>> movers;
    for (SiteIndex i = 0, n = g.size(); i < n; ++i) {
        if (g.at(i) == active) {
            SiteIndex f = g.neighbor(i, axis);
            if (g.at(f).is_empty()) movers.emplace_back(i, f);
        }
    }
    for (auto [from, to] : movers) {
        g.set(from, kEmpty);
        g.set(to, active);
    }
    return static_cast<int>(movers.size());
}

/// One deterministic sub-step in any dimension: direction t mod d moves at
/// sub-step t. With d=2 this reduces exactly to step_deterministic.
inline int step_ddim(TorusGrid& g, std::int64_t t) {
    const int d = g.dim();
    const int axis = static_cast<int>(((t % d) + d) % d);
    const SiteState active = SiteState::car(axis);
    std::vector<std::pair<SiteIndex, SiteIndex>> movers;
    for (SiteIndex i = 0, n = g.size(); i < n; ++i) {
        if (g.at(i) == active) {
            SiteIndex f = g.neighbor(i, axis);
            if (g.at(f).is_empty()) movers.emplace_back(i, f);
        }
    }
    for (auto [from, to] : movers) {
        g.set(from, kEmpty);
        g.set(to, active);
    }
    return static_cast<int>(movers.size());
}

/// Outcome of a single Poisson event on a grid (unit-rate clock per car:
/// time advances by Exp(total cars), a uniformly random car attempts to
/// advance and succeeds iff its forward site is vacant).
struct PoissonEvent {
    bool happened = false; // false when the grid holds no cars
    bool moved = false;
    SiteIndex from = -1;
    SiteIndex to = -1;
};

inline PoissonEvent step_poisson(TorusGrid& g, SimClock& clock, CounterRng& rng) {
    std::vector<SiteIndex> cars;
    for (SiteIndex i = 0, n = g.size(); i < n; ++i)
        if (g.at(i).is_car()) cars.push_back(i);
    PoissonEvent ev;
    if (cars.empty()) return ev;
    ev.happened = true;
    clock.tau += rng.exponential(static_cast<double>(cars.size()));
    SiteIndex z = cars[rng.next_below(cars.size())];
    const int axis = g.at(z).axis();
    SiteIndex f = g.neighbor(z, axis);
    ev.from = z;
    if (g.at(f).is_empty()) {
        g.set(f, g.at(z));
        g.set(z, kEmpty);
        ev.moved = true;
        ev.to = f;
    }
    clock.substep += 1;
    return ev;
}

namespace detail {

// Car-tracking simulation core shared by the run() engines. Cells hold car
// ids so per-car statistics are cheap; the source grid is written back at
// the end.
class Simulation {
public:
    Simulation(TorusGrid& g, Engine engine, const SimOptions& opt)
        : grid_(g), engine_(engine), opt_(opt), d_(g.dim()) {
        cells_.assign(static_cast<std::size_t>(g.size()), -1);
        for (SiteIndex i = 0, n = g.size(); i < n; ++i) {
            if (g.at(i).is_car()) {
                auto id = static_cast<std::int32_t>(pos_.size());
                cells_[static_cast<std::size_t>(i)] = id;
                pos_.push_back(i);
                axis_.push_back(static_cast<std::uint8_t>(g.at(i).axis()));
            }
        }
        stats_.engine = engine;
        stats_.car_count = static_cast<std::int64_t>(pos_.size());
        stats_.initial_site = pos_;
        stats_.first_move.assign(pos_.size(), -1);
        stats_.move_counts.assign(pos_.size(), 0);
    }

    SimStats run() {
        switch (engine_) {
        case Engine::Deterministic2D: run_det2d(); break;
        case Engine::DDim: run_ddim(); break;
        case Engine::Poisson: run_poisson(); break;
        }
        write_back();
        return std::move(stats_);
    }

private:
    void record_move(std::int32_t id, std::int64_t t) {
        if (stats_.first_move[static_cast<std::size_t>(id)] < 0)
            stats_.first_move[static_cast<std::size_t>(id)] = t;
        ++stats_.move_counts[static_cast<std::size_t>(id)];
        ++stats_.total_moves;
    }

    void run_det2d() {
        if (d_ != 2)
            throw std::invalid_argument("run: Deterministic2D requires d=2");
        std::vector<std::int32_t> by_dir[2];
        for (std::size_t id = 0; id < pos_.size(); ++id)
            by_dir[axis_[id]].push_back(static_cast<std::int32_t>(id));
        std::vector<std::int32_t> movers;
        int silent = 0;
        for (std::int64_t t = 1; t <= opt_.max_substeps; ++t) {
            const int axis = (t % 2 == 1) ? 1 : 0;
            movers.clear();
            for (auto id : by_dir[axis]) {
                SiteIndex f = grid_.neighbor(pos_[static_cast<std::size_t>(id)], axis);
                if (cells_[static_cast<std::size_t>(f)] < 0) movers.push_back(id);
            }
            apply_moves(movers, axis, t);
            stats_.substeps = t;
            if (opt_.record_series)
                stats_.moves_per_substep.push_back(static_cast<std::int32_t>(movers.size()));
            silent = movers.empty() ? silent + 1 : 0;
            if (opt_.early_halt && silent == d_) {
                stats_.frozen_at = t;
                break;
            }
        }
    }

    // Candidate-based engine: a car is rechecked only after it moved or a
    // neighboring cell was vacated, which keeps jammed systems cheap.
    void run_ddim() {
        std::vector<std::vector<std::int32_t>> cand(static_cast<std::size_t>(d_));
        std::vector<std::uint8_t> queued(pos_.size(), 1);
        for (std::size_t id = 0; id < pos_.size(); ++id)
            cand[axis_[id]].push_back(static_cast<std::int32_t>(id));
        auto enqueue = [&](std::int32_t id) {
            if (!queued[static_cast<std::size_t>(id)]) {
                queued[static_cast<std::size_t>(id)] = 1;
                cand[axis_[static_cast<std::size_t>(id)]].push_back(id);
            }
        };
        std::vector<std::int32_t> scratch, movers;
        std::vector<SiteIndex> vacated;
        int silent = 0;
        for (std::int64_t t = 1; t <= opt_.max_substeps; ++t) {
            const int axis = static_cast<int>(t % d_);
            scratch.clear();
            scratch.swap(cand[static_cast<std::size_t>(axis)]);
            movers.clear();
            for (auto id : scratch) {
                queued[static_cast<std::size_t>(id)] = 0;
                SiteIndex f = grid_.neighbor(pos_[static_cast<std::size_t>(id)], axis);
                if (cells_[static_cast<std::size_t>(f)] < 0) movers.push_back(id);
            }
            vacated.clear();
            for (auto id : movers) vacated.push_back(pos_[static_cast<std::size_t>(id)]);
            apply_moves(movers, axis, t);
            for (auto id : movers) enqueue(id);
            for (auto z : vacated) {
                for (int c = 0; c < d_; ++c) {
                    SiteIndex b = grid_.neighbor(z, c, -1);
                    std::int32_t j = cells_[static_cast<std::size_t>(b)];
                    if (j >= 0 && axis_[static_cast<std::size_t>(j)] == c) enqueue(j);
                }
            }
            stats_.substeps = t;
            if (opt_.record_series)
                stats_.moves_per_substep.push_back(static_cast<std::int32_t>(movers.size()));
            silent = movers.empty() ? silent + 1 : 0;
            if (opt_.early_halt && silent == d_) {
                stats_.frozen_at = t;
                break;
            }
        }
    }

    void apply_moves(const std::vector<std::int32_t>& movers, int axis, std::int64_t t) {
        for (auto id : movers) {
            SiteIndex from = pos_[static_cast<std::size_t>(id)];
            SiteIndex to = grid_.neighbor(from, axis);
            cells_[static_cast<std::size_t>(from)] = -1;
            cells_[static_cast<std::size_t>(to)] = id;
            pos_[static_cast<std::size_t>(id)] = to;
            record_move(id, t);
        }
    }

    void run_poisson() {
        CounterRng rng{opt_.seed};
        const auto ncars = static_cast<std::int64_t>(pos_.size());
        if (ncars == 0) return;
        // Incremental movability tracking so a frozen state halts the run
        // without a full scan per event.
        std::vector<std::uint8_t> movable(pos_.size(), 0);
        std::int64_t movable_count = 0;
        auto set_movable = [&](std::int32_t id, bool v) {
            if (movable[static_cast<std::size_t>(id)] != static_cast<std::uint8_t>(v)) {
                movable[static_cast<std::size_t>(id)] = static_cast<std::uint8_t>(v);
                movable_count += v ? 1 : -1;
            }
        };
        for (std::size_t id = 0; id < pos_.size(); ++id) {
            SiteIndex f = grid_.neighbor(pos_[id], axis_[id]);
            if (cells_[static_cast<std::size_t>(f)] < 0)
                set_movable(static_cast<std::int32_t>(id), true);
        }
        const double rate = static_cast<double>(ncars);
        for (std::int64_t ev = 1; ev <= opt_.max_substeps; ++ev) {
            if (opt_.early_halt && movable_count == 0) {
                stats_.frozen_at = stats_.substeps;
                break;
            }
            stats_.tau += rng.exponential(rate);
            auto id = static_cast<std::int32_t>(rng.next_below(static_cast<std::uint64_t>(ncars)));
            const int axis = axis_[static_cast<std::size_t>(id)];
            SiteIndex from = pos_[static_cast<std::size_t>(id)];
            SiteIndex to = grid_.neighbor(from, axis);
            std::int32_t mv = 0;
            if (cells_[static_cast<std::size_t>(to)] < 0) {
                cells_[static_cast<std::size_t>(from)] = -1;
                cells_[static_cast<std::size_t>(to)] = id;
                pos_[static_cast<std::size_t>(id)] = to;
                record_move(id, ev);
                mv = 1;
                set_movable(id, cells_[static_cast<std::size_t>(grid_.neighbor(to, axis))] < 0);
                for (int c = 0; c < d_; ++c) {
                    SiteIndex b = grid_.neighbor(from, c, -1);
                    std::int32_t j = cells_[static_cast<std::size_t>(b)];
                    if (j >= 0 && axis_[static_cast<std::size_t>(j)] == c) set_movable(j, true);
                    SiteIndex b2 = grid_.neighbor(to, c, -1);
                    std::int32_t j2 = cells_[static_cast<std::size_t>(b2)];
                    if (j2 >= 0 && j2 != id && axis_[static_cast<std::size_t>(j2)] == c)
                        set_movable(j2, false);
                }
            } else {
                ++stats_.failed_attempts;
            }
            stats_.substeps = ev;
            if (opt_.record_series) stats_.moves_per_substep.push_back(mv);
        }
        if (opt_.early_halt && movable_count == 0 && !stats_.frozen_at)
            stats_.frozen_at = stats_.substeps;
    }

    void write_back() {
        for (SiteIndex i = 0, n = grid_.size(); i < n; ++i)
            grid_.set(i, kEmpty);
        for (std::size_t id = 0; id < pos_.size(); ++id)
            grid_.set(pos_[id], SiteState::car(axis_[id]));
    }

    TorusGrid& grid_;
    Engine engine_;
    SimOptions opt_;
    int d_;
    std::vector<std::int32_t> cells_; // car id per site, -1 empty
    std::vector<SiteIndex> pos_;      // car id -> site
    std::vector<std::uint8_t> axis_;  // car id -> direction
    SimStats stats_;
};

} // namespace detail

/// Run a simulation in place; the grid ends in the final configuration.
/// Deterministic engines early-halt with frozen_at set once d consecutive
/// sub-steps produce no move (the configuration is then constant forever);
/// the Poisson engine halts when no car can move.
inline SimStats run(TorusGrid& g, const SimOptions& opt, Engine engine) {
    if (opt.max_substeps < 1)
        throw std::invalid_argument("run: max_substeps must be >= 1");
    detail::Simulation sim(g, engine, opt);
    return sim.run();
}

/// Average speed over the sub-step window [lo, hi] (1-based, inclusive):
/// successful moves divided by (car count * window length). The free-flow
/// ceiling is 1/d. Sub-steps beyond a frozen run contribute zero moves.
inline double speed(const SimStats& stats, std::int64_t lo, std::int64_t hi) {
    if (lo < 1 || hi < lo)
        throw std::invalid_argument("speed: empty or invalid window");
    if (stats.car_count == 0)
        throw std::invalid_argument("speed: no cars");
    if (stats.moves_per_substep.empty() && stats.substeps > 0)
        throw std::invalid_argument("speed: run did not record a move series");
    const auto recorded = static_cast<std::int64_t>(stats.moves_per_substep.size());
    if (hi > recorded && !stats.frozen_at)
        throw std::invalid_argument("speed: window beyond recorded range");
    std::int64_t moves = 0;
    for (std::int64_t t = lo; t <= hi && t <= recorded; ++t)
        moves += stats.moves_per_substep[static_cast<std::size_t>(t - 1)];
    return static_cast<double>(moves) /
           (static_cast<double>(stats.car_count) * static_cast<double>(hi - lo + 1));
}

} // namespace bml
