#pragma once

// Schedule refinement by local search: a taboo engine with an optional
// gain-guided ("light") move, classical simulated annealing with an adaptive
// variant, and an exhaustive oracle over a discretized solution space for
// verifying the heuristics on tiny instances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fres/channel.hpp"
#include "fres/energy.hpp"
#include "fres/errors.hpp"
#include "fres/rng.hpp"
#include "fres/scenario.hpp"

namespace fres {

// A candidate solution is exactly a schedule: per-user association and
// allocation fraction.
using SolutionVector = Schedule;

struct MoveOperator {
    int ue = -1;
    int old_assoc = 0;
    int new_assoc = 0; // never equal to old_assoc
};

struct Neighbor {
    SolutionVector x;
    MoveOperator op;
};

struct SearchTraceRow {
    int iteration = 0;
    double current_f = 0.0;
    double best_f = 0.0;
};

struct SearchStats {
    int iterations = 0;     // moves actually executed
    long evaluations = 0;   // objective evaluations performed
    int max_taboo_seen = 0; // peak taboo-list length
    int reheats = 0;        // adaptive temperature bumps (annealing only)
};

struct SearchOptions {
    int max_iter = 10;
    int taboo_len = 5;
    int neighborhood = 20;
    std::uint64_t seed = 0;
    std::vector<SearchTraceRow>* trace = nullptr;
    SearchStats* stats = nullptr;
};

struct SaOptions {
    double t_max = 100.0;
    double t_min = 1.0;
    double cooling = 0.95;
    std::uint64_t seed = 0;
    // Adaptive reheating (used by asa only): bump the temperature when the
    // acceptance ratio over the trailing window drops below the threshold.
    double reheat_factor = 1.05;
    int acceptance_window = 10;
    double acceptance_threshold = 0.05;
    std::vector<SearchTraceRow>* trace = nullptr;
    SearchStats* stats = nullptr;
};

namespace detail {
constexpr std::uint64_t kStreamSearch = 21;
constexpr double kMinFraction = 1e-3;
} // namespace detail

// Smallest allocation fraction that still meets the task deadline under the
// given association. When no fraction can meet the deadline (dead link, no
// transmit slack, or required speed above the ceiling) the floor is vacuous
// and collapses to the domain minimum: forcing full speed there would spend
// maximal energy on a deadline that is already lost, and the hover term
// keeps tiny fractions from being free. The remaining violation is the
// constraint checker's to report.
inline double deadline_floor_fraction(const Scenario& sc, const ChannelSet& cs, int ue,
                                      int assoc) {
    const auto& c = sc.constants;
    const auto& task = sc.ues[static_cast<std::size_t>(ue)].task;
    if (assoc == 0)
        return std::clamp((task.cycles / c.deadline_s) / c.local_cap_cycles,
                          detail::kMinFraction, 1.0);
    const auto& link = cs.at(ue, assoc - 1);
    if (link.rate_bps <= 0.0) return detail::kMinFraction;
    const double slack = c.deadline_s - task.data_bits / link.rate_bps;
    if (slack <= 0.0) return detail::kMinFraction;
    const double needed = (task.cycles / slack) / c.uav_cap_cycles;
    if (needed > 1.0) return detail::kMinFraction;
    return std::max(needed, detail::kMinFraction);
}

// Allocation finalization used by every search: raise each user to its
// deadline-feasible floor, then repair capacity. Capacity is the hard
// constraint, so it is applied last; the loop runs floor-then-repair to a
// fixed point so the result is stable under re-finalization (the floored set
// only grows, so it terminates).
inline SolutionVector finalize_allocation(const Scenario& sc, const ChannelSet& cs,
                                          const SolutionVector& x) {
    const int n = static_cast<int>(sc.ues.size());
    const int m = sc.active_uav_count;
    SolutionVector out = x;
    for (int guard = 0; guard < 64; ++guard) {
        SolutionVector next = out;
        for (int i = 0; i < n; ++i) {
            const int a = next.association[static_cast<std::size_t>(i)];
            if (a < 0 || a > m) continue; // shape errors surface in total_energy
            next.allocation_fraction[static_cast<std::size_t>(i)] =
                std::max(next.allocation_fraction[static_cast<std::size_t>(i)],
                         deadline_floor_fraction(sc, cs, i, a));
        }
        next = repair_allocation(sc, next);
        const bool stable = next.association == out.association &&
                            next.allocation_fraction == out.allocation_fraction;
        out = next;
        if (stable) break;
    }
    return out;
}

// Objective of a candidate: finalize the allocations (deadline floor, then
// capacity repair), then total energy. A schedule that puts data on a dead
// link is encoded as +infinity rather than an error so searches can rank it.
inline double evaluate(const SolutionVector& x, const Scenario& sc, const ChannelSet& cs) {
    const Schedule finalized = finalize_allocation(sc, cs, x);
    try {
        return total_energy(sc, finalized, cs).total_j;
    } catch (const InfeasibleLinkError&) {
        return std::numeric_limits<double>::infinity();
    }
}

// One neighbor: a uniformly chosen user moves to a uniformly chosen
// alternative association, and that user's allocation fraction receives a
// uniform perturbation in [-0.1, 0.1], clamped to (0, 1]. The perturbation is
// based at the deadline-feasible floor of the user's NEW association: a
// fraction is a share of one specific processor, so a value chosen for the
// old processor carries no meaning for the new one, while the floor is the
// energy-minimal feasible point under the new decision. With `light` set the
// move is gain-guided: a candidate that targets a UAV is redirected to the
// strongest-gain UAV for that user before the fraction is drawn, unless the
// redirect would collapse the move back onto the current association, in
// which case the random target is kept so the move stays a move.
inline Neighbor make_neighbor(const SolutionVector& x, const Scenario& sc, const ChannelSet& cs,
                              std::mt19937_64& rng, bool light = false) {
    const int n = static_cast<int>(x.association.size());
    const int m = sc.active_uav_count;
    std::uniform_int_distribution<int> pick_ue(0, n - 1);
    const int ue = pick_ue(rng);
    const int old_assoc = x.association[static_cast<std::size_t>(ue)];
    std::uniform_int_distribution<int> pick_alt(0, m - 1); // m alternatives out of m+1
    int alt = pick_alt(rng);
    if (alt >= old_assoc) ++alt; // skip the current association
    if (light && alt >= 1) {
        int best = 0;
        for (int j = 1; j < cs.n_uavs; ++j)
            if (cs.at(ue, j).effective_gain > cs.at(ue, best).effective_gain) best = j;
        if (best + 1 != old_assoc) alt = best + 1;
    }
    std::uniform_real_distribution<double> perturb(-0.1, 0.1);
    Neighbor nb;
    nb.x = x;
    nb.x.association[static_cast<std::size_t>(ue)] = alt;
    nb.x.allocation_fraction[static_cast<std::size_t>(ue)] =
        std::clamp(deadline_floor_fraction(sc, cs, ue, alt) + perturb(rng),
                   detail::kMinFraction, 1.0);
    nb.op = {ue, old_assoc, alt};
    return nb;
}

inline std::vector<Neighbor> generate_neighborhood(const SolutionVector& x, const Scenario& sc,
                                                   const ChannelSet& cs, int size,
                                                   std::mt19937_64& rng, bool light = false) {
    if (size < 1) throw ConfigError("generate_neighborhood: size must be at least 1");
    if (sc.active_uav_count < 1) throw ConfigError("generate_neighborhood: need at least one UAV");
    if (x.association.empty()) throw ShapeError("generate_neighborhood: empty solution");
    std::vector<Neighbor> out;
    out.reserve(static_cast<std::size_t>(size));
    for (int k = 0; k < size; ++k) out.push_back(make_neighbor(x, sc, cs, rng, light));
    return out;
}

inline std::vector<Neighbor> generate_neighborhood(const SolutionVector& x, const Scenario& sc,
                                                   const ChannelSet& cs, int size,
                                                   std::uint64_t seed, bool light = false) {
    auto rng = make_rng(seed, detail::kStreamSearch);
    return generate_neighborhood(x, sc, cs, size, rng, light);
}

// Sends the user to the UAV with the strongest beamformed link; ties go to
// the lowest index.
inline SolutionVector light_move(const SolutionVector& x, int ue, const ChannelSet& cs) {
    if (ue < 0 || ue >= static_cast<int>(x.association.size()))
        throw ShapeError("light_move: user index out of range");
    int best = 0;
    for (int j = 1; j < cs.n_uavs; ++j)
        if (cs.at(ue, j).effective_gain > cs.at(ue, best).effective_gain) best = j;
    SolutionVector out = x;
    out.association[static_cast<std::size_t>(ue)] = best + 1;
    return out;
}

namespace detail {

// Shared taboo-search engine. With `light` set, candidate construction is
// gain-guided: UAV-targeted moves are redirected to the strongest-gain UAV
// for that user (see make_neighbor); candidates that go local stay local.
inline SolutionVector taboo_engine(const SolutionVector& x0, const Scenario& sc,
                                   const ChannelSet& cs, const SearchOptions& opt,
                                   bool light) {
    if (opt.taboo_len < 1) throw ConfigError("taboo search: taboo length must be positive");
    if (opt.neighborhood < 1)
        throw ConfigError("taboo search: neighborhood size must be positive");
    if (opt.max_iter < 0) throw ConfigError("taboo search: negative iteration budget");
    require_schedule_shape(sc, x0);

    SearchStats local_stats;
    SearchStats& st = opt.stats != nullptr ? *opt.stats : local_stats;
    st = SearchStats{};

    auto rng = make_rng(opt.seed, kStreamSearch);

    SolutionVector x_c = finalize_allocation(sc, cs, x0);
    double f_c = evaluate(x_c, sc, cs);
    ++st.evaluations;
    SolutionVector x_b = x_c;
    double f_b = f_c;

    std::deque<std::pair<int, int>> taboo; // (ue, new association)
    const auto is_taboo = [&taboo](const MoveOperator& op) {
        for (const auto& sig : taboo)
            if (sig.first == op.ue && sig.second == op.new_assoc) return true;
        return false;
    };
    const auto push_taboo = [&taboo, &opt, &st](const MoveOperator& op) {
        taboo.emplace_back(op.ue, op.new_assoc);
        if (static_cast<int>(taboo.size()) > opt.taboo_len) taboo.pop_front();
        st.max_taboo_seen = std::max(st.max_taboo_seen, static_cast<int>(taboo.size()));
    };

    for (int iter = 1; iter <= opt.max_iter; ++iter) {
        auto neighbors = generate_neighborhood(x_c, sc, cs, opt.neighborhood, rng, light);

        std::vector<double> f(neighbors.size());
        for (std::size_t k = 0; k < neighbors.size(); ++k) {
            f[k] = evaluate(neighbors[k].x, sc, cs);
            ++st.evaluations;
        }
        std::size_t best_k = 0;
        for (std::size_t k = 1; k < neighbors.size(); ++k)
            if (f[k] < f[best_k]) best_k = k;

        std::size_t chosen = best_k;
        if (!is_taboo(neighbors[best_k].op)) {
            push_taboo(neighbors[best_k].op);
        } else if (f[best_k] < f_b) {
            // Aspiration: a taboo move that beats the best-so-far is taken
            // without entering the list.
        } else {
            // Runner-up: the best candidate whose move is not taboo. Taking a
            // same-signature runner-up would defeat the list and let moves
            // starve. When every candidate is taboo, fall back to the best.
            std::size_t second_k = best_k;
            for (std::size_t k = 0; k < neighbors.size(); ++k) {
                if (is_taboo(neighbors[k].op)) continue;
                if (second_k == best_k || f[k] < f[second_k]) second_k = k;
            }
            chosen = second_k;
            push_taboo(neighbors[second_k].op);
        }

        x_c = neighbors[chosen].x;
        f_c = f[chosen];
        ++st.iterations;
        if (f_c < f_b) {
            x_b = x_c;
            f_b = f_c;
        }
        if (opt.trace != nullptr) opt.trace->push_back({iter, f_c, f_b});
    }
    return finalize_allocation(sc, cs, x_b);
}

} // namespace detail

// Gain-guided taboo search: neighborhood moves that target a UAV are steered
// to the user's strongest link.
inline SolutionVector lts(const SolutionVector& x0, const Scenario& sc, const ChannelSet& cs,
                          const SearchOptions& opt = {}) {
    return detail::taboo_engine(x0, sc, cs, opt, true);
}

// Plain taboo search: identical engine, unguided random moves.
inline SolutionVector ts(const SolutionVector& x0, const Scenario& sc, const ChannelSet& cs,
                         const SearchOptions& opt = {}) {
    return detail::taboo_engine(x0, sc, cs, opt, false);
}

namespace detail {

inline SolutionVector annealing_engine(const SolutionVector& x0, const Scenario& sc,
                                       const ChannelSet& cs, const SaOptions& opt,
                                       bool adaptive) {
    if (!(opt.t_max > opt.t_min) || !(opt.t_min > 0.0))
        throw ConfigError("annealing: need t_max > t_min > 0");
    if (!(opt.cooling > 0.0) || !(opt.cooling < 1.0))
        throw ConfigError("annealing: cooling factor must lie in (0, 1)");
    if (adaptive && !(opt.cooling * opt.reheat_factor < 1.0))
        throw ConfigError("annealing: cooling * reheat_factor must stay below 1 "
                          "or the schedule never terminates");
    require_schedule_shape(sc, x0);

    SearchStats local_stats;
    SearchStats& st = opt.stats != nullptr ? *opt.stats : local_stats;
    st = SearchStats{};

    auto rng = make_rng(opt.seed, kStreamSearch);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    SolutionVector x_c = finalize_allocation(sc, cs, x0);
    double f_c = evaluate(x_c, sc, cs);
    ++st.evaluations;
    SolutionVector x_b = x_c;
    double f_b = f_c;

    std::deque<bool> window; // accept/reject history of recent proposals
    int accepted_in_window = 0;

    double t = opt.t_max;
    int step = 0;
    while (t > opt.t_min) {
        ++step;
        auto nb = make_neighbor(x_c, sc, cs, rng);
        const double f_n = evaluate(nb.x, sc, cs);
        ++st.evaluations;
        const double df = f_n - f_c; // NaN when both are infinite: rejected below
        bool accept = false;
        if (df <= 0.0) {
            accept = true;
        } else {
            const double u = uni(rng);
            accept = u < std::exp(-df / t);
        }
        if (accept) {
            x_c = nb.x;
            f_c = f_n;
            if (f_c < f_b) {
                x_b = x_c;
                f_b = f_c;
            }
        }
        if (opt.trace != nullptr) opt.trace->push_back({step, f_c, f_b});

        if (adaptive) {
            window.push_back(accept);
            accepted_in_window += accept ? 1 : 0;
            if (static_cast<int>(window.size()) > opt.acceptance_window) {
                accepted_in_window -= window.front() ? 1 : 0;
                window.pop_front();
            }
            if (static_cast<int>(window.size()) == opt.acceptance_window &&
                static_cast<double>(accepted_in_window) / opt.acceptance_window <
                    opt.acceptance_threshold) {
                t *= opt.reheat_factor;
                ++st.reheats;
            }
        }
        t *= opt.cooling;
    }
    st.iterations = step;
    return finalize_allocation(sc, cs, x_b);
}

} // namespace detail

inline SolutionVector sa(const SolutionVector& x0, const Scenario& sc, const ChannelSet& cs,
                         const SaOptions& opt = {}) {
    return detail::annealing_engine(x0, sc, cs, opt, false);
}

inline SolutionVector asa(const SolutionVector& x0, const Scenario& sc, const ChannelSet& cs,
                          const SaOptions& opt = {}) {
    return detail::annealing_engine(x0, sc, cs, opt, true);
}

// Global optimum of `evaluate` over every association vector and a regular
// allocation grid {1/G, 2/G, ..., 1}. Deterministic; ties keep the first
// solution in enumeration order.
inline SolutionVector exhaustive_oracle(const Scenario& sc, const ChannelSet& cs,
                                        int grid_points, SearchStats* stats = nullptr) {
    if (grid_points < 1) throw ConfigError("exhaustive_oracle: need a positive grid");
    const int n = static_cast<int>(sc.ues.size());
    const int m = sc.active_uav_count;
    if (n < 1) throw ConfigError("exhaustive_oracle: empty scenario");

    const double combos =
        std::pow(static_cast<double>(m + 1), n) * std::pow(static_cast<double>(grid_points), n);
    if (combos > 1e7)
        throw BudgetError("exhaustive_oracle: " + std::to_string(combos) +
                          " combinations exceed the 1e7 budget");

    SearchStats local_stats;
    SearchStats& st = stats != nullptr ? *stats : local_stats;
    st = SearchStats{};

    const int radix = (m + 1) * grid_points; // joint (association, grid) digit per user
    std::vector<int> digits(static_cast<std::size_t>(n), 0);
    SolutionVector x = make_schedule(n);
    SolutionVector best;
    double f_best = std::numeric_limits<double>::infinity();
    bool have_best = false;

    while (true) {
        for (int i = 0; i < n; ++i) {
            const int d = digits[static_cast<std::size_t>(i)];
            x.association[static_cast<std::size_t>(i)] = d / grid_points;
            x.allocation_fraction[static_cast<std::size_t>(i)] =
                static_cast<double>(d % grid_points + 1) / grid_points;
        }
        const double f = evaluate(x, sc, cs);
        ++st.evaluations;
        if (!have_best || f < f_best) {
            best = x;
            f_best = f;
            have_best = true;
        }
        int pos = 0;
        while (pos < n) {
            if (++digits[static_cast<std::size_t>(pos)] < radix) break;
            digits[static_cast<std::size_t>(pos)] = 0;
            ++pos;
        }
        if (pos == n) break;
    }
    return finalize_allocation(sc, cs, best);
}

} // namespace fres
