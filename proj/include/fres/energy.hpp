#pragma once

// Energy model and constraint machinery. A schedule assigns every user to
// local execution or to one UAV and gives the fraction of the relevant CPU
// ceiling it may use; everything else (rates, times, energies) follows.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "fres/channel.hpp"
#include "fres/errors.hpp"
#include "fres/scenario.hpp"

namespace fres {

struct Schedule {
    std::vector<int> association;          // 0 = local, j in [1, m] = UAV j
    std::vector<double> allocation_fraction; // in (0, 1], of the relevant cap
};

inline Schedule make_schedule(int n_ues, int assoc = 0, double fraction = 0.5) {
    Schedule s;
    s.association.assign(static_cast<std::size_t>(n_ues), assoc);
    s.allocation_fraction.assign(static_cast<std::size_t>(n_ues), fraction);
    return s;
}

inline void require_schedule_shape(const Scenario& sc, const Schedule& s) {
    if (s.association.size() != sc.ues.size() ||
        s.allocation_fraction.size() != sc.ues.size())
        throw ShapeError("schedule size does not match the user population");
}

// E = nu * f^(tau-1) * F, local CPU.
inline double local_energy(double alloc_cycles, const Task& t,
                           const PhysicalConstants& c) {
    if (alloc_cycles < 0.0) throw std::invalid_argument("local_energy: negative allocation");
    return c.nu1 * std::pow(alloc_cycles, c.tau1 - 1.0) * t.cycles;
}

// E = P_t * R / r: radio-on time scaled by transmit power.
inline double transmit_energy(double tx_power_w, double data_bits, double rate_bps) {
    if (data_bits < 0.0) throw std::invalid_argument("transmit_energy: negative payload");
    if (data_bits == 0.0) return 0.0;
    if (rate_bps <= 0.0)
        throw InfeasibleLinkError("transmit_energy: zero-rate link asked to carry data");
    return tx_power_w * data_bits / rate_bps;
}

// E = nu * f^(tau-1) * F, UAV CPU.
inline double remote_energy(double alloc_cycles, const Task& t,
                            const PhysicalConstants& c) {
    if (alloc_cycles <= 0.0)
        throw std::invalid_argument("remote_energy: allocation must be positive, "
                                    "the task would never complete");
    return c.nu2 * std::pow(alloc_cycles, c.tau2 - 1.0) * t.cycles;
}

struct EnergyBreakdown {
    std::vector<double> local_j;    // per user
    std::vector<double> transmit_j; // per user
    std::vector<double> remote_j;   // per user
    std::vector<double> hover_j;    // per UAV
    double total_j = 0.0;

    double local_sum() const { double s = 0; for (double v : local_j) s += v; return s; }
    double transmit_sum() const { double s = 0; for (double v : transmit_j) s += v; return s; }
    double remote_sum() const { double s = 0; for (double v : remote_j) s += v; return s; }
    double hover_sum() const { double s = 0; for (double v : hover_j) s += v; return s; }
};

// A UAV hovers for as long as its slowest assigned task is in flight or on
// its CPU; users it does not serve cost it nothing.
inline double hover_energy(double hover_power_w, double longest_service_s) {
    return hover_power_w * std::max(longest_service_s, 0.0);
}

// Full objective evaluation. Offloaded links read their beamformed rate from
// the channel set; a zero-rate link with a nonzero payload raises
// InfeasibleLinkError.
inline EnergyBreakdown total_energy(const Scenario& sc, const Schedule& s,
                                    const ChannelSet& cs) {
    require_schedule_shape(sc, s);
    const int n = static_cast<int>(sc.ues.size());
    const int m = sc.active_uav_count;
    const auto& c = sc.constants;
    EnergyBreakdown b;
    b.local_j.assign(static_cast<std::size_t>(n), 0.0);
    b.transmit_j.assign(static_cast<std::size_t>(n), 0.0);
    b.remote_j.assign(static_cast<std::size_t>(n), 0.0);
    b.hover_j.assign(static_cast<std::size_t>(m), 0.0);
    std::vector<double> longest(static_cast<std::size_t>(m), 0.0);

    for (int i = 0; i < n; ++i) {
        const auto& ue = sc.ues[static_cast<std::size_t>(i)];
        const int a = s.association[static_cast<std::size_t>(i)];
        const double frac = s.allocation_fraction[static_cast<std::size_t>(i)];
        if (a == 0) {
            b.local_j[static_cast<std::size_t>(i)] =
                local_energy(frac * c.local_cap_cycles, ue.task, c);
        } else if (a >= 1 && a <= m) {
            const auto& link = cs.at(i, a - 1);
            b.transmit_j[static_cast<std::size_t>(i)] =
                transmit_energy(c.tx_power_w, ue.task.data_bits, link.rate_bps);
            const double f = frac * c.uav_cap_cycles;
            b.remote_j[static_cast<std::size_t>(i)] = remote_energy(f, ue.task, c);
            const double t_tx = ue.task.data_bits / link.rate_bps;
            const double t_exec = ue.task.cycles / f;
            longest[static_cast<std::size_t>(a - 1)] =
                std::max(longest[static_cast<std::size_t>(a - 1)], t_tx + t_exec);
        } else {
            throw ShapeError("total_energy: association index " + std::to_string(a) +
                             " outside [0, " + std::to_string(m) + "]");
        }
    }
    for (int j = 0; j < m; ++j)
        b.hover_j[static_cast<std::size_t>(j)] =
            hover_energy(c.hover_power_w, longest[static_cast<std::size_t>(j)]);

    b.total_j = b.local_sum() + b.transmit_sum() + b.remote_sum() +
                c.hover_weight * b.hover_sum();
    return b;
}

enum class ViolationKind { Association, LocalCap, UavCap, Deadline, Allocation };

struct Violation {
    ViolationKind kind;
    int ue_index = -1;  // -1 when the violation is per UAV
    int uav_index = -1; // -1 when the violation is per user
    double amount = 0.0;
};

struct ViolationReport {
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    // The hard feasibility core: association shape and both CPU ceilings.
    bool core_ok() const {
        for (const auto& v : violations)
            if (v.kind != ViolationKind::Deadline) return false;
        return true;
    }
    int count(ViolationKind k) const {
        int c = 0;
        for (const auto& v : violations)
            if (v.kind == k) ++c;
        return c;
    }
};

// Checks association range, both CPU ceilings and, when a channel set is
// supplied, the completion deadline of every task. Capacity comparisons are
// exact: a sum landing on the ceiling is feasible.
inline ViolationReport check_constraints(const Scenario& sc, const Schedule& s,
                                         const ChannelSet* cs = nullptr) {
    require_schedule_shape(sc, s);
    const int n = static_cast<int>(sc.ues.size());
    const int m = sc.active_uav_count;
    const auto& c = sc.constants;
    ViolationReport rep;
    std::vector<double> uav_load(static_cast<std::size_t>(m), 0.0);

    for (int i = 0; i < n; ++i) {
        const int a = s.association[static_cast<std::size_t>(i)];
        const double frac = s.allocation_fraction[static_cast<std::size_t>(i)];
        if (a < 0 || a > m) {
            rep.violations.push_back({ViolationKind::Association, i, -1,
                                      static_cast<double>(a)});
            continue;
        }
        if (frac <= 0.0) {
            rep.violations.push_back({ViolationKind::Allocation, i, -1, frac});
            continue;
        }
        if (a == 0) {
            const double f = frac * c.local_cap_cycles;
            if (f > c.local_cap_cycles)
                rep.violations.push_back({ViolationKind::LocalCap, i, -1,
                                          f - c.local_cap_cycles});
            const double t = sc.ues[static_cast<std::size_t>(i)].task.cycles / f;
            if (t > c.deadline_s)
                rep.violations.push_back({ViolationKind::Deadline, i, -1,
                                          t - c.deadline_s});
        } else {
            uav_load[static_cast<std::size_t>(a - 1)] += frac * c.uav_cap_cycles;
            if (cs != nullptr) {
                const auto& ue = sc.ues[static_cast<std::size_t>(i)];
                const auto& link = cs->at(i, a - 1);
                if (link.rate_bps <= 0.0) {
                    rep.violations.push_back({ViolationKind::Deadline, i, a - 1,
                                              std::numeric_limits<double>::infinity()});
                } else {
                    const double t = ue.task.data_bits / link.rate_bps +
                                     ue.task.cycles / (frac * c.uav_cap_cycles);
                    if (t > c.deadline_s)
                        rep.violations.push_back({ViolationKind::Deadline, i, a - 1,
                                                  t - c.deadline_s});
                }
            }
        }
    }
    for (int j = 0; j < m; ++j) {
        if (uav_load[static_cast<std::size_t>(j)] > c.uav_cap_cycles)
            rep.violations.push_back({ViolationKind::UavCap, -1, j,
                                      uav_load[static_cast<std::size_t>(j)] -
                                          c.uav_cap_cycles});
    }
    return rep;
}

// Scales every overloaded UAV's allocations down proportionally and clamps
// local allocations to their ceiling. The scaling loop repeats until the
// recomputed load passes the exact capacity comparison, so the result is
// feasible in the very arithmetic check_constraints uses. Idempotent.
inline Schedule repair_allocation(const Scenario& sc, const Schedule& in) {
    require_schedule_shape(sc, in);
    const int n = static_cast<int>(sc.ues.size());
    const int m = sc.active_uav_count;
    const auto& c = sc.constants;
    Schedule out = in;

    for (int i = 0; i < n; ++i) {
        if (out.association[static_cast<std::size_t>(i)] == 0)
            out.allocation_fraction[static_cast<std::size_t>(i)] =
                std::min(out.allocation_fraction[static_cast<std::size_t>(i)], 1.0);
    }
    for (int j = 1; j <= m; ++j) {
        for (int guard = 0; guard < 64; ++guard) {
            double load = 0.0;
            for (int i = 0; i < n; ++i)
                if (out.association[static_cast<std::size_t>(i)] == j)
                    load += out.allocation_fraction[static_cast<std::size_t>(i)] *
                            c.uav_cap_cycles;
            if (load <= c.uav_cap_cycles) break;
            const double scale = c.uav_cap_cycles / load;
            for (int i = 0; i < n; ++i)
                if (out.association[static_cast<std::size_t>(i)] == j)
                    out.allocation_fraction[static_cast<std::size_t>(i)] *= scale;
        }
    }
    return out;
}

// Cheapest allocation that still meets the deadline, given the association.
// Local CPU energy only grows with speed, so the deadline-tight point is
// optimal. On a UAV the compute term grows with speed while the hover term
// shrinks, giving an interior optimum f* = (hover_weight * P_h /
// ((tau2 - 1) * nu2))^(1/tau2); the best feasible point is that optimum
// pushed up to the deadline floor. When the link is too slow for any
// allocation to meet the deadline the interior optimum is used and the
// violation is left for check_constraints to report.
inline double preferred_fraction(const Scenario& sc, const ChannelSet& cs, int ue,
                                 int assoc) {
    const auto& c = sc.constants;
    const auto& task = sc.ues[static_cast<std::size_t>(ue)].task;
    constexpr double kMinFraction = 1e-3;
    if (assoc == 0) {
        const double f = task.cycles / c.deadline_s;
        return std::clamp(f / c.local_cap_cycles, kMinFraction, 1.0);
    }
    double f_star;
    if (c.tau2 <= 1.0) {
        f_star = c.uav_cap_cycles; // compute energy flat in speed: hover decides
    } else {
        f_star = std::pow(c.hover_weight * c.hover_power_w / ((c.tau2 - 1.0) * c.nu2),
                          1.0 / c.tau2);
    }
    const auto& link = cs.at(ue, assoc - 1);
    double f = f_star;
    if (link.rate_bps > 0.0) {
        const double slack = c.deadline_s - task.data_bits / link.rate_bps;
        if (slack > 0.0) f = std::max(f_star, task.cycles / slack);
    }
    return std::clamp(f / c.uav_cap_cycles, kMinFraction, 1.0);
}

} // namespace fres
