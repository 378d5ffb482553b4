#pragma once

// Episode orchestration. One episode walks a fixed number of timeslots over a
// scenario whose users stay put while tasks are redrawn every slot: the fleet
// size follows a declared change schedule (each change re-clusters the UAVs,
// rebuilds the beamformed channels and adjusts the agent's structure exactly
// once), the agent schedules every user, a taboo search refines the action
// into a training label, and each slot ends with an executed, repaired
// schedule whose energies are recorded. The same loop skeleton drives the
// training-free baseline policies so method comparisons see identical task
// sequences.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "fres/agent.hpp"
#include "fres/channel.hpp"
#include "fres/energy.hpp"
#include "fres/errors.hpp"
#include "fres/rng.hpp"
#include "fres/scenario.hpp"
#include "fres/search.hpp"

namespace fres {

// ---------------------------------------------------------------------------
// Refinement cadence

enum class RefinementMode { OnViolation, Always, EveryK };

inline std::string to_string(RefinementMode m) {
    switch (m) {
        case RefinementMode::OnViolation: return "on-violation";
        case RefinementMode::Always: return "always";
        case RefinementMode::EveryK: return "every-k";
    }
    throw ConfigError("refinement mode: unknown enumerator");
}

inline RefinementMode parse_refinement_mode(const std::string& name) {
    if (name == "on-violation") return RefinementMode::OnViolation;
    if (name == "always") return RefinementMode::Always;
    if (name == "every-k") return RefinementMode::EveryK;
    throw ConfigError("refinement mode must be one of on-violation/always/every-k, got '" +
                      name + "'");
}

// ---------------------------------------------------------------------------
// Fleet-size change schedule

struct ScheduleChange {
    int timeslot = 0;
    int m = 1;
};

using UavSchedule = std::vector<ScheduleChange>;

namespace detail {
inline int parse_strict_int(std::string_view token, const std::string& what) {
    int value = 0;
    const auto* first = token.data();
    const auto* last = token.data() + token.size();
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc{} || res.ptr != last)
        throw ConfigError(what + ": '" + std::string(token) + "' is not an integer");
    return value;
}
} // namespace detail

// Accepts the compact "t:m,t:m,..." form, e.g. "0:3,1000:4,1500:3". Timeslots
// must be non-negative and strictly increasing; fleet sizes must be positive
// (the upper bound is checked against the scenario when the episode starts).
inline UavSchedule parse_uav_schedule(const std::string& text) {
    UavSchedule schedule;
    if (text.empty()) return schedule;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::string_view token =
            std::string_view(text).substr(start, comma == std::string::npos ? std::string::npos
                                                                            : comma - start);
        const std::size_t colon = token.find(':');
        if (colon == std::string_view::npos || token.find(':', colon + 1) != std::string_view::npos)
            throw ConfigError("fleet schedule: expected 'timeslot:count', got '" +
                              std::string(token) + "'");
        ScheduleChange ch;
        ch.timeslot = detail::parse_strict_int(token.substr(0, colon), "fleet schedule timeslot");
        ch.m = detail::parse_strict_int(token.substr(colon + 1), "fleet schedule count");
        if (ch.timeslot < 0)
            throw ConfigError("fleet schedule: timeslots must be non-negative");
        if (!schedule.empty() && ch.timeslot <= schedule.back().timeslot)
            throw ConfigError("fleet schedule: timeslots must be strictly increasing");
        if (ch.m < 1) throw ConfigError("fleet schedule: fleet sizes must be positive");
        schedule.push_back(ch);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return schedule;
}

inline std::string format_uav_schedule(const UavSchedule& schedule) {
    std::string out;
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        if (i > 0) out += ',';
        out += std::to_string(schedule[i].timeslot) + ':' + std::to_string(schedule[i].m);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Episode configuration and per-slot record

struct EpisodeConfig {
    int total_timeslots = 1000;
    UavSchedule uav_count_schedule{};
    RefinementMode refinement_mode = RefinementMode::Always;
    int refine_every_k = 10; // used by the every-k cadence only
    int train_per_slot = 1;
    int batch_size = 64;
    SearchOptions refine{};          // per-slot refinement budget
    SearchOptions baseline_search{}; // budget for the search-driven baselines
    std::uint64_t run_seed = 0;      // refinement / training / baseline draws
};

struct SlotRecord {
    int timeslot = 0;
    int m = 1;
    bool fleet_changed = false;       // this slot re-clustered and rebuilt channels
    bool refined = false;             // search refinement ran this slot
    int core_violations = 0;          // raw agent action, before any repair
    int executed_core_violations = 0; // executed schedule; zero by construction
    long search_evaluations = 0;
    double local_j = 0.0;
    double transmit_j = 0.0;
    double remote_j = 0.0;
    double hover_j = 0.0; // unweighted sum; total_j applies the hover weight
    double total_j = 0.0;
    double reward = 0.0; // exactly 1 / total_j
    double loss_ce = 0.0;
    double loss_mse = 0.0;
    double loss_total = 0.0;
    double wall_ms = 0.0; // excluded from CSV so reruns are byte-identical
};

namespace detail {
constexpr std::uint64_t kStreamRefine = 31;
constexpr std::uint64_t kStreamTrainSample = 32;
constexpr std::uint64_t kStreamBaseline = 33;

// Per-slot sub-stream, mirroring the task-resampling convention.
inline std::uint64_t slot_stream(std::uint64_t base, int slot) {
    return base + 0x1000u * (static_cast<std::uint64_t>(slot) + 1u);
}
} // namespace detail

inline void validate_episode_config(const EpisodeConfig& cfg, int max_fleet) {
    if (cfg.total_timeslots < 0)
        throw ConfigError("episode: timeslot count must be non-negative");
    if (cfg.batch_size <= 0) throw ConfigError("episode: batch size must be positive");
    if (cfg.train_per_slot < 0)
        throw ConfigError("episode: training steps per slot must be non-negative");
    if (cfg.refinement_mode == RefinementMode::EveryK && cfg.refine_every_k <= 0)
        throw ConfigError("episode: the every-k cadence needs a positive k");
    int prev = -1;
    for (const auto& ch : cfg.uav_count_schedule) {
        if (ch.timeslot < 0)
            throw ConfigError("episode: schedule timeslots must be non-negative");
        if (ch.timeslot <= prev)
            throw ConfigError("episode: schedule timeslots must be strictly increasing");
        prev = ch.timeslot;
        if (ch.m < 1 || ch.m > max_fleet)
            throw ConfigError("episode: scheduled fleet size " + std::to_string(ch.m) +
                              " outside [1, " + std::to_string(max_fleet) + "]");
    }
}

namespace detail {

inline int count_core_violations(const ViolationReport& report) {
    int count = 0;
    for (const auto& v : report.violations)
        count += v.kind != ViolationKind::Deadline ? 1 : 0;
    return count;
}

inline void record_energy(SlotRecord& rec, const Scenario& sc, const Schedule& executed,
                          const ChannelSet& cs) {
    rec.executed_core_violations = count_core_violations(check_constraints(sc, executed, &cs));
    const EnergyBreakdown eb = total_energy(sc, executed, cs);
    rec.local_j = eb.local_sum();
    rec.transmit_j = eb.transmit_sum();
    rec.remote_j = eb.remote_sum();
    rec.hover_j = eb.hover_sum();
    rec.total_j = eb.total_j;
    rec.reward = 1.0 / eb.total_j;
}

} // namespace detail

// ---------------------------------------------------------------------------
// The learning episode (agent-driven)

// Walks the slot loop with any agent exposing infer/train_step/current_m and a
// progressive_adjust overload. The scenario is mutated in place (fleet
// redeployments, per-slot tasks); the agent trains whenever refinement runs.
// The agent must enter the episode already sized for the deployed fleet.
template <class AgentT>
inline std::vector<SlotRecord> run_episode(const EpisodeConfig& cfg, Scenario& sc, AgentT& agent,
                                           ReplayBufferPool& pool) {
    validate_episode_config(cfg, std::min(agent.config().m_max, sc.max_uavs));
    if (agent.current_m() != sc.active_uav_count)
        throw ConfigError("episode: the agent is sized for " +
                          std::to_string(agent.current_m()) + " UAVs but " +
                          std::to_string(sc.active_uav_count) + " are deployed");

    const int n = static_cast<int>(sc.ues.size());
    std::vector<SlotRecord> records;
    records.reserve(static_cast<std::size_t>(cfg.total_timeslots));
    ChannelSet cs = build_channel_set(sc);
    std::size_t next_change = 0;

    for (int slot = 0; slot < cfg.total_timeslots; ++slot) {
        const auto t0 = std::chrono::steady_clock::now();
        SlotRecord rec;
        rec.timeslot = slot;

        // (a) Fleet-size change: one structural adjustment, one re-clustering,
        // one channel rebuild — all or none.
        if (next_change < cfg.uav_count_schedule.size() &&
            cfg.uav_count_schedule[next_change].timeslot == slot) {
            const int m_new = cfg.uav_count_schedule[next_change].m;
            ++next_change;
            if (m_new != sc.active_uav_count) {
                progressive_adjust(agent, pool, m_new);
                deploy_uavs(sc, m_new);
                cs = build_channel_set(sc);
                rec.fleet_changed = true;
            }
        }
        const int m = sc.active_uav_count;
        rec.m = m;

        // (b) Fresh tasks from the method-independent per-slot stream.
        resample_tasks(sc, static_cast<std::uint64_t>(slot));

        // (c) Per-user inference.
        std::vector<EncodedState> states;
        states.reserve(static_cast<std::size_t>(n));
        Schedule raw = make_schedule(n);
        for (int i = 0; i < n; ++i) {
            states.push_back(encode_state(sc, cs, i, agent.config()));
            const AgentAction a = agent.infer(states.back());
            raw.association[static_cast<std::size_t>(i)] = a.association;
            raw.allocation_fraction[static_cast<std::size_t>(i)] = a.allocation_fraction;
        }

        // (d) Constraint check on the raw action.
        rec.core_violations = detail::count_core_violations(check_constraints(sc, raw, &cs));

        // (e) Refinement cadence: search from the agent's action, store the
        // refined labels, then train on a prioritized sample.
        bool refine = false;
        switch (cfg.refinement_mode) {
            case RefinementMode::Always: refine = true; break;
            case RefinementMode::OnViolation: refine = rec.core_violations > 0; break;
            case RefinementMode::EveryK: refine = slot % cfg.refine_every_k == 0; break;
        }

        Schedule executed;
        if (refine) {
            SearchOptions opt = cfg.refine;
            SearchStats stats;
            opt.stats = &stats;
            opt.trace = nullptr;
            opt.seed = mix_seed(cfg.run_seed, detail::slot_stream(detail::kStreamRefine, slot));
            executed = lts(raw, sc, cs, opt);
            rec.refined = true;
            rec.search_evaluations = stats.evaluations;

            for (int i = 0; i < n; ++i)
                pool.store(m, states[static_cast<std::size_t>(i)],
                           AgentAction{executed.association[static_cast<std::size_t>(i)],
                                       executed.allocation_fraction[static_cast<std::size_t>(i)]});

            auto rng =
                make_rng(cfg.run_seed, detail::slot_stream(detail::kStreamTrainSample, slot));
            int steps = 0;
            for (int rep = 0; rep < cfg.train_per_slot; ++rep) {
                const auto idx = pool.sample(m, cfg.batch_size, rng);
                if (idx.empty()) break;
                std::vector<Transition> batch;
                batch.reserve(idx.size());
                for (std::size_t k : idx) batch.push_back(pool.at(m, k));
                const TrainResult tr = agent.train_step(batch);
                for (std::size_t j = 0; j < idx.size(); ++j)
                    pool.update_priority(m, idx[j], tr.per_sample[j] + 1e-6);
                rec.loss_ce += tr.l_ce;
                rec.loss_mse += tr.l_mse;
                rec.loss_total += tr.l_mt;
                ++steps;
            }
            if (steps > 1) {
                rec.loss_ce /= steps;
                rec.loss_mse /= steps;
                rec.loss_total /= steps;
            }
        } else {
            executed = repair_allocation(sc, raw);
        }

        detail::record_energy(rec, sc, executed, cs);
        rec.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        records.push_back(rec);
    }
    return records;
}

// ---------------------------------------------------------------------------
// Training-free baselines

enum class BaselineKind { Random, Local, Remote, Ts, Lts };

inline std::string to_string(BaselineKind k) {
    switch (k) {
        case BaselineKind::Random: return "random";
        case BaselineKind::Local: return "local";
        case BaselineKind::Remote: return "remote";
        case BaselineKind::Ts: return "ts";
        case BaselineKind::Lts: return "lts";
    }
    throw ConfigError("baseline: unknown enumerator");
}

inline BaselineKind parse_baseline(const std::string& name) {
    if (name == "random") return BaselineKind::Random;
    if (name == "local") return BaselineKind::Local;
    if (name == "remote") return BaselineKind::Remote;
    if (name == "ts") return BaselineKind::Ts;
    if (name == "lts") return BaselineKind::Lts;
    throw ConfigError("baseline must be one of random/local/remote/ts/lts, got '" + name + "'");
}

// Closest deployed UAV by straight-line 3-D distance; ties go to the lowest
// index so the policy is deterministic.
inline int nearest_uav(const Scenario& sc, int ue) {
    const auto& pos = sc.ues[static_cast<std::size_t>(ue)].pos;
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int j = 0; j < sc.active_uav_count; ++j) {
        const double d = distance(pos, sc.uavs[static_cast<std::size_t>(j)]);
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best + 1;
}

// Runs one training-free policy through the same slot loop the agent sees:
// identical fleet schedule, identical per-slot tasks. The non-search policies
// take the deadline-feasible minimum allocation and are then capacity
// repaired; the search policies start from a seeded random schedule.
inline std::vector<SlotRecord> run_baseline(BaselineKind kind, const EpisodeConfig& cfg,
                                            Scenario& sc) {
    validate_episode_config(cfg, sc.max_uavs);
    const int n = static_cast<int>(sc.ues.size());
    std::vector<SlotRecord> records;
    records.reserve(static_cast<std::size_t>(cfg.total_timeslots));
    ChannelSet cs = build_channel_set(sc);
    std::size_t next_change = 0;

    for (int slot = 0; slot < cfg.total_timeslots; ++slot) {
        const auto t0 = std::chrono::steady_clock::now();
        SlotRecord rec;
        rec.timeslot = slot;

        if (next_change < cfg.uav_count_schedule.size() &&
            cfg.uav_count_schedule[next_change].timeslot == slot) {
            const int m_new = cfg.uav_count_schedule[next_change].m;
            ++next_change;
            if (m_new != sc.active_uav_count) {
                deploy_uavs(sc, m_new);
                cs = build_channel_set(sc);
                rec.fleet_changed = true;
            }
        }
        const int m = sc.active_uav_count;
        rec.m = m;

        resample_tasks(sc, static_cast<std::uint64_t>(slot));

        Schedule executed;
        switch (kind) {
            case BaselineKind::Random: {
                auto rng = make_rng(cfg.run_seed,
                                    detail::slot_stream(detail::kStreamBaseline, slot));
                std::uniform_int_distribution<int> assoc(0, m);
                Schedule x = make_schedule(n);
                for (int i = 0; i < n; ++i) {
                    x.association[static_cast<std::size_t>(i)] = assoc(rng);
                    x.allocation_fraction[static_cast<std::size_t>(i)] = deadline_floor_fraction(
                        sc, cs, i, x.association[static_cast<std::size_t>(i)]);
                }
                executed = repair_allocation(sc, x);
            } break;
            case BaselineKind::Local: {
                Schedule x = make_schedule(n, 0, 1.0);
                for (int i = 0; i < n; ++i)
                    x.allocation_fraction[static_cast<std::size_t>(i)] =
                        deadline_floor_fraction(sc, cs, i, 0);
                executed = repair_allocation(sc, x);
            } break;
            case BaselineKind::Remote: {
                Schedule x = make_schedule(n);
                for (int i = 0; i < n; ++i) {
                    const int a = nearest_uav(sc, i);
                    x.association[static_cast<std::size_t>(i)] = a;
                    x.allocation_fraction[static_cast<std::size_t>(i)] =
                        deadline_floor_fraction(sc, cs, i, a);
                }
                executed = repair_allocation(sc, x);
            } break;
            case BaselineKind::Ts:
            case BaselineKind::Lts: {
                auto rng = make_rng(cfg.run_seed,
                                    detail::slot_stream(detail::kStreamBaseline, slot));
                std::uniform_int_distribution<int> assoc(0, m);
                std::uniform_real_distribution<double> frac(1e-3, 1.0);
                Schedule x = make_schedule(n);
                for (int i = 0; i < n; ++i) {
                    x.association[static_cast<std::size_t>(i)] = assoc(rng);
                    x.allocation_fraction[static_cast<std::size_t>(i)] = frac(rng);
                }
                SearchOptions opt = cfg.baseline_search;
                SearchStats stats;
                opt.stats = &stats;
                opt.trace = nullptr;
                opt.seed =
                    mix_seed(cfg.run_seed, detail::slot_stream(detail::kStreamRefine, slot));
                executed = kind == BaselineKind::Lts ? lts(x, sc, cs, opt) : ts(x, sc, cs, opt);
                rec.refined = true;
                rec.search_evaluations = stats.evaluations;
            } break;
        }

        detail::record_energy(rec, sc, executed, cs);
        rec.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        records.push_back(rec);
    }
    return records;
}

// ---------------------------------------------------------------------------
// Aggregation across seeds

struct MethodAggregate {
    double mean_energy = 0.0;
    double std_energy = 0.0; // population standard deviation
    std::vector<double> energy_curve; // per-slot means over runs
    std::vector<double> reward_curve;
    std::vector<double> loss_curve;
};

// Pools the per-slot total energies of every run (restricted to the trailing
// `window` slots when positive) into one mean and population standard
// deviation, and averages the convergence curves slot-wise across runs. All
// runs must cover the same number of slots.
inline MethodAggregate aggregate_metrics(const std::vector<std::vector<SlotRecord>>& runs,
                                         int window = 0) {
    if (runs.empty()) throw ConfigError("aggregate: need at least one record set");
    const std::size_t t = runs.front().size();
    for (const auto& r : runs)
        if (r.size() != t)
            throw ShapeError("aggregate: record sets cover different slot counts");

    MethodAggregate agg;
    agg.energy_curve.assign(t, 0.0);
    agg.reward_curve.assign(t, 0.0);
    agg.loss_curve.assign(t, 0.0);
    for (const auto& run : runs)
        for (std::size_t s = 0; s < t; ++s) {
            agg.energy_curve[s] += run[s].total_j;
            agg.reward_curve[s] += run[s].reward;
            agg.loss_curve[s] += run[s].loss_total;
        }
    for (std::size_t s = 0; s < t; ++s) {
        agg.energy_curve[s] /= static_cast<double>(runs.size());
        agg.reward_curve[s] /= static_cast<double>(runs.size());
        agg.loss_curve[s] /= static_cast<double>(runs.size());
    }

    const std::size_t w =
        window <= 0 ? t : std::min(t, static_cast<std::size_t>(window));
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& run : runs)
        for (std::size_t s = t - w; s < t; ++s) {
            sum += run[s].total_j;
            ++count;
        }
    if (count > 0) {
        agg.mean_energy = sum / static_cast<double>(count);
        double sq = 0.0;
        for (const auto& run : runs)
            for (std::size_t s = t - w; s < t; ++s) {
                const double d = run[s].total_j - agg.mean_energy;
                sq += d * d;
            }
        agg.std_energy = std::sqrt(sq / static_cast<double>(count));
    }
    return agg;
}

// ---------------------------------------------------------------------------
// Record serialization

// Fixed column order; floats carry 9 significant digits. Wall-clock time is
// deliberately absent so that a rerun with the same seeds is byte-identical.
inline constexpr const char* kSlotCsvHeader =
    "timeslot,m,fleet_changed,refined,core_violations,executed_core_violations,"
    "search_evaluations,local_j,transmit_j,remote_j,hover_j,total_j,reward,"
    "loss_ce,loss_mse,loss_total";

inline std::string slot_records_csv(const std::vector<SlotRecord>& records) {
    std::string out(kSlotCsvHeader);
    out += '\n';
    char buf[64];
    auto put = [&](double v, char sep) {
        std::snprintf(buf, sizeof buf, "%.9g%c", v, sep);
        out += buf;
    };
    for (const auto& r : records) {
        std::snprintf(buf, sizeof buf, "%d,%d,%d,%d,%d,%d,%ld,", r.timeslot, r.m,
                      r.fleet_changed ? 1 : 0, r.refined ? 1 : 0, r.core_violations,
                      r.executed_core_violations, r.search_evaluations);
        out += buf;
        put(r.local_j, ',');
        put(r.transmit_j, ',');
        put(r.remote_j, ',');
        put(r.hover_j, ',');
        put(r.total_j, ',');
        put(r.reward, ',');
        put(r.loss_ce, ',');
        put(r.loss_mse, ',');
        put(r.loss_total, '\n');
    }
    return out;
}

} // namespace fres
