#include <cmath>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>
#include <nlohmann/json.hpp>

#include "fres/agent.hpp"
#include "fres/channel.hpp"
#include "fres/energy.hpp"
#include "fres/errors.hpp"
#include "fres/network.hpp"
#include "fres/runtime.hpp"
#include "fres/scenario.hpp"

using namespace fres;
using nlohmann::json;

namespace {

// A compact learning setup: few users, two UAVs, an agent whose base slice
// matches the deployed fleet.
struct Rig {
    Scenario sc;
    AgentConfig agent_cfg;
    EpisodeConfig episode;
};

Rig make_rig(std::uint64_t seed, int n_ues = 4, int m = 2, int slots = 12) {
    Rig r;
    ScenarioParams p;
    p.n_ues = n_ues;
    p.initial_uavs = m;
    r.sc = generate_scenario(seed, p);
    r.agent_cfg.m_initial = m;
    r.agent_cfg.seed = seed ^ 0xA5A5u;
    r.episode.total_timeslots = slots;
    r.episode.batch_size = 16;
    r.episode.run_seed = seed ^ 0x5A5Au;
    return r;
}

// An agent whose every parameter is zero always scores class 0 (local) with
// fraction exactly 0.5: a policy that never violates a core constraint.
MultiTaskAgent zeroed_agent(const AgentConfig& cfg) {
    MultiTaskAgent a(cfg);
    auto body = load_checkpoint(a.save(), "fres-agent");
    for (auto& layer : body["layers"]) {
        for (auto& v : layer["w"]) v = 0.0;
        for (auto& v : layer["b"]) v = 0.0;
    }
    return MultiTaskAgent::load(save_checkpoint(body, "fres-agent"));
}

} // namespace

TEST_CASE("the fleet schedule text form round-trips and rejects malformed input") {
    SECTION("the documented three-phase protocol parses exactly") {
        const auto sched = parse_uav_schedule("0:3,1000:4,1500:3");
        REQUIRE(sched.size() == 3);
        CHECK(sched[0].timeslot == 0);
        CHECK(sched[0].m == 3);
        CHECK(sched[1].timeslot == 1000);
        CHECK(sched[1].m == 4);
        CHECK(sched[2].timeslot == 1500);
        CHECK(sched[2].m == 3);
        CHECK(format_uav_schedule(sched) == "0:3,1000:4,1500:3");
    }

    SECTION("an empty string is an empty schedule") {
        CHECK(parse_uav_schedule("").empty());
        CHECK(format_uav_schedule({}) == "");
    }

    SECTION("malformed tokens are rejected with a configuration error") {
        CHECK_THROWS_AS(parse_uav_schedule("5"), ConfigError);
        CHECK_THROWS_AS(parse_uav_schedule("a:b"), ConfigError);
        CHECK_THROWS_AS(parse_uav_schedule("1:2:3"), ConfigError);
        CHECK_THROWS_AS(parse_uav_schedule("0:1,"), ConfigError);
        CHECK_THROWS_AS(parse_uav_schedule("0:1, 5:2"), ConfigError); // no blanks
        CHECK_THROWS_AS(parse_uav_schedule("-1:2"), ConfigError);
        CHECK_THROWS_AS(parse_uav_schedule("0:0"), ConfigError);
    }

    SECTION("timeslots must strictly increase") {
        CHECK_THROWS_AS(parse_uav_schedule("3:1,2:4"), ConfigError);
        CHECK_THROWS_AS(parse_uav_schedule("3:1,3:2"), ConfigError);
    }
}

TEST_CASE("episode configuration validation") {
    EpisodeConfig cfg;

    SECTION("defaults validate") { CHECK_NOTHROW(validate_episode_config(cfg, 5)); }

    SECTION("each invalid field is named") {
        cfg.total_timeslots = -1;
        CHECK_THROWS_AS(validate_episode_config(cfg, 5), ConfigError);
        cfg = {};
        cfg.batch_size = 0;
        CHECK_THROWS_AS(validate_episode_config(cfg, 5), ConfigError);
        cfg = {};
        cfg.train_per_slot = -1;
        CHECK_THROWS_AS(validate_episode_config(cfg, 5), ConfigError);
        cfg = {};
        cfg.refinement_mode = RefinementMode::EveryK;
        cfg.refine_every_k = 0;
        CHECK_THROWS_AS(validate_episode_config(cfg, 5), ConfigError);
        cfg = {};
        cfg.uav_count_schedule = {{0, 3}, {0, 4}};
        CHECK_THROWS_AS(validate_episode_config(cfg, 5), ConfigError);
        cfg = {};
        cfg.uav_count_schedule = {{0, 6}};
        CHECK_THROWS_AS(validate_episode_config(cfg, 5), ConfigError); // above the cap
        cfg.uav_count_schedule = {{0, 5}};
        CHECK_NOTHROW(validate_episode_config(cfg, 5)); // at the cap
    }

    SECTION("refinement mode names round-trip and reject strangers") {
        for (auto m : {RefinementMode::OnViolation, RefinementMode::Always,
                       RefinementMode::EveryK})
            CHECK(parse_refinement_mode(to_string(m)) == m);
        CHECK_THROWS_AS(parse_refinement_mode("sometimes"), ConfigError);
    }

    SECTION("baseline names round-trip and reject strangers") {
        for (auto k : {BaselineKind::Random, BaselineKind::Local, BaselineKind::Remote,
                       BaselineKind::Ts, BaselineKind::Lts})
            CHECK(parse_baseline(to_string(k)) == k);
        CHECK_THROWS_AS(parse_baseline("fres"), ConfigError);
    }
}

TEST_CASE("a zero-slot episode is empty and a mis-sized agent is rejected") {
    auto rig = make_rig(901);
    rig.episode.total_timeslots = 0;
    MultiTaskAgent agent(rig.agent_cfg);
    ReplayBufferPool pool;
    CHECK(run_episode(rig.episode, rig.sc, agent, pool).empty());
    CHECK(run_baseline(BaselineKind::Local, rig.episode, rig.sc).empty());

    // Agent sized for three UAVs, scenario deploys two.
    AgentConfig wide = rig.agent_cfg;
    wide.m_initial = 3;
    MultiTaskAgent mismatched(wide);
    CHECK_THROWS_AS(run_episode(rig.episode, rig.sc, mismatched, pool), ConfigError);
}

TEST_CASE("the local baseline spends only local energy at the deadline floor") {
    auto rig = make_rig(902, 5, 2, 6);
    const auto records = run_baseline(BaselineKind::Local, rig.episode, rig.sc);
    REQUIRE(records.size() == 6);
    for (const auto& r : records) {
        CHECK(r.m == 2);
        CHECK(r.transmit_j == 0.0);
        CHECK(r.remote_j == 0.0);
        CHECK(r.hover_j == 0.0);
        CHECK(r.local_j == r.total_j);
        CHECK(r.reward == 1.0 / r.total_j);
        CHECK(r.executed_core_violations == 0);
        CHECK_FALSE(r.refined);
        CHECK(r.search_evaluations == 0);
        CHECK(r.loss_total == 0.0);
    }

    SECTION("the executed allocation is the per-task deadline floor") {
        // Recompute slot 3's energy by hand: local execution at exactly the
        // deadline-feasible minimum speed for that slot's tasks.
        Scenario sc = rig.sc;
        auto cs = build_channel_set(sc);
        resample_tasks(sc, 3);
        double expected = 0.0;
        for (std::size_t i = 0; i < sc.ues.size(); ++i) {
            const double frac =
                deadline_floor_fraction(sc, cs, static_cast<int>(i), 0);
            expected += local_energy(frac * sc.constants.local_cap_cycles, sc.ues[i].task,
                                     sc.constants);
        }
        CHECK_THAT(records[3].total_j, Catch::Matchers::WithinRel(expected, 1e-12));
    }
}

TEST_CASE("the remote baseline offloads everyone to the nearest flying server") {
    SECTION("one deployed server leaves no choice") {
        auto rig = make_rig(903, 4, 1, 5);
        const auto records = run_baseline(BaselineKind::Remote, rig.episode, rig.sc);
        REQUIRE(records.size() == 5);
        for (const auto& r : records) {
            CHECK(r.m == 1);
            CHECK(r.local_j == 0.0);
            CHECK(r.transmit_j > 0.0);
            CHECK(r.remote_j > 0.0);
            CHECK(r.hover_j > 0.0);
            CHECK(r.executed_core_violations == 0);
        }
    }

    SECTION("nearest is by straight-line distance including altitude, ties to the lowest index") {
        Scenario sc;
        sc.ues.resize(2);
        sc.ues[0].pos = {10.0, 0.0, 0.0};
        sc.ues[1].pos = {90.0, 0.0, 0.0};
        sc.uavs = {{0.0, 0.0, 30.0}, {100.0, 0.0, 30.0}};
        sc.active_uav_count = 2;
        CHECK(nearest_uav(sc, 0) == 1);
        CHECK(nearest_uav(sc, 1) == 2);
        sc.ues[0].pos = {50.0, 0.0, 0.0}; // equidistant: lowest index wins
        CHECK(nearest_uav(sc, 0) == 1);
    }
}

TEST_CASE("the random baseline is reproducible and seed-sensitive") {
    auto rig = make_rig(904, 5, 2, 8);
    auto sc1 = rig.sc;
    auto sc2 = rig.sc;
    const auto a = run_baseline(BaselineKind::Random, rig.episode, sc1);
    const auto b = run_baseline(BaselineKind::Random, rig.episode, sc2);
    CHECK(slot_records_csv(a) == slot_records_csv(b));

    auto other = rig.episode;
    other.run_seed += 1;
    auto sc3 = rig.sc;
    const auto c = run_baseline(BaselineKind::Random, other, sc3);
    CHECK(slot_records_csv(a) != slot_records_csv(c));

    for (const auto& r : a) {
        CHECK(r.executed_core_violations == 0);
        CHECK(r.reward == 1.0 / r.total_j);
    }
}

TEST_CASE("search-driven baselines run a full search every slot") {
    auto rig = make_rig(905, 4, 2, 4);
    rig.episode.baseline_search.max_iter = 15;
    rig.episode.baseline_search.neighborhood = 10;

    auto sc1 = rig.sc;
    const auto lts_records = run_baseline(BaselineKind::Lts, rig.episode, sc1);
    auto sc2 = rig.sc;
    const auto ts_records = run_baseline(BaselineKind::Ts, rig.episode, sc2);
    REQUIRE(lts_records.size() == 4);
    REQUIRE(ts_records.size() == 4);
    for (const auto& r : lts_records) {
        CHECK(r.refined);
        CHECK(r.search_evaluations == 1 + 15 * 10);
        CHECK(r.executed_core_violations == 0);
        CHECK(std::isfinite(r.total_j));
    }

    // Matched seeds and tasks: the searches start from the same random
    // schedule, so the two methods' results may differ only through their
    // move selection.
    auto sc3 = rig.sc;
    const auto lts_again = run_baseline(BaselineKind::Lts, rig.episode, sc3);
    CHECK(slot_records_csv(lts_records) == slot_records_csv(lts_again));
}

TEST_CASE("a fleet-size change adjusts the agent, redeploys and rebuilds exactly once") {
    auto rig = make_rig(906, 4, 3, 12);
    rig.agent_cfg.m_initial = 3;
    ScenarioParams p;
    p.n_ues = 4;
    p.initial_uavs = 3;
    rig.sc = generate_scenario(906, p);
    rig.episode.uav_count_schedule = {{0, 3}, {5, 4}, {9, 3}};
    rig.episode.refine.max_iter = 3;
    rig.episode.refine.neighborhood = 5;

    MultiTaskAgent agent(rig.agent_cfg);
    ReplayBufferPool pool;
    const auto records = run_episode(rig.episode, rig.sc, agent, pool);
    REQUIRE(records.size() == 12);

    for (const auto& r : records) {
        const int expected_m = r.timeslot < 5 ? 3 : (r.timeslot < 9 ? 4 : 3);
        CHECK(r.m == expected_m);
        // A change entry that matches the deployed fleet (slot 0) is a no-op.
        CHECK(r.fleet_changed == (r.timeslot == 5 || r.timeslot == 9));
    }
    CHECK(agent.current_m() == 3);
    CHECK(rig.sc.active_uav_count == 3);
    CHECK(agent.levels_built() == 2); // the growth to four UAVs stays built
    // Both fleet sizes accumulated experience in their own buffers.
    CHECK(pool.size(3) > 0);
    CHECK(pool.size(4) > 0);

    SECTION("redeploying for a previously seen count lands on the same spots") {
        Scenario again = generate_scenario(906, p);
        CHECK(again.uavs.size() == rig.sc.uavs.size());
        for (std::size_t j = 0; j < again.uavs.size(); ++j) {
            CHECK(again.uavs[j].x == rig.sc.uavs[j].x);
            CHECK(again.uavs[j].y == rig.sc.uavs[j].y);
        }
    }
}

TEST_CASE("refinement cadences gate search, storage and training") {
    auto rig = make_rig(907, 4, 2, 9);
    rig.episode.refine.max_iter = 3;
    rig.episode.refine.neighborhood = 5;

    SECTION("a feasible policy under on-violation never refines or trains") {
        rig.episode.refinement_mode = RefinementMode::OnViolation;
        MultiTaskAgent agent = zeroed_agent(rig.agent_cfg);
        ReplayBufferPool pool;
        const auto records = run_episode(rig.episode, rig.sc, agent, pool);
        REQUIRE(records.size() == 9);
        for (const auto& r : records) {
            CHECK(r.core_violations == 0); // all-local at fraction one half
            CHECK_FALSE(r.refined);
            CHECK(r.search_evaluations == 0);
            CHECK(r.loss_total == 0.0);
            CHECK(r.local_j == r.total_j);
        }
        CHECK(pool.size(2) == 0);
        // The zeroed policy stays zeroed: nothing was ever trained.
        CHECK(agent.save() == zeroed_agent(rig.agent_cfg).save());
    }

    SECTION("the every-k cadence refines on the multiples of k") {
        rig.episode.refinement_mode = RefinementMode::EveryK;
        rig.episode.refine_every_k = 3;
        MultiTaskAgent agent(rig.agent_cfg);
        ReplayBufferPool pool;
        const auto records = run_episode(rig.episode, rig.sc, agent, pool);
        for (const auto& r : records)
            CHECK(r.refined == (r.timeslot % 3 == 0));
        CHECK(pool.size(2) == 3 * rig.sc.ues.size()); // slots 0, 3, 6
    }

    SECTION("the default cadence refines and trains every slot") {
        MultiTaskAgent agent(rig.agent_cfg);
        ReplayBufferPool pool;
        const auto records = run_episode(rig.episode, rig.sc, agent, pool);
        for (const auto& r : records) {
            CHECK(r.refined);
            CHECK(r.search_evaluations == 1 + 3 * 5);
            CHECK(std::isfinite(r.loss_total));
            CHECK(r.loss_total > 0.0);
            CHECK(r.loss_total ==
                  Catch::Approx(r.loss_ce + r.loss_mse).epsilon(1e-12)); // xi = 1
        }
        CHECK(pool.size(2) == records.size() * rig.sc.ues.size());
    }
}

TEST_CASE("executed schedules are always feasible and rewards reciprocal") {
    auto rig = make_rig(908, 5, 2, 10);
    rig.episode.refine.max_iter = 4;
    rig.episode.refine.neighborhood = 8;
    MultiTaskAgent agent(rig.agent_cfg);
    ReplayBufferPool pool;
    const auto records = run_episode(rig.episode, rig.sc, agent, pool);
    REQUIRE(records.size() == 10);
    for (const auto& r : records) {
        CHECK(r.executed_core_violations == 0);
        CHECK(r.reward == 1.0 / r.total_j); // bitwise, not approximate
        CHECK(r.total_j > 0.0);
        CHECK_THAT(r.total_j,
                   Catch::Matchers::WithinRel(
                       r.local_j + r.transmit_j + r.remote_j +
                           rig.sc.constants.hover_weight * r.hover_j,
                       1e-12));
    }
}

TEST_CASE("an episode rerun with the same seeds is byte-identical") {
    auto make_run = [] {
        auto rig = make_rig(909, 4, 2, 8);
        rig.episode.refine.max_iter = 3;
        rig.episode.refine.neighborhood = 5;
        MultiTaskAgent agent(rig.agent_cfg);
        ReplayBufferPool pool;
        return slot_records_csv(run_episode(rig.episode, rig.sc, agent, pool));
    };
    const std::string first = make_run();
    const std::string second = make_run();
    CHECK(first == second);

    SECTION("changing the run seed changes the refinement draws") {
        auto rig = make_rig(909, 4, 2, 8);
        rig.episode.refine.max_iter = 3;
        rig.episode.refine.neighborhood = 5;
        rig.episode.run_seed += 1;
        MultiTaskAgent agent(rig.agent_cfg);
        ReplayBufferPool pool;
        const auto other = slot_records_csv(run_episode(rig.episode, rig.sc, agent, pool));
        CHECK(other != first);
    }
}

TEST_CASE("aggregation pools energies and averages curves") {
    auto rec = [](double e) {
        SlotRecord r;
        r.total_j = e;
        r.reward = 1.0 / e;
        r.loss_total = e / 10.0;
        return r;
    };

    SECTION("two single-slot runs of 10 J and 14 J give mean 12 and spread 2") {
        const std::vector<std::vector<SlotRecord>> runs = {{rec(10.0)}, {rec(14.0)}};
        const auto agg = aggregate_metrics(runs);
        CHECK(agg.mean_energy == 12.0);
        CHECK(agg.std_energy == 2.0); // population, not sample
        REQUIRE(agg.energy_curve.size() == 1);
        CHECK(agg.energy_curve[0] == 12.0);
    }

    SECTION("a single run has zero spread") {
        const auto agg = aggregate_metrics({{rec(10.0)}});
        CHECK(agg.std_energy == 0.0);
        CHECK(agg.mean_energy == 10.0);
    }

    SECTION("curves are slot-wise means with one point per slot") {
        const std::vector<std::vector<SlotRecord>> runs = {{rec(2.0), rec(4.0), rec(6.0)},
                                                           {rec(4.0), rec(8.0), rec(10.0)}};
        const auto agg = aggregate_metrics(runs);
        REQUIRE(agg.energy_curve.size() == 3);
        CHECK(agg.energy_curve[0] == 3.0);
        CHECK(agg.energy_curve[1] == 6.0);
        CHECK(agg.energy_curve[2] == 8.0);
        CHECK(agg.reward_curve[0] == 0.5 * (1.0 / 2.0 + 1.0 / 4.0));
        CHECK(agg.loss_curve[2] == 0.8);
    }

    SECTION("a trailing window restricts the pooled statistics, not the curves") {
        const std::vector<std::vector<SlotRecord>> runs = {
            {rec(100.0), rec(9.0)}, {rec(100.0), rec(10.0)}};
        const auto agg = aggregate_metrics(runs, 1);
        CHECK(agg.mean_energy == 9.5);
        CHECK(agg.std_energy == 0.5);
        CHECK(agg.energy_curve.size() == 2); // curves still cover every slot
        CHECK(agg.energy_curve[0] == 100.0);
    }

    SECTION("shape errors") {
        CHECK_THROWS_AS(aggregate_metrics({}), ConfigError);
        CHECK_THROWS_AS(aggregate_metrics({{rec(1.0)}, {rec(1.0), rec(2.0)}}), ShapeError);
    }
}

TEST_CASE("slot records serialize with a fixed header and nine significant digits") {
    SlotRecord r;
    r.timeslot = 7;
    r.m = 2;
    r.fleet_changed = true;
    r.refined = true;
    r.core_violations = 1;
    r.executed_core_violations = 0;
    r.search_evaluations = 61;
    r.local_j = 1234.56789012; // ten significant digits: must round to nine
    r.transmit_j = 0.000123456789;
    r.remote_j = 0.0;
    r.hover_j = 2.5;
    r.total_j = 1237.068;
    r.reward = 1.0 / 1237.068;
    r.loss_ce = 0.25;
    r.loss_mse = 0.125;
    r.loss_total = 0.375;
    r.wall_ms = 123.456; // must not appear anywhere

    const std::string csv = slot_records_csv({r});
    const std::string expected_header =
        "timeslot,m,fleet_changed,refined,core_violations,executed_core_violations,"
        "search_evaluations,local_j,transmit_j,remote_j,hover_j,total_j,reward,"
        "loss_ce,loss_mse,loss_total";
    REQUIRE(csv.substr(0, expected_header.size()) == expected_header);
    CHECK(csv.find("wall") == std::string::npos);
    CHECK(csv.find("123.456,") == std::string::npos);

    const std::string row = csv.substr(csv.find('\n') + 1);
    CHECK(row == "7,2,1,1,1,0,61,1234.56789,0.000123456789,0,2.5,1237.068,"
                 "0.000808363,0.25,0.125,0.375\n");

    SECTION("an empty record list is just the header") {
        CHECK(slot_records_csv({}) == expected_header + std::string("\n"));
    }
}
