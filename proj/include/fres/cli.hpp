#pragma once

// Implementations of the command-line experiments. Each command takes a fully
// resolved RunConfig, writes its artifacts under the configured output
// directory (CSV for plot data, JSON for summaries and checkpoints) and
// reports a short human-readable digest on the given stream. All randomness
// derives from the seeds in the config, so every CSV written here is
// byte-identical across reruns; wall-clock times appear only in JSON
// summaries.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fres/agent.hpp"
#include "fres/channel.hpp"
#include "fres/config.hpp"
#include "fres/errors.hpp"
#include "fres/gradcheck.hpp"
#include "fres/placement.hpp"
#include "fres/rng.hpp"
#include "fres/runtime.hpp"
#include "fres/scenario.hpp"
#include "fres/search.hpp"

namespace fres {

// Output root priority: explicit config value, then the environment override,
// then a local default.
inline std::string resolve_out_dir(const RunConfig& cfg) {
    if (!cfg.out_dir.empty()) return cfg.out_dir;
    if (const char* env = std::getenv("FRES_OUT_ROOT"); env != nullptr && *env != '\0')
        return env;
    return "fres-out";
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot open '" + path.string() + "' for writing");
    f << text;
    if (!f) throw ConfigError("write failed for '" + path.string() + "'");
}

namespace detail {

inline std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

// Run k of a multi-seed command offsets every base seed by k, so runs are
// distinct but reproducible and methods stay matched per k.
struct RunSeeds {
    std::uint64_t scenario;
    std::uint64_t agent;
    std::uint64_t run;
};

inline RunSeeds seeds_for_run(const RunConfig& cfg, int k) {
    const auto u = static_cast<std::uint64_t>(k);
    return {cfg.scenario_seed + u, cfg.agent.seed + u, cfg.run_seed + u};
}

// One full learning run. The deployed fleet decides the agent's entry size
// (the episode refuses a mismatch), so the configured m_initial is overridden
// by the scenario's initial fleet; later growth follows the episode schedule.
inline std::vector<SlotRecord> run_fres(const RunConfig& cfg, const RunSeeds& s,
                                        std::string* checkpoint_out = nullptr) {
    Scenario sc = generate_scenario(s.scenario, cfg.scenario);
    AgentConfig ac = cfg.agent;
    ac.seed = s.agent;
    ac.m_initial = sc.active_uav_count;
    MultiTaskAgent agent(ac);
    ReplayBufferPool pool(cfg.replay.capacity, cfg.replay.alpha);
    EpisodeConfig ep = to_episode_config(cfg, s.run);
    auto records = run_episode(ep, sc, agent, pool);
    if (checkpoint_out != nullptr) *checkpoint_out = agent.save(&pool);
    return records;
}

inline double tail_mean_energy(const std::vector<SlotRecord>& recs, int window) {
    if (recs.empty()) return 0.0;
    const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(window), recs.size());
    double s = 0.0;
    for (std::size_t i = recs.size() - w; i < recs.size(); ++i) s += recs[i].total_j;
    return s / static_cast<double>(w);
}

struct MethodRow {
    std::string method;
    double mean_j = 0.0;
    double std_j = 0.0;
};

// Mean and population standard deviation across the per-seed tail means; a
// single seed therefore reports exactly zero spread.
inline MethodRow make_row(const std::string& method, const std::vector<double>& per_seed) {
    MethodRow row;
    row.method = method;
    for (double v : per_seed) row.mean_j += v;
    row.mean_j /= static_cast<double>(per_seed.size());
    double sq = 0.0;
    for (double v : per_seed) sq += (v - row.mean_j) * (v - row.mean_j);
    row.std_j = std::sqrt(sq / static_cast<double>(per_seed.size()));
    return row;
}

inline std::string curve_csv(const MethodAggregate& agg) {
    std::string out = "slot,mean_total_j,mean_reward,mean_loss\n";
    for (std::size_t s = 0; s < agg.energy_curve.size(); ++s)
        out += std::to_string(s) + ',' + fmt9(agg.energy_curve[s]) + ',' +
               fmt9(agg.reward_curve[s]) + ',' + fmt9(agg.loss_curve[s]) + '\n';
    return out;
}

// Per-iteration best-objective traces, averaged across seeds. Shorter traces
// (adaptive annealing can reheat) are held at their final best value so every
// iteration index averages over all seeds.
inline std::string trace_csv(const std::vector<std::vector<SearchTraceRow>>& traces) {
    std::size_t len = 0;
    for (const auto& t : traces) len = std::max(len, t.size());
    std::string out = "iteration,mean_best_j\n";
    for (std::size_t i = 0; i < len; ++i) {
        double acc = 0.0;
        for (const auto& t : traces)
            acc += i < t.size() ? t[i].best_f : t.back().best_f;
        out += std::to_string(i) + ',' + fmt9(acc / static_cast<double>(traces.size())) + '\n';
    }
    return out;
}

// The search-method comparison instance for seed k: the slot-0 state of the
// matched episode, with the same random start and search seed the baseline
// loop would use on that slot.
struct TraceInstance {
    Scenario sc;
    ChannelSet cs;
    Schedule x0;
    std::uint64_t search_seed = 0;
};

inline TraceInstance make_trace_instance(const RunConfig& cfg, const RunSeeds& s) {
    TraceInstance ti;
    ti.sc = generate_scenario(s.scenario, cfg.scenario);
    resample_tasks(ti.sc, 0);
    ti.cs = build_channel_set(ti.sc);
    const int n = static_cast<int>(ti.sc.ues.size());
    auto rng = make_rng(s.run, slot_stream(kStreamBaseline, 0));
    std::uniform_int_distribution<int> assoc(0, ti.sc.active_uav_count);
    std::uniform_real_distribution<double> frac(1e-3, 1.0);
    ti.x0 = make_schedule(n);
    for (int i = 0; i < n; ++i) {
        ti.x0.association[static_cast<std::size_t>(i)] = assoc(rng);
        ti.x0.allocation_fraction[static_cast<std::size_t>(i)] = frac(rng);
    }
    ti.search_seed = mix_seed(s.run, slot_stream(kStreamRefine, 0));
    return ti;
}

} // namespace detail

// ---------------------------------------------------------------------------
// train: one learning run -> slot records CSV + agent checkpoint + summary.

inline int cmd_train(const RunConfig& cfg, std::ostream& out) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::filesystem::path dir = resolve_out_dir(cfg);
    std::filesystem::create_directories(dir);
    const std::string hash = config_hash(cfg);
    write_text_file(dir / ("config_effective_" + hash + ".json"), save_config(cfg));

    std::string checkpoint;
    const auto seeds = detail::seeds_for_run(cfg, 0);
    const auto records = detail::run_fres(cfg, seeds, &checkpoint);

    const std::string stem =
        "fres_seed" + std::to_string(seeds.scenario) + "_" + hash;
    const std::string records_name = "records_" + stem + ".csv";
    const std::string checkpoint_name = "checkpoint_" + stem + ".json";
    write_text_file(dir / records_name, slot_records_csv(records));
    write_text_file(dir / checkpoint_name, checkpoint);

    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    const int window = std::min(200, cfg.episode.total_timeslots);
    nlohmann::json summary{
        {"command", "train"},
        {"method", "fres"},
        {"config_hash", hash},
        {"scenario_seed", seeds.scenario},
        {"agent_seed", seeds.agent},
        {"run_seed", seeds.run},
        {"timeslots", cfg.episode.total_timeslots},
        {"tail_window", window},
        {"tail_mean_j", detail::tail_mean_energy(records, window)},
        {"wall_ms", wall_ms},
        {"files", {records_name, checkpoint_name}}};
    write_text_file(dir / ("summary_train_" + hash + ".json"), summary.dump(2) + "\n");

    out << "train: " << cfg.episode.total_timeslots << " slots, tail-" << window
        << " mean energy " << detail::fmt9(summary["tail_mean_j"].get<double>()) << " J\n"
        << "wrote " << (dir / records_name).string() << '\n'
        << "wrote " << (dir / checkpoint_name).string() << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// compare: matched-seed method comparison -> summary rows, per-slot curves
// for policy methods, per-iteration traces for search methods.

inline int cmd_compare(const RunConfig& cfg, const std::vector<std::string>& methods,
                       std::ostream& out) {
    if (methods.size() < 2) throw ConfigError("compare: need at least two methods");
    for (std::size_t i = 0; i < methods.size(); ++i) {
        static const char* known[] = {"fres", "random", "local", "remote",
                                      "ts",   "lts",    "sa",    "asa"};
        if (std::find(std::begin(known), std::end(known), methods[i]) == std::end(known))
            throw ConfigError("compare: unknown method '" + methods[i] + "'");
        for (std::size_t j = 0; j < i; ++j)
            if (methods[j] == methods[i])
                throw ConfigError("compare: method '" + methods[i] + "' listed twice");
    }

    const auto t0 = std::chrono::steady_clock::now();
    const std::filesystem::path dir = resolve_out_dir(cfg);
    std::filesystem::create_directories(dir);
    const std::string hash = config_hash(cfg);
    write_text_file(dir / ("config_effective_" + hash + ".json"), save_config(cfg));

    const int window = std::min(200, cfg.episode.total_timeslots);
    std::vector<detail::MethodRow> rows;
    std::vector<std::string> files;
    nlohmann::json jrows = nlohmann::json::array();
    nlohmann::json jtraces = nlohmann::json::array();

    for (const auto& method : methods) {
        const bool is_policy = method == "fres" || method == "random" || method == "local" ||
                               method == "remote" || method == "ts" || method == "lts";
        const bool is_search =
            method == "lts" || method == "ts" || method == "sa" || method == "asa";

        if (is_policy) {
            std::vector<std::vector<SlotRecord>> runs;
            std::vector<double> per_seed;
            for (int k = 0; k < cfg.n_seeds; ++k) {
                const auto seeds = detail::seeds_for_run(cfg, k);
                std::vector<SlotRecord> recs;
                if (method == "fres") {
                    recs = detail::run_fres(cfg, seeds);
                } else {
                    Scenario sc = generate_scenario(seeds.scenario, cfg.scenario);
                    recs = run_baseline(parse_baseline(method),
                                        to_episode_config(cfg, seeds.run), sc);
                }
                per_seed.push_back(detail::tail_mean_energy(recs, window));
                runs.push_back(std::move(recs));
            }
            const auto row = detail::make_row(method, per_seed);
            rows.push_back(row);
            jrows.push_back({{"method", row.method},
                             {"mean_j", row.mean_j},
                             {"std_j", row.std_j},
                             {"seeds", cfg.n_seeds},
                             {"tail_window", window}});
            const std::string curve_name = "curve_" + method + "_" + hash + ".csv";
            write_text_file(dir / curve_name, detail::curve_csv(aggregate_metrics(runs)));
            files.push_back(curve_name);
        }

        if (is_search) {
            std::vector<std::vector<SearchTraceRow>> traces;
            for (int k = 0; k < cfg.n_seeds; ++k) {
                auto ti = detail::make_trace_instance(cfg, detail::seeds_for_run(cfg, k));
                std::vector<SearchTraceRow> trace;
                if (method == "sa" || method == "asa") {
                    SaOptions opt = to_sa_options(cfg.annealing, ti.search_seed);
                    opt.trace = &trace;
                    if (method == "sa")
                        sa(ti.x0, ti.sc, ti.cs, opt);
                    else
                        asa(ti.x0, ti.sc, ti.cs, opt);
                } else {
                    SearchOptions opt = to_search_options(cfg.baseline_search, ti.search_seed);
                    opt.trace = &trace;
                    if (method == "lts")
                        lts(ti.x0, ti.sc, ti.cs, opt);
                    else
                        ts(ti.x0, ti.sc, ti.cs, opt);
                }
                traces.push_back(std::move(trace));
            }
            const std::string trace_name = "trace_" + method + "_" + hash + ".csv";
            write_text_file(dir / trace_name, detail::trace_csv(traces));
            files.push_back(trace_name);
            jtraces.push_back({{"method", method}, {"file", trace_name}});
        }
    }

    std::string rows_csv = "method,mean_j,std_j\n";
    for (const auto& r : rows)
        rows_csv += r.method + ',' + detail::fmt9(r.mean_j) + ',' + detail::fmt9(r.std_j) + '\n';
    const std::string rows_name = "summary_compare_" + hash + ".csv";
    write_text_file(dir / rows_name, rows_csv);
    files.push_back(rows_name);

    const double wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    nlohmann::json summary{{"command", "compare"}, {"config_hash", hash},
                           {"methods", methods},   {"rows", jrows},
                           {"traces", jtraces},    {"files", files},
                           {"wall_ms", wall_ms}};
    write_text_file(dir / ("summary_compare_" + hash + ".json"), summary.dump(2) + "\n");

    out << "compare over " << cfg.n_seeds << " matched seed(s), tail-" << window
        << " window\n";
    for (const auto& r : rows)
        out << "  " << r.method << ": mean " << detail::fmt9(r.mean_j) << " J, std "
            << detail::fmt9(r.std_j) << " J\n";
    for (const auto& t : jtraces)
        out << "  trace " << t["method"].get<std::string>() << " -> "
            << t["file"].get<std::string>() << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// oracle-check: QPB vs exhaustive phase enumeration, guided search vs the
// exhaustive schedule oracle, and analytic-vs-numeric gradients.

struct OracleCheckOptions {
    int ues_override = 0;         // > 0: instance size for the search check
    bool corrupt_gradient = false; // negative control for the gradient check
};

inline int cmd_oracle_check(const RunConfig& cfg, const OracleCheckOptions& opt,
                            std::ostream& out) {
    const std::filesystem::path dir = resolve_out_dir(cfg);
    std::filesystem::create_directories(dir);
    const std::string hash = config_hash(cfg);
    write_text_file(dir / ("config_effective_" + hash + ".json"), save_config(cfg));

    // (1) Quantized-beamforming optimality structure: the per-element choice
    // can never beat the joint enumeration (dominance), and for up to two
    // elements it attains it exactly (the pairwise phase difference argument).
    int dominance_violations = 0;
    int pair_violations = 0;
    double worst_pair_gap = 0.0;
    double worst_triple_gap = 0.0;
    const double two_pi = 2.0 * std::numbers::pi;
    for (int g = 0; g < 60; ++g) {
        const int k_elems = 1 + g % 3;
        const int n_p = 2 + (g / 3) % 3;
        auto rng = make_rng(cfg.scenario_seed, 0x5000 + static_cast<std::uint64_t>(g));
        std::uniform_real_distribution<double> u(0.0, cfg.scenario.area_m);
        PhysicalConstants c = cfg.scenario.constants;
        c.elements_per_irs = k_elems;
        const Position3D ue{u(rng), u(rng), 0.0};
        const Position3D irs{u(rng), u(rng), cfg.scenario.irs_altitude_m};
        const Position3D uav{u(rng), u(rng), cfg.scenario.uav_altitude_m};
        const auto h_ur = ue_irs_channel(ue, irs, c);
        const auto h_rv = irs_uav_channel(irs, uav, c);
        const double got = cascaded_gain(h_ur, qpb_phase(h_ur, h_rv, n_p), h_rv);

        double joint = 0.0;
        PhaseMatrix theta;
        theta.thetas.assign(static_cast<std::size_t>(k_elems), 0.0);
        const int combos = static_cast<int>(std::pow(n_p, k_elems));
        for (int idx = 0; idx < combos; ++idx) {
            int rest = idx;
            for (int e = 0; e < k_elems; ++e) {
                theta.thetas[static_cast<std::size_t>(e)] = two_pi * (rest % n_p) / n_p;
                rest /= n_p;
            }
            joint = std::max(joint, cascaded_gain(h_ur, theta, h_rv));
        }
        if (got > joint * (1.0 + 1e-12)) ++dominance_violations;
        const double gap = (joint - got) / joint;
        if (k_elems <= 2) {
            worst_pair_gap = std::max(worst_pair_gap, gap);
            if (gap > 1e-9) ++pair_violations;
        } else {
            worst_triple_gap = std::max(worst_triple_gap, gap);
        }
    }
    const bool qpb_pass = dominance_violations == 0 && pair_violations == 0;

    // (2) Guided search vs the exhaustive schedule oracle at desk scale. An
    // oversized request propagates the enumeration budget error.
    int exact = 0;
    int within = 0;
    double worst_rel = 0.0;
    const int instances = 20;
    for (int t = 0; t < instances; ++t) {
        ScenarioParams p = cfg.scenario;
        p.n_ues = opt.ues_override > 0 ? opt.ues_override : 2 + t % 2;
        p.initial_uavs = 1 + (t / 2) % 2;
        p.n_irss = -1;
        auto sc = generate_scenario(1000 + static_cast<std::uint64_t>(t), p);
        auto cs = build_channel_set(sc);
        const auto oracle = exhaustive_oracle(sc, cs, 8);
        const double f_oracle = evaluate(oracle, sc, cs);
        SearchOptions so;
        so.max_iter = 30;
        so.seed = 5000 + static_cast<std::uint64_t>(t);
        const auto refined = lts(make_schedule(p.n_ues, 0, 0.5), sc, cs, so);
        const double f_lts = evaluate(refined, sc, cs);
        const double rel = (f_lts - f_oracle) / f_oracle;
        worst_rel = std::max(worst_rel, rel);
        if (f_lts <= f_oracle * (1.0 + 1e-9)) ++exact;
        if (f_lts <= f_oracle * 1.01) ++within;
    }
    const bool lts_pass = within == instances;

    // (3) Gradient check over seeded draws.
    GradCheckOptions gopt;
    gopt.corrupt = opt.corrupt_gradient ? 1e-2 : 0.0;
    double worst_grad = 0.0;
    for (std::uint64_t s = 0; s < 10; ++s)
        worst_grad = std::max(worst_grad, gradient_check_worst_error(s, gopt));
    const bool grad_pass = worst_grad < 1e-4;

    const bool overall = qpb_pass && lts_pass && grad_pass;
    nlohmann::json report{
        {"command", "oracle-check"},
        {"config_hash", hash},
        {"qpb",
         {{"status", qpb_pass ? "pass" : "fail"},
          {"geometries", 60},
          {"dominance_violations", dominance_violations},
          {"pair_exactness_violations", pair_violations},
          {"worst_pair_rel_gap", worst_pair_gap},
          {"worst_triple_rel_gap", worst_triple_gap}}},
        {"search_vs_oracle",
         {{"status", lts_pass ? "pass" : "fail"},
          {"instances", instances},
          {"exact", exact},
          {"within_1pct", within},
          {"worst_rel_gap", worst_rel}}},
        {"gradient",
         {{"status", grad_pass ? "pass" : "fail"},
          {"draws", 10},
          {"worst_rel_error", worst_grad},
          {"corrupted", opt.corrupt_gradient}}},
        {"overall", overall ? "pass" : "fail"}};
    write_text_file(dir / ("oracle_check_" + hash + ".json"), report.dump(2) + "\n");

    out << "qpb-vs-enumeration: " << (qpb_pass ? "PASS" : "FAIL") << " (worst pair gap "
        << detail::fmt9(worst_pair_gap) << ", worst triple gap "
        << detail::fmt9(worst_triple_gap) << ")\n"
        << "search-vs-oracle: " << (lts_pass ? "PASS" : "FAIL") << " (" << exact << "/"
        << instances << " exact, worst gap " << detail::fmt9(worst_rel) << ")\n"
        << "gradient: " << (grad_pass ? "PASS" : "FAIL") << " (worst rel error "
        << detail::fmt9(worst_grad) << ")\n"
        << "overall: " << (overall ? "PASS" : "FAIL") << '\n';
    return overall ? 0 : 1;
}

// ---------------------------------------------------------------------------
// placement: cluster the user field and report the fleet positions.

inline int cmd_placement(const RunConfig& cfg, std::ostream& out) {
    const std::filesystem::path dir = resolve_out_dir(cfg);
    std::filesystem::create_directories(dir);
    const std::string hash = config_hash(cfg);
    write_text_file(dir / ("config_effective_" + hash + ".json"), save_config(cfg));

    const Scenario sc = generate_scenario(cfg.scenario_seed, cfg.scenario);

    std::string csv = "uav,x_m,y_m,z_m\n";
    for (std::size_t j = 0; j < sc.uavs.size(); ++j)
        csv += std::to_string(j) + ',' + detail::fmt9(sc.uavs[j].x) + ',' +
               detail::fmt9(sc.uavs[j].y) + ',' + detail::fmt9(sc.uavs[j].z) + '\n';
    const std::string csv_name = "placement_" + hash + ".csv";
    write_text_file(dir / csv_name, csv);

    nlohmann::json j{{"command", "placement"},
                     {"config_hash", hash},
                     {"scenario_seed", cfg.scenario_seed},
                     {"n_ues", sc.ues.size()},
                     {"m", sc.active_uav_count},
                     {"ues", nlohmann::json::array()},
                     {"centers", nlohmann::json::array()}};
    for (const auto& ue : sc.ues) j["ues"].push_back(ue.pos);
    for (const auto& uav : sc.uavs) j["centers"].push_back(uav);
    write_text_file(dir / ("placement_" + hash + ".json"), j.dump(2) + "\n");

    out << "placed " << sc.active_uav_count << " UAV(s) over " << sc.ues.size()
        << " user(s)\n";
    for (std::size_t k = 0; k < sc.uavs.size(); ++k)
        out << "  uav " << k << ": (" << detail::fmt9(sc.uavs[k].x) << ", "
            << detail::fmt9(sc.uavs[k].y) << ", " << detail::fmt9(sc.uavs[k].z) << ") m\n";
    out << "wrote " << (dir / csv_name).string() << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// qpb-demo: per-(user, UAV) beamformed link report with quantization loss
// against the perfectly aligned (continuous-phase) cascade.

inline int cmd_qpb_demo(const RunConfig& cfg, std::ostream& out) {
    const std::filesystem::path dir = resolve_out_dir(cfg);
    std::filesystem::create_directories(dir);
    const std::string hash = config_hash(cfg);
    write_text_file(dir / ("config_effective_" + hash + ".json"), save_config(cfg));

    const Scenario sc = generate_scenario(cfg.scenario_seed, cfg.scenario);
    const ChannelSet cs = build_channel_set(sc);

    std::string csv = "ue,uav,irs,gain_db,ideal_gain_db,quantization_loss_db,rate_bps\n";
    double loss_sum = 0.0;
    double loss_max = 0.0;
    for (int i = 0; i < cs.n_ues; ++i) {
        for (int j = 0; j < cs.n_uavs; ++j) {
            const auto& e = cs.at(i, j);
            const auto& irs = sc.irss[static_cast<std::size_t>(e.irs_index)];
            const auto h_ur =
                ue_irs_channel(sc.ues[static_cast<std::size_t>(i)].pos, irs, sc.constants);
            const auto h_rv =
                irs_uav_channel(irs, sc.uavs[static_cast<std::size_t>(j)], sc.constants);
            const double a =
                h_ur.amplitude * h_rv.amplitude * static_cast<double>(h_ur.phases.size());
            const double ideal = a * a; // all summands perfectly aligned
            const double gain_db = 10.0 * std::log10(e.effective_gain);
            const double ideal_db = 10.0 * std::log10(ideal);
            const double loss_db = ideal_db - gain_db;
            loss_sum += loss_db;
            loss_max = std::max(loss_max, loss_db);
            csv += std::to_string(i) + ',' + std::to_string(j) + ',' +
                   std::to_string(e.irs_index) + ',' + detail::fmt9(gain_db) + ',' +
                   detail::fmt9(ideal_db) + ',' + detail::fmt9(loss_db) + ',' +
                   detail::fmt9(e.rate_bps) + '\n';
        }
    }
    const std::string csv_name = "qpb_demo_" + hash + ".csv";
    write_text_file(dir / csv_name, csv);

    nlohmann::json j{{"command", "qpb-demo"},
                     {"config_hash", hash},
                     {"scenario_seed", cfg.scenario_seed},
                     {"phase_levels", sc.constants.phase_levels},
                     {"elements_per_irs", sc.constants.elements_per_irs},
                     {"channel", channel_set_to_json(cs)}};
    write_text_file(dir / ("qpb_demo_" + hash + ".json"), j.dump(2) + "\n");

    const int pairs = cs.n_ues * cs.n_uavs;
    out << pairs << " beamformed pair(s), " << sc.constants.phase_levels
        << " phase level(s): mean quantization loss "
        << detail::fmt9(loss_sum / std::max(1, pairs)) << " dB, max "
        << detail::fmt9(loss_max) << " dB\n"
        << "wrote " << (dir / csv_name).string() << '\n';
    return 0;
}

} // namespace fres
