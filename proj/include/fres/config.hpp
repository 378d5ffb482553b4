#pragma once

// Run configuration: one serializable document that fully determines an
// experiment — deployment geometry, physical constants, agent hyperparameters,
// search budgets, the episode schedule, seeds and output routing. Loading is
// strict: unknown keys are rejected (a typo must fail loudly, not fall back to
// a default), while omitted keys keep their documented defaults.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fres/agent.hpp"
#include "fres/errors.hpp"
#include "fres/runtime.hpp"
#include "fres/scenario.hpp"
#include "fres/search.hpp"

namespace fres {

// Scalar-only mirrors of the search option structs (those carry trace/stats
// pointers, which have no place in a config document).
struct SearchBudget {
    int max_iter = 10;
    int taboo_len = 5;
    int neighborhood = 20;

    bool operator==(const SearchBudget&) const = default;
};

struct AnnealBudget {
    double t_max = 100.0;
    double t_min = 1.0;
    double cooling = 0.95;
    double reheat_factor = 1.05;
    int acceptance_window = 10;
    double acceptance_threshold = 0.05;

    bool operator==(const AnnealBudget&) const = default;
};

struct EpisodeSettings {
    int total_timeslots = 1000;
    std::string uav_schedule;                // compact "t:m,t:m,..." form; empty = none
    std::string refinement_mode = "always";  // on-violation / always / every-k
    int refine_every_k = 10;
    int train_per_slot = 1;
    int batch_size = 64;

    bool operator==(const EpisodeSettings&) const = default;
};

struct ReplaySettings {
    int capacity = 1024;  // per-fleet-size buffer bound
    double alpha = 0.6;   // priority exponent of the sampling law

    bool operator==(const ReplaySettings&) const = default;
};

struct RunConfig {
    ScenarioParams scenario{};
    AgentConfig agent{};                      // agent.seed seeds weight init
    SearchBudget refine{};                    // per-slot refinement budget
    SearchBudget baseline_search{90, 5, 20};  // search baselines / traces
    AnnealBudget annealing{};
    EpisodeSettings episode{};
    ReplaySettings replay{};
    std::uint64_t scenario_seed = 1;          // geometry + per-slot tasks
    std::uint64_t run_seed = 1;               // method-side draws
    int n_seeds = 1;                          // run k uses every base seed + k
    std::string out_dir;                      // empty: $FRES_OUT_ROOT or ./fres-out

    bool operator==(const RunConfig&) const = default;
};

inline SearchOptions to_search_options(const SearchBudget& b, std::uint64_t seed = 0) {
    SearchOptions o;
    o.max_iter = b.max_iter;
    o.taboo_len = b.taboo_len;
    o.neighborhood = b.neighborhood;
    o.seed = seed;
    return o;
}

inline SaOptions to_sa_options(const AnnealBudget& b, std::uint64_t seed = 0) {
    SaOptions o;
    o.t_max = b.t_max;
    o.t_min = b.t_min;
    o.cooling = b.cooling;
    o.reheat_factor = b.reheat_factor;
    o.acceptance_window = b.acceptance_window;
    o.acceptance_threshold = b.acceptance_threshold;
    o.seed = seed;
    return o;
}

// Builds the episode driver settings for one run; the caller picks the seed so
// multi-seed commands can derive per-run seeds from the config's base.
inline EpisodeConfig to_episode_config(const RunConfig& cfg, std::uint64_t run_seed) {
    EpisodeConfig ep;
    ep.total_timeslots = cfg.episode.total_timeslots;
    ep.uav_count_schedule = parse_uav_schedule(cfg.episode.uav_schedule);
    ep.refinement_mode = parse_refinement_mode(cfg.episode.refinement_mode);
    ep.refine_every_k = cfg.episode.refine_every_k;
    ep.train_per_slot = cfg.episode.train_per_slot;
    ep.batch_size = cfg.episode.batch_size;
    ep.refine = to_search_options(cfg.refine);
    ep.baseline_search = to_search_options(cfg.baseline_search);
    ep.run_seed = run_seed;
    return ep;
}

namespace detail {

// Consumes known keys from a JSON object and rejects the rest by name.
class StrictReader {
  public:
    StrictReader(const nlohmann::json& j, std::string context)
        : j_(j), ctx_(std::move(context)) {
        if (!j_.is_object()) throw ConfigError(ctx_ + ": expected a JSON object");
    }

    template <class T>
    void field(const char* key, T& out) {
        seen_.push_back(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            it->get_to(out);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(ctx_ + "." + key + ": " + e.what());
        }
    }

    // Nested object; null when the key is absent (defaults apply).
    const nlohmann::json* object(const char* key) {
        seen_.push_back(key);
        const auto it = j_.find(key);
        if (it == j_.end()) return nullptr;
        if (!it->is_object())
            throw ConfigError(ctx_ + "." + key + ": expected a JSON object");
        return &*it;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
                throw ConfigError(ctx_ + ": unknown key '" + it.key() + "'");
    }

  private:
    const nlohmann::json& j_;
    std::string ctx_;
    std::vector<std::string> seen_;
};

inline void read_constants(const nlohmann::json& j, PhysicalConstants& c,
                           const std::string& ctx) {
    StrictReader r(j, ctx);
    r.field("bandwidth_hz", c.bandwidth_hz);
    r.field("noise_power_w", c.noise_power_w);
    r.field("tx_power_w", c.tx_power_w);
    r.field("hover_power_w", c.hover_power_w);
    r.field("epsilon_ref_loss", c.epsilon_ref_loss);
    r.field("alpha_ue_irs", c.alpha_ue_irs);
    r.field("nu1", c.nu1);
    r.field("nu2", c.nu2);
    r.field("tau1", c.tau1);
    r.field("tau2", c.tau2);
    r.field("local_cap_cycles", c.local_cap_cycles);
    r.field("uav_cap_cycles", c.uav_cap_cycles);
    r.field("hover_weight", c.hover_weight);
    r.field("carrier_wavelength_m", c.carrier_wavelength_m);
    r.field("element_spacing_m", c.element_spacing_m);
    r.field("phase_levels", c.phase_levels);
    r.field("elements_per_irs", c.elements_per_irs);
    r.field("deadline_s", c.deadline_s);
    r.finish();
}

inline void read_task_ranges(const nlohmann::json& j, TaskRanges& t, const std::string& ctx) {
    StrictReader r(j, ctx);
    r.field("cycles_min", t.cycles_min);
    r.field("cycles_max", t.cycles_max);
    r.field("data_mb_min", t.data_mb_min);
    r.field("data_mb_max", t.data_mb_max);
    r.field("bits_per_mb", t.bits_per_mb);
    r.finish();
}

inline void read_scenario(const nlohmann::json& j, ScenarioParams& s, const std::string& ctx) {
    StrictReader r(j, ctx);
    r.field("n_ues", s.n_ues);
    r.field("n_irss", s.n_irss);
    r.field("initial_uavs", s.initial_uavs);
    r.field("max_uavs", s.max_uavs);
    r.field("area_m", s.area_m);
    r.field("uav_altitude_m", s.uav_altitude_m);
    r.field("irs_altitude_m", s.irs_altitude_m);
    if (const auto* c = r.object("constants")) read_constants(*c, s.constants, ctx + ".constants");
    if (const auto* t = r.object("task_ranges"))
        read_task_ranges(*t, s.task_ranges, ctx + ".task_ranges");
    r.finish();
}

inline void read_adam(const nlohmann::json& j, AdamConfig& a, const std::string& ctx) {
    StrictReader r(j, ctx);
    r.field("lr", a.lr);
    r.field("beta1", a.beta1);
    r.field("beta2", a.beta2);
    r.field("eps", a.eps);
    r.finish();
}

inline void read_agent(const nlohmann::json& j, AgentConfig& a, const std::string& ctx) {
    StrictReader r(j, ctx);
    r.field("m_max", a.m_max);
    r.field("m_initial", a.m_initial);
    r.field("shared1", a.shared1);
    r.field("shared2", a.shared2);
    r.field("head", a.head);
    r.field("growth", a.growth);
    r.field("xi", a.xi);
    if (const auto* o = r.object("adam")) read_adam(*o, a.adam, ctx + ".adam");
    r.field("gain_db_min", a.gain_db_min);
    r.field("gain_db_max", a.gain_db_max);
    r.field("fraction_clamp", a.fraction_clamp);
    r.field("seed", a.seed);
    r.finish();
}

inline void read_search_budget(const nlohmann::json& j, SearchBudget& b,
                               const std::string& ctx) {
    StrictReader r(j, ctx);
    r.field("max_iter", b.max_iter);
    r.field("taboo_len", b.taboo_len);
    r.field("neighborhood", b.neighborhood);
    r.finish();
}

inline void read_anneal_budget(const nlohmann::json& j, AnnealBudget& b,
                               const std::string& ctx) {
    StrictReader r(j, ctx);
    r.field("t_max", b.t_max);
    r.field("t_min", b.t_min);
    r.field("cooling", b.cooling);
    r.field("reheat_factor", b.reheat_factor);
    r.field("acceptance_window", b.acceptance_window);
    r.field("acceptance_threshold", b.acceptance_threshold);
    r.finish();
}

inline void read_episode(const nlohmann::json& j, EpisodeSettings& e, const std::string& ctx) {
    StrictReader r(j, ctx);
    r.field("total_timeslots", e.total_timeslots);
    r.field("uav_schedule", e.uav_schedule);
    r.field("refinement_mode", e.refinement_mode);
    r.field("refine_every_k", e.refine_every_k);
    r.field("train_per_slot", e.train_per_slot);
    r.field("batch_size", e.batch_size);
    r.finish();
}

inline void read_replay(const nlohmann::json& j, ReplaySettings& s, const std::string& ctx) {
    StrictReader r(j, ctx);
    r.field("capacity", s.capacity);
    r.field("alpha", s.alpha);
    r.finish();
}

} // namespace detail

inline std::string save_config(const RunConfig& c) {
    nlohmann::json j;
    j["scenario"] = {{"n_ues", c.scenario.n_ues},
                     {"n_irss", c.scenario.n_irss},
                     {"initial_uavs", c.scenario.initial_uavs},
                     {"max_uavs", c.scenario.max_uavs},
                     {"area_m", c.scenario.area_m},
                     {"uav_altitude_m", c.scenario.uav_altitude_m},
                     {"irs_altitude_m", c.scenario.irs_altitude_m},
                     {"constants", c.scenario.constants},
                     {"task_ranges", c.scenario.task_ranges}};
    j["agent"] = {{"m_max", c.agent.m_max},
                  {"m_initial", c.agent.m_initial},
                  {"shared1", c.agent.shared1},
                  {"shared2", c.agent.shared2},
                  {"head", c.agent.head},
                  {"growth", c.agent.growth},
                  {"xi", c.agent.xi},
                  {"adam",
                   {{"lr", c.agent.adam.lr},
                    {"beta1", c.agent.adam.beta1},
                    {"beta2", c.agent.adam.beta2},
                    {"eps", c.agent.adam.eps}}},
                  {"gain_db_min", c.agent.gain_db_min},
                  {"gain_db_max", c.agent.gain_db_max},
                  {"fraction_clamp", c.agent.fraction_clamp},
                  {"seed", c.agent.seed}};
    j["refine"] = {{"max_iter", c.refine.max_iter},
                   {"taboo_len", c.refine.taboo_len},
                   {"neighborhood", c.refine.neighborhood}};
    j["baseline_search"] = {{"max_iter", c.baseline_search.max_iter},
                            {"taboo_len", c.baseline_search.taboo_len},
                            {"neighborhood", c.baseline_search.neighborhood}};
    j["annealing"] = {{"t_max", c.annealing.t_max},
                      {"t_min", c.annealing.t_min},
                      {"cooling", c.annealing.cooling},
                      {"reheat_factor", c.annealing.reheat_factor},
                      {"acceptance_window", c.annealing.acceptance_window},
                      {"acceptance_threshold", c.annealing.acceptance_threshold}};
    j["episode"] = {{"total_timeslots", c.episode.total_timeslots},
                    {"uav_schedule", c.episode.uav_schedule},
                    {"refinement_mode", c.episode.refinement_mode},
                    {"refine_every_k", c.episode.refine_every_k},
                    {"train_per_slot", c.episode.train_per_slot},
                    {"batch_size", c.episode.batch_size}};
    j["replay"] = {{"capacity", c.replay.capacity}, {"alpha", c.replay.alpha}};
    j["scenario_seed"] = c.scenario_seed;
    j["run_seed"] = c.run_seed;
    j["n_seeds"] = c.n_seeds;
    j["out_dir"] = c.out_dir;
    return j.dump(2) + "\n";
}

inline RunConfig load_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: unreadable JSON: ") + e.what());
    }
    RunConfig c;
    detail::StrictReader r(j, "config");
    if (const auto* o = r.object("scenario")) detail::read_scenario(*o, c.scenario, "scenario");
    if (const auto* o = r.object("agent")) detail::read_agent(*o, c.agent, "agent");
    if (const auto* o = r.object("refine")) detail::read_search_budget(*o, c.refine, "refine");
    if (const auto* o = r.object("baseline_search"))
        detail::read_search_budget(*o, c.baseline_search, "baseline_search");
    if (const auto* o = r.object("annealing"))
        detail::read_anneal_budget(*o, c.annealing, "annealing");
    if (const auto* o = r.object("episode")) detail::read_episode(*o, c.episode, "episode");
    if (const auto* o = r.object("replay")) detail::read_replay(*o, c.replay, "replay");
    r.field("scenario_seed", c.scenario_seed);
    r.field("run_seed", c.run_seed);
    r.field("n_seeds", c.n_seeds);
    r.field("out_dir", c.out_dir);
    r.finish();

    if (c.n_seeds < 1) throw ConfigError("config: n_seeds must be at least 1");
    parse_refinement_mode(c.episode.refinement_mode); // value check
    parse_uav_schedule(c.episode.uav_schedule);       // syntax check
    return c;
}

inline RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config file '" + path + "' cannot be opened");
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_config(buf.str());
}

// Short content digest used in output file names: FNV-1a over the canonical
// serialized form, so equal configs share names and any change renames.
inline std::string config_hash(const RunConfig& c) {
    const std::string text = save_config(c);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(h ^ (h >> 32)));
    return buf;
}

} // namespace fres
