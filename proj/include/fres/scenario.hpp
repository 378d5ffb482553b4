#pragma once

// System entities and deployment. One scenario holds the user population,
// the reflecting surfaces, the currently deployed UAV fleet and the physical
// constants every model formula reads from.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "fres/errors.hpp"
#include "fres/placement.hpp"
#include "fres/rng.hpp"

namespace fres {

struct Position3D {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

inline double distance(const Position3D& a, const Position3D& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    const double dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// One computation task: payload to move and cycles to spend.
struct Task {
    double data_bits = 0.0;
    double cycles = 0.0;
};

struct UserEquipment {
    Position3D pos;
    Task task;
};

struct PhysicalConstants {
    double bandwidth_hz = 1e6;
    double noise_power_w = 1e-13;
    double tx_power_w = 1.0;
    double hover_power_w = 1.0;
    double epsilon_ref_loss = 1e-3;   // reference channel power at 1 m
    double alpha_ue_irs = 2.8;        // path-loss exponent, user -> surface
    double nu1 = 1e-25;               // local CPU energy coefficient
    double nu2 = 1e-27;               // UAV CPU energy coefficient
    double tau1 = 3.0;
    double tau2 = 3.0;
    double local_cap_cycles = 1e9;    // per-user CPU ceiling
    double uav_cap_cycles = 3e10;     // per-UAV CPU ceiling
    double hover_weight = 1.0;        // weight of hover energy in the objective
    double carrier_wavelength_m = 0.125;
    double element_spacing_m = 0.0625; // half wavelength
    int phase_levels = 8;              // discrete phase alphabet size
    int elements_per_irs = 16;
    double deadline_s = 2.0;           // per-task completion deadline

    bool operator==(const PhysicalConstants&) const = default;
};

struct TaskRanges {
    double cycles_min = 0.95e9;
    double cycles_max = 1.05e9;
    double data_mb_min = 19.0;
    double data_mb_max = 21.0;
    double bits_per_mb = 8e6;

    bool operator==(const TaskRanges&) const = default;
};

struct Scenario {
    std::vector<UserEquipment> ues;
    std::vector<Position3D> uavs;   // the active fleet only
    std::vector<Position3D> irss;
    PhysicalConstants constants;
    TaskRanges task_ranges;
    int active_uav_count = 1;
    int max_uavs = 5;
    double area_m = 100.0;
    double uav_altitude_m = 30.0;
    double irs_altitude_m = 15.0;
    std::uint64_t rng_seed = 0;
};

namespace detail {
// Fixed sub-stream ids so independent draws never alias.
constexpr std::uint64_t kStreamUePos = 11;
constexpr std::uint64_t kStreamIrsPos = 12;
constexpr std::uint64_t kStreamTasks = 13;
constexpr std::uint64_t kStreamPlacement = 14;
} // namespace detail

inline Task sample_task(const TaskRanges& r, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> cycles(r.cycles_min, r.cycles_max);
    std::uniform_real_distribution<double> mb(r.data_mb_min, r.data_mb_max);
    Task t;
    t.cycles = cycles(rng);
    t.data_bits = mb(rng) * r.bits_per_mb;
    return t;
}

// Draws a fresh task for every user; called once per time slot so the agent
// sees a new workload while the geometry stays put.
inline void resample_tasks(Scenario& s, std::uint64_t slot) {
    auto rng = make_rng(s.rng_seed, detail::kStreamTasks + 0x1000 * (slot + 1));
    for (auto& ue : s.ues) ue.task = sample_task(s.task_ranges, rng);
}

// Re-clusters the fleet over the fixed user positions. Deterministic in the
// scenario seed, so redeploying for the same count lands on the same spots.
inline void deploy_uavs(Scenario& s, int m) {
    if (m <= 0) throw ConfigError("deploy_uavs: UAV count must be positive");
    if (m > s.max_uavs)
        throw ConfigError("deploy_uavs: count " + std::to_string(m) +
                          " exceeds maximum " + std::to_string(s.max_uavs));
    std::vector<PointXY> pts;
    pts.reserve(s.ues.size());
    for (const auto& ue : s.ues) pts.push_back({ue.pos.x, ue.pos.y});
    FcmOptions opt;
    opt.seed = mix_seed(s.rng_seed, detail::kStreamPlacement);
    auto centers = ls_fcm(pts, m, opt);
    s.uavs.clear();
    for (const auto& c : centers) s.uavs.push_back({c[0], c[1], s.uav_altitude_m});
    s.active_uav_count = m;
}

struct ScenarioParams {
    int n_ues = 10;
    int n_irss = -1;          // -1: one surface per user
    int initial_uavs = 2;
    int max_uavs = 5;
    double area_m = 100.0;
    double uav_altitude_m = 30.0;
    double irs_altitude_m = 15.0;
    PhysicalConstants constants;
    TaskRanges task_ranges;

    bool operator==(const ScenarioParams&) const = default;
};

inline Scenario generate_scenario(std::uint64_t seed, const ScenarioParams& p = {}) {
    if (p.n_ues <= 0) throw ConfigError("generate_scenario: need at least one user");
    if (p.initial_uavs > p.max_uavs)
        throw ConfigError("generate_scenario: initial UAV count exceeds maximum");
    Scenario s;
    s.constants = p.constants;
    s.task_ranges = p.task_ranges;
    s.max_uavs = p.max_uavs;
    s.area_m = p.area_m;
    s.uav_altitude_m = p.uav_altitude_m;
    s.irs_altitude_m = p.irs_altitude_m;
    s.rng_seed = seed;

    {
        auto rng = make_rng(seed, detail::kStreamUePos);
        std::uniform_real_distribution<double> u(0.0, p.area_m);
        s.ues.resize(static_cast<std::size_t>(p.n_ues));
        for (auto& ue : s.ues) ue.pos = {u(rng), u(rng), 0.0};
    }
    {
        const int n_irss = p.n_irss < 0 ? p.n_ues : p.n_irss;
        if (n_irss <= 0) throw ConfigError("generate_scenario: need at least one surface");
        auto rng = make_rng(seed, detail::kStreamIrsPos);
        std::uniform_real_distribution<double> u(0.0, p.area_m);
        s.irss.resize(static_cast<std::size_t>(n_irss));
        for (auto& irs : s.irss) irs = {u(rng), u(rng), p.irs_altitude_m};
    }
    {
        auto rng = make_rng(seed, detail::kStreamTasks);
        for (auto& ue : s.ues) ue.task = sample_task(p.task_ranges, rng);
    }
    deploy_uavs(s, p.initial_uavs);
    return s;
}

// ---- JSON round trip ----

inline void to_json(nlohmann::json& j, const Position3D& p) {
    j = {{"x_m", p.x}, {"y_m", p.y}, {"z_m", p.z}};
}
inline void from_json(const nlohmann::json& j, Position3D& p) {
    j.at("x_m").get_to(p.x);
    j.at("y_m").get_to(p.y);
    j.at("z_m").get_to(p.z);
}

inline void to_json(nlohmann::json& j, const Task& t) {
    j = {{"data_bits", t.data_bits}, {"cycles", t.cycles}};
}
inline void from_json(const nlohmann::json& j, Task& t) {
    j.at("data_bits").get_to(t.data_bits);
    j.at("cycles").get_to(t.cycles);
}

inline void to_json(nlohmann::json& j, const UserEquipment& u) {
    j = {{"pos", u.pos}, {"task", u.task}};
}
inline void from_json(const nlohmann::json& j, UserEquipment& u) {
    j.at("pos").get_to(u.pos);
    j.at("task").get_to(u.task);
}

inline void to_json(nlohmann::json& j, const PhysicalConstants& c) {
    j = {{"bandwidth_hz", c.bandwidth_hz},
         {"noise_power_w", c.noise_power_w},
         {"tx_power_w", c.tx_power_w},
         {"hover_power_w", c.hover_power_w},
         {"epsilon_ref_loss", c.epsilon_ref_loss},
         {"alpha_ue_irs", c.alpha_ue_irs},
         {"nu1", c.nu1},
         {"nu2", c.nu2},
         {"tau1", c.tau1},
         {"tau2", c.tau2},
         {"local_cap_cycles", c.local_cap_cycles},
         {"uav_cap_cycles", c.uav_cap_cycles},
         {"hover_weight", c.hover_weight},
         {"carrier_wavelength_m", c.carrier_wavelength_m},
         {"element_spacing_m", c.element_spacing_m},
         {"phase_levels", c.phase_levels},
         {"elements_per_irs", c.elements_per_irs},
         {"deadline_s", c.deadline_s}};
}
inline void from_json(const nlohmann::json& j, PhysicalConstants& c) {
    j.at("bandwidth_hz").get_to(c.bandwidth_hz);
    j.at("noise_power_w").get_to(c.noise_power_w);
    j.at("tx_power_w").get_to(c.tx_power_w);
    j.at("hover_power_w").get_to(c.hover_power_w);
    j.at("epsilon_ref_loss").get_to(c.epsilon_ref_loss);
    j.at("alpha_ue_irs").get_to(c.alpha_ue_irs);
    j.at("nu1").get_to(c.nu1);
    j.at("nu2").get_to(c.nu2);
    j.at("tau1").get_to(c.tau1);
    j.at("tau2").get_to(c.tau2);
    j.at("local_cap_cycles").get_to(c.local_cap_cycles);
    j.at("uav_cap_cycles").get_to(c.uav_cap_cycles);
    j.at("hover_weight").get_to(c.hover_weight);
    j.at("carrier_wavelength_m").get_to(c.carrier_wavelength_m);
    j.at("element_spacing_m").get_to(c.element_spacing_m);
    j.at("phase_levels").get_to(c.phase_levels);
    j.at("elements_per_irs").get_to(c.elements_per_irs);
    j.at("deadline_s").get_to(c.deadline_s);
}

inline void to_json(nlohmann::json& j, const TaskRanges& r) {
    j = {{"cycles_min", r.cycles_min},
         {"cycles_max", r.cycles_max},
         {"data_mb_min", r.data_mb_min},
         {"data_mb_max", r.data_mb_max},
         {"bits_per_mb", r.bits_per_mb}};
}
inline void from_json(const nlohmann::json& j, TaskRanges& r) {
    j.at("cycles_min").get_to(r.cycles_min);
    j.at("cycles_max").get_to(r.cycles_max);
    j.at("data_mb_min").get_to(r.data_mb_min);
    j.at("data_mb_max").get_to(r.data_mb_max);
    j.at("bits_per_mb").get_to(r.bits_per_mb);
}

inline void to_json(nlohmann::json& j, const Scenario& s) {
    j = {{"ues", s.ues},
         {"uavs", s.uavs},
         {"irss", s.irss},
         {"constants", s.constants},
         {"task_ranges", s.task_ranges},
         {"active_uav_count", s.active_uav_count},
         {"max_uavs", s.max_uavs},
         {"area_m", s.area_m},
         {"uav_altitude_m", s.uav_altitude_m},
         {"irs_altitude_m", s.irs_altitude_m},
         {"rng_seed", s.rng_seed}};
}
inline void from_json(const nlohmann::json& j, Scenario& s) {
    j.at("ues").get_to(s.ues);
    j.at("uavs").get_to(s.uavs);
    j.at("irss").get_to(s.irss);
    j.at("constants").get_to(s.constants);
    j.at("task_ranges").get_to(s.task_ranges);
    j.at("active_uav_count").get_to(s.active_uav_count);
    j.at("max_uavs").get_to(s.max_uavs);
    j.at("area_m").get_to(s.area_m);
    j.at("uav_altitude_m").get_to(s.uav_altitude_m);
    j.at("irs_altitude_m").get_to(s.irs_altitude_m);
    j.at("rng_seed").get_to(s.rng_seed);
}

} // namespace fres
