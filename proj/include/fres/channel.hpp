#pragma once

// Reflected-link channel model and quantized passive beamforming. Each
// user reaches a UAV through one reflecting surface; both hops are uniform
// linear array responses and the surface applies one discrete phase shift
// per element.

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "fres/errors.hpp"
#include "fres/scenario.hpp"

namespace fres {

// Array response of one hop: a common amplitude and one phase per element.
struct SteeringVector {
    double amplitude = 0.0;
    std::vector<double> phases; // radians, element k carries exp(j*phases[k])
};

// Per-element reflection phases chosen by the beamformer.
struct PhaseMatrix {
    std::vector<double> thetas; // radians, taken from the discrete alphabet
};

inline double wrap_2pi(double a) {
    const double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(a, two_pi);
    if (r < 0.0) r += two_pi;
    return r;
}

// User -> surface hop. Amplitude sqrt(eps / d^alpha); the element phase ramp
// follows the projection of the arrival direction on the array axis.
inline SteeringVector ue_irs_channel(const Position3D& ue, const Position3D& irs,
                                     const PhysicalConstants& c) {
    const double d = distance(ue, irs);
    if (d <= 0.0)
        throw DegenerateGeometryError("ue_irs_channel: user and surface coincide");
    SteeringVector h;
    h.amplitude = std::sqrt(c.epsilon_ref_loss / std::pow(d, c.alpha_ue_irs));
    const double phi = std::abs(ue.x - irs.x) / d;
    const double step = -(2.0 * std::numbers::pi / c.carrier_wavelength_m) *
                        c.element_spacing_m * phi;
    h.phases.resize(static_cast<std::size_t>(c.elements_per_irs));
    for (int k = 0; k < c.elements_per_irs; ++k)
        h.phases[static_cast<std::size_t>(k)] = step * k;
    return h;
}

// Surface -> UAV hop: same construction with a fixed free-space-like
// exponent of 2 on the elevated segment.
inline SteeringVector irs_uav_channel(const Position3D& irs, const Position3D& uav,
                                      const PhysicalConstants& c) {
    const double d = distance(irs, uav);
    if (d <= 0.0)
        throw DegenerateGeometryError("irs_uav_channel: surface and UAV coincide");
    SteeringVector h;
    h.amplitude = std::sqrt(c.epsilon_ref_loss / (d * d));
    const double phi = std::abs(irs.x - uav.x) / d;
    const double step = -(2.0 * std::numbers::pi / c.carrier_wavelength_m) *
                        c.element_spacing_m * phi;
    h.phases.resize(static_cast<std::size_t>(c.elements_per_irs));
    for (int k = 0; k < c.elements_per_irs; ++k)
        h.phases[static_cast<std::size_t>(k)] = step * k;
    return h;
}

// |h_ur^T diag(e^{j theta}) h_rv|^2. The per-element amplitudes are common,
// so the sum reduces to a phasor sum scaled by both amplitudes.
inline double cascaded_gain(const SteeringVector& h_ur, const PhaseMatrix& theta,
                            const SteeringVector& h_rv) {
    const std::size_t k = h_ur.phases.size();
    if (theta.thetas.size() != k || h_rv.phases.size() != k)
        throw ShapeError("cascaded_gain: element count mismatch");
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        const double ph = h_ur.phases[i] + theta.thetas[i] + h_rv.phases[i];
        acc += std::complex<double>(std::cos(ph), std::sin(ph));
    }
    const double a = h_ur.amplitude * h_rv.amplitude;
    return a * a * std::norm(acc);
}

// Quantized passive beamforming: per element, pick the alphabet entry closest
// (circularly) to the phase that cancels both propagation ramps. Ties go to
// the smaller angle. With that choice each summand sits within half a
// quantization step of perfect alignment.
inline PhaseMatrix qpb_phase(const SteeringVector& h_ur, const SteeringVector& h_rv,
                             int n_p) {
    const std::size_t k = h_ur.phases.size();
    if (h_rv.phases.size() != k)
        throw ShapeError("qpb_phase: element count mismatch");
    if (n_p < 1) throw ConfigError("qpb_phase: need at least one phase level");
    const double two_pi = 2.0 * std::numbers::pi;
    PhaseMatrix out;
    out.thetas.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        const double target = wrap_2pi(-(h_ur.phases[i] + h_rv.phases[i]));
        double best_angle = 0.0;
        double best_dist = std::numeric_limits<double>::infinity();
        for (int level = 0; level < n_p; ++level) {
            const double cand = two_pi * level / n_p;
            double diff = std::abs(cand - target);
            diff = std::min(diff, two_pi - diff);
            if (diff < best_dist) { // strict: ties keep the smaller angle
                best_dist = diff;
                best_angle = cand;
            }
        }
        out.thetas[i] = best_angle;
    }
    return out;
}

// Picks the surface with the strongest fully aligned cascade for the pair.
// The achievable aligned gain factorizes into per-hop amplitudes, so the
// element count is a common factor and plain amplitude products decide.
inline int select_irs(const Position3D& ue, const Position3D& uav,
                      const std::vector<Position3D>& irss,
                      const PhysicalConstants& c) {
    if (irss.empty()) throw ConfigError("select_irs: no surfaces available");
    int best = 0;
    double best_score = -1.0;
    for (std::size_t l = 0; l < irss.size(); ++l) {
        const double d_ur = distance(ue, irss[l]);
        const double d_rv = distance(irss[l], uav);
        double score;
        if (d_ur <= 0.0 || d_rv <= 0.0) {
            score = std::numeric_limits<double>::infinity();
        } else {
            score = (c.epsilon_ref_loss / std::pow(d_ur, c.alpha_ue_irs)) *
                    (c.epsilon_ref_loss / (d_rv * d_rv));
        }
        if (score > best_score) { // strict: ties keep the lowest index
            best_score = score;
            best = static_cast<int>(l);
        }
    }
    return best;
}

inline double data_rate(double gain, const PhysicalConstants& c) {
    if (gain < 0.0) throw ConfigError("data_rate: negative gain");
    return c.bandwidth_hz * std::log2(1.0 + c.tx_power_w * gain / c.noise_power_w);
}

struct ChannelEntry {
    int irs_index = -1;
    PhaseMatrix phases;
    double effective_gain = 0.0;
    double rate_bps = 0.0;
};

// Dense user x active-UAV table of beamformed links.
struct ChannelSet {
    int n_ues = 0;
    int n_uavs = 0;
    std::vector<ChannelEntry> entries; // row-major [ue][uav]

    const ChannelEntry& at(int ue, int uav) const {
        if (ue < 0 || ue >= n_ues || uav < 0 || uav >= n_uavs)
            throw ShapeError("ChannelSet::at: index out of range");
        return entries[static_cast<std::size_t>(ue) * static_cast<std::size_t>(n_uavs) +
                       static_cast<std::size_t>(uav)];
    }
    ChannelEntry& at(int ue, int uav) {
        return const_cast<ChannelEntry&>(static_cast<const ChannelSet&>(*this).at(ue, uav));
    }
};

// Surface selection + beamforming for every (user, active UAV) pair.
inline ChannelSet build_channel_set(const Scenario& s) {
    ChannelSet cs;
    cs.n_ues = static_cast<int>(s.ues.size());
    cs.n_uavs = s.active_uav_count;
    if (static_cast<int>(s.uavs.size()) < cs.n_uavs)
        throw ShapeError("build_channel_set: fewer deployed UAVs than the active count");
    cs.entries.resize(static_cast<std::size_t>(cs.n_ues) *
                      static_cast<std::size_t>(cs.n_uavs));
    for (int i = 0; i < cs.n_ues; ++i) {
        for (int j = 0; j < cs.n_uavs; ++j) {
            ChannelEntry e;
            e.irs_index = select_irs(s.ues[static_cast<std::size_t>(i)].pos,
                                     s.uavs[static_cast<std::size_t>(j)], s.irss,
                                     s.constants);
            const auto& irs = s.irss[static_cast<std::size_t>(e.irs_index)];
            const auto h_ur =
                ue_irs_channel(s.ues[static_cast<std::size_t>(i)].pos, irs, s.constants);
            const auto h_rv =
                irs_uav_channel(irs, s.uavs[static_cast<std::size_t>(j)], s.constants);
            e.phases = qpb_phase(h_ur, h_rv, s.constants.phase_levels);
            e.effective_gain = cascaded_gain(h_ur, e.phases, h_rv);
            e.rate_bps = data_rate(e.effective_gain, s.constants);
            cs.at(i, j) = e;
        }
    }
    return cs;
}

// Debug/export view; gains reported in dB.
inline nlohmann::json channel_set_to_json(const ChannelSet& cs) {
    nlohmann::json links = nlohmann::json::array();
    for (int i = 0; i < cs.n_ues; ++i) {
        for (int j = 0; j < cs.n_uavs; ++j) {
            const auto& e = cs.at(i, j);
            links.push_back({{"ue", i},
                             {"uav", j},
                             {"irs", e.irs_index},
                             {"gain_db", 10.0 * std::log10(e.effective_gain)},
                             {"rate_bps", e.rate_bps},
                             {"thetas_rad", e.phases.thetas}});
        }
    }
    return {{"n_ues", cs.n_ues}, {"n_uavs", cs.n_uavs}, {"links", links}};
}

} // namespace fres
