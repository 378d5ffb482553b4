#pragma once

// Shared brute-force oracles for the test suites. These deliberately take the
// dumbest correct route (full enumeration, no shortcuts) so the production
// code has something independent to be checked against.

#include <cstdint>
#include <random>
#include <vector>

#include "fres/channel.hpp"
#include "fres/scenario.hpp"

namespace testing_oracles {

// Best cascaded gain over every assignment of the discrete phase alphabet,
// n_p^K evaluations.
inline double exhaustive_qpb_gain(const fres::SteeringVector& h_ur,
                                  const fres::SteeringVector& h_rv, int n_p) {
    const int k = static_cast<int>(h_ur.phases.size());
    std::vector<int> idx(static_cast<std::size_t>(k), 0);
    fres::PhaseMatrix theta;
    theta.thetas.assign(static_cast<std::size_t>(k), 0.0);
    const double two_pi = 2.0 * std::numbers::pi;
    double best = -1.0;
    while (true) {
        for (int e = 0; e < k; ++e)
            theta.thetas[static_cast<std::size_t>(e)] =
                two_pi * idx[static_cast<std::size_t>(e)] / n_p;
        best = std::max(best, fres::cascaded_gain(h_ur, theta, h_rv));
        int pos = 0;
        while (pos < k) {
            if (++idx[static_cast<std::size_t>(pos)] < n_p) break;
            idx[static_cast<std::size_t>(pos)] = 0;
            ++pos;
        }
        if (pos == k) break;
    }
    return best;
}

// A random but physically plausible link geometry.
struct LinkGeometry {
    fres::Position3D ue, irs, uav;
};

inline LinkGeometry random_geometry(std::mt19937_64& rng, double area = 100.0) {
    std::uniform_real_distribution<double> u(0.0, area);
    LinkGeometry g;
    g.ue = {u(rng), u(rng), 0.0};
    g.irs = {u(rng), u(rng), 15.0};
    g.uav = {u(rng), u(rng), 30.0};
    return g;
}

} // namespace testing_oracles
