#pragma once

// Fuzzy c-means clustering over user positions, used to place the UAV fleet
// above demand hot spots. The dissimilarity is the Euclidean distance raised
// to a configurable path-loss exponent, so with the default exponent of 2 the
// iteration is classical FCM on squared distances.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "fres/errors.hpp"
#include "fres/rng.hpp"

namespace fres {

using PointXY = std::array<double, 2>;

// memberships[i][j] = degree to which user i belongs to cluster j.
// Rows sum to 1.
using MembershipMatrix = std::vector<std::vector<double>>;

struct FcmOptions {
    double fuzzifier = 2.0;       // > 1
    int max_iter = 100;
    double tol_m = 1e-4;          // max center movement, metres
    double path_loss_exp = 2.0;   // dissimilarity = dist^exp
    std::uint64_t seed = 0;
};

struct FcmResult {
    std::vector<PointXY> centers;
    MembershipMatrix memberships;
    std::vector<double> objective_trace; // one entry per completed iteration
    int iterations = 0;
};

namespace detail {

inline double dist_xy(const PointXY& a, const PointXY& b) {
    const double dx = a[0] - b[0];
    const double dy = a[1] - b[1];
    return std::sqrt(dx * dx + dy * dy);
}

// Canonical processing order: users sorted by coordinates. Random draws and
// floating-point accumulations walk this order, so relabeling the users
// changes nothing — the center set is invariant under permutation.
inline std::vector<std::size_t> canonical_order(const std::vector<PointXY>& pts) {
    std::vector<std::size_t> ord(pts.size());
    for (std::size_t i = 0; i < ord.size(); ++i) ord[i] = i;
    std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) {
        if (pts[a][0] != pts[b][0]) return pts[a][0] < pts[b][0];
        return pts[a][1] < pts[b][1];
    });
    return ord;
}

// k-means++-style spread: the first center is a uniformly drawn user, later
// centers are drawn proportionally to the dissimilarity to the closest
// already-chosen center. Degenerate inputs (all points coincident) fall back
// to uniform draws.
inline std::vector<PointXY> seed_centers(const std::vector<PointXY>& pts,
                                         const std::vector<std::size_t>& ord, int m,
                                         double path_loss_exp, std::mt19937_64& rng) {
    std::vector<PointXY> centers;
    centers.reserve(static_cast<std::size_t>(m));
    std::uniform_int_distribution<std::size_t> uni(0, pts.size() - 1);
    centers.push_back(pts[ord[uni(rng)]]);
    std::vector<double> weight(pts.size(), 0.0);
    while (static_cast<int>(centers.size()) < m) {
        double total = 0.0;
        for (std::size_t oi = 0; oi < ord.size(); ++oi) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centers)
                best = std::min(best, dist_xy(pts[ord[oi]], c));
            weight[oi] = std::pow(best, path_loss_exp);
            total += weight[oi];
        }
        if (total <= 0.0) {
            centers.push_back(pts[ord[uni(rng)]]);
            continue;
        }
        std::uniform_real_distribution<double> u(0.0, total);
        double r = u(rng);
        std::size_t pick = ord.back();
        for (std::size_t oi = 0; oi < ord.size(); ++oi) {
            r -= weight[oi];
            if (r <= 0.0) { pick = ord[oi]; break; }
        }
        centers.push_back(pts[pick]);
    }
    return centers;
}

} // namespace detail

inline FcmResult ls_fcm_detailed(const std::vector<PointXY>& ue_xy, int m,
                                 const FcmOptions& opt = {}) {
    const int n = static_cast<int>(ue_xy.size());
    if (m <= 0)
        throw ConfigError("ls_fcm: cluster count must be positive");
    if (m > n)
        throw ConfigError("ls_fcm: more clusters than users (" + std::to_string(m) +
                          " > " + std::to_string(n) + ")");
    if (opt.fuzzifier <= 1.0)
        throw ConfigError("ls_fcm: fuzzifier must exceed 1");

    auto rng = make_rng(opt.seed, 0x9c7a);
    const auto ord = detail::canonical_order(ue_xy);
    FcmResult res;
    res.centers = detail::seed_centers(ue_xy, ord, m, opt.path_loss_exp, rng);
    res.memberships.assign(static_cast<std::size_t>(n),
                           std::vector<double>(static_cast<std::size_t>(m), 0.0));

    const double mexp = 1.0 / (opt.fuzzifier - 1.0);
    constexpr double kTiny = 1e-12;

    std::vector<double> d(static_cast<std::size_t>(m), 0.0);
    for (int it = 0; it < opt.max_iter; ++it) {
        // Membership update from current centers.
        double objective = 0.0;
        for (int oi = 0; oi < n; ++oi) {
            const int i = static_cast<int>(ord[static_cast<std::size_t>(oi)]);
            int zero_at = -1;
            for (int j = 0; j < m; ++j) {
                d[static_cast<std::size_t>(j)] =
                    detail::dist_xy(ue_xy[static_cast<std::size_t>(i)],
                                    res.centers[static_cast<std::size_t>(j)]);
                if (d[static_cast<std::size_t>(j)] < kTiny && zero_at < 0) zero_at = j;
            }
            auto& row = res.memberships[static_cast<std::size_t>(i)];
            if (zero_at >= 0) {
                // User sits on a center: full membership there.
                std::fill(row.begin(), row.end(), 0.0);
                row[static_cast<std::size_t>(zero_at)] = 1.0;
            } else {
                for (int j = 0; j < m; ++j) {
                    const double dj = std::pow(d[static_cast<std::size_t>(j)], opt.path_loss_exp);
                    double s = 0.0;
                    for (int l = 0; l < m; ++l) {
                        const double dl = std::pow(d[static_cast<std::size_t>(l)], opt.path_loss_exp);
                        s += std::pow(dj / dl, mexp);
                    }
                    row[static_cast<std::size_t>(j)] = 1.0 / s;
                }
            }
            for (int j = 0; j < m; ++j)
                objective += std::pow(row[static_cast<std::size_t>(j)], opt.fuzzifier) *
                             std::pow(std::max(d[static_cast<std::size_t>(j)], 0.0), opt.path_loss_exp);
        }
        res.objective_trace.push_back(objective);

        // Center update. For exponent 2 this is the exact weighted mean; for
        // other exponents one reweighted-least-squares step per iteration.
        double moved = 0.0;
        for (int j = 0; j < m; ++j) {
            double wx = 0.0, wy = 0.0, wsum = 0.0;
            for (int oi = 0; oi < n; ++oi) {
                const int i = static_cast<int>(ord[static_cast<std::size_t>(oi)]);
                const double u = res.memberships[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                double w = std::pow(u, opt.fuzzifier);
                if (opt.path_loss_exp != 2.0) {
                    const double dj = std::max(
                        detail::dist_xy(ue_xy[static_cast<std::size_t>(i)],
                                        res.centers[static_cast<std::size_t>(j)]),
                        kTiny);
                    w *= std::pow(dj, opt.path_loss_exp - 2.0);
                }
                wx += w * ue_xy[static_cast<std::size_t>(i)][0];
                wy += w * ue_xy[static_cast<std::size_t>(i)][1];
                wsum += w;
            }
            PointXY next = res.centers[static_cast<std::size_t>(j)];
            if (wsum > 0.0) next = {wx / wsum, wy / wsum};
            moved = std::max(moved,
                             detail::dist_xy(next, res.centers[static_cast<std::size_t>(j)]));
            res.centers[static_cast<std::size_t>(j)] = next;
        }
        res.iterations = it + 1;
        if (moved < opt.tol_m) break;
    }
    return res;
}

// Deployment positions only; the common entry point for scenario generation.
inline std::vector<PointXY> ls_fcm(const std::vector<PointXY>& ue_xy, int m,
                                   const FcmOptions& opt = {}) {
    return ls_fcm_detailed(ue_xy, m, opt).centers;
}

} // namespace fres
