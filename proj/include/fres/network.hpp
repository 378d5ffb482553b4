#pragma once

// Minimal dense-network engine with analytic backpropagation and growth
// primitives for progressive structure adaptation.
//
// Every row (output unit) and column (input coordinate) of a layer carries a
// creation level. Level 0 is the base structure; each later level is a growth
// slice activated when the fleet grows. Masking works by picking an active
// level at evaluation time: rows above it produce exactly zero, and no dot
// product ever reads a column above the smaller of the row's reach and the
// active level, so a masked network performs bit-for-bit the same arithmetic
// as one that was never expanded.
//
// Hidden rows have reach equal to their own level: they see the inputs that
// existed when they were created plus their sibling slice. Full-reach rows
// (output heads) read every active column, so they gain trainable weight
// blocks with each growth level.
//
// Layers whose physical width is fixed by the problem (the state input, the
// class heads) declare rows/columns of future levels up front; layers that
// grow physically append them via grow_layer. Either way a level's parameters
// come to life only when activate_level initializes them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fres/errors.hpp"
#include "fres/rng.hpp"

namespace fres {

enum class Activation { Relu, Sigmoid, Softmax, Linear };

inline constexpr int kFullReach = 1 << 20; // rows that read all active columns

struct DenseLayer {
    int in_width = 0;   // allocated input columns
    int out_width = 0;  // allocated output rows
    Activation act = Activation::Linear;
    int active_level = 0; // highest slice level participating in forward/backward
    int levels_init = 0;  // number of levels whose parameters exist

    std::vector<double> w; // out_width x in_width, row-major
    std::vector<double> b; // out_width

    std::vector<int> row_level; // creation level per row, non-decreasing
    std::vector<int> col_level; // creation level per column, non-decreasing
    std::vector<int> row_reach; // per row: highest column level it may read

    double& at(int r, int c) { return w[static_cast<std::size_t>(r) * in_width + c]; }
    double at(int r, int c) const { return w[static_cast<std::size_t>(r) * in_width + c]; }

    // Number of input columns with level <= `level` (columns are level-sorted).
    int cols_upto(int level) const {
        return static_cast<int>(
            std::upper_bound(col_level.begin(), col_level.end(), level) -
            col_level.begin());
    }
    // Number of rows with level <= `level` (rows are level-sorted).
    int rows_upto(int level) const {
        return static_cast<int>(
            std::upper_bound(row_level.begin(), row_level.end(), level) -
            row_level.begin());
    }
    // Creation level of an individual parameter.
    int level_of_weight(int r, int c) const {
        return std::max(row_level[static_cast<std::size_t>(r)],
                        col_level[static_cast<std::size_t>(c)]);
    }
    int level_of_bias(int r) const { return row_level[static_cast<std::size_t>(r)]; }
};

// Fresh layer with explicit level structure. Rows with `full_reach` read every
// active column regardless of their own level.
inline DenseLayer make_dense_leveled(std::vector<int> col_levels,
                                     std::vector<int> row_levels, Activation act,
                                     bool full_reach = false) {
    DenseLayer l;
    l.in_width = static_cast<int>(col_levels.size());
    l.out_width = static_cast<int>(row_levels.size());
    l.act = act;
    l.w.assign(static_cast<std::size_t>(l.in_width) * l.out_width, 0.0);
    l.b.assign(static_cast<std::size_t>(l.out_width), 0.0);
    l.col_level = std::move(col_levels);
    l.row_level = std::move(row_levels);
    if (!std::is_sorted(l.col_level.begin(), l.col_level.end()) ||
        !std::is_sorted(l.row_level.begin(), l.row_level.end()))
        throw ConfigError("make_dense_leveled: levels must be non-decreasing");
    l.row_reach.resize(static_cast<std::size_t>(l.out_width));
    for (int r = 0; r < l.out_width; ++r)
        l.row_reach[static_cast<std::size_t>(r)] =
            full_reach ? kFullReach : l.row_level[static_cast<std::size_t>(r)];
    return l;
}

// Fresh single-level layer.
inline DenseLayer make_dense(int in_width, int out_width, Activation act,
                             bool full_reach = false) {
    return make_dense_leveled(std::vector<int>(static_cast<std::size_t>(in_width), 0),
                              std::vector<int>(static_cast<std::size_t>(out_width), 0),
                              act, full_reach);
}

struct LayerGrads {
    std::vector<double> w;
    std::vector<double> b;
};

inline LayerGrads make_grads(const DenseLayer& l) {
    LayerGrads g;
    g.w.assign(l.w.size(), 0.0);
    g.b.assign(l.b.size(), 0.0);
    return g;
}

// Optimizer state: adaptive moments with per-parameter step counts.
struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    bool operator==(const AdamConfig&) const = default;
};

struct LayerAdam {
    std::vector<double> mw, vw, mb, vb;
    std::vector<std::uint32_t> tw, tb;
};

inline LayerAdam make_adam(const DenseLayer& l) {
    LayerAdam s;
    s.mw.assign(l.w.size(), 0.0);
    s.vw.assign(l.w.size(), 0.0);
    s.tw.assign(l.w.size(), 0);
    s.mb.assign(l.b.size(), 0.0);
    s.vb.assign(l.b.size(), 0.0);
    s.tb.assign(l.b.size(), 0);
    return s;
}

// ---------------------------------------------------------------------------
// Growth

namespace detail {

template <typename T>
inline std::vector<T> widen_matrix(const std::vector<T>& old, int old_rows,
                                   int old_cols, int new_rows, int new_cols) {
    std::vector<T> next(static_cast<std::size_t>(new_rows) * new_cols, T{});
    for (int r = 0; r < old_rows; ++r)
        for (int c = 0; c < old_cols; ++c)
            next[static_cast<std::size_t>(r) * new_cols + c] =
                old[static_cast<std::size_t>(r) * old_cols + c];
    return next;
}

} // namespace detail

// Physically append storage for one growth slice: `extra_cols` new input
// columns and `extra_rows` new rows, all at `level`. Values start at zero and
// the paired optimizer state is re-shaped with zeroed slots; existing entries
// keep their exact values. Layers with pre-declared structure pass zero for
// the fixed dimension.
inline void grow_layer(DenseLayer& l, int extra_cols, int extra_rows, int level,
                       LayerAdam* opt = nullptr, bool full_reach_rows = false) {
    if (extra_cols < 0 || extra_rows < 0)
        throw ConfigError("grow_layer: negative growth");
    if (extra_cols > 0 && !l.col_level.empty() && l.col_level.back() >= level)
        throw ConfigError("grow_layer: appended columns must raise the level");
    if (extra_rows > 0 && !l.row_level.empty() && l.row_level.back() >= level)
        throw ConfigError("grow_layer: appended rows must raise the level");

    const int old_in = l.in_width, old_out = l.out_width;
    const int new_in = old_in + extra_cols, new_out = old_out + extra_rows;
    l.w = detail::widen_matrix(l.w, old_out, old_in, new_out, new_in);
    l.b.resize(static_cast<std::size_t>(new_out), 0.0);
    l.col_level.resize(static_cast<std::size_t>(new_in), level);
    l.row_level.resize(static_cast<std::size_t>(new_out), level);
    l.row_reach.resize(static_cast<std::size_t>(new_out),
                       full_reach_rows ? kFullReach : level);
    l.in_width = new_in;
    l.out_width = new_out;
    if (opt) {
        opt->mw = detail::widen_matrix(opt->mw, old_out, old_in, new_out, new_in);
        opt->vw = detail::widen_matrix(opt->vw, old_out, old_in, new_out, new_in);
        opt->tw = detail::widen_matrix(opt->tw, old_out, old_in, new_out, new_in);
        opt->mb.resize(static_cast<std::size_t>(new_out), 0.0);
        opt->vb.resize(static_cast<std::size_t>(new_out), 0.0);
        opt->tb.resize(static_cast<std::size_t>(new_out), 0);
    }
}

// Bring a slice level to life (first activation initializes its parameters,
// later calls just unmask it) and make it the active level. He-style uniform
// draws scaled by `scale`; fan-in is the row's readable width at this level.
// Biases get small uniform draws — an exactly-zero bias would park a unit
// whose inputs are all inactive exactly on the relu kink. A `max_levels` cap
// of 0 means uncapped.
inline void activate_level(DenseLayer& l, int level, std::mt19937_64& rng,
                           double scale, int max_levels = 0) {
    if (level < 0 || level > l.levels_init)
        throw ConfigError("activate_level: level " + std::to_string(level) +
                          " skips unbuilt levels");
    if (level < l.levels_init) { // pure unmask: parameters already exist
        l.active_level = level;
        return;
    }
    if (max_levels > 0 && level >= max_levels)
        throw BudgetError("activate_level: slice capacity exceeded");
    for (int r = 0; r < l.out_width; ++r) {
        const int reach = std::min(l.row_reach[static_cast<std::size_t>(r)], level);
        const int limit = l.cols_upto(reach);
        const double span = scale * std::sqrt(6.0 / std::max(1, limit));
        std::uniform_real_distribution<double> u(-span, span);
        for (int c = 0; c < limit; ++c)
            if (l.level_of_weight(r, c) == level) l.at(r, c) = u(rng);
    }
    std::uniform_real_distribution<double> ub(-0.05 * scale, 0.05 * scale);
    for (int r = 0; r < l.out_width; ++r)
        if (l.level_of_bias(r) == level) l.b[static_cast<std::size_t>(r)] = ub(rng);
    l.levels_init = level + 1;
    l.active_level = level;
}

// Deactivate a slice level and everything above it. Parameters are retained;
// forward/backward simply stop at the previous level.
inline void mask_slice(DenseLayer& l, int slice_index) {
    if (slice_index <= 0)
        throw ConfigError("mask_slice: the base slice cannot be masked");
    if (slice_index >= l.levels_init)
        throw ConfigError("mask_slice: slice " + std::to_string(slice_index) +
                          " was never built");
    l.active_level = slice_index - 1;
}

inline void set_active_level(DenseLayer& l, int level) {
    if (level < 0 || level >= l.levels_init)
        throw ConfigError("set_active_level: level out of range");
    l.active_level = level;
}

// ---------------------------------------------------------------------------
// Forward / backward

struct LayerCache {
    std::vector<double> in;  // copy of the input vector
    std::vector<double> z;   // pre-activation, zeros beyond the active rows
    std::vector<double> out; // post-activation
};

namespace detail {

inline double apply_act(Activation a, double z) {
    switch (a) {
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
    default: return z;
    }
}

} // namespace detail

// Forward pass restricted to the active slices. Rows above the active level
// output exactly 0; every dot product stops at the row's readable, active
// column prefix. Softmax normalizes over the active rows.
inline std::vector<double> forward_dense(const DenseLayer& l,
                                         const std::vector<double>& x,
                                         LayerCache* cache = nullptr) {
    if (static_cast<int>(x.size()) != l.in_width)
        throw ShapeError("forward_dense: input width " + std::to_string(x.size()) +
                         " != layer width " + std::to_string(l.in_width));
    std::vector<double> z(static_cast<std::size_t>(l.out_width), 0.0);
    const int active_rows = l.rows_upto(l.active_level);
    for (int r = 0; r < active_rows; ++r) {
        const int limit =
            l.cols_upto(std::min(l.row_reach[static_cast<std::size_t>(r)], l.active_level));
        double s = l.b[static_cast<std::size_t>(r)];
        for (int c = 0; c < limit; ++c) s += l.at(r, c) * x[static_cast<std::size_t>(c)];
        z[static_cast<std::size_t>(r)] = s;
    }
    std::vector<double> out(static_cast<std::size_t>(l.out_width), 0.0);
    if (l.act == Activation::Softmax) {
        double zmax = -std::numeric_limits<double>::infinity();
        for (int r = 0; r < active_rows; ++r)
            zmax = std::max(zmax, z[static_cast<std::size_t>(r)]);
        double denom = 0.0;
        for (int r = 0; r < active_rows; ++r)
            denom += std::exp(z[static_cast<std::size_t>(r)] - zmax);
        for (int r = 0; r < active_rows; ++r)
            out[static_cast<std::size_t>(r)] =
                std::exp(z[static_cast<std::size_t>(r)] - zmax) / denom;
    } else {
        for (int r = 0; r < active_rows; ++r)
            out[static_cast<std::size_t>(r)] =
                detail::apply_act(l.act, z[static_cast<std::size_t>(r)]);
    }
    if (cache) {
        cache->in = x;
        cache->z = z;
        cache->out = out;
    }
    return out;
}

// Backpropagate dL/d(output) through one layer, accumulating parameter
// gradients and returning dL/d(input). For Softmax layers pass dL/dz directly
// (`delta_is_dz = true`), the usual fused cross-entropy convention.
inline std::vector<double> backward_dense(const DenseLayer& l, const LayerCache& cache,
                                          const std::vector<double>& dout,
                                          LayerGrads& grads, bool delta_is_dz = false) {
    if (cache.in.empty() || static_cast<int>(cache.in.size()) != l.in_width)
        throw ShapeError("backward_dense: forward cache missing or stale");
    if (static_cast<int>(dout.size()) != l.out_width)
        throw ShapeError("backward_dense: delta width mismatch");
    std::vector<double> din(static_cast<std::size_t>(l.in_width), 0.0);
    const int active_rows = l.rows_upto(l.active_level);
    for (int r = 0; r < active_rows; ++r) {
        double dz = dout[static_cast<std::size_t>(r)];
        if (!delta_is_dz) {
            switch (l.act) {
            case Activation::Relu:
                dz = cache.z[static_cast<std::size_t>(r)] > 0.0 ? dz : 0.0;
                break;
            case Activation::Sigmoid: {
                const double o = cache.out[static_cast<std::size_t>(r)];
                dz *= o * (1.0 - o);
                break;
            }
            case Activation::Softmax:
                throw ShapeError("backward_dense: softmax requires dL/dz deltas");
            case Activation::Linear: break;
            }
        }
        if (dz == 0.0) continue;
        grads.b[static_cast<std::size_t>(r)] += dz;
        const int limit =
            l.cols_upto(std::min(l.row_reach[static_cast<std::size_t>(r)], l.active_level));
        for (int c = 0; c < limit; ++c) {
            grads.w[static_cast<std::size_t>(r) * l.in_width + c] +=
                dz * cache.in[static_cast<std::size_t>(c)];
            din[static_cast<std::size_t>(c)] += l.at(r, c) * dz;
        }
    }
    return din;
}

// ---------------------------------------------------------------------------
// Losses

// Mean cross-entropy over a batch of probability rows with integer labels.
// Probabilities at the true class are floored at 1e-12 to keep the loss
// finite.
inline double cross_entropy(const std::vector<std::vector<double>>& probs,
                            const std::vector<int>& labels, int batch) {
    if (probs.size() != labels.size() || batch <= 0)
        throw ShapeError("cross_entropy: batch shape mismatch");
    double total = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        const int y = labels[k];
        if (y < 0 || y >= static_cast<int>(probs[k].size()))
            throw ShapeError("cross_entropy: label out of range");
        total += -std::log(std::max(probs[k][static_cast<std::size_t>(y)], 1e-12));
    }
    return total / batch;
}

// Mean squared error over flattened predictions.
inline double mse(const std::vector<double>& pred, const std::vector<double>& target,
                  int batch) {
    if (pred.size() != target.size() || batch <= 0)
        throw ShapeError("mse: shape mismatch");
    double total = 0.0;
    for (std::size_t k = 0; k < pred.size(); ++k) {
        const double e = pred[k] - target[k];
        total += e * e;
    }
    return total / batch;
}

inline double multitask_loss(double l_ce, double l_mse, double xi) {
    return l_ce + xi * l_mse;
}

// ---------------------------------------------------------------------------
// Optimizer step. Updates are lazy: a parameter whose gradient is exactly
// zero (masked slice, inactive unit) or whose creation level is not trainable
// is skipped entirely, so its moments do not decay and its value cannot
// drift.

namespace detail {

inline void adam_update(double& p, double g, double& m, double& v, std::uint32_t& t,
                        const AdamConfig& c) {
    t += 1;
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    const double mh = m / (1.0 - std::pow(c.beta1, static_cast<double>(t)));
    const double vh = v / (1.0 - std::pow(c.beta2, static_cast<double>(t)));
    p -= c.lr * mh / (std::sqrt(vh) + c.eps);
}

} // namespace detail

template <typename TrainableByLevel>
inline void optimizer_step(DenseLayer& l, const LayerGrads& g, LayerAdam& s,
                           const AdamConfig& cfg, TrainableByLevel&& trainable) {
    for (int r = 0; r < l.out_width; ++r) {
        for (int c = 0; c < l.in_width; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * l.in_width + c;
            if (g.w[i] == 0.0 || !trainable(l.level_of_weight(r, c))) continue;
            detail::adam_update(l.w[i], g.w[i], s.mw[i], s.vw[i], s.tw[i], cfg);
        }
        const std::size_t i = static_cast<std::size_t>(r);
        if (g.b[i] == 0.0 || !trainable(l.level_of_bias(r))) continue;
        detail::adam_update(l.b[i], g.b[i], s.mb[i], s.vb[i], s.tb[i], cfg);
    }
}

// ---------------------------------------------------------------------------
// Checkpointing. JSON keeps the format self-describing; doubles round-trip
// bit-exactly through the shortest-representation printer.

inline constexpr int kCheckpointVersion = 1;

inline void to_json(nlohmann::json& j, const DenseLayer& l) {
    j = nlohmann::json{{"in_width", l.in_width},
                       {"out_width", l.out_width},
                       {"act", static_cast<int>(l.act)},
                       {"active_level", l.active_level},
                       {"levels_init", l.levels_init},
                       {"w", l.w},
                       {"b", l.b},
                       {"row_level", l.row_level},
                       {"col_level", l.col_level},
                       {"row_reach", l.row_reach}};
}

inline void from_json(const nlohmann::json& j, DenseLayer& l) {
    j.at("in_width").get_to(l.in_width);
    j.at("out_width").get_to(l.out_width);
    l.act = static_cast<Activation>(j.at("act").get<int>());
    j.at("active_level").get_to(l.active_level);
    j.at("levels_init").get_to(l.levels_init);
    j.at("w").get_to(l.w);
    j.at("b").get_to(l.b);
    j.at("row_level").get_to(l.row_level);
    j.at("col_level").get_to(l.col_level);
    j.at("row_reach").get_to(l.row_reach);
    if (static_cast<int>(l.w.size()) !=
            static_cast<long long>(l.in_width) * l.out_width ||
        static_cast<int>(l.b.size()) != l.out_width ||
        static_cast<int>(l.row_level.size()) != l.out_width ||
        static_cast<int>(l.col_level.size()) != l.in_width ||
        static_cast<int>(l.row_reach.size()) != l.out_width)
        throw CorruptPayloadError("dense layer payload has inconsistent shapes");
}

inline void to_json(nlohmann::json& j, const LayerAdam& s) {
    j = nlohmann::json{{"mw", s.mw}, {"vw", s.vw}, {"tw", s.tw},
                       {"mb", s.mb}, {"vb", s.vb}, {"tb", s.tb}};
}

inline void from_json(const nlohmann::json& j, LayerAdam& s) {
    j.at("mw").get_to(s.mw);
    j.at("vw").get_to(s.vw);
    j.at("tw").get_to(s.tw);
    j.at("mb").get_to(s.mb);
    j.at("vb").get_to(s.vb);
    j.at("tb").get_to(s.tb);
}

// Wrap a payload in a versioned envelope.
inline std::string save_checkpoint(const nlohmann::json& body, const std::string& kind) {
    nlohmann::json j{{"version", kCheckpointVersion}, {"kind", kind}, {"body", body}};
    return j.dump();
}

inline nlohmann::json load_checkpoint(const std::string& text, const std::string& kind) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptPayloadError(std::string("checkpoint unreadable: ") + e.what());
    }
    if (!j.is_object() || !j.contains("version") || !j.contains("kind") ||
        !j.contains("body"))
        throw CorruptPayloadError("checkpoint missing envelope fields");
    if (!j["version"].is_number_integer() ||
        j["version"].get<int>() != kCheckpointVersion)
        throw CheckpointVersionError("checkpoint version " + j["version"].dump() +
                                     " unsupported");
    if (j["kind"].get<std::string>() != kind)
        throw CorruptPayloadError("checkpoint kind mismatch: expected " + kind +
                                  ", found " + j["kind"].get<std::string>());
    return j["body"];
}

} // namespace fres
