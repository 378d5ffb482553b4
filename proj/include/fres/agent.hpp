#pragma once

// The scheduling agent: state encoding, a progressive multi-task network
// (shared trunk, association head, allocation head), prioritized replay
// buffers keyed by fleet size, supervised training on refined actions, and
// the structure-adaptation step that grows/masks slices when the fleet
// changes.
//
// Level semantics: the agent is born for `m_initial` UAVs (level 0). Fleet
// size m maps to body level max(0, m - m_initial). Growing past the largest
// fleet seen so far appends 16 units per layer per added UAV and makes only
// those new slices trainable; every earlier slice freezes, which is what
// makes shrinking back an exact restoration of the earlier function.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fres/channel.hpp"
#include "fres/errors.hpp"
#include "fres/network.hpp"
#include "fres/rng.hpp"
#include "fres/scenario.hpp"

namespace fres {

struct AgentConfig {
    int m_max = 5;
    int m_initial = 3;
    int shared1 = 64;
    int shared2 = 128;
    int head = 32;
    int growth = 16; // units added per layer per extra UAV
    double xi = 1.0; // weight of the allocation loss inside the total
    AdamConfig adam{};
    double gain_db_min = -140.0;
    double gain_db_max = -40.0;
    double fraction_clamp = 1e-3;
    std::uint64_t seed = 0;

    bool operator==(const AgentConfig&) const = default;
};

// Natural state layout: [gain_1 .. gain_Mmax, data_norm, cycles_norm].
using EncodedState = std::vector<double>;

struct AgentAction {
    int association = 0;              // 0 = local, 1..m = UAV index
    double allocation_fraction = 0.5; // of the executor's capacity
};

// Effective gains mapped to dB and affinely scaled to [0,1] over the
// configured dynamic range; inactive fleet slots stay zero. Task descriptors
// min-max normalized over their sampling ranges.
inline EncodedState encode_state(const Scenario& sc, const ChannelSet& cs, int ue,
                                 const AgentConfig& cfg) {
    EncodedState s(static_cast<std::size_t>(cfg.m_max) + 2, 0.0);
    for (int j = 0; j < cs.n_uavs && j < cfg.m_max; ++j) {
        const double g = cs.at(ue, j).effective_gain;
        double norm = 0.0;
        if (g > 0.0) {
            const double db = 10.0 * std::log10(g);
            norm = (db - cfg.gain_db_min) / (cfg.gain_db_max - cfg.gain_db_min);
            norm = std::clamp(norm, 0.0, 1.0);
        }
        s[static_cast<std::size_t>(j)] = norm;
    }
    const auto& t = sc.ues[static_cast<std::size_t>(ue)].task;
    const auto& r = sc.task_ranges;
    const double bits_min = r.data_mb_min * r.bits_per_mb;
    const double bits_max = r.data_mb_max * r.bits_per_mb;
    s[static_cast<std::size_t>(cfg.m_max)] =
        std::clamp((t.data_bits - bits_min) / (bits_max - bits_min), 0.0, 1.0);
    s[static_cast<std::size_t>(cfg.m_max) + 1] =
        std::clamp((t.cycles - r.cycles_min) / (r.cycles_max - r.cycles_min), 0.0, 1.0);
    return s;
}

// Softmax over the first `active` entries; the rest are exactly zero.
inline std::vector<double> masked_softmax(const std::vector<double>& logits, int active) {
    if (active <= 0 || active > static_cast<int>(logits.size()))
        throw ShapeError("masked_softmax: active count out of range");
    std::vector<double> p(logits.size(), 0.0);
    double zmax = logits[0];
    for (int i = 1; i < active; ++i) zmax = std::max(zmax, logits[static_cast<std::size_t>(i)]);
    double denom = 0.0;
    for (int i = 0; i < active; ++i)
        denom += std::exp(logits[static_cast<std::size_t>(i)] - zmax);
    for (int i = 0; i < active; ++i)
        p[static_cast<std::size_t>(i)] =
            std::exp(logits[static_cast<std::size_t>(i)] - zmax) / denom;
    return p;
}

// ---------------------------------------------------------------------------
// Replay buffers

struct Transition {
    EncodedState state;
    AgentAction refined;
    double priority = 1.0;
};

// Buffers isolated per fleet size; bounded FIFO; proportional prioritized
// sampling with exponent alpha.
class ReplayBufferPool {
  public:
    explicit ReplayBufferPool(int capacity = 1024, double alpha = 0.6)
        : capacity_(capacity), alpha_(alpha) {
        if (capacity <= 0) throw ConfigError("replay capacity must be positive");
    }

    // New samples enter at the current maximum priority so each is trained at
    // least once.
    void store(int m, EncodedState state, AgentAction refined) {
        auto& buf = buffers_[m];
        double p = 1.0;
        for (const auto& t : buf) p = std::max(p, t.priority);
        buf.push_back(Transition{std::move(state), refined, p});
        if (static_cast<int>(buf.size()) > capacity_) buf.pop_front();
    }

    std::size_t size(int m) const {
        auto it = buffers_.find(m);
        return it == buffers_.end() ? 0 : it->second.size();
    }

    const Transition& at(int m, std::size_t i) const { return buffers_.at(m)[i]; }

    // Proportional sampling with replacement: P(k) = p_k^alpha / sum p^alpha.
    // Empty buffer -> empty result (the caller's no-op signal).
    std::vector<std::size_t> sample(int m, int batch, std::mt19937_64& rng) const {
        auto it = buffers_.find(m);
        if (it == buffers_.end() || it->second.empty() || batch <= 0) return {};
        const auto& buf = it->second;
        std::vector<double> w(buf.size());
        for (std::size_t i = 0; i < buf.size(); ++i)
            w[i] = std::pow(std::max(buf[i].priority, 1e-12), alpha_);
        std::discrete_distribution<std::size_t> dist(w.begin(), w.end());
        std::vector<std::size_t> idx(static_cast<std::size_t>(batch));
        for (auto& k : idx) k = dist(rng);
        return idx;
    }

    void update_priority(int m, std::size_t i, double priority) {
        buffers_.at(m).at(i).priority = priority;
    }

    // Make sure the buffer for fleet size m exists (possibly empty).
    void touch(int m) { buffers_[m]; }

    const std::map<int, std::deque<Transition>>& buffers() const { return buffers_; }
    int capacity() const { return capacity_; }
    double alpha() const { return alpha_; }

  private:
    int capacity_;
    double alpha_;
    std::map<int, std::deque<Transition>> buffers_;
};

// ---------------------------------------------------------------------------
// Multi-task agent

struct TrainResult {
    double l_ce = 0.0;
    double l_mse = 0.0;
    double l_mt = 0.0;
    std::vector<double> per_sample; // total loss per sample, for priorities
};

class MultiTaskAgent {
  public:
    explicit MultiTaskAgent(AgentConfig cfg) : cfg_(cfg), current_m_(cfg.m_initial) {
        if (cfg.m_initial < 1 || cfg.m_initial > cfg.m_max)
            throw ConfigError("agent: initial fleet size out of range");
        build_base();
    }

    const AgentConfig& config() const { return cfg_; }
    int current_m() const { return current_m_; }
    int body_level() const { return level_of_m(current_m_); }
    int levels_built() const { return l1_.levels_init; }
    const std::set<int>& trainable_levels() const { return trainable_; }

    // Leveled input order: gains of the base fleet, the two task descriptors,
    // then one gain per growth level.
    std::vector<double> to_leveled(const EncodedState& s) const {
        if (static_cast<int>(s.size()) != cfg_.m_max + 2)
            throw ShapeError("agent: state width mismatch");
        std::vector<double> x;
        x.reserve(s.size());
        for (int j = 0; j < cfg_.m_initial; ++j) x.push_back(s[static_cast<std::size_t>(j)]);
        x.push_back(s[static_cast<std::size_t>(cfg_.m_max)]);
        x.push_back(s[static_cast<std::size_t>(cfg_.m_max) + 1]);
        for (int j = cfg_.m_initial; j < cfg_.m_max; ++j)
            x.push_back(s[static_cast<std::size_t>(j)]);
        return x;
    }

    AgentAction infer(const EncodedState& s) { return infer_at(s, current_m_); }

    // Inference at any fleet size whose slices are built; sizes other than the
    // current one run under a temporary mask and leave the agent unchanged.
    AgentAction infer_at(const EncodedState& s, int m) {
        if (m < 1 || m > cfg_.m_max)
            throw ConfigError("agent: fleet size out of range");
        const int lev = level_of_m(m);
        if (lev >= l1_.levels_init)
            throw AdjustRequiredError(
                "agent: fleet size " + std::to_string(m) +
                " requires progressive adjustment before inference");
        const auto all = layers();
        std::vector<int> saved;
        saved.reserve(all.size());
        for (DenseLayer* l : all) {
            saved.push_back(l->active_level);
            l->active_level = lev;
        }
        AgentAction a;
        try {
            const auto logits_frac = forward_heads(to_leveled(s));
            const auto p = masked_softmax(logits_frac.first, m + 1);
            int best = 0;
            for (int c = 1; c <= m; ++c)
                if (p[static_cast<std::size_t>(c)] > p[static_cast<std::size_t>(best)])
                    best = c;
            a.association = best;
            a.allocation_fraction = std::clamp(logits_frac.second, cfg_.fraction_clamp,
                                               1.0 - cfg_.fraction_clamp);
        } catch (...) {
            for (std::size_t i = 0; i < all.size(); ++i) all[i]->active_level = saved[i];
            throw;
        }
        for (std::size_t i = 0; i < all.size(); ++i) all[i]->active_level = saved[i];
        return a;
    }

    // One supervised step on the multi-task loss: cross-entropy on refined
    // associations through the masked softmax, MSE on refined fractions.
    TrainResult train_step(const std::vector<Transition>& batch) {
        if (batch.empty()) return {};
        const int s = static_cast<int>(batch.size());
        TrainResult res;
        res.per_sample.resize(batch.size());

        auto g1 = make_grads(l1_), g2 = make_grads(l2_), gah = make_grads(ah_),
             gao = make_grads(ao_), gfh = make_grads(fh_), gfo = make_grads(fo_);
        std::vector<std::vector<double>> probs;
        std::vector<int> labels;
        std::vector<double> preds, targets;

        for (std::size_t k = 0; k < batch.size(); ++k) {
            const auto& tr = batch[k];
            if (tr.refined.association < 0 || tr.refined.association > current_m_)
                throw ShapeError("train_step: refined association outside active classes");
            LayerCache c1, c2, cah, cao, cfh, cfo;
            const auto x = to_leveled(tr.state);
            auto t1 = forward_dense(l1_, x, &c1);
            auto t2 = forward_dense(l2_, t1, &c2);
            auto za = forward_dense(ao_, forward_dense(ah_, t2, &cah), &cao);
            auto yf = forward_dense(fo_, forward_dense(fh_, t2, &cfh), &cfo);
            auto p = masked_softmax(za, current_m_ + 1);

            probs.push_back(p);
            labels.push_back(tr.refined.association);
            preds.push_back(yf[0]);
            targets.push_back(tr.refined.allocation_fraction);

            std::vector<double> dza(za.size(), 0.0);
            for (int c = 0; c <= current_m_; ++c) {
                const double y = (c == tr.refined.association) ? 1.0 : 0.0;
                dza[static_cast<std::size_t>(c)] =
                    (p[static_cast<std::size_t>(c)] - y) / s;
            }
            auto dah = backward_dense(ao_, cao, dza, gao, true);
            auto dt2a = backward_dense(ah_, cah, dah, gah);

            std::vector<double> dyf{cfg_.xi * 2.0 * (yf[0] - tr.refined.allocation_fraction) / s};
            auto dfh = backward_dense(fo_, cfo, dyf, gfo);
            auto dt2f = backward_dense(fh_, cfh, dfh, gfh);

            std::vector<double> dt2(t2.size());
            for (std::size_t j = 0; j < t2.size(); ++j) dt2[j] = dt2a[j] + dt2f[j];
            auto dt1 = backward_dense(l2_, c2, dt2, g2);
            backward_dense(l1_, c1, dt1, g1);

            const double ce_k =
                -std::log(std::max(p[static_cast<std::size_t>(tr.refined.association)], 1e-12));
            const double mse_k = (yf[0] - tr.refined.allocation_fraction) *
                                 (yf[0] - tr.refined.allocation_fraction);
            res.per_sample[k] = ce_k + cfg_.xi * mse_k;
        }

        res.l_ce = cross_entropy(probs, labels, s);
        res.l_mse = mse(preds, targets, s);
        res.l_mt = multitask_loss(res.l_ce, res.l_mse, cfg_.xi);

        auto trainable = [this](int level) { return trainable_.count(level) > 0; };
        optimizer_step(l1_, g1, a1_, cfg_.adam, trainable);
        optimizer_step(l2_, g2, a2_, cfg_.adam, trainable);
        optimizer_step(ah_, gah, aah_, cfg_.adam, trainable);
        optimizer_step(ao_, gao, aao_, cfg_.adam, trainable);
        optimizer_step(fh_, gfh, afh_, cfg_.adam, trainable);
        optimizer_step(fo_, gfo, afo_, cfg_.adam, trainable);
        return res;
    }

    // Structure adaptation on a fleet-size change. Growth appends one slice
    // per added UAV past the largest fleet built so far and makes exactly the
    // new slices trainable; revisiting a smaller or previously built size
    // freezes everything (pure recall of the stored function).
    void adjust(int m_new) {
        if (m_new < 1 || m_new > cfg_.m_max)
            throw ConfigError("progressive adjustment: fleet size out of range");
        if (m_new == current_m_) return;
        const int target = level_of_m(m_new);
        std::set<int> fresh;
        for (int lev = l1_.levels_init; lev <= target; ++lev) {
            grow_level(lev);
            fresh.insert(lev);
        }
        for (DenseLayer* l : layers()) set_active_level(*l, target);
        trainable_ = fresh;
        current_m_ = m_new;
    }

    std::string save(const ReplayBufferPool* pool = nullptr) const {
        nlohmann::json body;
        body["config"] = {{"m_max", cfg_.m_max},       {"m_initial", cfg_.m_initial},
                          {"shared1", cfg_.shared1},   {"shared2", cfg_.shared2},
                          {"head", cfg_.head},         {"growth", cfg_.growth},
                          {"xi", cfg_.xi},             {"lr", cfg_.adam.lr},
                          {"gain_db_min", cfg_.gain_db_min},
                          {"gain_db_max", cfg_.gain_db_max},
                          {"fraction_clamp", cfg_.fraction_clamp},
                          {"seed", cfg_.seed}};
        body["current_m"] = current_m_;
        body["trainable"] = std::vector<int>(trainable_.begin(), trainable_.end());
        body["layers"] = {l1_, l2_, ah_, ao_, fh_, fo_};
        body["adam"] = {a1_, a2_, aah_, aao_, afh_, afo_};
        if (pool != nullptr) { // informational: per-fleet buffer fill levels
            nlohmann::json sizes = nlohmann::json::object();
            for (const auto& [m, buf] : pool->buffers())
                sizes[std::to_string(m)] = buf.size();
            body["pool_sizes"] = sizes;
        }
        return save_checkpoint(body, "fres-agent");
    }

    static MultiTaskAgent load(const std::string& text) {
        auto body = load_checkpoint(text, "fres-agent");
        AgentConfig cfg;
        const auto& c = body.at("config");
        cfg.m_max = c.at("m_max").get<int>();
        cfg.m_initial = c.at("m_initial").get<int>();
        cfg.shared1 = c.at("shared1").get<int>();
        cfg.shared2 = c.at("shared2").get<int>();
        cfg.head = c.at("head").get<int>();
        cfg.growth = c.at("growth").get<int>();
        cfg.xi = c.at("xi").get<double>();
        cfg.adam.lr = c.at("lr").get<double>();
        cfg.gain_db_min = c.at("gain_db_min").get<double>();
        cfg.gain_db_max = c.at("gain_db_max").get<double>();
        cfg.fraction_clamp = c.at("fraction_clamp").get<double>();
        cfg.seed = c.at("seed").get<std::uint64_t>();
        MultiTaskAgent a(cfg);
        try {
            a.current_m_ = body.at("current_m").get<int>();
            a.trainable_.clear();
            for (int v : body.at("trainable").get<std::vector<int>>())
                a.trainable_.insert(v);
            const auto& ls = body.at("layers");
            const auto& as = body.at("adam");
            if (ls.size() != 6 || as.size() != 6)
                throw CorruptPayloadError("agent checkpoint: wrong layer count");
            ls.at(0).get_to(a.l1_);
            ls.at(1).get_to(a.l2_);
            ls.at(2).get_to(a.ah_);
            ls.at(3).get_to(a.ao_);
            ls.at(4).get_to(a.fh_);
            ls.at(5).get_to(a.fo_);
            as.at(0).get_to(a.a1_);
            as.at(1).get_to(a.a2_);
            as.at(2).get_to(a.aah_);
            as.at(3).get_to(a.aao_);
            as.at(4).get_to(a.afh_);
            as.at(5).get_to(a.afo_);
        } catch (const nlohmann::json::exception& e) {
            throw CorruptPayloadError(std::string("agent checkpoint: ") + e.what());
        }
        return a;
    }

    // Raw head outputs for a state: (association logits, allocation fraction).
    std::pair<std::vector<double>, double> forward_heads(const std::vector<double>& x) const {
        auto t2 = forward_dense(l2_, forward_dense(l1_, x));
        auto za = forward_dense(ao_, forward_dense(ah_, t2));
        auto yf = forward_dense(fo_, forward_dense(fh_, t2));
        return {za, yf[0]};
    }

  private:
    int level_of_m(int m) const { return std::max(0, m - cfg_.m_initial); }

    std::vector<DenseLayer*> layers() { return {&l1_, &l2_, &ah_, &ao_, &fh_, &fo_}; }

    std::mt19937_64 level_rng(int layer_index, int level) const {
        return make_rng(cfg_.seed, 0x4100u + static_cast<std::uint64_t>(layer_index) * 0x40u +
                                       static_cast<std::uint64_t>(level));
    }

    void build_base() {
        const int mm = cfg_.m_max, m0 = cfg_.m_initial;
        // Input columns in leveled order: m0 gains + 2 descriptors at level 0,
        // then one gain column per growth level.
        std::vector<int> in_levels(static_cast<std::size_t>(m0) + 2, 0);
        for (int lev = 1; lev <= mm - m0; ++lev) in_levels.push_back(lev);

        auto zeros = [](int n) { return std::vector<int>(static_cast<std::size_t>(n), 0); };
        l1_ = make_dense_leveled(in_levels, zeros(cfg_.shared1), Activation::Relu);
        l2_ = make_dense_leveled(zeros(cfg_.shared1), zeros(cfg_.shared2), Activation::Relu);
        ah_ = make_dense_leveled(zeros(cfg_.shared2), zeros(cfg_.head), Activation::Relu);
        fh_ = make_dense_leveled(zeros(cfg_.shared2), zeros(cfg_.head), Activation::Relu);
        // Class rows: local + the base fleet at level 0, one class per later level.
        std::vector<int> class_levels(static_cast<std::size_t>(m0) + 1, 0);
        for (int lev = 1; lev <= mm - m0; ++lev) class_levels.push_back(lev);
        ao_ = make_dense_leveled(zeros(cfg_.head), class_levels, Activation::Linear, true);
        fo_ = make_dense_leveled(zeros(cfg_.head), {0}, Activation::Sigmoid, true);

        int li = 0;
        for (DenseLayer* l : layers()) {
            auto rng = level_rng(li++, 0);
            activate_level(*l, 0, rng, 1.0);
        }
        a1_ = make_adam(l1_);
        a2_ = make_adam(l2_);
        aah_ = make_adam(ah_);
        aao_ = make_adam(ao_);
        afh_ = make_adam(fh_);
        afo_ = make_adam(fo_);
        trainable_ = {0};
    }

    // Physically append and initialize one growth level across all layers.
    void grow_level(int lev) {
        const int g = cfg_.growth;
        const int cap = cfg_.m_max - cfg_.m_initial + 1;
        grow_layer(l1_, 0, g, lev, &a1_);
        grow_layer(l2_, g, g, lev, &a2_);
        grow_layer(ah_, g, g, lev, &aah_);
        grow_layer(fh_, g, g, lev, &afh_);
        grow_layer(ao_, g, 0, lev, &aao_);
        grow_layer(fo_, g, 0, lev, &afo_);
        int li = 0;
        for (DenseLayer* l : layers()) {
            auto rng = level_rng(li++, lev);
            activate_level(*l, lev, rng, 0.1, cap);
        }
    }

    AgentConfig cfg_;
    int current_m_;
    std::set<int> trainable_;
    DenseLayer l1_, l2_, ah_, ao_, fh_, fo_;
    LayerAdam a1_, a2_, aah_, aao_, afh_, afo_;
};

// The (agent', buffer key) adaptation step: adjust the structure, make sure
// the fleet's replay buffer exists, and hand back its key.
inline int progressive_adjust(MultiTaskAgent& agent, ReplayBufferPool& pool, int m_new) {
    agent.adjust(m_new);
    pool.touch(m_new);
    return m_new;
}

// ---------------------------------------------------------------------------
// Single-task baseline agent: one branch, one sigmoid output block covering
// the association one-hot and the allocation fraction, trained with masked
// MSE only. Sized for parameter parity with the multi-task agent: the two
// head stacks (32 + 32 wide, growth 16 + 16) merge into one 64-wide stack
// with growth 32.

class SingleTaskAgent {
  public:
    explicit SingleTaskAgent(AgentConfig cfg) : cfg_(cfg), current_m_(cfg.m_initial) {
        if (cfg.m_initial < 1 || cfg.m_initial > cfg.m_max)
            throw ConfigError("agent: initial fleet size out of range");
        build_base();
    }

    const AgentConfig& config() const { return cfg_; }
    int current_m() const { return current_m_; }

    std::vector<double> to_leveled(const EncodedState& s) const {
        if (static_cast<int>(s.size()) != cfg_.m_max + 2)
            throw ShapeError("agent: state width mismatch");
        std::vector<double> x;
        x.reserve(s.size());
        for (int j = 0; j < cfg_.m_initial; ++j) x.push_back(s[static_cast<std::size_t>(j)]);
        x.push_back(s[static_cast<std::size_t>(cfg_.m_max)]);
        x.push_back(s[static_cast<std::size_t>(cfg_.m_max) + 1]);
        for (int j = cfg_.m_initial; j < cfg_.m_max; ++j)
            x.push_back(s[static_cast<std::size_t>(j)]);
        return x;
    }

    // Output rows: classes 0..m_initial, then the fraction, then one class row
    // per growth level (row levels must be non-decreasing).
    int class_row(int c) const { return c <= cfg_.m_initial ? c : c + 1; }
    int fraction_row() const { return cfg_.m_initial + 1; }

    AgentAction infer(const EncodedState& s) const {
        auto out = forward_out(to_leveled(s));
        int best = 0;
        for (int c = 1; c <= current_m_; ++c)
            if (out[static_cast<std::size_t>(class_row(c))] >
                out[static_cast<std::size_t>(class_row(best))])
                best = c;
        AgentAction a;
        a.association = best;
        a.allocation_fraction =
            std::clamp(out[static_cast<std::size_t>(fraction_row())], cfg_.fraction_clamp,
                       1.0 - cfg_.fraction_clamp);
        return a;
    }

    // Masked MSE over the active outputs: one-hot association plus fraction.
    TrainResult train_step(const std::vector<Transition>& batch) {
        if (batch.empty()) return {};
        const int s = static_cast<int>(batch.size());
        TrainResult res;
        res.per_sample.resize(batch.size());
        auto g1 = make_grads(l1_), g2 = make_grads(l2_), gh = make_grads(h_),
             go = make_grads(out_);
        double total = 0.0;
        for (std::size_t k = 0; k < batch.size(); ++k) {
            const auto& tr = batch[k];
            LayerCache c1, c2, ch, co;
            const auto x = to_leveled(tr.state);
            auto t1 = forward_dense(l1_, x, &c1);
            auto t2 = forward_dense(l2_, t1, &c2);
            auto th = forward_dense(h_, t2, &ch);
            auto out = forward_dense(out_, th, &co);

            std::vector<double> dout(out.size(), 0.0);
            double sample_loss = 0.0;
            for (int c = 0; c <= current_m_; ++c) {
                const int rrow = class_row(c);
                const double y = (c == tr.refined.association) ? 1.0 : 0.0;
                const double e = out[static_cast<std::size_t>(rrow)] - y;
                sample_loss += e * e;
                dout[static_cast<std::size_t>(rrow)] = 2.0 * e / s;
            }
            {
                const int rrow = fraction_row();
                const double e = out[static_cast<std::size_t>(rrow)] -
                                 tr.refined.allocation_fraction;
                sample_loss += e * e;
                dout[static_cast<std::size_t>(rrow)] = 2.0 * e / s;
            }
            auto dh = backward_dense(out_, co, dout, go);
            auto dt2 = backward_dense(h_, ch, dh, gh);
            auto dt1 = backward_dense(l2_, c2, dt2, g2);
            backward_dense(l1_, c1, dt1, g1);
            res.per_sample[k] = sample_loss;
            total += sample_loss;
        }
        res.l_mse = total / s;
        res.l_mt = res.l_mse;
        auto trainable = [this](int level) { return trainable_.count(level) > 0; };
        optimizer_step(l1_, g1, a1_, cfg_.adam, trainable);
        optimizer_step(l2_, g2, a2_, cfg_.adam, trainable);
        optimizer_step(h_, gh, ah_, cfg_.adam, trainable);
        optimizer_step(out_, go, ao_, cfg_.adam, trainable);
        return res;
    }

    void adjust(int m_new) {
        if (m_new < 1 || m_new > cfg_.m_max)
            throw ConfigError("progressive adjustment: fleet size out of range");
        if (m_new == current_m_) return;
        const int target = std::max(0, m_new - cfg_.m_initial);
        std::set<int> fresh;
        for (int lev = l1_.levels_init; lev <= target; ++lev) {
            grow_level(lev);
            fresh.insert(lev);
        }
        for (DenseLayer* l : {&l1_, &l2_, &h_, &out_}) set_active_level(*l, target);
        trainable_ = fresh;
        current_m_ = m_new;
    }

  private:
    void build_base() {
        const int mm = cfg_.m_max, m0 = cfg_.m_initial;
        std::vector<int> in_levels(static_cast<std::size_t>(m0) + 2, 0);
        for (int lev = 1; lev <= mm - m0; ++lev) in_levels.push_back(lev);
        auto zeros = [](int n) { return std::vector<int>(static_cast<std::size_t>(n), 0); };
        l1_ = make_dense_leveled(in_levels, zeros(cfg_.shared1), Activation::Relu);
        l2_ = make_dense_leveled(zeros(cfg_.shared1), zeros(cfg_.shared2), Activation::Relu);
        h_ = make_dense_leveled(zeros(cfg_.shared2), zeros(2 * cfg_.head), Activation::Relu);
        std::vector<int> out_levels(static_cast<std::size_t>(m0) + 2, 0); // classes + fraction
        for (int lev = 1; lev <= mm - m0; ++lev) out_levels.push_back(lev);
        out_ = make_dense_leveled(zeros(2 * cfg_.head), out_levels, Activation::Sigmoid, true);
        int li = 0;
        for (DenseLayer* l : {&l1_, &l2_, &h_, &out_}) {
            auto rng = make_rng(cfg_.seed, 0x5100u + static_cast<std::uint64_t>(li++) * 0x40u);
            activate_level(*l, 0, rng, 1.0);
        }
        a1_ = make_adam(l1_);
        a2_ = make_adam(l2_);
        ah_ = make_adam(h_);
        ao_ = make_adam(out_);
        trainable_ = {0};
    }

    void grow_level(int lev) {
        const int g = cfg_.growth;
        const int cap = cfg_.m_max - cfg_.m_initial + 1;
        grow_layer(l1_, 0, g, lev, &a1_);
        grow_layer(l2_, g, g, lev, &a2_);
        grow_layer(h_, g, 2 * g, lev, &ah_);
        grow_layer(out_, 2 * g, 0, lev, &ao_);
        int li = 0;
        for (DenseLayer* l : {&l1_, &l2_, &h_, &out_}) {
            auto rng = make_rng(cfg_.seed, 0x5100u + static_cast<std::uint64_t>(li++) * 0x40u +
                                               static_cast<std::uint64_t>(lev));
            activate_level(*l, lev, rng, 0.1, cap);
        }
    }

    std::vector<double> forward_out(const std::vector<double>& x) const {
        return forward_dense(out_, forward_dense(h_, forward_dense(l2_, forward_dense(l1_, x))));
    }

    AgentConfig cfg_;
    int current_m_;
    std::set<int> trainable_;
    DenseLayer l1_, l2_, h_, out_;
    LayerAdam a1_, a2_, ah_, ao_;
};

inline int progressive_adjust(SingleTaskAgent& agent, ReplayBufferPool& pool, int m_new) {
    agent.adjust(m_new);
    pool.touch(m_new);
    return m_new;
}

} // namespace fres
