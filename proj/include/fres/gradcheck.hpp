#pragma once

// Analytic-vs-numeric gradient verification for the two-head network core.
// Builds a miniature network of the production shape (shared trunk, softmax
// classification head under cross-entropy, sigmoid scalar head under mean
// squared error), draws a random batch, and compares every analytic partial
// against a central finite difference of the combined loss. The worst
// relative error over all parameters is the verdict; a healthy backward pass
// sits far below 1e-4 in double precision at step 1e-6.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "fres/network.hpp"
#include "fres/rng.hpp"

namespace fres {

struct GradCheckOptions {
    int batch = 4;
    double step = 1e-6;
    // Test hook: added to one analytic partial before comparison, so a
    // deliberately corrupted gradient must trip the check (negative control).
    double corrupt = 0.0;
};

namespace detail {

struct GradProbeNet {
    DenseLayer l1, l2, ah, ao, fh, fo;
    double xi = 1.0;

    static GradProbeNet make(std::uint64_t seed) {
        GradProbeNet n;
        n.l1 = make_dense(5, 8, Activation::Relu);
        n.l2 = make_dense(8, 6, Activation::Relu);
        n.ah = make_dense(6, 5, Activation::Relu);
        n.ao = make_dense(5, 4, Activation::Linear, true);
        n.fh = make_dense(6, 5, Activation::Relu);
        n.fo = make_dense(5, 1, Activation::Sigmoid, true);
        int stream = 0;
        for (DenseLayer* l : {&n.l1, &n.l2, &n.ah, &n.ao, &n.fh, &n.fo}) {
            auto rng = make_rng(seed, 0x900 + stream++);
            activate_level(*l, 0, rng, 1.0);
        }
        return n;
    }

    std::vector<DenseLayer*> layers() { return {&l1, &l2, &ah, &ao, &fh, &fo}; }

    static std::vector<double> softmax(const std::vector<double>& z) {
        double zmax = z[0];
        for (double v : z) zmax = std::max(zmax, v);
        double denom = 0.0;
        std::vector<double> p(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) denom += std::exp(z[i] - zmax);
        for (std::size_t i = 0; i < z.size(); ++i) p[i] = std::exp(z[i] - zmax) / denom;
        return p;
    }

    double loss(const std::vector<std::vector<double>>& xs, const std::vector<int>& labels,
                const std::vector<double>& targets) const {
        const int s = static_cast<int>(xs.size());
        std::vector<std::vector<double>> probs;
        std::vector<double> preds;
        for (const auto& x : xs) {
            auto t2 = forward_dense(l2, forward_dense(l1, x));
            probs.push_back(softmax(forward_dense(ao, forward_dense(ah, t2))));
            preds.push_back(forward_dense(fo, forward_dense(fh, t2))[0]);
        }
        return multitask_loss(cross_entropy(probs, labels, s), mse(preds, targets, s), xi);
    }

    struct Grads {
        LayerGrads l1, l2, ah, ao, fh, fo;
        std::vector<LayerGrads*> all() { return {&l1, &l2, &ah, &ao, &fh, &fo}; }
    };

    Grads gradients(const std::vector<std::vector<double>>& xs, const std::vector<int>& labels,
                    const std::vector<double>& targets) const {
        Grads g{make_grads(l1), make_grads(l2), make_grads(ah),
                make_grads(ao), make_grads(fh), make_grads(fo)};
        const double s = static_cast<double>(xs.size());
        for (std::size_t k = 0; k < xs.size(); ++k) {
            LayerCache c1, c2, cah, cao, cfh, cfo;
            auto t1 = forward_dense(l1, xs[k], &c1);
            auto t2 = forward_dense(l2, t1, &c2);
            auto za = forward_dense(ao, forward_dense(ah, t2, &cah), &cao);
            auto yf = forward_dense(fo, forward_dense(fh, t2, &cfh), &cfo);

            auto p = softmax(za);
            std::vector<double> dza(p.size());
            for (std::size_t j = 0; j < p.size(); ++j) {
                const double y = static_cast<int>(j) == labels[k] ? 1.0 : 0.0;
                dza[j] = (p[j] - y) / s;
            }
            auto dah = backward_dense(ao, cao, dza, g.ao, true);
            auto dt2a = backward_dense(ah, cah, dah, g.ah);

            std::vector<double> dyf{xi * 2.0 * (yf[0] - targets[k]) / s};
            auto dfh = backward_dense(fo, cfo, dyf, g.fo);
            auto dt2f = backward_dense(fh, cfh, dfh, g.fh);

            std::vector<double> dt2(t2.size());
            for (std::size_t j = 0; j < t2.size(); ++j) dt2[j] = dt2a[j] + dt2f[j];
            auto dt1 = backward_dense(l2, c2, dt2, g.l2);
            backward_dense(l1, c1, dt1, g.l1);
        }
        return g;
    }
};

} // namespace detail

// Worst relative analytic-vs-numeric gradient error over every parameter of
// one seeded draw (network weights, batch inputs, labels, targets).
inline double gradient_check_worst_error(std::uint64_t seed, const GradCheckOptions& opt = {}) {
    auto net = detail::GradProbeNet::make(seed);
    auto rng = make_rng(seed, 0x999);
    std::uniform_real_distribution<double> ux(-1.0, 1.0);
    std::uniform_int_distribution<int> ul(0, 3);
    std::uniform_real_distribution<double> ut(0.05, 0.95);

    std::vector<std::vector<double>> xs;
    std::vector<int> labels;
    std::vector<double> targets;
    for (int k = 0; k < opt.batch; ++k) {
        std::vector<double> x(5);
        for (auto& v : x) v = ux(rng);
        xs.push_back(std::move(x));
        labels.push_back(ul(rng));
        targets.push_back(ut(rng));
    }

    auto analytic = net.gradients(xs, labels, targets);
    auto grads = analytic.all();
    if (opt.corrupt != 0.0 && !grads.front()->w.empty()) grads.front()->w[0] += opt.corrupt;

    double worst = 0.0;
    auto layers = net.layers();
    for (std::size_t li = 0; li < layers.size(); ++li) {
        DenseLayer& l = *layers[li];
        for (std::size_t i = 0; i < l.w.size() + l.b.size(); ++i) {
            double& p = i < l.w.size() ? l.w[i] : l.b[i - l.w.size()];
            const double a = i < l.w.size() ? grads[li]->w[i] : grads[li]->b[i - l.w.size()];
            const double save = p;
            p = save + opt.step;
            const double up = net.loss(xs, labels, targets);
            p = save - opt.step;
            const double dn = net.loss(xs, labels, targets);
            p = save;
            const double n = (up - dn) / (2.0 * opt.step);
            worst = std::max(worst, std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}));
        }
    }
    return worst;
}

} // namespace fres
