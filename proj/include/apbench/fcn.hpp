#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "apbench/loss.hpp"
#include "apbench/series.hpp"

namespace apbench {

// ============================================================================
// Fully-connected forecaster: flatten(L x M) -> hidden ReLU layers ->
// hard-sigmoid head of length T. Plain loops over flat row-major weights; no
// framework. Gradients are hand-derived and checked against central finite
// differences in the test suite.
// ============================================================================

struct FcnLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> w;  // row-major: w[o * in + i]
    std::vector<double> b;  // length out
};

struct FcnParams {
    std::size_t lookback = 0;
    std::size_t n_features = 0;
    std::size_t horizon = 0;
    std::vector<FcnLayer> layers;  // last layer is the hard-sigmoid head

    std::size_t input_size() const { return lookback * n_features; }
    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.w.size() + l.b.size();
        return n;
    }
    void check_finite() const {
        for (const auto& l : layers) {
            for (double v : l.w)
                if (!std::isfinite(v)) throw std::runtime_error("non-finite weight");
            for (double v : l.b)
                if (!std::isfinite(v)) throw std::runtime_error("non-finite bias");
        }
    }
};

/// He-style initialization: uniform with bound sqrt(6 / fan_in), biases
/// zero. Deterministic per seed.
inline FcnParams init_fcn(std::size_t lookback, std::size_t n_features,
                          std::size_t horizon, std::span<const std::size_t> hidden,
                          std::uint64_t seed) {
    if (lookback < 1 || n_features < 1 || horizon < 1)
        throw std::invalid_argument("init_fcn: all dimensions must be >= 1");
    for (std::size_t h : hidden)
        if (h < 1) throw std::invalid_argument("init_fcn: hidden width must be >= 1");

    FcnParams p;
    p.lookback = lookback;
    p.n_features = n_features;
    p.horizon = horizon;
    std::vector<std::size_t> sizes;
    sizes.push_back(p.input_size());
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(horizon);

    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        FcnLayer layer;
        layer.in = sizes[l];
        layer.out = sizes[l + 1];
        layer.w.resize(layer.in * layer.out);
        layer.b.assign(layer.out, 0.0);
        const double bound = std::sqrt(6.0 / static_cast<double>(layer.in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& w : layer.w) w = dist(rng);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

struct ForwardCache {
    std::vector<std::vector<double>> inputs;   // input fed to each layer
    std::vector<std::vector<double>> preacts;  // z of each layer
};

namespace detail {

// Hard sigmoid, unit slope: clamp(z + 1/2) to [0,1]. A smooth sigmoid cannot
// emit an exact 0, so on label-sparse data the all-negative windows keep
// producing "push down" gradients forever and training saturates into a dead
// constant predictor. With the clamp, a window that has reached zero falls
// onto the loss kink (sign(0) = 0) and goes silent, which is what lets the
// rare positive windows win the tug of war.
inline double hard_sigmoid(double z) {
    const double s = z + 0.5;
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    return s;
}

inline double hard_sigmoid_slope(double z) {
    const double s = z + 0.5;
    return (s > 0.0 && s < 1.0) ? 1.0 : 0.0;
}

inline void affine(const FcnLayer& l, std::span<const double> x, std::vector<double>& z) {
    z.assign(l.out, 0.0);
    for (std::size_t o = 0; o < l.out; ++o) {
        const double* wrow = l.w.data() + o * l.in;
        double acc = l.b[o];
        for (std::size_t i = 0; i < l.in; ++i) acc += wrow[i] * x[i];
        z[o] = acc;
    }
}

}  // namespace detail

/// Forward pass on one flattened input (length L*M). When `cache` is given
/// it receives everything backward() needs. Every output lies in [0,1].
inline DensityPrediction fcn_forward(const FcnParams& params,
                                     std::span<const double> input,
                                     ForwardCache* cache = nullptr) {
    if (params.layers.empty()) throw std::invalid_argument("fcn_forward: no layers");
    if (input.size() != params.input_size())
        throw std::invalid_argument("fcn_forward: input size " +
                                    std::to_string(input.size()) + " does not match L*M=" +
                                    std::to_string(params.input_size()));
    if (cache) {
        cache->inputs.clear();
        cache->preacts.clear();
    }
    std::vector<double> x(input.begin(), input.end());
    std::vector<double> z;
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const FcnLayer& layer = params.layers[l];
        if (x.size() != layer.in)
            throw std::invalid_argument("fcn_forward: layer dimension mismatch");
        detail::affine(layer, x, z);
        if (cache) {
            cache->inputs.push_back(x);
            cache->preacts.push_back(z);
        }
        const bool last = l + 1 == params.layers.size();
        x.resize(z.size());
        if (last) {
            for (std::size_t i = 0; i < z.size(); ++i) x[i] = detail::hard_sigmoid(z[i]);
        } else {
            for (std::size_t i = 0; i < z.size(); ++i) x[i] = z[i] > 0.0 ? z[i] : 0.0;
        }
    }
    return DensityPrediction{std::move(x)};
}

/// Per-parameter gradients; same shapes as FcnParams.
struct FcnGradients {
    std::vector<FcnLayer> layers;

    static FcnGradients zeros_like(const FcnParams& p) {
        FcnGradients g;
        g.layers.reserve(p.layers.size());
        for (const auto& l : p.layers) {
            FcnLayer z;
            z.in = l.in;
            z.out = l.out;
            z.w.assign(l.w.size(), 0.0);
            z.b.assign(l.b.size(), 0.0);
            g.layers.push_back(std::move(z));
        }
        return g;
    }
    void accumulate(const FcnGradients& other) {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            for (std::size_t i = 0; i < layers[l].w.size(); ++i)
                layers[l].w[i] += other.layers[l].w[i];
            for (std::size_t i = 0; i < layers[l].b.size(); ++i)
                layers[l].b[i] += other.layers[l].b[i];
        }
    }
    void scale(double a) {
        for (auto& l : layers) {
            for (auto& v : l.w) v *= a;
            for (auto& v : l.b) v *= a;
        }
    }
};

/// Reverse-mode pass through the hard-sigmoid head, ReLU hiddens, and affine
/// layers; accumulates into `grads` (which must have matching shapes).
/// `dloss_dpred` is the gradient of the scalar loss w.r.t. the prediction.
inline void fcn_backward_into(const FcnParams& params, const ForwardCache& cache,
                              std::span<const double> dloss_dpred, FcnGradients& grads) {
    if (cache.inputs.size() != params.layers.size() ||
        cache.preacts.size() != params.layers.size())
        throw std::invalid_argument("fcn_backward: cache does not match params");
    for (std::size_t l = 0; l < params.layers.size(); ++l)
        if (cache.inputs[l].size() != params.layers[l].in ||
            cache.preacts[l].size() != params.layers[l].out)
            throw std::invalid_argument("fcn_backward: cache shape mismatch at layer " +
                                        std::to_string(l));
    if (dloss_dpred.size() != params.horizon)
        throw std::invalid_argument("fcn_backward: gradient length mismatch");
    if (grads.layers.size() != params.layers.size())
        throw std::invalid_argument("fcn_backward: gradient accumulator shape mismatch");
    std::vector<double> dz;
    std::vector<double> dx;
    for (std::size_t li = params.layers.size(); li-- > 0;) {
        const FcnLayer& layer = params.layers[li];
        const auto& z = cache.preacts[li];
        const auto& x = cache.inputs[li];
        const bool last = li + 1 == params.layers.size();
        dz.resize(layer.out);
        if (last) {
            for (std::size_t o = 0; o < layer.out; ++o)
                dz[o] = dloss_dpred[o] * detail::hard_sigmoid_slope(z[o]);
        } else {
            for (std::size_t o = 0; o < layer.out; ++o)
                dz[o] = z[o] > 0.0 ? dx[o] : 0.0;
        }
        FcnLayer& g = grads.layers[li];
        for (std::size_t o = 0; o < layer.out; ++o) {
            const double d = dz[o];
            g.b[o] += d;
            double* grow = g.w.data() + o * layer.in;
            for (std::size_t i = 0; i < layer.in; ++i) grow[i] += d * x[i];
        }
        if (li > 0) {
            dx.assign(layer.in, 0.0);
            for (std::size_t o = 0; o < layer.out; ++o) {
                const double d = dz[o];
                const double* wrow = layer.w.data() + o * layer.in;
                for (std::size_t i = 0; i < layer.in; ++i) dx[i] += d * wrow[i];
            }
        }
    }
}

inline FcnGradients fcn_backward(const FcnParams& params, const ForwardCache& cache,
                                 std::span<const double> dloss_dpred) {
    FcnGradients grads = FcnGradients::zeros_like(params);
    fcn_backward_into(params, cache, dloss_dpred, grads);
    return grads;
}

// ============================================================================
// Adam
// ============================================================================

struct AdamConfig {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<FcnLayer> m;  // first moments, shapes mirror the parameters
    std::vector<FcnLayer> v;  // second moments
    long step = 0;

    static AdamState zeros_like(const FcnParams& p) {
        AdamState s;
        s.m = FcnGradients::zeros_like(p).layers;
        s.v = FcnGradients::zeros_like(p).layers;
        return s;
    }
};

/// Standard bias-corrected Adam update; increments the step counter.
inline void adam_step(AdamState& state, FcnParams& params, const FcnGradients& grads,
                      const AdamConfig& cfg = {}) {
    if (state.m.size() != params.layers.size() ||
        grads.layers.size() != params.layers.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto update = [&](std::vector<double>& theta, std::vector<double>& m,
                          std::vector<double>& v, const std::vector<double>& g) {
            for (std::size_t i = 0; i < theta.size(); ++i) {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                theta[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
            }
        };
        update(params.layers[l].w, state.m[l].w, state.v[l].w, grads.layers[l].w);
        update(params.layers[l].b, state.m[l].b, state.v[l].b, grads.layers[l].b);
    }
}

// ============================================================================
// Finite-difference gradient check
// ============================================================================

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t n_compared = 0;
    std::size_t n_skipped = 0;  // |analytic| <= 1e-8, no meaningful ratio
    bool kinked = false;        // some |C_i| within 1e-6 of zero at the center point
};

/// Central-difference check of the end-to-end gradient (network composed
/// with the cumulative-sum loss) on a single (input, target) pair. Perturbs
/// every parameter by +-eps. Trials where a cumulative sum sits on the
/// |C_i| <= 1e-6 kink are flagged so callers can exclude them.
inline GradCheckResult finite_diff_check(const FcnParams& params,
                                         std::span<const double> input,
                                         std::span<const std::uint8_t> target,
                                         double eps = 1e-5,
                                         LossNorm norm = LossNorm::Full) {
    if (!(eps >= 1e-7 && eps <= 1e-3))
        throw std::invalid_argument("finite_diff_check: eps must be in [1e-7, 1e-3]");

    ForwardCache cache;
    const DensityPrediction pred = fcn_forward(params, input, &cache);
    const LossValue center = wasserstein_loss(pred, target, norm);
    const std::vector<double> dpred = wasserstein_grad(pred.probs, target, norm);
    const FcnGradients analytic = fcn_backward(params, cache, dpred);

    GradCheckResult result;
    for (double c : center.cum_diff)
        if (std::abs(c) <= 1e-6) result.kinked = true;

    FcnParams probe = params;
    auto loss_at = [&](const FcnParams& p) {
        return wasserstein_loss(fcn_forward(p, input), target, norm).value;
    };
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        auto sweep = [&](std::vector<double>& theta, const std::vector<double>& grad) {
            for (std::size_t i = 0; i < theta.size(); ++i) {
                const double saved = theta[i];
                theta[i] = saved + eps;
                const double lp = loss_at(probe);
                theta[i] = saved - eps;
                const double lm = loss_at(probe);
                theta[i] = saved;
                const double fd = (lp - lm) / (2.0 * eps);
                const double an = grad[i];
                if (std::abs(an) <= 1e-8) {
                    ++result.n_skipped;
                    continue;
                }
                ++result.n_compared;
                result.max_rel_err =
                    std::max(result.max_rel_err, std::abs(fd - an) / std::abs(an));
            }
        };
        sweep(probe.layers[l].w, analytic.layers[l].w);
        sweep(probe.layers[l].b, analytic.layers[l].b);
    }
    return result;
}

}  // namespace apbench
