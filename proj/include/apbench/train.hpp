#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "apbench/fcn.hpp"
#include "apbench/loss.hpp"
#include "apbench/metrics.hpp"
#include "apbench/seeding.hpp"
#include "apbench/series.hpp"

namespace apbench {

// ============================================================================
// Training harness: feature scaling, the epoch loop with early stopping,
// prediction adapters for evaluation, and checkpoint serialization.
// ============================================================================

struct TrainConfig {
    std::size_t lookback = 50;  // L
    std::size_t horizon = 20;   // T
    std::size_t stride = 1;
    double lr = 5e-4;
    std::vector<std::size_t> hidden = {128, 128};
    std::size_t max_epochs = 100;
    std::size_t patience = 10;
    std::size_t batch = 64;
    double threshold = 0.1;  // s, used at evaluation time
    std::uint64_t seed = 42;
    LossNorm norm = LossNorm::Full;
    SplitRatios split;
    SplitMode split_mode = SplitMode::Chronological;
    double improvement_tol = 1e-6;  // min val-loss decrease that counts

    void validate() const {
        if (lookback < 1 || horizon < 1 || stride < 1)
            throw std::invalid_argument("train config: lookback, horizon, stride must be >= 1");
        if (max_epochs < 1 || batch < 1)
            throw std::invalid_argument("train config: max_epochs and batch must be >= 1");
        if (patience < 1 || patience > max_epochs)
            throw std::invalid_argument("train config: need 1 <= patience <= max_epochs");
        if (!(lr >= 0.0) || !std::isfinite(lr))
            throw std::invalid_argument("train config: lr must be finite and >= 0");
        if (hidden.empty())
            throw std::invalid_argument("train config: at least one hidden layer");
        for (std::size_t h : hidden)
            if (h < 1) throw std::invalid_argument("train config: hidden width must be >= 1");
        if (!(threshold >= 0.0 && threshold < 1.0))
            throw std::invalid_argument("train config: threshold must lie in [0,1)");
        if (!(improvement_tol >= 0.0))
            throw std::invalid_argument("train config: improvement_tol must be >= 0");
    }
};

inline const char* to_string(LossNorm n) {
    return n == LossNorm::Full ? "full" : "simplified";
}

inline LossNorm loss_norm_from_string(const std::string& s) {
    if (s == "full") return LossNorm::Full;
    if (s == "simplified") return LossNorm::Simplified;
    throw std::invalid_argument("unknown loss norm '" + s + "'");
}

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
    nlohmann::json j;
    j["lookback"] = c.lookback;
    j["horizon"] = c.horizon;
    j["stride"] = c.stride;
    j["lr"] = c.lr;
    j["hidden"] = c.hidden;
    j["max_epochs"] = c.max_epochs;
    j["patience"] = c.patience;
    j["batch"] = c.batch;
    j["threshold"] = c.threshold;
    j["seed"] = c.seed;
    j["loss_norm"] = to_string(c.norm);
    j["split"] = {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}};
    j["split_mode"] =
        c.split_mode == SplitMode::Chronological ? "chronological" : "stratified";
    j["improvement_tol"] = c.improvement_tol;
    return j;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.lookback = j.value("lookback", c.lookback);
    c.horizon = j.value("horizon", c.horizon);
    c.stride = j.value("stride", c.stride);
    c.lr = j.value("lr", c.lr);
    if (j.contains("hidden")) c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.batch = j.value("batch", c.batch);
    c.threshold = j.value("threshold", c.threshold);
    c.seed = j.value("seed", c.seed);
    if (j.contains("loss_norm"))
        c.norm = loss_norm_from_string(j.at("loss_norm").get<std::string>());
    if (j.contains("split")) {
        const auto& s = j.at("split");
        c.split.train = s.value("train", c.split.train);
        c.split.val = s.value("val", c.split.val);
        c.split.test = s.value("test", c.split.test);
    }
    if (j.contains("split_mode")) {
        const std::string m = j.at("split_mode").get<std::string>();
        if (m == "chronological") c.split_mode = SplitMode::Chronological;
        else if (m == "stratified") c.split_mode = SplitMode::Stratified;
        else throw std::invalid_argument("unknown split mode '" + m + "'");
    }
    c.improvement_tol = j.value("improvement_tol", c.improvement_tol);
    c.validate();
    return c;
}

// ----------------------------------------------------------------------------
// Per-feature standardization, fit on the train split only
// ----------------------------------------------------------------------------

struct FeatureScaler {
    std::vector<double> mean;
    std::vector<double> stddev;

    std::size_t n_features() const { return mean.size(); }

    /// Mean/std per feature over every time step of the selected windows.
    /// Near-constant features get stddev 1 so scaling stays finite.
    static FeatureScaler fit(const std::vector<WindowSample>& windows,
                             std::span<const std::size_t> idx) {
        if (idx.empty()) throw std::invalid_argument("FeatureScaler::fit: no windows");
        const std::size_t m = windows[idx.front()].n_features;
        std::vector<double> sum(m, 0.0), sumsq(m, 0.0);
        std::size_t count = 0;
        for (std::size_t i : idx) {
            const WindowSample& w = windows[i];
            if (w.n_features != m)
                throw std::invalid_argument("FeatureScaler::fit: feature count varies");
            for (std::size_t k = 0; k < w.lookback; ++k) {
                for (std::size_t j = 0; j < m; ++j) {
                    const double v = w.input[k * m + j];
                    sum[j] += v;
                    sumsq[j] += v * v;
                }
            }
            count += w.lookback;
        }
        FeatureScaler s;
        s.mean.resize(m);
        s.stddev.resize(m);
        const double n = static_cast<double>(count);
        for (std::size_t j = 0; j < m; ++j) {
            s.mean[j] = sum[j] / n;
            const double var = std::max(0.0, sumsq[j] / n - s.mean[j] * s.mean[j]);
            const double sd = std::sqrt(var);
            s.stddev[j] = sd > 1e-12 ? sd : 1.0;
        }
        return s;
    }

    void apply(std::span<const double> in, std::span<double> out) const {
        const std::size_t m = mean.size();
        if (in.size() % m != 0 || in.size() != out.size())
            throw std::invalid_argument("FeatureScaler::apply: size mismatch");
        for (std::size_t i = 0; i < in.size(); ++i) {
            const std::size_t j = i % m;
            out[i] = (in[i] - mean[j]) / stddev[j];
        }
    }

    std::vector<double> apply_copy(std::span<const double> in) const {
        std::vector<double> out(in.size());
        apply(in, out);
        return out;
    }
};

// ----------------------------------------------------------------------------
// Early stopping on validation loss
// ----------------------------------------------------------------------------

struct EarlyStopper {
    std::size_t patience = 10;
    double tol = 1e-6;

    double best = std::numeric_limits<double>::infinity();
    std::size_t bad_epochs = 0;

    /// Returns true when `val` improves on the best seen by more than tol.
    bool observe(double val) {
        if (val < best - tol) {
            best = val;
            bad_epochs = 0;
            return true;
        }
        ++bad_epochs;
        return false;
    }
    bool should_stop() const { return bad_epochs >= patience; }
};

struct EpochStats {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    bool improved = false;
};

struct TrainResult {
    FcnParams params;  // parameters of the best-validation epoch
    FeatureScaler scaler;
    std::vector<EpochStats> history;
    std::size_t best_epoch = 0;  // 1-based
    double best_val_loss = std::numeric_limits<double>::infinity();
    bool stopped_early = false;
};

namespace detail {

// seed streams hanging off TrainConfig::seed
inline constexpr std::uint64_t kInitStream = 0x5eed0001;
inline constexpr std::uint64_t kShuffleStream = 0x5eed0002;

inline void check_window_dims(const WindowSample& w, std::size_t lookback,
                              std::size_t horizon, std::size_t m) {
    if (w.lookback != lookback || w.horizon != horizon || w.n_features != m ||
        w.input.size() != lookback * m || w.target.size() != horizon)
        throw std::invalid_argument("train_fcn: window '" + w.instance_id + "' offset " +
                                    std::to_string(w.offset) +
                                    " has inconsistent dimensions");
}

}  // namespace detail

/// Trains the FCN on the train split, tracking mean validation loss per
/// epoch; stops when the val loss fails to improve by more than
/// improvement_tol for `patience` consecutive epochs, and returns the
/// parameters of the best-validation epoch. Deterministic per config.
/// `initial` overrides the seeded parameter init (shapes must match).
inline TrainResult train_fcn(const std::vector<WindowSample>& windows,
                             const SplitAssignment& split, const TrainConfig& cfg,
                             const FcnParams* initial = nullptr) {
    cfg.validate();
    if (split.train.empty()) throw std::invalid_argument("train_fcn: empty train split");
    if (split.val.empty()) throw std::invalid_argument("train_fcn: empty val split");
    for (std::size_t i : split.train)
        if (i >= windows.size())
            throw std::invalid_argument("train_fcn: split index out of range");
    for (std::size_t i : split.val)
        if (i >= windows.size())
            throw std::invalid_argument("train_fcn: split index out of range");

    const WindowSample& w0 = windows[split.train.front()];
    const std::size_t L = w0.lookback, M = w0.n_features, T = w0.horizon;
    if (L != cfg.lookback || T != cfg.horizon)
        throw std::invalid_argument("train_fcn: window L/T do not match the config");
    for (std::size_t i : split.train) detail::check_window_dims(windows[i], L, T, M);
    for (std::size_t i : split.val) detail::check_window_dims(windows[i], L, T, M);

    TrainResult res;
    res.scaler = FeatureScaler::fit(windows, split.train);

    // scale every input once up front
    const std::size_t dim = L * M;
    auto scale_block = [&](std::span<const std::size_t> idx) {
        std::vector<double> block(idx.size() * dim);
        for (std::size_t o = 0; o < idx.size(); ++o)
            res.scaler.apply(windows[idx[o]].input, {block.data() + o * dim, dim});
        return block;
    };
    const std::vector<double> train_x = scale_block(split.train);
    const std::vector<double> val_x = scale_block(split.val);

    FcnParams params = initial
                           ? *initial
                           : init_fcn(L, M, T, cfg.hidden,
                                      derive_seed(cfg.seed, detail::kInitStream));
    if (params.lookback != L || params.n_features != M || params.horizon != T)
        throw std::invalid_argument("train_fcn: initial parameters do not match windows");

    AdamState opt = AdamState::zeros_like(params);
    const AdamConfig opt_cfg{cfg.lr, 0.9, 0.999, 1e-8};
    std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, detail::kShuffleStream));
    EarlyStopper stopper{cfg.patience, cfg.improvement_tol};

    std::vector<std::size_t> order(split.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const std::size_t n_train = split.train.size();
    const std::size_t n_val = split.val.size();
    ForwardCache cache;
    FcnGradients acc = FcnGradients::zeros_like(params);

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double train_loss_sum = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < n_train; start += cfg.batch, ++batch_index) {
            const std::size_t stop = std::min(start + cfg.batch, n_train);
            const double batch_n = static_cast<double>(stop - start);
            for (auto& l : acc.layers) {
                std::fill(l.w.begin(), l.w.end(), 0.0);
                std::fill(l.b.begin(), l.b.end(), 0.0);
            }
            double batch_loss = 0.0;
            for (std::size_t k = start; k < stop; ++k) {
                const std::size_t o = order[k];
                const std::span<const double> x{train_x.data() + o * dim, dim};
                const auto& target = windows[split.train[o]].target;
                const DensityPrediction pred = fcn_forward(params, x, &cache);
                batch_loss += wasserstein_loss(pred.probs, target, cfg.norm).value;
                const std::vector<double> dpred =
                    wasserstein_grad(pred.probs, target, cfg.norm);
                fcn_backward_into(params, cache, dpred, acc);
            }
            if (!std::isfinite(batch_loss))
                throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch " +
                                         std::to_string(batch_index + 1));
            train_loss_sum += batch_loss;
            acc.scale(1.0 / batch_n);
            adam_step(opt, params, acc, opt_cfg);
        }

        double val_loss_sum = 0.0;
        for (std::size_t o = 0; o < n_val; ++o) {
            const std::span<const double> x{val_x.data() + o * dim, dim};
            const auto& target = windows[split.val[o]].target;
            val_loss_sum +=
                wasserstein_loss(fcn_forward(params, x).probs, target, cfg.norm).value;
        }
        const double train_loss = train_loss_sum / static_cast<double>(n_train);
        const double val_loss = val_loss_sum / static_cast<double>(n_val);
        if (!std::isfinite(val_loss))
            throw std::runtime_error(
                "training diverged: non-finite validation loss at epoch " +
                std::to_string(epoch));

        const bool improved = stopper.observe(val_loss);
        res.history.push_back({epoch, train_loss, val_loss, improved});
        if (val_loss < res.best_val_loss) {
            res.best_val_loss = val_loss;
            res.best_epoch = epoch;
            res.params = params;
        }
        if (stopper.should_stop()) {
            res.stopped_early = true;
            break;
        }
    }
    return res;
}

// ----------------------------------------------------------------------------
// Prediction adapters and evaluation
// ----------------------------------------------------------------------------

using Predictor = std::function<DensityPrediction(const WindowSample&)>;

inline Predictor make_fcn_predictor(FcnParams params, FeatureScaler scaler) {
    auto state = std::make_shared<const std::pair<FcnParams, FeatureScaler>>(
        std::move(params), std::move(scaler));
    return [state](const WindowSample& w) {
        return fcn_forward(state->first, state->second.apply_copy(w.input));
    };
}

/// Perfect predictor: emits the window's own target as a density.
inline Predictor make_oracle_predictor() {
    return [](const WindowSample& w) {
        DensityPrediction p;
        p.probs.assign(w.target.begin(), w.target.end());
        return p;
    };
}

inline Predictor make_zeros_predictor() {
    return [](const WindowSample& w) {
        return DensityPrediction{std::vector<double>(w.horizon, 0.0)};
    };
}

inline Predictor make_constant_predictor(double value) {
    if (!(value >= 0.0 && value <= 1.0))
        throw std::invalid_argument("constant predictor value must lie in [0,1]");
    return [value](const WindowSample& w) {
        return DensityPrediction{std::vector<double>(w.horizon, value)};
    };
}

struct WindowEval {
    std::string instance_id;
    std::size_t offset = 0;
    std::vector<double> pred;
    std::vector<std::uint8_t> target;
    WindowVerdict verdict = WindowVerdict::TN;
    double wasserstein = 0.0;
};

struct EvalOutput {
    MetricsReport report;
    std::vector<WindowEval> windows;
};

/// Runs the predictor over the selected windows and aggregates the metrics;
/// also returns the per-window dump used for NDJSON emission.
inline EvalOutput evaluate(const Predictor& model,
                           const std::vector<WindowSample>& windows,
                           std::span<const std::size_t> subset, double threshold,
                           LossNorm norm = LossNorm::Full) {
    if (!model) throw std::invalid_argument("evaluate: null predictor");
    if (subset.empty()) throw std::invalid_argument("evaluate: empty test split");
    EvalConfig{threshold}.validate();

    std::vector<DensityPrediction> preds;
    std::vector<std::vector<std::uint8_t>> targets;
    preds.reserve(subset.size());
    targets.reserve(subset.size());
    EvalOutput out;
    out.windows.reserve(subset.size());
    for (std::size_t i : subset) {
        if (i >= windows.size())
            throw std::invalid_argument("evaluate: window index out of range");
        const WindowSample& w = windows[i];
        DensityPrediction p = model(w);
        if (p.probs.size() != w.target.size())
            throw std::invalid_argument("evaluate: prediction length mismatch on '" +
                                        w.instance_id + "' offset " +
                                        std::to_string(w.offset));
        p.validate();
        WindowEval we;
        we.instance_id = w.instance_id;
        we.offset = w.offset;
        we.pred = p.probs;
        we.target = w.target;
        we.verdict = classify_window(p.probs, w.target, threshold);
        we.wasserstein = wasserstein_loss(p.probs, w.target, norm).value;
        out.windows.push_back(std::move(we));
        preds.push_back(std::move(p));
        targets.push_back(w.target);
    }
    out.report = aggregate_report(preds, targets, threshold, norm);
    return out;
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
}

// ----------------------------------------------------------------------------
// Checkpoints
// ----------------------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
    FcnParams params;
    FeatureScaler scaler;
    nlohmann::json train_config;  // resolved snapshot
    std::string dataset;          // name of the dataset trained on
};

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    ckpt.params.check_finite();
    nlohmann::json j;
    j["format"] = "apbench-checkpoint";
    j["version"] = kCheckpointVersion;
    j["dataset"] = ckpt.dataset;
    j["train_config"] = ckpt.train_config;
    nlohmann::json model;
    model["lookback"] = ckpt.params.lookback;
    model["n_features"] = ckpt.params.n_features;
    model["horizon"] = ckpt.params.horizon;
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : ckpt.params.layers) {
        nlohmann::json lj;
        lj["in"] = l.in;
        lj["out"] = l.out;
        lj["w"] = l.w;
        lj["b"] = l.b;
        layers.push_back(std::move(lj));
    }
    model["layers"] = std::move(layers);
    j["model"] = std::move(model);
    j["scaler"] = {{"mean", ckpt.scaler.mean}, {"stddev", ckpt.scaler.stddev}};

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing checkpoint: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("unparseable checkpoint " + path.string() + ": " +
                                 e.what());
    }
    if (j.value("format", "") != "apbench-checkpoint")
        throw std::runtime_error("not an apbench checkpoint: " + path.string());
    if (j.value("version", 0) != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version in " + path.string());

    Checkpoint ckpt;
    ckpt.dataset = j.value("dataset", "");
    ckpt.train_config = j.value("train_config", nlohmann::json::object());
    const auto& model = j.at("model");
    ckpt.params.lookback = model.at("lookback").get<std::size_t>();
    ckpt.params.n_features = model.at("n_features").get<std::size_t>();
    ckpt.params.horizon = model.at("horizon").get<std::size_t>();
    std::size_t prev = ckpt.params.input_size();
    for (const auto& lj : model.at("layers")) {
        FcnLayer l;
        l.in = lj.at("in").get<std::size_t>();
        l.out = lj.at("out").get<std::size_t>();
        l.w = lj.at("w").get<std::vector<double>>();
        l.b = lj.at("b").get<std::vector<double>>();
        if (l.in != prev || l.w.size() != l.in * l.out || l.b.size() != l.out)
            throw std::runtime_error("checkpoint layer shapes do not chain in " +
                                     path.string());
        prev = l.out;
        ckpt.params.layers.push_back(std::move(l));
    }
    if (ckpt.params.layers.empty() || prev != ckpt.params.horizon)
        throw std::runtime_error("checkpoint output does not match horizon in " +
                                 path.string());
    ckpt.params.check_finite();
    const auto& sj = j.at("scaler");
    ckpt.scaler.mean = sj.at("mean").get<std::vector<double>>();
    ckpt.scaler.stddev = sj.at("stddev").get<std::vector<double>>();
    if (ckpt.scaler.mean.size() != ckpt.scaler.stddev.size() ||
        ckpt.scaler.mean.size() != ckpt.params.n_features)
        throw std::runtime_error("checkpoint scaler does not match feature count in " +
                                 path.string());
    return ckpt;
}

}  // namespace apbench
