#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace apbench {

// ============================================================================
// Core data model: series, windows, predictions, splits
// ============================================================================

/// One multivariate time series with per-step binary anomaly labels.
/// values is row-major: values[step * n_features + feature].
struct SeriesInstance {
    std::string instance_id;
    std::size_t n_steps = 0;     // N
    std::size_t n_features = 0;  // M
    std::vector<double> values;
    std::vector<std::uint8_t> labels;
    std::vector<std::string> feature_names;

    double value(std::size_t step, std::size_t feature) const {
        return values[step * n_features + feature];
    }
    double& value(std::size_t step, std::size_t feature) {
        return values[step * n_features + feature];
    }
    std::span<const double> row(std::size_t step) const {
        return {values.data() + step * n_features, n_features};
    }

    std::size_t positive_label_count() const {
        std::size_t n = 0;
        for (auto l : labels) n += l;
        return n;
    }

    /// Throws std::invalid_argument if shape, finiteness, or label
    /// constraints are violated.
    void validate() const {
        if (n_steps < 1 || n_features < 1)
            throw std::invalid_argument("series '" + instance_id +
                                        "': n_steps and n_features must be >= 1");
        if (values.size() != n_steps * n_features)
            throw std::invalid_argument("series '" + instance_id +
                                        "': values size does not match N x M");
        if (labels.size() != n_steps)
            throw std::invalid_argument("series '" + instance_id +
                                        "': labels length does not match n_steps");
        for (double v : values)
            if (!std::isfinite(v))
                throw std::invalid_argument("series '" + instance_id +
                                            "': non-finite value");
        for (auto l : labels)
            if (l != 0 && l != 1)
                throw std::invalid_argument("series '" + instance_id +
                                            "': label not in {0,1}");
        if (!feature_names.empty() && feature_names.size() != n_features)
            throw std::invalid_argument("series '" + instance_id +
                                        "': feature_names length mismatch");
    }
};

inline std::vector<std::string> default_feature_names(std::size_t n_features) {
    std::vector<std::string> names;
    names.reserve(n_features);
    for (std::size_t i = 0; i < n_features; ++i)
        names.push_back("feature_" + std::to_string(i));
    return names;
}

/// One (look-back input, horizon label) pair. The input is the L x M slice
/// starting at `offset`; the target holds the T labels that immediately
/// follow it.
struct WindowSample {
    std::string instance_id;
    std::size_t offset = 0;      // t: input covers [offset, offset+L)
    std::size_t lookback = 0;    // L
    std::size_t horizon = 0;     // T
    std::size_t n_features = 0;  // M
    std::vector<double> input;   // L*M, row-major
    std::vector<std::uint8_t> target;  // T, target covers [offset+L, offset+L+T)

    bool has_positive_target() const {
        return std::find(target.begin(), target.end(), std::uint8_t{1}) != target.end();
    }
};

/// Per-step anomaly probabilities over a horizon, each in [0,1].
struct DensityPrediction {
    std::vector<double> probs;

    void validate() const {
        for (double p : probs)
            if (!(p >= 0.0 && p <= 1.0))
                throw std::invalid_argument("density prediction element outside [0,1]");
    }
};

// ============================================================================
// Windowing
// ============================================================================

/// Slices `instance` into overlapping (input, target) pairs at offsets
/// 0, stride, 2*stride, ... subject to offset + L + T <= N.
/// Count is floor((N - L - T) / stride) + 1.
inline std::vector<WindowSample> make_windows(const SeriesInstance& instance,
                                              std::size_t lookback,
                                              std::size_t horizon,
                                              std::size_t stride = 1) {
    if (lookback < 1 || horizon < 1)
        throw std::invalid_argument("make_windows: lookback and horizon must be >= 1");
    if (stride < 1)
        throw std::invalid_argument("make_windows: stride must be >= 1");
    if (lookback + horizon > instance.n_steps)
        throw std::invalid_argument(
            "make_windows: lookback + horizon exceeds length of instance '" +
            instance.instance_id + "' (" + std::to_string(lookback) + " + " +
            std::to_string(horizon) + " > " + std::to_string(instance.n_steps) + ")");

    const std::size_t m = instance.n_features;
    const std::size_t last = instance.n_steps - lookback - horizon;
    std::vector<WindowSample> windows;
    windows.reserve(last / stride + 1);
    for (std::size_t t = 0; t <= last; t += stride) {
        WindowSample w;
        w.instance_id = instance.instance_id;
        w.offset = t;
        w.lookback = lookback;
        w.horizon = horizon;
        w.n_features = m;
        w.input.assign(instance.values.begin() + t * m,
                       instance.values.begin() + (t + lookback) * m);
        w.target.assign(instance.labels.begin() + t + lookback,
                        instance.labels.begin() + t + lookback + horizon);
        windows.push_back(std::move(w));
    }
    return windows;
}

// ============================================================================
// Dataset splitting
// ============================================================================

struct SplitRatios {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;
};

enum class SplitMode {
    Chronological,  // per-instance block split, earliest windows go to train
    Stratified      // seeded shuffle stratified on positive/negative windows
};

struct SplitAssignment {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
    SplitRatios ratios;

    double global_positive_fraction = 0.0;
    double train_positive_fraction = 0.0;
    double val_positive_fraction = 0.0;
    double test_positive_fraction = 0.0;
    // true when each split's positive fraction is within +-20% relative of
    // the global fraction
    bool positive_ratio_ok = true;
    std::vector<std::string> warnings;
};

namespace detail {

// floor rule with remainder assigned to train
inline void split_counts(std::size_t n, const SplitRatios& r, std::size_t& n_train,
                         std::size_t& n_val, std::size_t& n_test) {
    n_val = static_cast<std::size_t>(std::floor(r.val * static_cast<double>(n)));
    n_test = static_cast<std::size_t>(std::floor(r.test * static_cast<double>(n)));
    n_train = n - n_val - n_test;
}

inline double positive_fraction(const std::vector<WindowSample>& windows,
                                const std::vector<std::size_t>& idx) {
    if (idx.empty()) return 0.0;
    std::size_t pos = 0;
    for (auto i : idx) pos += windows[i].has_positive_target() ? 1 : 0;
    return static_cast<double>(pos) / static_cast<double>(idx.size());
}

}  // namespace detail

/// Partitions window indices into train/val/test.
///
/// Chronological mode splits each instance's windows as contiguous blocks in
/// offset order (earliest block to train); windows whose horizon straddles a
/// block boundary stay with the earlier split rather than being dropped.
/// Stratified mode shuffles positives and negatives separately with `seed`.
/// Either way the result is an exhaustive, disjoint partition, and the
/// achieved positive-window fraction per split is reported; a deviation of
/// more than 20% relative from the global fraction produces a warning, not
/// an error.
inline SplitAssignment split_windows(const std::vector<WindowSample>& windows,
                                     SplitRatios ratios = {},
                                     std::uint64_t seed = 0,
                                     SplitMode mode = SplitMode::Chronological) {
    if (windows.empty())
        throw std::invalid_argument("split_windows: empty window list");
    if (!(ratios.train > 0.0 && ratios.val > 0.0 && ratios.test > 0.0))
        throw std::invalid_argument("split_windows: ratios must be positive");
    if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
        throw std::invalid_argument("split_windows: ratios must sum to 1");

    SplitAssignment out;
    out.ratios = ratios;

    if (mode == SplitMode::Chronological) {
        // group indices per instance, preserving first-appearance order
        std::vector<std::string> order;
        std::map<std::string, std::vector<std::size_t>> groups;
        for (std::size_t i = 0; i < windows.size(); ++i) {
            auto [it, inserted] = groups.try_emplace(windows[i].instance_id);
            if (inserted) order.push_back(windows[i].instance_id);
            it->second.push_back(i);
        }
        for (const auto& id : order) {
            auto& idx = groups[id];
            std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
                return windows[a].offset < windows[b].offset;
            });
            std::size_t n_train, n_val, n_test;
            detail::split_counts(idx.size(), ratios, n_train, n_val, n_test);
            out.train.insert(out.train.end(), idx.begin(), idx.begin() + n_train);
            out.val.insert(out.val.end(), idx.begin() + n_train,
                           idx.begin() + n_train + n_val);
            out.test.insert(out.test.end(), idx.begin() + n_train + n_val, idx.end());
        }
    } else {
        std::vector<std::size_t> pos, neg;
        for (std::size_t i = 0; i < windows.size(); ++i)
            (windows[i].has_positive_target() ? pos : neg).push_back(i);
        std::mt19937_64 rng(seed);
        std::shuffle(pos.begin(), pos.end(), rng);
        std::shuffle(neg.begin(), neg.end(), rng);
        for (auto* stratum : {&pos, &neg}) {
            std::size_t n_train, n_val, n_test;
            detail::split_counts(stratum->size(), ratios, n_train, n_val, n_test);
            out.train.insert(out.train.end(), stratum->begin(), stratum->begin() + n_train);
            out.val.insert(out.val.end(), stratum->begin() + n_train,
                           stratum->begin() + n_train + n_val);
            out.test.insert(out.test.end(), stratum->begin() + n_train + n_val,
                            stratum->end());
        }
        std::sort(out.train.begin(), out.train.end());
        std::sort(out.val.begin(), out.val.end());
        std::sort(out.test.begin(), out.test.end());
    }

    if (out.train.empty() || out.val.empty() || out.test.empty())
        throw std::runtime_error(
            "split_windows: a split received zero windows (" +
            std::to_string(windows.size()) + " windows total)");

    std::vector<std::size_t> all(windows.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    out.global_positive_fraction = detail::positive_fraction(windows, all);
    out.train_positive_fraction = detail::positive_fraction(windows, out.train);
    out.val_positive_fraction = detail::positive_fraction(windows, out.val);
    out.test_positive_fraction = detail::positive_fraction(windows, out.test);

    const double g = out.global_positive_fraction;
    auto check = [&](double f, const char* name) {
        if (g == 0.0) return;
        if (std::abs(f - g) > 0.2 * g) {
            out.positive_ratio_ok = false;
            out.warnings.push_back(std::string("positive-window fraction of ") + name +
                                   " split (" + std::to_string(f) +
                                   ") deviates more than 20% from global (" +
                                   std::to_string(g) + ")");
        }
    };
    check(out.train_positive_fraction, "train");
    check(out.val_positive_fraction, "val");
    check(out.test_positive_fraction, "test");
    return out;
}

}  // namespace apbench
