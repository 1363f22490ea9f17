#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "apbench/loss.hpp"
#include "apbench/series.hpp"

namespace apbench {

// ============================================================================
// Evaluation metrics: window classification, Existence, Density, Lead Time,
// Dice. Density, Lead Time, and Dice are aggregated over true-positive
// windows only.
// ============================================================================

struct EvalConfig {
    double threshold = 0.1;  // s

    void validate() const {
        if (!(threshold >= 0.0 && threshold < 1.0))
            throw std::invalid_argument("threshold must lie in [0,1)");
    }
};

enum class WindowVerdict { TP, FP, FN, TN };

inline const char* to_string(WindowVerdict v) {
    switch (v) {
        case WindowVerdict::TP: return "TP";
        case WindowVerdict::FP: return "FP";
        case WindowVerdict::FN: return "FN";
        case WindowVerdict::TN: return "TN";
    }
    return "?";
}

struct VerdictCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;

    std::int64_t total() const { return tp + fp + fn + tn; }
    void add(WindowVerdict v) {
        switch (v) {
            case WindowVerdict::TP: ++tp; break;
            case WindowVerdict::FP: ++fp; break;
            case WindowVerdict::FN: ++fn; break;
            case WindowVerdict::TN: ++tn; break;
        }
    }
};

namespace detail {

inline void require_same_length(std::span<const double> pred,
                                std::span<const std::uint8_t> target,
                                const char* who) {
    if (pred.size() != target.size())
        throw std::invalid_argument(std::string(who) + ": pred/target length mismatch");
    if (pred.empty())
        throw std::invalid_argument(std::string(who) + ": empty horizon");
}

inline double sum(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

inline double sum(std::span<const std::uint8_t> v) {
    double s = 0.0;
    for (auto x : v) s += x;
    return s;
}

}  // namespace detail

/// TP iff both the predicted density sum and the label sum reach s; FP/FN for
/// one-sided crossings; TN otherwise. Ties at the threshold count as crossing.
inline WindowVerdict classify_window(std::span<const double> pred,
                                     std::span<const std::uint8_t> target, double s) {
    detail::require_same_length(pred, target, "classify_window");
    const bool pred_pos = detail::sum(pred) >= s;
    const bool true_pos = detail::sum(target) >= s;
    if (pred_pos && true_pos) return WindowVerdict::TP;
    if (pred_pos) return WindowVerdict::FP;
    if (true_pos) return WindowVerdict::FN;
    return WindowVerdict::TN;
}

/// 2TP / (2TP + FP + FN); defined as 1 when TP = FP = FN = 0 (nothing to
/// find, nothing claimed).
inline double existence_score(const VerdictCounts& counts) {
    if (counts.tp < 0 || counts.fp < 0 || counts.fn < 0 || counts.tn < 0)
        throw std::invalid_argument("existence_score: negative count");
    const std::int64_t denom = 2 * counts.tp + counts.fp + counts.fn;
    if (denom == 0) return 1.0;
    return 2.0 * static_cast<double>(counts.tp) / static_cast<double>(denom);
}

/// 1 - |sum(pred) - sum(target)| / T. Equals 1 when the predicted anomaly
/// mass matches the label count exactly.
inline double density_score(std::span<const double> pred,
                            std::span<const std::uint8_t> target) {
    detail::require_same_length(pred, target, "density_score");
    const double t = static_cast<double>(pred.size());
    return 1.0 - std::abs(detail::sum(pred) - detail::sum(target)) / t;
}

/// 1 - |i_pred - i_true| / T, where i_true is the first labeled step and
/// i_pred the first step whose predicted probability reaches s. Returns
/// nullopt when no per-step prediction reaches s (the window counts toward
/// the non-localizable tally and is excluded from lead-time means).
/// Must be called on windows whose label sum reaches s.
inline std::optional<double> lead_time_score(std::span<const double> pred,
                                             std::span<const std::uint8_t> target,
                                             double s) {
    detail::require_same_length(pred, target, "lead_time_score");
    if (detail::sum(target) < s)
        throw std::invalid_argument("lead_time_score: label sum below threshold");
    std::size_t i_true = target.size();
    for (std::size_t i = 0; i < target.size(); ++i) {
        if (target[i] == 1) { i_true = i; break; }
    }
    if (i_true == target.size())
        throw std::invalid_argument("lead_time_score: target has no positive step");
    std::size_t i_pred = pred.size();
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] >= s) { i_pred = i; break; }
    }
    if (i_pred == pred.size()) return std::nullopt;
    const double t = static_cast<double>(pred.size());
    const double diff = std::abs(static_cast<double>(i_pred) - static_cast<double>(i_true));
    return 1.0 - diff / t;
}

/// Dice overlap between thresholded predictions and labels:
/// 2 |P' and Y| / (|P'| + |Y|) with P' = indicator(pred >= s). Defined as 1
/// when both sets are empty.
inline double dice_score(std::span<const double> pred,
                         std::span<const std::uint8_t> target, double s) {
    detail::require_same_length(pred, target, "dice_score");
    std::int64_t n_pred = 0, n_true = 0, n_both = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] >= s;
        const bool y = target[i] == 1;
        n_pred += p;
        n_true += y;
        n_both += p && y;
    }
    if (n_pred + n_true == 0) return 1.0;
    return 2.0 * static_cast<double>(n_both) / static_cast<double>(n_pred + n_true);
}

/// One evaluation-run summary. Density, lead time, and dice means cover
/// true-positive windows only (lead time only the localizable ones); they
/// are absent when no window qualifies. Wasserstein is reported both over
/// all windows and over true positives.
struct MetricsReport {
    VerdictCounts counts;
    double existence = 1.0;
    std::optional<double> mean_density;
    std::optional<double> mean_lead_time;
    std::optional<double> mean_dice;
    double mean_wasserstein = 0.0;
    std::optional<double> mean_wasserstein_tp;
    std::size_t n_tp_localizable = 0;
    std::size_t n_windows = 0;
};

inline MetricsReport aggregate_report(std::span<const DensityPrediction> preds,
                                      std::span<const std::vector<std::uint8_t>> targets,
                                      double s, LossNorm norm = LossNorm::Full) {
    if (preds.size() != targets.size())
        throw std::invalid_argument("aggregate_report: preds/targets length mismatch");
    if (preds.empty())
        throw std::invalid_argument("aggregate_report: no windows");
    EvalConfig{s}.validate();

    MetricsReport r;
    r.n_windows = preds.size();
    double wasserstein_sum = 0.0;
    double wasserstein_tp_sum = 0.0;
    double density_sum = 0.0;
    double dice_sum = 0.0;
    double lead_sum = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        std::span<const double> p(preds[i].probs);
        std::span<const std::uint8_t> y(targets[i]);
        const WindowVerdict v = classify_window(p, y, s);
        r.counts.add(v);
        wasserstein_sum += wasserstein_loss(p, y, norm).value;
        if (v == WindowVerdict::TP) {
            wasserstein_tp_sum += wasserstein_loss(p, y, norm).value;
            density_sum += density_score(p, y);
            dice_sum += dice_score(p, y, s);
            // With s = 0 a window can be TP without any labeled step; there
            // is no first-anomaly index then, so it stays non-localizable.
            const bool has_label = std::find(y.begin(), y.end(), std::uint8_t{1}) != y.end();
            if (has_label) {
                if (auto lead = lead_time_score(p, y, s)) {
                    lead_sum += *lead;
                    ++r.n_tp_localizable;
                }
            }
        }
    }
    r.existence = existence_score(r.counts);
    r.mean_wasserstein = wasserstein_sum / static_cast<double>(r.n_windows);
    if (r.counts.tp > 0) {
        const double n_tp = static_cast<double>(r.counts.tp);
        r.mean_density = density_sum / n_tp;
        r.mean_dice = dice_sum / n_tp;
        r.mean_wasserstein_tp = wasserstein_tp_sum / n_tp;
    }
    if (r.n_tp_localizable > 0)
        r.mean_lead_time = lead_sum / static_cast<double>(r.n_tp_localizable);
    return r;
}

}  // namespace apbench
