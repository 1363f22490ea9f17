#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "apbench/series.hpp"

namespace apbench {

// ============================================================================
// Cumulative-sum Wasserstein loss
//
// For predictions p and binary targets y over a horizon of T steps,
//   loss = coeff * sum_i |C_i|   with   C_i = sum_{j<=i} (p_j - y_j).
// The full coefficient is 2/(T(T+1)); the simplified variant keeps only the
// MAE factor 1/T and drops the 2/(T+1) part. Both share the same minimizers.
// ============================================================================

enum class LossNorm {
    Full,       // 2 / (T (T+1))
    Simplified  // 1 / T
};

inline double loss_coefficient(std::size_t horizon, LossNorm norm) {
    const double t = static_cast<double>(horizon);
    return norm == LossNorm::Full ? 2.0 / (t * (t + 1.0)) : 1.0 / t;
}

struct LossValue {
    double value = 0.0;
    std::vector<double> cum_diff;  // C_i, i = 0..T-1
};

namespace detail {

template <class Y>
LossValue wasserstein_loss_impl(std::span<const double> pred, std::span<const Y> target,
                                LossNorm norm) {
    if (pred.size() != target.size())
        throw std::invalid_argument("wasserstein_loss: pred/target length mismatch");
    if (pred.empty())
        throw std::invalid_argument("wasserstein_loss: empty horizon");
    LossValue out;
    out.cum_diff.resize(pred.size());
    double c = 0.0;
    double abs_sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        c += pred[i] - static_cast<double>(target[i]);
        out.cum_diff[i] = c;
        abs_sum += std::abs(c);
    }
    out.value = loss_coefficient(pred.size(), norm) * abs_sum;
    return out;
}

template <class Y>
std::vector<double> wasserstein_grad_impl(std::span<const double> pred,
                                          std::span<const Y> target, LossNorm norm) {
    if (pred.size() != target.size())
        throw std::invalid_argument("wasserstein_grad: pred/target length mismatch");
    if (pred.empty())
        throw std::invalid_argument("wasserstein_grad: empty horizon");
    const std::size_t t = pred.size();
    std::vector<double> sign(t);
    double c = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
        c += pred[i] - static_cast<double>(target[i]);
        sign[i] = c > 0.0 ? 1.0 : (c < 0.0 ? -1.0 : 0.0);  // sign(0) := 0
    }
    // d loss / d p_k = coeff * sum_{i>=k} sign(C_i)
    std::vector<double> grad(t);
    const double coeff = loss_coefficient(t, norm);
    double suffix = 0.0;
    for (std::size_t k = t; k-- > 0;) {
        suffix += sign[k];
        grad[k] = coeff * suffix;
    }
    return grad;
}

}  // namespace detail

inline LossValue wasserstein_loss(std::span<const double> pred,
                                  std::span<const std::uint8_t> target,
                                  LossNorm norm = LossNorm::Full) {
    return detail::wasserstein_loss_impl(pred, target, norm);
}

inline LossValue wasserstein_loss(std::span<const double> pred,
                                  std::span<const double> target,
                                  LossNorm norm = LossNorm::Full) {
    return detail::wasserstein_loss_impl(pred, target, norm);
}

inline LossValue wasserstein_loss(const DensityPrediction& pred,
                                  std::span<const std::uint8_t> target,
                                  LossNorm norm = LossNorm::Full) {
    return detail::wasserstein_loss_impl(std::span<const double>(pred.probs), target, norm);
}

/// Subgradient of wasserstein_loss with respect to the predictions.
inline std::vector<double> wasserstein_grad(std::span<const double> pred,
                                            std::span<const std::uint8_t> target,
                                            LossNorm norm = LossNorm::Full) {
    return detail::wasserstein_grad_impl(pred, target, norm);
}

inline std::vector<double> wasserstein_grad(std::span<const double> pred,
                                            std::span<const double> target,
                                            LossNorm norm = LossNorm::Full) {
    return detail::wasserstein_grad_impl(pred, target, norm);
}

}  // namespace apbench
