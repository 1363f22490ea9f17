#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "apbench/fcn.hpp"
#include "apbench/loss.hpp"
#include "apbench/metrics.hpp"
#include "apbench/seeding.hpp"
#include "apbench/testing/transport_oracle.hpp"

namespace apbench {

// ============================================================================
// Built-in verification suite (the `check` subcommand): loss-vs-transport
// oracle equivalence, end-to-end gradient finite-difference trials, a
// sensitivity probe that proves the gradient check can detect a wrong
// gradient, and the worked metric examples.
// ============================================================================

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace detail {

inline double elapsed_s(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct RandomPair {
    std::vector<double> pred;
    std::vector<std::uint8_t> target;
};

/// Mass-matched random pair: binary target with k ones, nonnegative pred
/// rescaled to sum exactly k (elements bounded away from huge values so the
/// 1e-9 comparison tolerance is meaningful).
inline RandomPair random_balanced_pair(std::mt19937_64& rng, std::size_t max_t) {
    std::uniform_int_distribution<std::size_t> t_dist(1, max_t);
    const std::size_t t = t_dist(rng);
    std::uniform_int_distribution<std::size_t> k_dist(0, t);
    const std::size_t k = k_dist(rng);

    RandomPair pair;
    pair.target.assign(t, 0);
    std::vector<std::size_t> pos(t);
    for (std::size_t i = 0; i < t; ++i) pos[i] = i;
    std::shuffle(pos.begin(), pos.end(), rng);
    for (std::size_t i = 0; i < k; ++i) pair.target[pos[i]] = 1;

    pair.pred.assign(t, 0.0);
    if (k > 0) {
        std::uniform_real_distribution<double> cell(0.1, 1.0);
        double total = 0.0;
        for (auto& p : pair.pred) { p = cell(rng); total += p; }
        const double scale = static_cast<double>(k) / total;
        for (auto& p : pair.pred) p *= scale;
    }
    return pair;
}

}  // namespace detail

/// Criterion: Σ|C_i| computed by the loss equals the brute-force 1-D
/// transport cost on mass-matched pairs, within `tol`.
inline CheckResult check_loss_oracle(std::size_t n_pairs = 1000, std::uint64_t seed = 1,
                                     double tol = 1e-9, std::size_t max_t = 10) {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(derive_seed(seed, 0xf00d));
    double max_diff = 0.0;
    for (std::size_t i = 0; i < n_pairs; ++i) {
        const detail::RandomPair pair = detail::random_balanced_pair(rng, max_t);
        const LossValue lv = wasserstein_loss(
            std::span<const double>(pair.pred), std::span<const std::uint8_t>(pair.target));
        double sum_abs_c = 0.0;
        for (double c : lv.cum_diff) sum_abs_c += std::abs(c);
        const std::vector<double> target_real(pair.target.begin(), pair.target.end());
        const double oracle = testing::transport_oracle(pair.pred, target_real);
        max_diff = std::max(max_diff, std::abs(sum_abs_c - oracle));
    }
    CheckResult r;
    r.name = "loss-oracle equivalence";
    r.passed = max_diff <= tol;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu pairs, max |sum|C_i| - transport| = %.3g (tol %.0e), %.2fs",
                  n_pairs, max_diff, tol, detail::elapsed_s(start));
    r.detail = buf;
    return r;
}

struct GradientTrialSummary {
    std::size_t n_trials = 0;
    std::size_t n_kinked = 0;     // excluded: some |C_i| <= 1e-6 at the center
    std::size_t n_evaluated = 0;  // trials actually compared
    std::size_t n_passed = 0;     // rel err < 1e-4
    double worst_rel_err = 0.0;
    double pass_fraction = 0.0;
};

namespace detail {

struct TinyTrial {
    FcnParams params;
    std::vector<double> input;
    std::vector<std::uint8_t> target;
};

inline TinyTrial random_tiny_trial(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> l_dist(2, 5), m_dist(1, 2), t_dist(2, 5),
        h_dist(3, 6);
    TinyTrial trial;
    const std::size_t l = l_dist(rng), m = m_dist(rng), t = t_dist(rng);
    const std::size_t hidden[] = {h_dist(rng)};
    trial.params = init_fcn(l, m, t, hidden, rng());
    trial.input.resize(l * m);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& v : trial.input) v = gauss(rng);
    trial.target.resize(t);
    std::bernoulli_distribution coin(0.4);
    for (auto& y : trial.target) y = coin(rng) ? 1 : 0;
    return trial;
}

}  // namespace detail

/// Runs `n_trials` random tiny-network finite-difference comparisons of the
/// end-to-end gradient (network + cumulative-sum loss). Trials whose center
/// point sits on a |C_i| <= 1e-6 kink are excluded. With `negate_analytic`
/// the analytic gradient is deliberately flipped before comparison — used to
/// prove the check actually detects wrong gradients.
inline GradientTrialSummary run_gradient_trials(std::size_t n_trials = 100,
                                                std::uint64_t seed = 1,
                                                bool negate_analytic = false) {
    std::mt19937_64 rng(derive_seed(seed, 0x97ad));
    GradientTrialSummary s;
    s.n_trials = n_trials;
    for (std::size_t i = 0; i < n_trials; ++i) {
        const detail::TinyTrial trial = detail::random_tiny_trial(rng);
        if (!negate_analytic) {
            const GradCheckResult r =
                finite_diff_check(trial.params, trial.input, trial.target, 1e-5);
            if (r.kinked) { ++s.n_kinked; continue; }
            ++s.n_evaluated;
            s.worst_rel_err = std::max(s.worst_rel_err, r.max_rel_err);
            if (r.max_rel_err < 1e-4) ++s.n_passed;
            continue;
        }
        // manual sweep with the analytic gradient negated
        ForwardCache cache;
        const DensityPrediction pred = fcn_forward(trial.params, trial.input, &cache);
        const LossValue center = wasserstein_loss(pred, trial.target);
        bool kinked = false;
        for (double c : center.cum_diff)
            if (std::abs(c) <= 1e-6) kinked = true;
        if (kinked) { ++s.n_kinked; continue; }
        const std::vector<double> dpred = wasserstein_grad(pred.probs, trial.target);
        FcnGradients analytic = fcn_backward(trial.params, cache, dpred);
        for (auto& l : analytic.layers) {
            for (auto& v : l.w) v = -v;
            for (auto& v : l.b) v = -v;
        }
        FcnParams probe = trial.params;
        const double eps = 1e-5;
        double max_rel = 0.0;
        bool compared = false;
        for (std::size_t li = 0; li < probe.layers.size(); ++li) {
            auto sweep = [&](std::vector<double>& theta, const std::vector<double>& grad) {
                for (std::size_t p = 0; p < theta.size(); ++p) {
                    if (std::abs(grad[p]) <= 1e-8) continue;
                    const double saved = theta[p];
                    theta[p] = saved + eps;
                    const double lp =
                        wasserstein_loss(fcn_forward(probe, trial.input), trial.target).value;
                    theta[p] = saved - eps;
                    const double lm =
                        wasserstein_loss(fcn_forward(probe, trial.input), trial.target).value;
                    theta[p] = saved;
                    const double fd = (lp - lm) / (2.0 * eps);
                    max_rel = std::max(max_rel, std::abs(fd - grad[p]) / std::abs(grad[p]));
                    compared = true;
                }
            };
            sweep(probe.layers[li].w, analytic.layers[li].w);
            sweep(probe.layers[li].b, analytic.layers[li].b);
        }
        if (!compared) { ++s.n_kinked; continue; }
        ++s.n_evaluated;
        s.worst_rel_err = std::max(s.worst_rel_err, max_rel);
        if (max_rel < 1e-4) ++s.n_passed;
    }
    s.pass_fraction = s.n_evaluated == 0
                          ? 0.0
                          : static_cast<double>(s.n_passed) /
                                static_cast<double>(s.n_evaluated);
    return s;
}

inline CheckResult check_gradients(std::size_t n_trials = 100, std::uint64_t seed = 1) {
    const auto start = std::chrono::steady_clock::now();
    const GradientTrialSummary s = run_gradient_trials(n_trials, seed, false);
    CheckResult r;
    r.name = "gradient finite-difference trials";
    r.passed = s.n_evaluated > 0 && s.pass_fraction >= 0.95;
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "%zu/%zu passed rel<1e-4 (%zu kinked excluded, worst rel %.3g), %.2fs",
                  s.n_passed, s.n_evaluated, s.n_kinked, s.worst_rel_err,
                  detail::elapsed_s(start));
    r.detail = buf;
    return r;
}

/// The check must FAIL when fed a negated gradient; passing here means the
/// corruption was detected on every evaluated trial.
inline CheckResult check_gradient_sensitivity(std::uint64_t seed = 1) {
    const auto start = std::chrono::steady_clock::now();
    const GradientTrialSummary s = run_gradient_trials(20, seed, true);
    CheckResult r;
    r.name = "gradient check sensitivity (negated gradient must fail)";
    r.passed = s.n_evaluated > 0 && s.n_passed == 0;
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "%zu corrupted trials evaluated, %zu wrongly accepted, %.2fs",
                  s.n_evaluated, s.n_passed, detail::elapsed_s(start));
    r.detail = buf;
    return r;
}

struct MetricExample {
    std::string name;
    double expected = 0.0;
    double actual = 0.0;
    bool passed = false;
};

/// The worked examples behind the metric definitions, evaluated live.
inline std::vector<MetricExample> metric_example_table() {
    std::vector<MetricExample> rows;
    auto add = [&](std::string name, double expected, double actual) {
        MetricExample e;
        e.name = std::move(name);
        e.expected = expected;
        e.actual = actual;
        e.passed = std::abs(actual - expected) <= 1e-12;
        rows.push_back(std::move(e));
    };

    add("existence TP=3 FP=1 FN=1", 0.75, existence_score({3, 1, 1, 0}));

    const std::vector<double> density_pred(20, 0.26);  // sums to 5.2
    std::vector<std::uint8_t> density_target(20, 0);
    for (std::size_t i = 0; i < 5; ++i) density_target[i] = 1;
    add("density T=20 sums 5.2 vs 5", 0.99, density_score(density_pred, density_target));

    std::vector<double> lead_pred(20, 0.0);
    lead_pred[4] = 0.5;
    std::vector<std::uint8_t> lead_target(20, 0);
    for (std::size_t i = 6; i < 11; ++i) lead_target[i] = 1;
    add("lead time T=20 first pred 4 vs first label 6", 0.9,
        lead_time_score(lead_pred, lead_target, 0.1).value());

    const std::vector<double> dice_pred = {0.0, 0.5, 0.5, 0.0};
    const std::vector<std::uint8_t> dice_target = {0, 1, 0, 0};
    add("dice [0,1,1,0] vs [0,1,0,0]", 2.0 / 3.0, dice_score(dice_pred, dice_target, 0.1));

    const std::vector<double> loss_pred = {0.0, 1.0, 0.0};
    const std::vector<std::uint8_t> loss_target = {1, 0, 0};
    add("loss T=3 one-step shift", 1.0 / 6.0,
        wasserstein_loss(std::span<const double>(loss_pred),
                         std::span<const std::uint8_t>(loss_target))
            .value);
    const std::vector<double> grad = wasserstein_grad(loss_pred, loss_target);
    add("grad T=3 one-step shift, component 0", -1.0 / 6.0, grad[0]);
    add("grad T=3 one-step shift, component 1", 0.0, grad[1]);
    add("grad T=3 one-step shift, component 2", 0.0, grad[2]);

    const std::vector<double> loss2_pred = {0.0, 1.0};
    const std::vector<std::uint8_t> loss2_target = {1, 0};
    add("loss T=2 one-step shift", 1.0 / 3.0,
        wasserstein_loss(std::span<const double>(loss2_pred),
                         std::span<const std::uint8_t>(loss2_target))
            .value);
    return rows;
}

inline CheckResult check_metric_examples() {
    const std::vector<MetricExample> rows = metric_example_table();
    CheckResult r;
    r.name = "metric worked examples";
    r.passed = true;
    std::size_t n_ok = 0;
    std::string failures;
    for (const auto& e : rows) {
        if (e.passed) { ++n_ok; continue; }
        r.passed = false;
        char buf[160];
        std::snprintf(buf, sizeof buf, " [%s: expected %.12g got %.12g]", e.name.c_str(),
                      e.expected, e.actual);
        failures += buf;
    }
    r.detail = std::to_string(n_ok) + "/" + std::to_string(rows.size()) +
               " examples exact" + failures;
    return r;
}

inline std::vector<CheckResult> run_all_checks(std::uint64_t seed = 1) {
    std::vector<CheckResult> results;
    results.push_back(check_loss_oracle(1000, seed));
    results.push_back(check_gradients(100, seed));
    results.push_back(check_gradient_sensitivity(seed));
    results.push_back(check_metric_examples());
    return results;
}

}  // namespace apbench
