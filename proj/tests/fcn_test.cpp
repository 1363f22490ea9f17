#include <apbench/fcn.hpp>
#include <apbench/loss.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace {

using apbench::AdamConfig;
using apbench::AdamState;
using apbench::FcnGradients;
using apbench::FcnParams;
using apbench::ForwardCache;
using apbench::LossNorm;

FcnParams zero_net(std::size_t l, std::size_t m, std::size_t t,
                   std::vector<std::size_t> hidden) {
    FcnParams p = apbench::init_fcn(l, m, t, hidden, 0);
    for (auto& layer : p.layers) {
        std::fill(layer.w.begin(), layer.w.end(), 0.0);
        std::fill(layer.b.begin(), layer.b.end(), 0.0);
    }
    return p;
}

std::vector<double> random_input(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> x(n);
    for (auto& v : x) v = d(rng);
    return x;
}

std::vector<std::uint8_t> random_target(std::size_t t, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(0.4);
    std::vector<std::uint8_t> y(t);
    for (auto& v : y) v = coin(rng) ? 1 : 0;
    return y;
}

}  // namespace

TEST(InitFcnTest, LayerShapesChainThroughHiddenWidths) {
    const FcnParams p = apbench::init_fcn(50, 1, 20, std::vector<std::size_t>{128, 128}, 3);
    ASSERT_EQ(p.layers.size(), 3u);
    EXPECT_EQ(p.layers[0].in, 50u);
    EXPECT_EQ(p.layers[0].out, 128u);
    EXPECT_EQ(p.layers[1].in, 128u);
    EXPECT_EQ(p.layers[1].out, 128u);
    EXPECT_EQ(p.layers[2].in, 128u);
    EXPECT_EQ(p.layers[2].out, 20u);
    EXPECT_EQ(p.parameter_count(), 50u * 128 + 128 + 128u * 128 + 128 + 128u * 20 + 20);
}

TEST(InitFcnTest, SameSeedReproducesDifferentSeedVaries) {
    const FcnParams a = apbench::init_fcn(6, 2, 4, std::vector<std::size_t>{5}, 11);
    const FcnParams b = apbench::init_fcn(6, 2, 4, std::vector<std::size_t>{5}, 11);
    const FcnParams c = apbench::init_fcn(6, 2, 4, std::vector<std::size_t>{5}, 12);
    ASSERT_EQ(a.layers.size(), b.layers.size());
    bool all_equal_ab = true, any_diff_ac = false;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
        all_equal_ab = all_equal_ab && a.layers[l].w == b.layers[l].w &&
                       a.layers[l].b == b.layers[l].b;
        any_diff_ac = any_diff_ac || a.layers[l].w != c.layers[l].w;
    }
    EXPECT_TRUE(all_equal_ab);
    EXPECT_TRUE(any_diff_ac);
}

TEST(InitFcnTest, WeightsRespectFanInBoundAndBiasesAreZero) {
    const FcnParams p = apbench::init_fcn(30, 2, 8, std::vector<std::size_t>{16}, 7);
    for (const auto& layer : p.layers) {
        const double bound = std::sqrt(6.0 / static_cast<double>(layer.in));
        double lo = 0.0, hi = 0.0;
        for (double w : layer.w) {
            EXPECT_LE(std::abs(w), bound);
            lo = std::min(lo, w);
            hi = std::max(hi, w);
        }
        EXPECT_LT(lo, -0.1 * bound);  // actually spread out, not degenerate
        EXPECT_GT(hi, 0.1 * bound);
        for (double b : layer.b) EXPECT_EQ(b, 0.0);
    }
}

TEST(InitFcnTest, RejectsZeroDimensions) {
    EXPECT_THROW(apbench::init_fcn(0, 1, 4, std::vector<std::size_t>{4}, 0),
                 std::invalid_argument);
    EXPECT_THROW(apbench::init_fcn(4, 1, 0, std::vector<std::size_t>{4}, 0),
                 std::invalid_argument);
    EXPECT_THROW(apbench::init_fcn(4, 1, 4, std::vector<std::size_t>{0}, 0),
                 std::invalid_argument);
}

TEST(FcnForwardTest, ZeroParametersEmitAllHalves) {
    const FcnParams p = zero_net(4, 1, 3, {5});
    const std::vector<double> x(4, 1.25);
    const auto pred = apbench::fcn_forward(p, x);
    ASSERT_EQ(pred.probs.size(), 3u);
    for (double v : pred.probs) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(FcnForwardTest, OutputsStayInUnitIntervalAndReachTheEnds) {
    FcnParams p = apbench::init_fcn(6, 1, 4, std::vector<std::size_t>{8}, 21);
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        const auto x = random_input(6, rng);
        for (double v : apbench::fcn_forward(p, x).probs) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
    // saturate the head in both directions: exact 0 and exact 1 are reachable
    for (auto& b : p.layers.back().b) b = 100.0;
    for (double v : apbench::fcn_forward(p, std::vector<double>(6, 0.1)).probs)
        EXPECT_EQ(v, 1.0);
    for (auto& b : p.layers.back().b) b = -100.0;
    for (double v : apbench::fcn_forward(p, std::vector<double>(6, 0.1)).probs)
        EXPECT_EQ(v, 0.0);
}

TEST(FcnForwardTest, DeterministicAndLengthMatchesHorizon) {
    const FcnParams p = apbench::init_fcn(10, 2, 7, std::vector<std::size_t>{6, 6}, 4);
    std::mt19937_64 rng(2);
    const auto x = random_input(20, rng);
    const auto a = apbench::fcn_forward(p, x);
    const auto b = apbench::fcn_forward(p, x);
    EXPECT_EQ(a.probs.size(), 7u);
    EXPECT_EQ(a.probs, b.probs);
}

TEST(FcnForwardTest, RejectsWrongInputSize) {
    const FcnParams p = apbench::init_fcn(10, 2, 7, std::vector<std::size_t>{6}, 4);
    EXPECT_THROW(apbench::fcn_forward(p, std::vector<double>(19, 0.0)),
                 std::invalid_argument);
}

TEST(FcnForwardTest, DeadReluUnitCannotReachTheHead) {
    // one hidden unit, driven negative: head weight must not matter
    FcnParams p = zero_net(1, 1, 1, {1});
    p.layers[0].w[0] = -1.0;  // z_hidden = -x
    p.layers[1].w[0] = 5.0;
    const std::vector<double> x{2.0};
    const auto pred = apbench::fcn_forward(p, x);
    EXPECT_DOUBLE_EQ(pred.probs[0], 0.5);  // head sees 0, hard sigmoid gives 1/2
}

TEST(FcnBackwardTest, ZeroUpstreamGradientGivesZeroParameterGradients) {
    const FcnParams p = apbench::init_fcn(5, 1, 3, std::vector<std::size_t>{4}, 17);
    std::mt19937_64 rng(3);
    const auto x = random_input(5, rng);
    ForwardCache cache;
    apbench::fcn_forward(p, x, &cache);
    const FcnGradients g = apbench::fcn_backward(p, cache, std::vector<double>(3, 0.0));
    for (const auto& layer : g.layers) {
        for (double w : layer.w) EXPECT_EQ(w, 0.0);
        for (double b : layer.b) EXPECT_EQ(b, 0.0);
    }
}

TEST(FcnBackwardTest, MatchesFiniteDifferencesOnRandomTinyNets) {
    std::mt19937_64 rng(31);
    int evaluated = 0, passed = 0;
    for (int trial = 0; trial < 60; ++trial) {
        const FcnParams p =
            apbench::init_fcn(3, 1, 2, std::vector<std::size_t>{4}, 1000 + trial);
        const auto x = random_input(3, rng);
        const auto y = random_target(2, rng);
        const auto check = apbench::finite_diff_check(p, x, y, 1e-5, LossNorm::Full);
        if (check.kinked || check.n_compared == 0) continue;
        ++evaluated;
        if (check.max_rel_err < 1e-4) ++passed;
    }
    ASSERT_GT(evaluated, 20);
    EXPECT_GE(static_cast<double>(passed) / evaluated, 0.95);
}

TEST(FcnBackwardTest, DeadReluUnitGetsNoIncomingGradient) {
    FcnParams p = zero_net(2, 1, 2, {2});
    p.layers[0].w[0] = -1.0;  // unit 0 sees -x0 < 0 for positive input: dead
    p.layers[0].w[3] = 1.0;   // unit 1 sees x1 > 0: alive
    // small head weights keep the outputs inside the live band of the clamp
    p.layers[1].w = {0.1, 0.1, 0.1, 0.1};
    const std::vector<double> x{3.0, 2.0};
    ForwardCache cache;
    apbench::fcn_forward(p, x, &cache);
    const FcnGradients g = apbench::fcn_backward(p, cache, std::vector<double>{0.3, 0.3});
    EXPECT_EQ(g.layers[0].w[0], 0.0);  // dead unit row
    EXPECT_EQ(g.layers[0].w[1], 0.0);
    EXPECT_EQ(g.layers[0].b[0], 0.0);
    EXPECT_NE(g.layers[0].w[2], 0.0);  // alive unit row
    EXPECT_NE(g.layers[0].b[1], 0.0);
}

TEST(FcnBackwardTest, ClampedHeadBlocksGradientOnFlatRegions) {
    FcnParams p = zero_net(2, 1, 2, {2});
    p.layers[0].w = {1.0, 0.0, 0.0, 1.0};
    p.layers[1].w = {1.0, 0.0, 0.0, 1.0};
    p.layers[1].b = {100.0, 0.0};  // output 0 pinned at 1.0, output 1 live
    const std::vector<double> x{0.5, 0.25};
    ForwardCache cache;
    const auto pred = apbench::fcn_forward(p, x, &cache);
    EXPECT_EQ(pred.probs[0], 1.0);
    const FcnGradients g = apbench::fcn_backward(p, cache, std::vector<double>{0.7, 0.7});
    EXPECT_EQ(g.layers[1].b[0], 0.0);  // clamped output propagates nothing
    EXPECT_NE(g.layers[1].b[1], 0.0);
}

TEST(FcnBackwardTest, RejectsMismatchedCacheOrGradientLength) {
    const FcnParams p = apbench::init_fcn(4, 1, 3, std::vector<std::size_t>{4}, 5);
    const FcnParams other = apbench::init_fcn(4, 1, 3, std::vector<std::size_t>{6}, 5);
    std::mt19937_64 rng(8);
    const auto x = random_input(4, rng);
    ForwardCache cache;
    apbench::fcn_forward(p, x, &cache);
    EXPECT_THROW(apbench::fcn_backward(other, cache, std::vector<double>(3, 0.1)),
                 std::invalid_argument);
    EXPECT_THROW(apbench::fcn_backward(p, cache, std::vector<double>(2, 0.1)),
                 std::invalid_argument);
    EXPECT_THROW(apbench::fcn_backward(p, ForwardCache{}, std::vector<double>(3, 0.1)),
                 std::invalid_argument);
}

TEST(FcnBackwardTest, AccumulationEqualsSumOfSeparatePasses) {
    const FcnParams p = apbench::init_fcn(4, 1, 3, std::vector<std::size_t>{5}, 23);
    std::mt19937_64 rng(12);
    const auto x1 = random_input(4, rng);
    const auto x2 = random_input(4, rng);
    const std::vector<double> d1{0.2, -0.1, 0.4};
    const std::vector<double> d2{-0.3, 0.5, 0.1};

    ForwardCache c1, c2;
    apbench::fcn_forward(p, x1, &c1);
    apbench::fcn_forward(p, x2, &c2);

    FcnGradients acc = FcnGradients::zeros_like(p);
    apbench::fcn_backward_into(p, c1, d1, acc);
    apbench::fcn_backward_into(p, c2, d2, acc);

    FcnGradients expect = apbench::fcn_backward(p, c1, d1);
    expect.accumulate(apbench::fcn_backward(p, c2, d2));

    for (std::size_t l = 0; l < acc.layers.size(); ++l) {
        for (std::size_t i = 0; i < acc.layers[l].w.size(); ++i)
            EXPECT_DOUBLE_EQ(acc.layers[l].w[i], expect.layers[l].w[i]);
        for (std::size_t i = 0; i < acc.layers[l].b.size(); ++i)
            EXPECT_DOUBLE_EQ(acc.layers[l].b[i], expect.layers[l].b[i]);
    }
}

TEST(AdamStepTest, ZeroGradientIsAFixedPointButAdvancesStep)
{
    FcnParams p = apbench::init_fcn(3, 1, 2, std::vector<std::size_t>{3}, 2);
    const FcnParams before = p;
    AdamState state = AdamState::zeros_like(p);
    apbench::adam_step(state, p, FcnGradients::zeros_like(p));
    EXPECT_EQ(state.step, 1);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        EXPECT_EQ(p.layers[l].w, before.layers[l].w);
        EXPECT_EQ(p.layers[l].b, before.layers[l].b);
    }
}

TEST(AdamStepTest, ConstantGradientMovesParametersOppositeToItsSign) {
    FcnParams p = zero_net(2, 1, 1, {2});
    AdamState state = AdamState::zeros_like(p);
    FcnGradients g = FcnGradients::zeros_like(p);
    g.layers[0].w[0] = 2.5;   // positive gradient: parameter must decrease
    g.layers[0].b[1] = -1.0;  // negative gradient: parameter must increase
    AdamConfig cfg;
    for (int i = 0; i < 10; ++i) apbench::adam_step(state, p, g, cfg);
    EXPECT_LT(p.layers[0].w[0], 0.0);
    EXPECT_GT(p.layers[0].b[1], 0.0);
    EXPECT_EQ(p.layers[0].w[1], 0.0);  // untouched coordinate stays put
    // first-step magnitude is ~lr regardless of gradient scale
    FcnParams q = zero_net(2, 1, 1, {2});
    AdamState s2 = AdamState::zeros_like(q);
    apbench::adam_step(s2, q, g, cfg);
    EXPECT_NEAR(q.layers[0].w[0], -cfg.lr, cfg.lr * 1e-6);
}

TEST(AdamStepTest, ZeroLearningRateFreezesParameters) {
    FcnParams p = apbench::init_fcn(3, 1, 2, std::vector<std::size_t>{3}, 6);
    const FcnParams before = p;
    AdamState state = AdamState::zeros_like(p);
    FcnGradients g = FcnGradients::zeros_like(p);
    for (auto& layer : g.layers)
        for (auto& w : layer.w) w = 1.0;
    AdamConfig cfg;
    cfg.lr = 0.0;
    apbench::adam_step(state, p, g, cfg);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        EXPECT_EQ(p.layers[l].w, before.layers[l].w);
        EXPECT_EQ(p.layers[l].b, before.layers[l].b);
    }
}

TEST(AdamStepTest, RejectsMismatchedShapes) {
    FcnParams p = apbench::init_fcn(3, 1, 2, std::vector<std::size_t>{3}, 6);
    const FcnParams other = apbench::init_fcn(3, 1, 2, std::vector<std::size_t>{3, 3}, 6);
    AdamState state = AdamState::zeros_like(other);
    EXPECT_THROW(apbench::adam_step(state, p, FcnGradients::zeros_like(p)),
                 std::invalid_argument);
}

TEST(FiniteDiffCheckTest, PassesAcrossLegalEpsRange) {
    const FcnParams p = apbench::init_fcn(3, 1, 2, std::vector<std::size_t>{4}, 77);
    std::mt19937_64 rng(4);
    // fish for a clean (non-kinked) trial, then re-check it at a second eps
    for (int trial = 0; trial < 50; ++trial) {
        const auto x = random_input(3, rng);
        const auto y = random_target(2, rng);
        const auto fine = apbench::finite_diff_check(p, x, y, 1e-5, LossNorm::Full);
        if (fine.kinked || fine.n_compared == 0) continue;
        EXPECT_LT(fine.max_rel_err, 1e-4);
        const auto coarse = apbench::finite_diff_check(p, x, y, 1e-4, LossNorm::Full);
        EXPECT_LT(coarse.max_rel_err, 1e-4);
        return;
    }
    FAIL() << "no clean trial found in 50 attempts";
}

TEST(FiniteDiffCheckTest, RejectsEpsOutsideContract) {
    const FcnParams p = apbench::init_fcn(3, 1, 2, std::vector<std::size_t>{4}, 1);
    const std::vector<double> x(3, 0.2);
    const std::vector<std::uint8_t> y{1, 0};
    EXPECT_THROW(apbench::finite_diff_check(p, x, y, 1e-8), std::invalid_argument);
    EXPECT_THROW(apbench::finite_diff_check(p, x, y, 1e-2), std::invalid_argument);
}

TEST(FiniteDiffCheckTest, ExactHitOnTargetIsKinkedAndFullySkipped) {
    // saturated head reproduces the binary target exactly: loss 0, all C_i = 0
    FcnParams p = zero_net(2, 1, 3, {2});
    p.layers[1].b = {100.0, -100.0, -100.0};  // outputs exactly (1, 0, 0)
    const std::vector<double> x{0.3, -0.4};
    const std::vector<std::uint8_t> y{1, 0, 0};
    EXPECT_DOUBLE_EQ(apbench::wasserstein_loss(apbench::fcn_forward(p, x).probs, y,
                                               LossNorm::Full)
                         .value,
                     0.0);
    const auto check = apbench::finite_diff_check(p, x, y, 1e-5);
    EXPECT_TRUE(check.kinked);
    EXPECT_EQ(check.n_compared, 0u);
    EXPECT_EQ(check.n_skipped, p.parameter_count());
}

TEST(DescentSanityTest, SingleWindowStepRarelyIncreasesLoss) {
    std::mt19937_64 rng(55);
    int non_increase = 0;
    const int trials = 100;
    for (int trial = 0; trial < trials; ++trial) {
        FcnParams p = apbench::init_fcn(4, 1, 3, std::vector<std::size_t>{6}, 500 + trial);
        const auto x = random_input(4, rng);
        const auto y = random_target(3, rng);

        ForwardCache cache;
        const auto pred = apbench::fcn_forward(p, x, &cache);
        const double before = apbench::wasserstein_loss(pred.probs, y, LossNorm::Full).value;
        const auto dpred = apbench::wasserstein_grad(pred.probs, y, LossNorm::Full);
        const FcnGradients g = apbench::fcn_backward(p, cache, dpred);

        AdamState state = AdamState::zeros_like(p);
        AdamConfig cfg;
        cfg.lr = 1e-4;
        apbench::adam_step(state, p, g, cfg);
        const double after =
            apbench::wasserstein_loss(apbench::fcn_forward(p, x).probs, y, LossNorm::Full)
                .value;
        if (after <= before + 1e-12) ++non_increase;
    }
    EXPECT_GE(non_increase, 95);
}
