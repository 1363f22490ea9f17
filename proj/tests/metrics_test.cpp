#include <apbench/loss.hpp>
#include <apbench/metrics.hpp>

#include <gtest/gtest.h>

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace {

using apbench::DensityPrediction;
using apbench::LossNorm;
using apbench::MetricsReport;
using apbench::VerdictCounts;
using apbench::WindowVerdict;

std::vector<double> constant_pred(std::size_t t, double value) {
    return std::vector<double>(t, value);
}

std::vector<std::uint8_t> labels_at(std::size_t t, std::initializer_list<std::size_t> ones) {
    std::vector<std::uint8_t> y(t, 0);
    for (std::size_t i : ones) y[i] = 1;
    return y;
}

}  // namespace

TEST(ClassifyWindowTest, FourCases) {
    const auto y_pos = labels_at(4, {0, 1, 2});
    const auto y_neg = labels_at(4, {});
    EXPECT_EQ(apbench::classify_window(std::vector<double>{0.2, 0.1, 0.1, 0.1}, y_pos, 0.1),
              WindowVerdict::TP);
    EXPECT_EQ(apbench::classify_window(constant_pred(4, 0.0125), y_neg, 0.1),
              WindowVerdict::TN);
    EXPECT_EQ(apbench::classify_window(constant_pred(4, 0.05), y_neg, 0.1),
              WindowVerdict::FP);
    EXPECT_EQ(apbench::classify_window(constant_pred(4, 0.0125), y_pos, 0.1),
              WindowVerdict::FN);
}

TEST(ClassifyWindowTest, TieAtThresholdCountsAsCrossing) {
    // sums land exactly on s; >= makes both sides positive
    const auto y = labels_at(2, {0});
    EXPECT_EQ(apbench::classify_window(std::vector<double>{0.25, 0.25}, y, 0.5),
              WindowVerdict::TP);
    EXPECT_EQ(apbench::classify_window(std::vector<double>{0.25, 0.25},
                                       labels_at(2, {}), 0.5),
              WindowVerdict::FP);
}

TEST(ClassifyWindowTest, RejectsLengthMismatch) {
    EXPECT_THROW(apbench::classify_window(constant_pred(3, 0.1), labels_at(2, {}), 0.1),
                 std::invalid_argument);
}

TEST(ClassifyWindowTest, VerdictNames) {
    EXPECT_STREQ(apbench::to_string(WindowVerdict::TP), "TP");
    EXPECT_STREQ(apbench::to_string(WindowVerdict::FP), "FP");
    EXPECT_STREQ(apbench::to_string(WindowVerdict::FN), "FN");
    EXPECT_STREQ(apbench::to_string(WindowVerdict::TN), "TN");
}

TEST(ExistenceScoreTest, WorkedExample) {
    VerdictCounts c;
    c.tp = 3;
    c.fp = 1;
    c.fn = 1;
    EXPECT_DOUBLE_EQ(apbench::existence_score(c), 0.75);
}

TEST(ExistenceScoreTest, PerfectDetection) {
    VerdictCounts c;
    c.tp = 7;
    c.tn = 100;
    EXPECT_DOUBLE_EQ(apbench::existence_score(c), 1.0);
}

TEST(ExistenceScoreTest, DegenerateAllNegativeIsOne) {
    VerdictCounts c;
    c.tn = 42;
    EXPECT_DOUBLE_EQ(apbench::existence_score(c), 1.0);
}

TEST(ExistenceScoreTest, RejectsNegativeCounts) {
    VerdictCounts c;
    c.tp = -1;
    EXPECT_THROW(apbench::existence_score(c), std::invalid_argument);
}

TEST(DensityScoreTest, ExactMassIsOne) {
    const auto y = labels_at(20, {3, 4, 5});
    std::vector<double> pred(y.begin(), y.end());
    EXPECT_DOUBLE_EQ(apbench::density_score(pred, y), 1.0);
}

TEST(DensityScoreTest, WorkedExample) {
    // sum(pred) = 20 * 0.26 = 5.2 against 5 labels: 1 - 0.2/20 = 0.99
    const auto y = labels_at(20, {0, 1, 2, 3, 4});
    EXPECT_NEAR(apbench::density_score(constant_pred(20, 0.26), y), 0.99, 1e-12);
}

TEST(DensityScoreTest, MaximalUnderPredictionIsZero) {
    std::vector<std::uint8_t> y(20, 1);
    EXPECT_DOUBLE_EQ(apbench::density_score(constant_pred(20, 0.0), y), 0.0);
}

TEST(DensityScoreTest, RejectsLengthMismatch) {
    EXPECT_THROW(apbench::density_score(constant_pred(3, 0.1), labels_at(4, {})),
                 std::invalid_argument);
}

TEST(LeadTimeScoreTest, ExactTimingIsOne) {
    const auto y = labels_at(20, {6, 7, 8});
    auto pred = constant_pred(20, 0.0);
    pred[6] = 0.9;
    const auto lead = apbench::lead_time_score(pred, y, 0.1);
    ASSERT_TRUE(lead.has_value());
    EXPECT_DOUBLE_EQ(*lead, 1.0);
}

TEST(LeadTimeScoreTest, WorkedExample) {
    // first crossing at 4, first label at 6: 1 - 2/20 = 0.9
    const auto y = labels_at(20, {6, 7, 8, 9, 10});
    auto pred = constant_pred(20, 0.04);
    pred[4] = 0.5;
    const auto lead = apbench::lead_time_score(pred, y, 0.1);
    ASSERT_TRUE(lead.has_value());
    EXPECT_NEAR(*lead, 0.9, 1e-12);
}

TEST(LeadTimeScoreTest, NoCrossingIsNonLocalizable) {
    // sum 0.8 clears s but no single step does
    const auto y = labels_at(20, {6, 7, 8, 9, 10});
    EXPECT_FALSE(apbench::lead_time_score(constant_pred(20, 0.04), y, 0.1).has_value());
}

TEST(LeadTimeScoreTest, RejectsWindowWithoutLabelMass) {
    EXPECT_THROW(apbench::lead_time_score(constant_pred(20, 0.5), labels_at(20, {}), 0.1),
                 std::invalid_argument);
}

TEST(DiceScoreTest, WorkedExample) {
    // indicator(pred >= 0.1) = {1,2}, labels = {1}: 2*1/(2+1)
    std::vector<double> pred{0.0, 0.5, 0.5, 0.0};
    EXPECT_NEAR(apbench::dice_score(pred, labels_at(4, {1}), 0.1), 2.0 / 3.0, 1e-12);
}

TEST(DiceScoreTest, PerfectOverlapIsOne) {
    const auto y = labels_at(8, {2, 3});
    std::vector<double> pred(y.begin(), y.end());
    EXPECT_DOUBLE_EQ(apbench::dice_score(pred, y, 0.5), 1.0);
}

TEST(DiceScoreTest, EmptyPredictionAgainstLabelsIsZero) {
    EXPECT_DOUBLE_EQ(apbench::dice_score(constant_pred(8, 0.01), labels_at(8, {1}), 0.1),
                     0.0);
}

TEST(DiceScoreTest, BothEmptyIsOne) {
    EXPECT_DOUBLE_EQ(apbench::dice_score(constant_pred(8, 0.01), labels_at(8, {}), 0.1),
                     1.0);
}

TEST(DiceScoreTest, SymmetricInTheTwoSets) {
    // feed each binary set as the prediction of the other; dice must agree
    const auto a = labels_at(10, {1, 2, 3});
    const auto b = labels_at(10, {3, 4});
    std::vector<double> a_pred(a.begin(), a.end());
    std::vector<double> b_pred(b.begin(), b.end());
    EXPECT_DOUBLE_EQ(apbench::dice_score(a_pred, b, 0.5),
                     apbench::dice_score(b_pred, a, 0.5));
}

namespace {

DensityPrediction as_pred(std::vector<double> probs) {
    DensityPrediction p;
    p.probs = std::move(probs);
    return p;
}

}  // namespace

TEST(AggregateReportTest, SinglesPerfectWindow) {
    const auto y = labels_at(20, {5, 6, 7});
    std::vector<DensityPrediction> preds{as_pred({y.begin(), y.end()})};
    std::vector<std::vector<std::uint8_t>> targets{y};
    const MetricsReport r = apbench::aggregate_report(preds, targets, 0.1, LossNorm::Full);
    EXPECT_EQ(r.counts.tp, 1);
    EXPECT_EQ(r.n_windows, 1);
    EXPECT_DOUBLE_EQ(r.existence, 1.0);
    ASSERT_TRUE(r.mean_density.has_value());
    EXPECT_DOUBLE_EQ(*r.mean_density, 1.0);
    ASSERT_TRUE(r.mean_lead_time.has_value());
    EXPECT_DOUBLE_EQ(*r.mean_lead_time, 1.0);
    ASSERT_TRUE(r.mean_dice.has_value());
    EXPECT_DOUBLE_EQ(*r.mean_dice, 1.0);
    EXPECT_DOUBLE_EQ(r.mean_wasserstein, 0.0);
    EXPECT_EQ(r.n_tp_localizable, 1);
}

TEST(AggregateReportTest, AllTnStreamUsesDegenerateConventions) {
    std::vector<DensityPrediction> preds(3, as_pred(constant_pred(20, 0.001)));
    std::vector<std::vector<std::uint8_t>> targets(3, labels_at(20, {}));
    const MetricsReport r = apbench::aggregate_report(preds, targets, 0.1, LossNorm::Full);
    EXPECT_EQ(r.counts.tn, 3);
    EXPECT_DOUBLE_EQ(r.existence, 1.0);
    EXPECT_FALSE(r.mean_density.has_value());
    EXPECT_FALSE(r.mean_lead_time.has_value());
    EXPECT_FALSE(r.mean_dice.has_value());
    EXPECT_FALSE(r.mean_wasserstein_tp.has_value());
    EXPECT_GT(r.mean_wasserstein, 0.0);
}

TEST(AggregateReportTest, MixedStreamMatchesHandComputedMeans) {
    const double kSmall = 0.00390625;  // 1/256, exactly representable
    const std::size_t t = 20;

    // TP with over-predicted mass: density 0.99, lead 1, dice 10/25
    auto p1 = constant_pred(t, 0.26);
    auto y1 = labels_at(t, {0, 1, 2, 3, 4});
    // TP crossing at 4 vs first label 6: lead 0.9, dice 0
    auto p2 = constant_pred(t, kSmall);
    p2[4] = 0.5;
    auto y2 = labels_at(t, {6, 7, 8, 9, 10});
    // TP with exact unit mass: density 1, lead 1, dice 2/3
    auto p3 = constant_pred(t, 0.0);
    p3[1] = 0.5;
    p3[2] = 0.5;
    auto y3 = labels_at(t, {1});
    // FP / FN / TN fillers
    auto p4 = constant_pred(t, 0.26);
    auto y4 = labels_at(t, {});
    auto p5 = constant_pred(t, kSmall);  // sum 0.078125 < 0.1
    auto y5 = labels_at(t, {6, 7, 8, 9, 10});
    auto p6 = constant_pred(t, kSmall);
    auto y6 = labels_at(t, {});

    std::vector<DensityPrediction> preds{as_pred(p1), as_pred(p2), as_pred(p3),
                                         as_pred(p4), as_pred(p5), as_pred(p6)};
    std::vector<std::vector<std::uint8_t>> targets{y1, y2, y3, y4, y5, y6};
    const MetricsReport r = apbench::aggregate_report(preds, targets, 0.1, LossNorm::Full);

    EXPECT_EQ(r.counts.tp, 3);
    EXPECT_EQ(r.counts.fp, 1);
    EXPECT_EQ(r.counts.fn, 1);
    EXPECT_EQ(r.counts.tn, 1);
    EXPECT_EQ(r.n_windows, 6);
    EXPECT_NEAR(r.existence, 0.75, 1e-12);

    const double d2 = 1.0 - (5.0 - (0.5 + 19 * kSmall)) / 20.0;
    ASSERT_TRUE(r.mean_density.has_value());
    EXPECT_NEAR(*r.mean_density, (0.99 + d2 + 1.0) / 3.0, 1e-12);
    ASSERT_TRUE(r.mean_lead_time.has_value());
    EXPECT_NEAR(*r.mean_lead_time, (1.0 + 0.9 + 1.0) / 3.0, 1e-12);
    ASSERT_TRUE(r.mean_dice.has_value());
    EXPECT_NEAR(*r.mean_dice, (0.4 + 0.0 + 2.0 / 3.0) / 3.0, 1e-12);
    EXPECT_EQ(r.n_tp_localizable, 3);

    double w_all = 0.0, w_tp = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double w =
            apbench::wasserstein_loss(preds[i].probs, targets[i], LossNorm::Full).value;
        w_all += w;
        if (i < 3) w_tp += w;
    }
    EXPECT_NEAR(r.mean_wasserstein, w_all / 6.0, 1e-12);
    ASSERT_TRUE(r.mean_wasserstein_tp.has_value());
    EXPECT_NEAR(*r.mean_wasserstein_tp, w_tp / 3.0, 1e-12);
}

TEST(AggregateReportTest, NonLocalizableTpExcludedFromLeadMeanOnly) {
    auto p1 = constant_pred(20, 0.0);
    p1[2] = 0.9;
    const auto y1 = labels_at(20, {2, 3});
    const auto p2 = constant_pred(20, 0.04);  // sum 0.8, no step crossing
    const auto y2 = labels_at(20, {5, 6});
    std::vector<DensityPrediction> preds{as_pred(p1), as_pred(p2)};
    std::vector<std::vector<std::uint8_t>> targets{y1, y2};
    const MetricsReport r = apbench::aggregate_report(preds, targets, 0.1, LossNorm::Full);
    EXPECT_EQ(r.counts.tp, 2);
    EXPECT_EQ(r.n_tp_localizable, 1);
    ASSERT_TRUE(r.mean_lead_time.has_value());
    EXPECT_DOUBLE_EQ(*r.mean_lead_time, 1.0);  // only the localizable window
    ASSERT_TRUE(r.mean_dice.has_value());  // dice still averages both TPs
    EXPECT_NEAR(*r.mean_dice, (2.0 / 3.0 + 0.0) / 2.0, 1e-12);
}

TEST(AggregateReportTest, RejectsEmptyAndMismatchedInput) {
    std::vector<DensityPrediction> none;
    std::vector<std::vector<std::uint8_t>> no_targets;
    EXPECT_THROW(apbench::aggregate_report(none, no_targets, 0.1, LossNorm::Full),
                 std::invalid_argument);

    std::vector<DensityPrediction> preds{as_pred(constant_pred(4, 0.1))};
    std::vector<std::vector<std::uint8_t>> two_targets{labels_at(4, {}), labels_at(4, {})};
    EXPECT_THROW(apbench::aggregate_report(preds, two_targets, 0.1, LossNorm::Full),
                 std::invalid_argument);
}

TEST(MetricBoundsTest, TenThousandRandomInputsStayInUnitInterval) {
    std::mt19937_64 rng(20240817);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> t_dist(1, 24);
    std::bernoulli_distribution coin(0.3);

    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t t = t_dist(rng);
        std::vector<double> pred(t);
        std::vector<std::uint8_t> y(t);
        for (std::size_t i = 0; i < t; ++i) {
            pred[i] = unit(rng);
            y[i] = coin(rng) ? 1 : 0;
        }
        const double s = 0.99 * unit(rng);

        const double density = apbench::density_score(pred, y);
        EXPECT_GE(density, 0.0);
        EXPECT_LE(density, 1.0);

        const double dice = apbench::dice_score(pred, y, s);
        EXPECT_GE(dice, 0.0);
        EXPECT_LE(dice, 1.0);

        double label_sum = 0.0;
        for (auto v : y) label_sum += v;
        if (label_sum >= s && label_sum > 0.0) {
            if (const auto lead = apbench::lead_time_score(pred, y, s)) {
                EXPECT_GE(*lead, 0.0);
                EXPECT_LE(*lead, 1.0);
            }
        }
    }
}

TEST(MetricBoundsTest, ExistenceBoundedOnRandomCounts) {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::int64_t> c(0, 1000);
    for (int trial = 0; trial < 1000; ++trial) {
        VerdictCounts counts;
        counts.tp = c(rng);
        counts.fp = c(rng);
        counts.fn = c(rng);
        counts.tn = c(rng);
        const double e = apbench::existence_score(counts);
        EXPECT_GE(e, 0.0);
        EXPECT_LE(e, 1.0);
    }
}

TEST(ThresholdMonotonicityTest, RaisingThresholdNeverAddsPredictedPositives) {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::bernoulli_distribution coin(0.2);
    const std::size_t t = 20;

    for (int trial = 0; trial < 100; ++trial) {
        std::vector<std::vector<double>> preds(30, std::vector<double>(t));
        std::vector<std::vector<std::uint8_t>> targets(30, std::vector<std::uint8_t>(t));
        for (auto& p : preds)
            for (auto& v : p) v = unit(rng);
        for (auto& y : targets)
            for (auto& v : y) v = coin(rng) ? 1 : 0;

        std::size_t prev_positive = preds.size() + 1;
        for (double s : {0.0, 0.1, 0.3, 0.5, 0.7, 0.9}) {
            std::size_t positive = 0;
            for (std::size_t i = 0; i < preds.size(); ++i) {
                const WindowVerdict v = apbench::classify_window(preds[i], targets[i], s);
                if (v == WindowVerdict::TP || v == WindowVerdict::FP) ++positive;
            }
            EXPECT_LE(positive, prev_positive);
            prev_positive = positive;
        }
    }
}

TEST(MetricIdentityTest, BinaryExactPredictionMaximizesEverything) {
    std::mt19937_64 rng(5);
    std::bernoulli_distribution coin(0.4);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::uint8_t> y(12);
        for (auto& v : y) v = coin(rng) ? 1 : 0;
        std::vector<double> pred(y.begin(), y.end());
        EXPECT_DOUBLE_EQ(apbench::density_score(pred, y), 1.0);
        EXPECT_DOUBLE_EQ(apbench::dice_score(pred, y, 0.5), 1.0);
        EXPECT_DOUBLE_EQ(apbench::wasserstein_loss(pred, y, LossNorm::Full).value, 0.0);
        bool any = false;
        for (auto v : y) any = any || v == 1;
        if (any) {
            const auto lead = apbench::lead_time_score(pred, y, 0.5);
            ASSERT_TRUE(lead.has_value());
            EXPECT_DOUBLE_EQ(*lead, 1.0);
        }
    }
}
