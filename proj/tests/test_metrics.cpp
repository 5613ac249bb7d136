#include <gtest/gtest.h>

#include <boost/math/distributions/students_t.hpp>

#include "perfgraph/metrics.hpp"

using namespace perfgraph;

TEST(Regression, PerfectFit) {
    const std::vector<double> y{1, 2, 3, 5};
    const auto m = regression_metrics(y, y);
    EXPECT_EQ(m.rmse, 0.0);
    EXPECT_EQ(m.mae, 0.0);
    EXPECT_EQ(m.mape, 0.0);
    EXPECT_EQ(m.r2, 1.0);
}

TEST(Regression, MeanPredictorHasZeroR2) {
    const std::vector<double> y{1, 2, 3, 6};
    EXPECT_NEAR(regression_metrics(y, {3, 3, 3, 3}).r2, 0.0, 1e-15);
}

TEST(Regression, HandExample) {
    const auto m = regression_metrics({1, 2, 3}, {1, 2, 4});
    EXPECT_NEAR(m.rmse, std::sqrt(1.0 / 3.0), 1e-15);
    EXPECT_NEAR(m.mae, 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(m.r2, 0.5, 1e-15);
    EXPECT_NEAR(m.mape, (1.0 / 3.0) / 3.0, 1e-15);
}

TEST(Regression, ZeroTargetsExcludedFromMape) {
    const auto m = regression_metrics({0, 2}, {1, 3});
    EXPECT_DOUBLE_EQ(m.mape, 0.5);
}

TEST(Regression, InsufficientData) {
    try {
        regression_metrics({1}, {1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InsufficientData);
    }
}

TEST(Ranking, IdenticalAndReversed) {
    const std::vector<double> y{0.3, 1.2, 2.0, 5.5, 7.0};
    const auto same = ranking_metrics(y, {1, 2, 3, 4, 5}, 3);
    EXPECT_NEAR(same.spearman, 1.0, 1e-15);
    EXPECT_NEAR(same.kendall, 1.0, 1e-15);
    EXPECT_NEAR(same.ndcg, 1.0, 1e-12);
    const auto rev = ranking_metrics(y, {5, 4, 3, 2, 1}, 3);
    EXPECT_NEAR(rev.spearman, -1.0, 1e-15);
    EXPECT_NEAR(rev.kendall, -1.0, 1e-15);
}

TEST(Ranking, OneAdjacentSwap) {
    const auto m = ranking_metrics({1, 2, 3, 4}, {1, 3, 2, 4}, 4);
    EXPECT_NEAR(m.kendall, 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(m.spearman, 1.0 - 6.0 * 2.0 / (4.0 * 15.0), 1e-15);
}

TEST(Ranking, ConstantTargetIsUndefined) {
    const auto m = ranking_metrics({2, 2, 2}, {1, 2, 3}, 3);
    EXPECT_FALSE(m.defined);
}

TEST(Ranking, PermutationInvariant) {
    const std::vector<double> y{3, 1, 4, 1.5, 9, 2.6}, yh{2.9, 1.2, 3.5, 2.0, 8.0, 2.5};
    std::vector<double> y2{9, 2.6, 3, 1, 4, 1.5}, yh2{8.0, 2.5, 2.9, 1.2, 3.5, 2.0};
    const auto a = ranking_metrics(y, yh, 3), b = ranking_metrics(y2, yh2, 3);
    EXPECT_DOUBLE_EQ(a.spearman, b.spearman);
    EXPECT_DOUBLE_EQ(a.kendall, b.kendall);
    EXPECT_DOUBLE_EQ(a.ndcg, b.ndcg);
    const auto ra = regression_metrics(y, yh), rb = regression_metrics(y2, yh2);
    EXPECT_DOUBLE_EQ(ra.rmse, rb.rmse);
    EXPECT_DOUBLE_EQ(ra.r2, rb.r2);
}

TEST(Calibration, NineOfTenHitsInOneBin) {
    std::vector<double> y(10, 0.0), unc(10, 1.0);
    std::vector<Interval> iv(10, Interval{-1, 1});
    y[3] = 5.0;
    std::vector<std::size_t> order(10);
    std::iota(order.begin(), order.end(), 0);
    const auto s = interval_stats(y, iv, unc, order, 1, 0.95);
    EXPECT_NEAR(s.pice, 0.05, 1e-15);
    EXPECT_NEAR(s.picp, 0.9, 1e-15);
    EXPECT_NEAR(s.mce, 0.05, 1e-15);
}

TEST(Calibration, AllMissesGiveZeroCoverage) {
    std::vector<double> y(20, 10.0);
    std::vector<NigParams> p(20, NigParams{0, 1, 3, 1});
    const auto m = calibration_metrics(y, p, 1.0, 10);
    EXPECT_EQ(m.picp95, 0.0);
    EXPECT_GE(m.mis95, m.sharpness95);
}

TEST(Calibration, ExactNominalHitsGiveZeroEce) {
    // 20 samples per bin, 19 inside the 95% interval and one far outside.
    std::vector<double> y;
    std::vector<NigParams> p;
    for (int b = 0; b < 10; ++b)
        for (int i = 0; i < 20; ++i) {
            p.push_back(NigParams{0, 1, 3, 1.0 + b});
            y.push_back(i == 0 ? 1e6 : 0.0);
        }
    const auto m = calibration_metrics(y, p, 1.0, 10);
    EXPECT_NEAR(m.ece, 0.0, 1e-12);
    EXPECT_NEAR(m.mce, 0.0, 1e-12);
}

TEST(Calibration, TooFewSamplesReducesBins) {
    std::vector<double> y(7, 0.0);
    std::vector<NigParams> p(7, NigParams{});
    const auto m = calibration_metrics(y, p, 1.0, 10);
    EXPECT_TRUE(m.bins_reduced);
    EXPECT_EQ(m.bins, 1u);
}

TEST(Calibration, CoverageOfOwnPredictiveDistribution) {
    Rng rng = substream(21, "picp");
    std::vector<double> y;
    std::vector<NigParams> p;
    for (int i = 0; i < 100000; ++i) {
        const NigParams q{uniform(rng, -2, 2), std::exp(uniform(rng, -1, 1)), 1.5 + uniform(rng, 0, 5), std::exp(uniform(rng, -1, 1))};
        const boost::math::students_t_distribution<double> t(2 * q.alpha);
        y.push_back(q.gamma + student_t_scale(q) * boost::math::quantile(t, uniform(rng, 1e-12, 1 - 1e-12)));
        p.push_back(q);
    }
    const auto m = calibration_metrics(y, p, 1.0, 10);
    EXPECT_NEAR(m.picp95, 0.95, 0.01);
    EXPECT_NEAR(m.picp90, 0.90, 0.01);
    EXPECT_LT(m.ece, 0.01);
}

TEST(Pareto, SinglePoint) {
    EXPECT_EQ(pareto_front({{1, 1}}), (std::vector<ParetoPoint>{{1, 1}}));
}

TEST(Pareto, DominatedPointDropped) {
    EXPECT_EQ(pareto_front({{1, 2}, {2, 1}, {2, 2}}), (std::vector<ParetoPoint>{{1, 2}, {2, 1}}));
}

TEST(Pareto, AntiChainKept) {
    EXPECT_EQ(pareto_front({{3, 1}, {1, 3}, {2, 2}}), (std::vector<ParetoPoint>{{1, 3}, {2, 2}, {3, 1}}));
}

TEST(Pareto, AddingDominatedPointKeepsFront) {
    Rng rng = substream(22, "pareto");
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<ParetoPoint> pts;
        for (int i = 0; i < 20; ++i) pts.push_back({uniform(rng, 0, 10), uniform(rng, 0, 10)});
        const auto front = pareto_front(pts);
        const ParetoPoint& f = front[uniform_index(rng, front.size())];
        pts.push_back({f.time + uniform(rng, 0, 1), f.energy + uniform(rng, 0, 1)});
        EXPECT_EQ(pareto_front(pts), front);
    }
}

TEST(Pareto, BootstrapIsSeeded) {
    std::vector<ParetoPoint> pts{{1, 5}, {2, 3}, {3, 2.5}, {4, 1}, {3, 4}};
    const auto a = pareto_report(pts, 7, 200), b = pareto_report(pts, 7, 200);
    EXPECT_EQ(a.auc_mean, b.auc_mean);
    EXPECT_EQ(a.auc_std, b.auc_std);
    EXPECT_GT(a.auc, 0.0);
    EXPECT_LT(a.auc, 1.0);
}

TEST(Report, JsonHasUndefinedAsNull) {
    MetricReport r;
    TargetReport t;
    t.name = "makespan";
    t.regression.r2 = kUndefined;
    r.targets.push_back(t);
    r.pareto = pareto_report({{1, 1}, {2, 0.5}}, 1, 5);
    const auto j = to_json(r);
    EXPECT_TRUE(j.dump().find("null") != std::string::npos);
}
