#include <gtest/gtest.h>

#include <boost/math/distributions/gamma.hpp>

#include "oracles.hpp"
#include "perfgraph/nig.hpp"
#include "perfgraph/rng.hpp"

using namespace perfgraph;

namespace {

NigParams random_params(Rng& rng) {
    return {uniform(rng, -2, 2), std::exp(uniform(rng, -2, 2)), 1.2 + std::exp(uniform(rng, -1, 2)), std::exp(uniform(rng, -2, 1))};
}

double loss_value(const std::vector<NigVector>& pred, const std::vector<TargetVector>& y, const std::vector<SamplePair>& pairs,
                  const LossConfig& cfg) {
    return evidential_loss(pred, y, pairs, cfg).value;
}

} // namespace

TEST(Decompose, HandValues) {
    const auto r = decompose({5, 2, 3, 4});
    EXPECT_EQ(r.mean, 5);
    EXPECT_EQ(r.aleatoric, 2);
    EXPECT_EQ(r.epistemic, 1);
    EXPECT_EQ(r.total, 3);
    const auto u = decompose({0, 1, 2, 1});
    EXPECT_EQ(u.aleatoric, 1);
    EXPECT_EQ(u.epistemic, 1);
}

TEST(Decompose, LargeEvidenceLimit) {
    const auto r = decompose({0, 1e9, 3, 2});
    EXPECT_LT(r.epistemic, 1e-8 * r.aleatoric);
}

TEST(Decompose, AlphaAtMostOneRejected) {
    try {
        decompose({0, 1, 1.0, 1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidParams);
    }
}

TEST(Decompose, TotalIsExactSum) {
    Rng rng = substream(5, "nig");
    for (int i = 0; i < 50; ++i) {
        const auto r = decompose(random_params(rng));
        EXPECT_EQ(r.total, r.aleatoric + r.epistemic);
    }
}

TEST(NigNll, MatchesQuadratureAtReferencePoint) {
    const NigParams p{0, 1, 2, 1};
    EXPECT_NEAR(nig_nll(0.0, p), oracle::nll_by_quadrature(0.0, p), 1e-6);
}

TEST(NigNll, MatchesQuadratureOnRandomDraws) {
    Rng rng = substream(6, "nig");
    for (int i = 0; i < 50; ++i) {
        const NigParams p = random_params(rng);
        const double y = p.gamma + uniform(rng, -3, 3);
        EXPECT_NEAR(nig_nll(y, p), oracle::nll_by_quadrature(y, p), 1e-6);
    }
}

TEST(NigNll, EqualsStudentTNll) {
    const NigParams p{0.3, 1.7, 2.5, 0.8};
    for (double y : {-2.0, 0.0, 0.3, 4.0}) EXPECT_NEAR(nig_nll(y, p), student_t_nll(y, p.gamma, student_t_scale(p), 2 * p.alpha), 1e-12);
}

TEST(NigNll, SymmetricAndMinimizedAtMean) {
    const NigParams p{1.5, 0.7, 3.0, 2.0};
    for (double c : {0.1, 1.0, 5.0}) {
        EXPECT_NEAR(nig_nll(p.gamma + c, p), nig_nll(p.gamma - c, p), 1e-12);
        EXPECT_GT(nig_nll(p.gamma + c, p), nig_nll(p.gamma, p));
    }
}

TEST(NigNll, NonFiniteInputIsNumericError) {
    try {
        nig_nll(NAN, {0, 1, 2, 1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NumericError);
    }
}

TEST(EvidentialLoss, DegenerateWeightsGiveMeanNll) {
    Rng rng = substream(8, "loss");
    std::vector<NigVector> pred(3);
    std::vector<TargetVector> y(3);
    double nll = 0;
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t k = 0; k < kMetrics; ++k) {
            pred[i][k] = random_params(rng);
            y[i][k] = uniform(rng, -1, 1);
            nll += nig_nll(y[i][k], pred[i][k]);
        }
    const auto l = evidential_loss(pred, y, std::vector<SamplePair>{{0, 1}}, LossConfig{0.0, 0.0, 0.01});
    EXPECT_NEAR(l.value, nll / 15.0, 1e-12);
}

TEST(EvidentialLoss, ExactFitHasNoRegularizer) {
    NigVector p;
    TargetVector y;
    for (std::size_t k = 0; k < kMetrics; ++k) {
        p[k] = {0.5 * static_cast<double>(k), 2, 3, 1};
        y[k] = p[k].gamma;
    }
    const auto with = evidential_loss(std::vector<NigVector>{p}, std::vector<TargetVector>{y}, {}, LossConfig{0.5, 0, 0});
    const auto without = evidential_loss(std::vector<NigVector>{p}, std::vector<TargetVector>{y}, {}, LossConfig{0.0, 0, 0});
    EXPECT_EQ(with.value, without.value);
}

TEST(EvidentialLoss, SingleSampleHandValue) {
    NigVector p;
    TargetVector y{};
    for (auto& x : p) x = {0, 1, 2, 1};
    y[0] = 0.5;
    const double lambda = 0.01;
    double expect = oracle::nll_by_quadrature(0.5, p[0]) + lambda * 0.5 * (2 * 1 + 2);
    for (std::size_t k = 1; k < kMetrics; ++k) expect += oracle::nll_by_quadrature(0.0, p[k]);
    expect /= kMetrics;
    const auto l = evidential_loss(std::vector<NigVector>{p}, std::vector<TargetVector>{y}, {}, LossConfig{lambda, 0.1, 0.01});
    EXPECT_NEAR(l.value, expect, 1e-6);
}

TEST(EvidentialLoss, EmptyBatch) {
    try {
        evidential_loss(std::vector<NigVector>{}, std::vector<TargetVector>{}, {}, LossConfig{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EmptyBatch);
    }
}

TEST(EvidentialLoss, GradientMatchesFiniteDifferences) {
    Rng rng = substream(9, "grad");
    std::vector<NigVector> pred(4);
    std::vector<TargetVector> y(4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t k = 0; k < kMetrics; ++k) {
            pred[i][k] = random_params(rng);
            y[i][k] = pred[i][k].gamma + uniform(rng, -2, 2);
        }
    const std::vector<SamplePair> pairs{{0, 1}, {1, 2}, {0, 3}, {2, 3}};
    const LossConfig cfg{0.01, 0.1, 0.01};
    const auto l = evidential_loss(pred, y, pairs, cfg);
    double worst = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t k = 0; k < kMetrics; ++k)
            for (int f = 0; f < 4; ++f) {
                auto field = [&](NigParams& p) -> double& { return f == 0 ? p.gamma : f == 1 ? p.nu : f == 2 ? p.alpha : p.beta; };
                const double x = field(pred[i][k]);
                const double h = 1e-6 * std::max(1.0, std::abs(x));
                auto up = pred, down = pred;
                field(up[i][k]) = x + h;
                field(down[i][k]) = x - h;
                const double numeric = (loss_value(up, y, pairs, cfg) - loss_value(down, y, pairs, cfg)) / (2 * h);
                const NigGrad& g = l.grad[i][k];
                const double analytic = f == 0 ? g.gamma : f == 1 ? g.nu : f == 2 ? g.alpha : g.beta;
                worst = std::max(worst, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6}));
            }
    EXPECT_LT(worst, 1e-4);
}

TEST(RankingLoss, HingeCases) {
    const double m = 0.1;
    EXPECT_EQ(ranking_loss(std::vector<RankPair>{{0.0, 0.2, 1.0, 2.0}}, m), 0.0);
    EXPECT_NEAR(ranking_loss(std::vector<RankPair>{{0.5, 0.5, 1.0, 2.0}}, m), m, 1e-15);
    EXPECT_NEAR(ranking_loss(std::vector<RankPair>{{0.7, 0.4, 1.0, 2.0}}, m), m + 0.3, 1e-15);
    EXPECT_EQ(ranking_loss(std::vector<RankPair>{{0.7, 0.4, 1.0, 1.0}}, m), 0.0);
}

TEST(PredictionInterval, SymmetricAndShrinking) {
    const NigParams p{2, 1.5, 3, 2};
    const auto iv = prediction_interval(p, 0.9);
    EXPECT_NEAR(iv.hi - p.gamma, p.gamma - iv.lo, 1e-12);
    const auto tiny = prediction_interval(p, 1e-9);
    EXPECT_LT(tiny.hi - tiny.lo, 1e-8);
}

TEST(PredictionInterval, MatchesBisectionQuantile) {
    const NigParams p{0, 1, 30, 29};
    const auto iv = prediction_interval(p, 0.95);
    const double expect = oracle::t_quantile_bisect(0.975, 60) * student_t_scale(p);
    EXPECT_NEAR((iv.hi - iv.lo) / 2, expect, 1e-3 * expect);
}

TEST(PredictionInterval, InvalidLevel) {
    for (double lvl : {0.0, 1.0, -0.5}) {
        try {
            prediction_interval({0, 1, 2, 1}, lvl);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
        }
    }
}

TEST(PredictionInterval, GenerativeCoverage) {
    const NigParams p{1.0, 2.0, 3.0, 1.5};
    const auto iv = prediction_interval(p, 0.95);
    Rng rng = substream(10, "coverage");
    boost::math::gamma_distribution<double> g(p.alpha, 1.0 / p.beta);
    int hit = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double sigma2 = 1.0 / boost::math::quantile(g, uniform01(rng) * (1 - 1e-16) + 1e-17);
        const double mu = p.gamma + std::sqrt(sigma2 / p.nu) * standard_normal(rng);
        const double y = mu + std::sqrt(sigma2) * standard_normal(rng);
        hit += y >= iv.lo && y <= iv.hi;
    }
    EXPECT_NEAR(static_cast<double>(hit) / n, 0.95, 0.01);
}
