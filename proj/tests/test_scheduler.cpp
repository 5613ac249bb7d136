#include <gtest/gtest.h>

#include "perfgraph/scheduler.hpp"

using namespace perfgraph;

namespace {

Action act(std::vector<std::uint8_t> mask, int level) { return uniform_action(default_device_sheet(), std::move(mask), level); }

CandidateScore score(double time, double energy, double epistemic, double upper, Action a = act({1, 0, 0, 0}, 0)) {
    CandidateScore s;
    s.action = std::move(a);
    s.ok = true;
    s.mean[0] = time;
    s.mean[1] = energy;
    s.uncertainty[0].epistemic = epistemic;
    s.interval[0] = {time * 0.5, upper};
    s.interval[1] = {energy * 0.9, energy * 1.1};
    return s;
}

ModelConfig tiny_config() {
    ModelConfig c;
    c.hidden = 8;
    c.layers = 1;
    c.heads = 1;
    c.edge_proj = 4;
    c.trunk = 8;
    c.trunk_layers = 1;
    return c;
}

struct Fixture {
    DeviceSheet sheet = default_device_sheet();
    Surrogate model{tiny_config(), 31};
    Predictor pred;
    SyntheticWorkload work = make_workload("fft", 1.0);

    Fixture() {
        pred.model = &model;
        pred.moments.mean.assign(feature_names().size(), 0.0);
        pred.moments.std.assign(feature_names().size(), 1.0);
    }

    std::vector<CandidateScore> scores(const std::vector<Action>& actions) const {
        const RuntimeState st = RuntimeState::idle(sheet);
        std::vector<HeteroGraph> gs;
        for (const auto& a : actions) gs.push_back(build_hetero_graph(work.dag, sheet, st, a));
        return score_candidates(pred, actions, gs);
    }
};

const Fixture& fx() {
    static const Fixture f;
    return f;
}

} // namespace

TEST(Gate, ThresholdIsInclusive) {
    GateConfig g;
    g.eta = 0.5;
    g.t_max_time = 10.0;
    EXPECT_TRUE(passes_gate(score(1, 1, 0.5, 10.0), g));
    EXPECT_FALSE(passes_gate(score(1, 1, 0.51, 5.0), g));
    EXPECT_FALSE(passes_gate(score(1, 1, 0.1, 10.0 + 1e-9), g));
    const auto r = uncertainty_gate({score(1, 1, 0.51, 5.0), score(1, 1, 0.1, 11.0), score(1, 1, 0.5, 10.0), CandidateScore{}}, g);
    EXPECT_EQ(r.kept, (std::vector<std::size_t>{2}));
    ASSERT_EQ(r.rejected.size(), 3u);
    EXPECT_EQ(r.rejected[0].second, RejectReason::HighEpistemic);
    EXPECT_EQ(r.rejected[1].second, RejectReason::DeadlineRisk);
    EXPECT_EQ(r.rejected[2].second, RejectReason::ScoreError);
}

TEST(Select, UniqueMinimum) {
    const std::vector<CandidateScore> s{score(3, 1, 0, 0), score(1, 9, 0, 0), score(2, 0.1, 0, 0)};
    EXPECT_EQ(select_index(s, {0, 1, 2}), 1u);
    EXPECT_EQ(select_index(s, {0, 2}), 2u);
}

TEST(Select, TimeTieGoesToLowerEnergy) {
    const std::vector<CandidateScore> s{score(1, 5, 0, 0), score(1, 4, 0, 0), score(2, 1, 0, 0)};
    EXPECT_EQ(select_index(s, {0, 1, 2}), 1u);
}

TEST(Select, FullTieGoesToSmallerAction) {
    const Action small = act({0, 1, 0, 0}, 1), big = act({1, 0, 0, 0}, 0);
    ASSERT_LT(small, big);
    const std::vector<CandidateScore> s{score(1, 1, 0, 0, big), score(1, 1, 0, 0, small)};
    EXPECT_EQ(select_action(s, {0, 1}), small);
}

TEST(Select, EmptyKeptSetIsNoSafeAction) {
    try {
        select_index({score(1, 1, 0, 0)}, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NoSafeAction);
    }
}

TEST(Score, BatchEqualsOneByOne) {
    const std::vector<Action> acts{act({1, 1, 1, 1}, 2), act({1, 0, 0, 0}, 0), act({0, 0, 1, 1}, 1), act({1, 1, 0, 0}, 2), act({0, 1, 0, 1}, 0)};
    const auto batch = fx().scores(acts);
    ASSERT_EQ(batch.size(), acts.size());
    for (std::size_t i = 0; i < acts.size(); ++i) {
        const auto one = fx().scores({acts[i]});
        EXPECT_EQ(batch[i].action, acts[i]);
        for (std::size_t k = 0; k < kMetrics; ++k) {
            EXPECT_NEAR(batch[i].mean[k], one[0].mean[k], 1e-12 * std::max(1.0, std::abs(one[0].mean[k])));
            EXPECT_NEAR(batch[i].uncertainty[k].epistemic, one[0].uncertainty[k].epistemic, 1e-12);
        }
    }
}

TEST(Score, DuplicatesScoreIdentically) {
    const Action a = act({1, 0, 1, 0}, 1);
    const auto s = fx().scores({a, a, a});
    for (std::size_t k = 0; k < kMetrics; ++k) {
        EXPECT_EQ(s[0].mean[k], s[1].mean[k]);
        EXPECT_EQ(s[0].mean[k], s[2].mean[k]);
    }
}

TEST(Score, TemperatureWidensIntervals) {
    const Action a = act({1, 1, 1, 1}, 2);
    const auto s1 = fx().scores({a});
    Fixture hot;
    for (auto& t : hot.pred.calib.tau) t = 2.0;
    const auto s2 = hot.scores({a});
    EXPECT_NEAR(s2[0].uncertainty[0].epistemic, 4.0 * s1[0].uncertainty[0].epistemic, 1e-12);
    EXPECT_GT(s2[0].interval[0].hi, s1[0].interval[0].hi);
    EXPECT_EQ(s2[0].mean[0], s1[0].mean[0]);
}

TEST(Gate, KeptSetGrowsWithEta) {
    const auto s = fx().scores(enumerate_actions(fx().sheet, {25, 25, 25, 25}, 50));
    std::vector<double> epi;
    for (const auto& c : s) epi.push_back(c.uncertainty[0].epistemic);
    std::sort(epi.begin(), epi.end());
    const double mid = epi[epi.size() / 2];
    std::size_t prev = 0;
    for (double eta : {0.0, 0.5 * mid, mid, 2.0 * mid, epi.back()}) {
        GateConfig g;
        g.eta = eta;
        const std::size_t n = uncertainty_gate(s, g).kept.size();
        EXPECT_GE(n, prev);
        prev = n;
    }
    EXPECT_EQ(prev, s.size());
}

TEST(Replay, RejectsMixedProvenance) {
    ReplayBuffer real(2, false);
    Transition t;
    t.synthetic = true;
    EXPECT_THROW(real.push(t), Error);
    t.synthetic = false;
    real.push(t);
    real.push(t);
    real.push(t);
    EXPECT_EQ(real.size(), 2u);
}

TEST(QTable, UnvisitedActionsCountAsZero) {
    QTable q(2);
    Transition t;
    t.action = act({1, 0, 0, 0}, 0);
    t.reward = -4.0;
    t.terminal = true;
    q.update(t, 0.5, 0.5);
    EXPECT_EQ(q.get(t.state, t.action), -2.0);
    EXPECT_EQ(q.max_value(t.state), 0.0);
    t.action = act({1, 0, 0, 0}, 1);
    q.update(t, 0.5, 0.5);
    EXPECT_EQ(q.max_value(t.state), -2.0);
}

TEST(Dyna, DrawsZetaSyntheticSamplesPerStep) {
    DynaConfig c;
    c.episodes = 3;
    c.steps_per_episode = 2;
    c.zeta = 10;
    GateConfig g;
    g.eta = 1e9;
    const auto t = dyna_q_run(fx().sheet, EnvConfig{}, fx().work, fx().pred, g, baseline_reward(fx().work, fx().sheet), c, 42);
    ASSERT_EQ(t.steps.size(), 6u);
    for (const auto& r : t.steps) EXPECT_EQ(r.synthetic_draws, 10);
    EXPECT_EQ(t.real_transitions, 6u);
    EXPECT_EQ(gate_violations(t, g), 0u);
}

TEST(Dyna, ZeroEtaAdmitsNothing) {
    DynaConfig c;
    c.episodes = 2;
    c.steps_per_episode = 2;
    c.zeta = 5;
    GateConfig g;
    g.eta = 0.0;
    const auto t = dyna_q_run(fx().sheet, EnvConfig{}, fx().work, fx().pred, g, baseline_reward(fx().work, fx().sheet), c, 42);
    EXPECT_EQ(t.synthetic_transitions, 0u);
    for (const auto& r : t.steps) {
        EXPECT_TRUE(r.fallback);
        EXPECT_EQ(r.action, min_frequency_action(fx().sheet));
    }
}

TEST(Dyna, SameSeedSameTrace) {
    DynaConfig c;
    c.episodes = 3;
    c.steps_per_episode = 3;
    c.zeta = 4;
    GateConfig g;
    g.eta = 1e9;
    const auto r = baseline_reward(fx().work, fx().sheet);
    EXPECT_EQ(trace_csv(dyna_q_run(fx().sheet, EnvConfig{}, fx().work, fx().pred, g, r, c, 5)),
              trace_csv(dyna_q_run(fx().sheet, EnvConfig{}, fx().work, fx().pred, g, r, c, 5)));
}

TEST(Reward, BaselineRunScoresMinusOnePlusEnergyWeight) {
    const auto r = baseline_reward(fx().work, fx().sheet);
    EXPECT_NEAR(r.reward(r.m_target, r.e_target, 30.0), -(1.0 + 0.1), 1e-12);
    EXPECT_NEAR(r.reward(r.m_target, r.e_target, r.cap_c + 2.0), -(1.1 + 2.0), 1e-12);
}

TEST(Digest, BinsAndDeciles) {
    const auto d = digest_of({31.0, 44.9, 20.0}, {0.2, 0.4, 0.0}, 3);
    EXPECT_EQ(d.temp_bin, 8);
    EXPECT_EQ(d.util_decile, 2);
    EXPECT_EQ(d.benchmark, 3);
    EXPECT_EQ(digest_of({25}, {1.0}, 0).util_decile, 9);
}
