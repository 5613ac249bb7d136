#include <gtest/gtest.h>

#include <numeric>

#include "perfgraph/simenv.hpp"
#include "perfgraph/surrogate.hpp"

using namespace perfgraph;

namespace {

ModelConfig small_config() {
    ModelConfig c;
    c.hidden = 16;
    c.layers = 2;
    c.heads = 2;
    c.trunk = 16;
    return c;
}

HeteroGraph graph_for(const std::string& bench, double input, std::vector<std::uint8_t> mask, int level) {
    const auto sheet = default_device_sheet();
    const auto w = make_workload(bench, input);
    RuntimeState st = RuntimeState::idle(sheet);
    st.temp_c = {33.0, 29.5, 41.0, 27.0};
    st.util_ema = {0.3, 0.0, 0.8, 0.1};
    return build_hetero_graph(w.dag, sheet, st, uniform_action(sheet, mask, level));
}

void expect_close(const NigVector& a, const NigVector& b, double tol) {
    for (std::size_t k = 0; k < kMetrics; ++k) {
        EXPECT_NEAR(a[k].gamma, b[k].gamma, tol);
        EXPECT_NEAR(a[k].nu, b[k].nu, tol);
        EXPECT_NEAR(a[k].alpha, b[k].alpha, tol);
        EXPECT_NEAR(a[k].beta, b[k].beta, tol);
    }
}

// Reorder the nodes of one type; edges follow their endpoints.
HeteroGraph permute(const HeteroGraph& g, NodeType t, const std::vector<std::size_t>& perm) {
    HeteroGraph out = g;
    const auto ti = static_cast<std::size_t>(t);
    std::vector<std::size_t> where(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        out.nodes[ti][i] = g.nodes[ti][perm[i]];
        where[perm[i]] = i;
    }
    for (EdgeType r : kEdgeTypes) {
        auto& es = out.of(r);
        for (auto& e : es) {
            if (edge_src_type(r) == t) e.src = where[e.src];
            if (edge_dst_type(r) == t) e.dst = where[e.dst];
        }
        std::reverse(es.begin(), es.end());
    }
    return out;
}

} // namespace

TEST(Surrogate, OutputConstraintsOnRandomParameters) {
    ModelConfig c;
    c.hidden = 8;
    c.layers = 1;
    c.heads = 1;
    c.trunk = 8;
    c.trunk_layers = 1;
    Surrogate m(c, 1);
    Rng rng = substream(3, "trials");
    const auto names = benchmark_names();
    std::vector<HeteroGraph> graphs;
    for (const auto& b : names) graphs.push_back(graph_for(b, 1.0, {1, 1, 0, 1}, 1));
    int trials = 0;
    while (trials < 10000) {
        for (auto& p : m.params().items())
            for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = uniform(rng, -3, 3);
        for (auto& g : graphs)
            for (auto& n : g.of(NodeType::Task)) n.features[0] = uniform(rng, -5, 5);
        for (const auto& v : predict(m, std::span<const HeteroGraph>(graphs))) {
            for (const auto& p : v) {
                EXPECT_GT(p.nu, 0.0);
                EXPECT_GT(p.alpha, 1.0);
                EXPECT_GT(p.beta, 0.0);
            }
            ++trials;
        }
    }
}

TEST(Surrogate, AttentionNormalizesOverAllIncomingEdges) {
    Surrogate m(small_config(), 2);
    const HeteroGraph g = graph_for("fft", 1.0, {1, 1, 1, 1}, 2);
    const HeteroGraph* gp = &g;
    const GraphBatch b = make_batch(std::span<const HeteroGraph* const>(&gp, 1));
    Tape tape(false);
    ForwardContext c{tape, m, nullptr, Mode::Eval, nullptr};
    const auto f = forward(c, b, true);
    ASSERT_EQ(f.attention.size(), static_cast<std::size_t>(m.config().layers * m.config().heads));
    for (const auto& tr : f.attention) {
        std::vector<double> sum(static_cast<std::size_t>(b.total_nodes()), 0.0);
        const Mat& a = tape.value(tr.alpha);
        for (std::size_t e = 0; e < tr.dst.size(); ++e) sum[static_cast<std::size_t>(tr.dst[e])] += a(static_cast<Eigen::Index>(e), 0);
        std::vector<int> incoming(sum.size(), 0);
        for (int d : tr.dst) ++incoming[static_cast<std::size_t>(d)];
        for (std::size_t v = 0; v < sum.size(); ++v)
            if (incoming[v]) {
                EXPECT_NEAR(sum[v], 1.0, 1e-6);
            }
    }
}

TEST(Surrogate, SingleIncomingEdgeGetsFullWeight) {
    Tape t(false);
    Mat l(3, 1);
    l << 0.3, 0.3, -7.0;
    const Mat& a = t.value(ad::segment_softmax(t, t.constant(l), {0, 0, 1}, 2));
    EXPECT_DOUBLE_EQ(a(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(a(1, 0), 0.5);
    EXPECT_DOUBLE_EQ(a(2, 0), 1.0);
}

TEST(Surrogate, PermutationInvariance) {
    Surrogate m(small_config(), 3);
    const HeteroGraph g = graph_for("strassen", 2.0, {1, 0, 1, 1}, 1);
    const NigVector base = predict_one(m, g);
    for (NodeType t : {NodeType::Task, NodeType::Resource, NodeType::Memory}) {
        std::vector<std::size_t> perm(g.of(t).size());
        std::iota(perm.begin(), perm.end(), 0);
        std::reverse(perm.begin(), perm.end());
        if (perm.size() > 2) std::swap(perm[0], perm[1]);
        expect_close(predict_one(m, permute(g, t, perm)), base, 1e-9);
    }
}

TEST(Surrogate, BatchedEqualsIndependent) {
    Surrogate m(small_config(), 4);
    const std::vector<HeteroGraph> gs{graph_for("fft", 1.0, {1, 1, 1, 1}, 2), graph_for("nqueens", 2.0, {0, 0, 1, 1}, 0),
                                      graph_for("sort", 1.0, {1, 0, 0, 0}, 1)};
    const auto batched = predict(m, std::span<const HeteroGraph>(gs));
    for (std::size_t i = 0; i < gs.size(); ++i) expect_close(batched[i], predict_one(m, gs[i]), 1e-12);
}

TEST(Surrogate, EvalIsDeterministicAndTrainIsSeeded) {
    Surrogate m(small_config(), 5);
    const HeteroGraph g = graph_for("fft", 1.0, {1, 1, 1, 1}, 2);
    EXPECT_EQ(predict_one(m, g)[0].gamma, predict_one(m, g)[0].gamma);
    const HeteroGraph* gp = &g;
    const GraphBatch b = make_batch(std::span<const HeteroGraph* const>(&gp, 1));
    auto train_gamma = [&](std::uint64_t seed) {
        Rng rng = substream(seed, "dropout");
        Tape t(false);
        ForwardContext c{t, m, nullptr, Mode::Train, &rng};
        return t.value(forward(c, b).gamma)(0, 0);
    };
    EXPECT_EQ(train_gamma(1), train_gamma(1));
    EXPECT_NE(train_gamma(1), train_gamma(2));
}

TEST(Surrogate, PoolingOfIdenticalEmbeddingsIsThatEmbedding) {
    Surrogate m(small_config(), 6);
    HeteroGraph g = graph_for("fft", 1.0, {1, 1, 1, 1}, 2);
    const HeteroGraph* gp = &g;
    const GraphBatch b = make_batch(std::span<const HeteroGraph* const>(&gp, 1));
    Tape t(false);
    ForwardContext c{t, m, nullptr, Mode::Eval, nullptr};
    Mat u(1, m.config().hidden);
    for (Eigen::Index j = 0; j < u.cols(); ++j) u(0, j) = 0.1 * static_cast<double>(j) - 0.5;
    TypeEmbeddings h;
    for (std::size_t ty = 0; ty < 3; ++ty) h[ty] = t.constant(u.replicate(b.x[ty].rows(), 1));
    const Mat& pooled = t.value(pool_graph(c, b, h));
    ASSERT_EQ(pooled.cols(), 3 * m.config().hidden);
    for (Eigen::Index j = 0; j < u.cols(); ++j) EXPECT_NEAR(pooled(0, j), u(0, j), 1e-12);
}

TEST(Surrogate, MissingMemoryTypePoolsToZeroBlock) {
    Surrogate m(small_config(), 7);
    HeteroGraph g = graph_for("fft", 1.0, {1, 1, 1, 1}, 2);
    g.of(NodeType::Memory).clear();
    g.of(EdgeType::RM).clear();
    const HeteroGraph* gp = &g;
    const GraphBatch b = make_batch(std::span<const HeteroGraph* const>(&gp, 1));
    Tape t(false);
    ForwardContext c{t, m, nullptr, Mode::Eval, nullptr};
    const auto f = forward(c, b);
    const Mat& emb = t.value(f.embedding);
    const int d = m.config().hidden;
    ASSERT_EQ(emb.cols(), 3 * d);
    EXPECT_EQ(emb.rightCols(d).cwiseAbs().maxCoeff(), 0.0);
    const HeteroGraph big = graph_for("strassen", 4.0, {1, 1, 1, 1}, 2);
    EXPECT_EQ(predict_one(m, big).size(), kMetrics);
}

TEST(Surrogate, WrongFeatureWidthIsShapeError) {
    Surrogate m(small_config(), 8);
    HeteroGraph g = graph_for("fft", 1.0, {1, 1, 1, 1}, 2);
    g.of(NodeType::Resource)[0].features.push_back(1.0);
    try {
        predict_one(m, g);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ShapeError);
        EXPECT_NE(std::string(e.what()).find(g.of(NodeType::Resource)[0].id), std::string::npos);
    }
}

TEST(Surrogate, ParameterCountIsDeterministic) {
    EXPECT_EQ(Surrogate(small_config(), 1).params().scalar_count(), Surrogate(small_config(), 99).params().scalar_count());
    Surrogate a(small_config(), 1), b(small_config(), 1);
    for (std::size_t i = 0; i < a.params().items().size(); ++i) EXPECT_EQ(a.params().items()[i].value, b.params().items()[i].value);
}

TEST(Checkpoint, RoundTripPreservesPredictions) {
    Surrogate m(small_config(), 9);
    const std::string text = serialize_checkpoint(m, CheckpointInfo{9, "abc123", ""});
    CheckpointInfo info;
    const Surrogate back = deserialize_checkpoint(text, &info);
    EXPECT_EQ(info.seed, 9u);
    EXPECT_EQ(info.config_hash, "abc123");
    EXPECT_EQ(back.config(), m.config());
    const HeteroGraph g = graph_for("sort", 1.0, {1, 1, 0, 0}, 1);
    expect_close(predict_one(back, g), predict_one(m, g), 0.0);
    EXPECT_EQ(serialize_checkpoint(back, info), text);
}

TEST(Checkpoint, RejectsForeignText) {
    try {
        deserialize_checkpoint("hello\n");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SchemaMismatch);
    }
    Surrogate m(small_config(), 9);
    std::string text = serialize_checkpoint(m, CheckpointInfo{});
    text.replace(text.find("hidden=16"), 9, "hidden=17");
    EXPECT_THROW(deserialize_checkpoint(text), Error);
}
