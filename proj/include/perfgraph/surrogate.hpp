#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "perfgraph/autodiff.hpp"
#include "perfgraph/hetero_graph.hpp"
#include "perfgraph/keyed_config.hpp"
#include "perfgraph/nig.hpp"
#include "perfgraph/rng.hpp"

namespace perfgraph {

struct ModelConfig {
    int hidden = 128;
    int layers = 4;
    int heads = 4;
    int encoder_depth = 2;
    int edge_proj = 8; // width of the projected edge features
    int trunk = 128;
    int trunk_layers = 2;
    double dropout = 0.1;
    double edge_dropout = 0.1;
    double feature_noise = 0.05;

    void validate() const {
        if (hidden <= 0 || layers <= 0 || heads <= 0 || encoder_depth <= 0 || edge_proj <= 0 || trunk <= 0 || trunk_layers <= 0)
            fail(ErrorKind::ConfigError, "model dimensions must be positive");
        for (double p : {dropout, edge_dropout})
            if (!(p >= 0.0 && p < 1.0)) fail(ErrorKind::ConfigError, "dropout rates must lie in [0, 1)");
        if (!(feature_noise >= 0.0)) fail(ErrorKind::ConfigError, "feature noise must be >= 0");
    }

    std::string canonical() const {
        char buf[256];
        std::snprintf(buf, sizeof buf, "hidden=%d layers=%d heads=%d encoder_depth=%d edge_proj=%d trunk=%d trunk_layers=%d dropout=%.17g edge_dropout=%.17g feature_noise=%.17g",
                      hidden, layers, heads, encoder_depth, edge_proj, trunk, trunk_layers, dropout, edge_dropout, feature_noise);
        return buf;
    }

    bool operator==(const ModelConfig&) const = default;
};

inline ModelConfig model_config_from(const KeyedConfig& cfg, ModelConfig base = {}) {
    base.hidden = static_cast<int>(cfg.num("model.hidden", base.hidden));
    base.layers = static_cast<int>(cfg.num("model.layers", base.layers));
    base.heads = static_cast<int>(cfg.num("model.heads", base.heads));
    base.encoder_depth = static_cast<int>(cfg.num("model.encoder_depth", base.encoder_depth));
    base.edge_proj = static_cast<int>(cfg.num("model.edge_proj", base.edge_proj));
    base.trunk = static_cast<int>(cfg.num("model.trunk", base.trunk));
    base.trunk_layers = static_cast<int>(cfg.num("model.trunk_layers", base.trunk_layers));
    base.dropout = cfg.num("model.dropout", base.dropout);
    base.edge_dropout = cfg.num("model.edge_dropout", base.edge_dropout);
    base.feature_noise = cfg.num("model.feature_noise", base.feature_noise);
    base.validate();
    return base;
}

struct Param {
    std::string name;
    Mat value;
    Mat grad;
};

/// Named parameter tensors in creation order.
class ParamStore {
public:
    std::size_t add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
        if (index_.count(name)) fail(ErrorKind::InvalidArgument, "duplicate parameter " + name);
        index_[name] = items_.size();
        items_.push_back(Param{name, Mat::Zero(rows, cols), Mat::Zero(rows, cols)});
        return items_.size() - 1;
    }

    Param& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) fail(ErrorKind::InvalidArgument, "unknown parameter " + name);
        return items_[it->second];
    }
    const Param& at(const std::string& name) const { return const_cast<ParamStore*>(this)->at(name); }
    bool contains(const std::string& name) const { return index_.count(name) > 0; }

    std::vector<Param>& items() { return items_; }
    const std::vector<Param>& items() const { return items_; }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& p : items_) n += static_cast<std::size_t>(p.value.size());
        return n;
    }

    void zero_grad() {
        for (auto& p : items_) p.grad.setZero();
    }

    double grad_norm() const {
        double s = 0.0;
        for (const auto& p : items_) s += p.grad.squaredNorm();
        return std::sqrt(s);
    }

    bool finite() const {
        for (const auto& p : items_)
            if (!p.value.allFinite()) return false;
        return true;
    }

private:
    std::vector<Param> items_;
    std::map<std::string, std::size_t> index_;
};

inline constexpr std::array<const char*, 3> kNodeTags{"T", "R", "M"};
inline constexpr std::array<const char*, kMetrics> kMetricTags{"time", "energy", "cache", "branch", "util"};

/// Extra column appended to every edge feature vector: 0 along the stored
/// direction, 1 for the reverse message.
inline std::size_t model_edge_width(EdgeType r) { return layout::edge_width(r) + 1; }

inline bool edge_is_bidirectional(EdgeType r) { return r != EdgeType::TT; }

/// Heterogeneous graph-attention surrogate with evidential heads.
class Surrogate {
public:
    Surrogate(ModelConfig cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
        cfg_.validate();
        build();
        initialize(seed);
    }

    const ModelConfig& config() const { return cfg_; }
    std::uint64_t seed() const { return seed_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    /// D17: uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and attention
    /// vectors, zero biases, drawn in creation order.
    void initialize(std::uint64_t seed) {
        seed_ = seed;
        Rng rng = substream(seed, "init");
        for (auto& p : params_.items()) {
            p.grad.setZero();
            if (p.name.size() >= 2 && p.name.compare(p.name.size() - 2, 2, ".b") == 0) {
                p.value.setZero();
                continue;
            }
            const double bound = 1.0 / std::sqrt(static_cast<double>(p.value.rows()));
            for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = uniform(rng, -bound, bound);
        }
    }

private:
    void build() {
        const int d = cfg_.hidden;
        for (std::size_t t = 0; t < 3; ++t) {
            Eigen::Index in = static_cast<Eigen::Index>(layout::node_width(static_cast<NodeType>(t)));
            for (int l = 0; l < cfg_.encoder_depth; ++l) {
                const std::string p = std::string("enc.") + kNodeTags[t] + "." + std::to_string(l);
                params_.add(p + ".w", in, d);
                params_.add(p + ".b", 1, d);
                in = d;
            }
        }
        for (int l = 0; l < cfg_.layers; ++l) {
            for (EdgeType r : kEdgeTypes) {
                const std::string p = "gat." + std::to_string(l) + "." + edge_type_name(r);
                params_.add(p + ".phi.w", static_cast<Eigen::Index>(model_edge_width(r)), cfg_.edge_proj);
                params_.add(p + ".phi.b", 1, cfg_.edge_proj);
                for (int h = 0; h < cfg_.heads; ++h) {
                    const std::string q = p + ".h" + std::to_string(h);
                    params_.add(q + ".W", d, d);
                    params_.add(q + ".a_src", d, 1);
                    params_.add(q + ".a_dst", d, 1);
                    params_.add(q + ".a_edge", cfg_.edge_proj, 1);
                }
            }
        }
        for (std::size_t t = 0; t < 3; ++t) params_.add(std::string("pool.") + kNodeTags[t] + ".q", d, 1);
        Eigen::Index in = 3 * d;
        for (int l = 0; l < cfg_.trunk_layers; ++l) {
            const std::string p = "trunk." + std::to_string(l);
            params_.add(p + ".w", in, cfg_.trunk);
            params_.add(p + ".b", 1, cfg_.trunk);
            in = cfg_.trunk;
        }
        for (std::size_t k = 0; k < kMetrics; ++k) {
            const std::string p = std::string("head.") + kMetricTags[k];
            params_.add(p + ".w", in, 4);
            params_.add(p + ".b", 1, 4);
        }
    }

    ModelConfig cfg_;
    std::uint64_t seed_;
    ParamStore params_;
};

/// Messages of one edge type in one direction, indices local to their node type.
struct MessageGroup {
    EdgeType type = EdgeType::TT;
    NodeType src_type = NodeType::Task;
    NodeType dst_type = NodeType::Task;
    std::vector<int> src, dst;
    Mat feats;
};

/// Disjoint union of graphs, stacked per node type.
struct GraphBatch {
    std::array<Mat, 3> x;
    std::array<std::vector<int>, 3> graph_of;
    std::array<std::vector<std::string>, 3> ids;
    std::vector<MessageGroup> groups;
    int graphs = 0;

    Eigen::Index count(NodeType t) const { return x[static_cast<std::size_t>(t)].rows(); }
    Eigen::Index total_nodes() const { return x[0].rows() + x[1].rows() + x[2].rows(); }
    /// Offset of a node type inside the global node numbering [T; R; M].
    Eigen::Index offset(NodeType t) const {
        Eigen::Index o = 0;
        for (std::size_t i = 0; i < static_cast<std::size_t>(t); ++i) o += x[i].rows();
        return o;
    }
};

inline GraphBatch make_batch(std::span<const HeteroGraph* const> graphs) {
    if (graphs.empty()) fail(ErrorKind::EmptyBatch, "no graphs to batch");
    GraphBatch b;
    b.graphs = static_cast<int>(graphs.size());
    std::array<std::size_t, 3> totals{};
    for (const auto* g : graphs)
        for (std::size_t t = 0; t < 3; ++t) totals[t] += g->nodes[t].size();
    for (std::size_t t = 0; t < 3; ++t) {
        const std::size_t w = layout::node_width(static_cast<NodeType>(t));
        b.x[t] = Mat::Zero(static_cast<Eigen::Index>(totals[t]), static_cast<Eigen::Index>(w));
    }
    // Group order: each edge type forward, then its reverse.
    std::vector<MessageGroup> fwd(4), rev(4);
    for (EdgeType r : kEdgeTypes) {
        const auto i = static_cast<std::size_t>(r);
        fwd[i] = MessageGroup{r, edge_src_type(r), edge_dst_type(r), {}, {}, {}};
        rev[i] = MessageGroup{r, edge_dst_type(r), edge_src_type(r), {}, {}, {}};
    }
    std::array<std::vector<std::vector<double>>, 4> fwd_rows, rev_rows;
    std::array<int, 3> base{};
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
        const HeteroGraph& g = *graphs[gi];
        for (std::size_t t = 0; t < 3; ++t) {
            const std::size_t w = layout::node_width(static_cast<NodeType>(t));
            for (std::size_t v = 0; v < g.nodes[t].size(); ++v) {
                const auto& n = g.nodes[t][v];
                if (n.features.size() != w)
                    fail(ErrorKind::ShapeError, "node " + n.id + ": expected " + std::to_string(w) + " features, got " + std::to_string(n.features.size()));
                const auto row = static_cast<Eigen::Index>(static_cast<std::size_t>(base[t]) + v);
                for (std::size_t k = 0; k < w; ++k) b.x[t](row, static_cast<Eigen::Index>(k)) = n.features[k];
                b.graph_of[t].push_back(static_cast<int>(gi));
                b.ids[t].push_back(n.id);
            }
        }
        for (EdgeType r : kEdgeTypes) {
            const auto i = static_cast<std::size_t>(r);
            const auto s = static_cast<std::size_t>(edge_src_type(r)), d = static_cast<std::size_t>(edge_dst_type(r));
            for (const auto& e : g.edges[i]) {
                if (e.attrs.size() != layout::edge_width(r))
                    fail(ErrorKind::ShapeError, std::string("edge of type ") + edge_type_name(r) + ": expected " + std::to_string(layout::edge_width(r)) +
                                                    " attributes, got " + std::to_string(e.attrs.size()));
                if (e.src >= g.nodes[s].size() || e.dst >= g.nodes[d].size()) fail(ErrorKind::InvalidArgument, "edge references a missing node");
                const int su = base[s] + static_cast<int>(e.src), dv = base[d] + static_cast<int>(e.dst);
                std::vector<double> a = e.attrs;
                a.push_back(0.0);
                fwd[i].src.push_back(su);
                fwd[i].dst.push_back(dv);
                fwd_rows[i].push_back(a);
                if (edge_is_bidirectional(r)) {
                    a.back() = 1.0;
                    rev[i].src.push_back(dv);
                    rev[i].dst.push_back(su);
                    rev_rows[i].push_back(std::move(a));
                }
            }
        }
        for (std::size_t t = 0; t < 3; ++t) base[t] += static_cast<int>(g.nodes[t].size());
    }
    auto to_mat = [](const std::vector<std::vector<double>>& rows, std::size_t w) {
        Mat m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(w));
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t k = 0; k < w; ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
        return m;
    };
    for (EdgeType r : kEdgeTypes) {
        const auto i = static_cast<std::size_t>(r);
        fwd[i].feats = to_mat(fwd_rows[i], model_edge_width(r));
        rev[i].feats = to_mat(rev_rows[i], model_edge_width(r));
        if (!fwd[i].src.empty()) b.groups.push_back(std::move(fwd[i]));
        if (!rev[i].src.empty()) b.groups.push_back(std::move(rev[i]));
    }
    return b;
}

inline GraphBatch make_batch(std::span<const HeteroGraph> graphs) {
    std::vector<const HeteroGraph*> ptrs;
    for (const auto& g : graphs) ptrs.push_back(&g);
    return make_batch(std::span<const HeteroGraph* const>(ptrs));
}

enum class Mode { Eval, Train };

/// Per-call context: tape, mode, and the generator for training noise.
struct ForwardContext {
    Tape& tape;
    const Surrogate& model;
    ParamStore* grads = nullptr; // receives parameter gradients when set
    Mode mode = Mode::Eval;
    Rng* rng = nullptr;

    Var p(const std::string& name) const {
        const Param& prm = model.params().at(name);
        Mat* sink = nullptr;
        if (grads) sink = &grads->at(name).grad;
        return tape.param(prm.value, sink);
    }
    bool training() const { return mode == Mode::Train; }
};

namespace detail {

inline Var linear(ForwardContext& c, Var x, const std::string& prefix) {
    return ad::add_row(c.tape, ad::matmul(c.tape, x, c.p(prefix + ".w")), c.p(prefix + ".b"));
}

inline Var dropout(ForwardContext& c, Var x, double p) {
    if (!c.training() || p <= 0.0) return x;
    if (!c.rng) fail(ErrorKind::InvalidArgument, "training mode needs a random generator");
    const Mat& v = c.tape.value(x);
    Mat m(v.rows(), v.cols());
    const double keep = 1.0 / (1.0 - p);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform01(*c.rng) < p ? 0.0 : keep;
    return ad::mask(c.tape, x, std::move(m));
}

} // namespace detail

using TypeEmbeddings = std::array<Var, 3>;

/// Layer-0 embeddings: per-type MLP with ReLU after every layer.
inline TypeEmbeddings encode_nodes(ForwardContext& c, const GraphBatch& b) {
    TypeEmbeddings h;
    for (std::size_t t = 0; t < 3; ++t) {
        Mat x = b.x[t];
        if (c.training() && c.model.config().feature_noise > 0.0) {
            if (!c.rng) fail(ErrorKind::InvalidArgument, "training mode needs a random generator");
            for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] += c.model.config().feature_noise * standard_normal(*c.rng);
        }
        Var v = c.tape.constant(std::move(x));
        for (int l = 0; l < c.model.config().encoder_depth; ++l) {
            v = ad::relu(c.tape, detail::linear(c, v, std::string("enc.") + kNodeTags[t] + "." + std::to_string(l)));
            v = detail::dropout(c, v, c.model.config().dropout);
        }
        h[t] = v;
    }
    return h;
}

struct AttentionTrace {
    int layer = 0;
    int head = 0;
    Var alpha;               // E x 1 over all groups of the layer
    std::vector<int> dst;    // global destination node per entry
};

/// One typed attention layer; softmax runs jointly over every incoming
/// message of a node regardless of edge type; heads are averaged.
inline TypeEmbeddings gat_layer(ForwardContext& c, const GraphBatch& b, const TypeEmbeddings& h, int layer,
                                std::vector<AttentionTrace>* traces = nullptr) {
    Tape& t = c.tape;
    const ModelConfig& cfg = c.model.config();
    const std::string lp = "gat." + std::to_string(layer) + ".";

    std::vector<MessageGroup> groups;
    groups.reserve(b.groups.size());
    for (const auto& g : b.groups) {
        if (!c.training() || cfg.edge_dropout <= 0.0) {
            groups.push_back(g);
            continue;
        }
        MessageGroup kept{g.type, g.src_type, g.dst_type, {}, {}, {}};
        std::vector<Eigen::Index> rows;
        for (std::size_t e = 0; e < g.src.size(); ++e) {
            if (uniform01(*c.rng) < cfg.edge_dropout) continue;
            kept.src.push_back(g.src[e]);
            kept.dst.push_back(g.dst[e]);
            rows.push_back(static_cast<Eigen::Index>(e));
        }
        kept.feats = g.feats(rows, Eigen::all);
        if (!kept.src.empty()) groups.push_back(std::move(kept));
    }

    std::vector<Var> proj(groups.size());
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const std::string p = lp + edge_type_name(groups[gi].type) + ".phi";
        proj[gi] = ad::relu(t, detail::linear(c, t.constant(groups[gi].feats), p));
    }
    std::vector<int> dst_global;
    for (const auto& g : groups)
        for (int d : g.dst) dst_global.push_back(static_cast<int>(b.offset(g.dst_type)) + d);
    const int total = static_cast<int>(b.total_nodes());

    std::array<std::vector<Var>, 3> agg_parts;
    for (int head = 0; head < cfg.heads; ++head) {
        // Z[r][type] = H_type W_r for the node types touched by r.
        std::map<std::pair<int, int>, Var> z;
        auto zget = [&](EdgeType r, NodeType nt) {
            const auto key = std::make_pair(static_cast<int>(r), static_cast<int>(nt));
            auto it = z.find(key);
            if (it != z.end()) return it->second;
            const std::string q = lp + edge_type_name(r) + ".h" + std::to_string(head);
            Var v = ad::matmul(t, h[static_cast<std::size_t>(nt)], c.p(q + ".W"));
            z.emplace(key, v);
            return v;
        };
        if (groups.empty()) continue;
        std::vector<Var> logits;
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            const auto& g = groups[gi];
            const std::string q = lp + edge_type_name(g.type) + ".h" + std::to_string(head);
            Var s_src = ad::matmul(t, zget(g.type, g.src_type), c.p(q + ".a_src"));
            Var s_dst = ad::matmul(t, zget(g.type, g.dst_type), c.p(q + ".a_dst"));
            Var s_edge = ad::matmul(t, proj[gi], c.p(q + ".a_edge"));
            Var l = ad::add(t, ad::add(t, ad::gather_rows(t, s_src, g.src), ad::gather_rows(t, s_dst, g.dst)), s_edge);
            logits.push_back(l);
        }
        Var all = ad::leaky_relu(t, ad::concat_rows(t, logits), 0.2);
        Var alpha = ad::segment_softmax(t, all, dst_global, total);
        if (traces) traces->push_back(AttentionTrace{layer, head, alpha, dst_global});
        Eigen::Index off = 0;
        for (std::size_t gi = 0; gi < groups.size(); ++gi) {
            const auto& g = groups[gi];
            const auto n = static_cast<Eigen::Index>(g.src.size());
            Var a = ad::slice_rows(t, alpha, off, n);
            off += n;
            Var msg = ad::row_scale(t, ad::gather_rows(t, zget(g.type, g.src_type), g.src), a);
            agg_parts[static_cast<std::size_t>(g.dst_type)].push_back(
                ad::scatter_add_rows(t, msg, g.dst, b.count(g.dst_type)));
        }
    }

    TypeEmbeddings out;
    for (std::size_t ty = 0; ty < 3; ++ty) {
        Var sum = h[ty];
        if (!agg_parts[ty].empty()) {
            Var agg = agg_parts[ty][0];
            for (std::size_t i = 1; i < agg_parts[ty].size(); ++i) agg = ad::add(t, agg, agg_parts[ty][i]);
            sum = ad::add(t, h[ty], ad::scale(t, agg, 1.0 / cfg.heads));
        }
        out[ty] = ad::elu(t, sum);
    }
    return out;
}

/// Attention-weighted mean per node type, concatenated [T | R | M]; a type
/// with no nodes in a graph contributes zeros.
inline Var pool_graph(ForwardContext& c, const GraphBatch& b, const TypeEmbeddings& h) {
    Tape& t = c.tape;
    const int d = c.model.config().hidden;
    std::vector<Var> blocks;
    for (std::size_t ty = 0; ty < 3; ++ty) {
        if (b.x[ty].rows() == 0) {
            blocks.push_back(t.constant(Mat::Zero(b.graphs, d)));
            continue;
        }
        Var score = ad::matmul(t, h[ty], c.p(std::string("pool.") + kNodeTags[ty] + ".q"));
        Var w = ad::segment_softmax(t, score, b.graph_of[ty], b.graphs);
        blocks.push_back(ad::scatter_add_rows(t, ad::row_scale(t, h[ty], w), b.graph_of[ty], b.graphs));
    }
    return ad::concat_cols(t, blocks);
}

inline constexpr double kEvidenceFloor = 1e-6;

/// Per-metric NIG outputs, each graphs x kMetrics.
struct ForwardPass {
    Var gamma, nu, alpha, beta;
    Var embedding;
    std::vector<AttentionTrace> attention;
};

inline ForwardPass forward(ForwardContext& c, const GraphBatch& b, bool keep_attention = false) {
    Tape& t = c.tape;
    const ModelConfig& cfg = c.model.config();
    TypeEmbeddings h = encode_nodes(c, b);
    ForwardPass out;
    for (int l = 0; l < cfg.layers; ++l) h = gat_layer(c, b, h, l, keep_attention ? &out.attention : nullptr);
    out.embedding = pool_graph(c, b, h);
    Var z = out.embedding;
    for (int l = 0; l < cfg.trunk_layers; ++l) {
        z = ad::relu(t, detail::linear(c, z, "trunk." + std::to_string(l)));
        z = detail::dropout(c, z, cfg.dropout);
    }
    std::array<std::vector<Var>, 4> cols;
    for (std::size_t k = 0; k < kMetrics; ++k) {
        Var o = detail::linear(c, z, std::string("head.") + kMetricTags[k]);
        for (Eigen::Index j = 0; j < 4; ++j) cols[static_cast<std::size_t>(j)].push_back(ad::slice_cols(t, o, j, 1));
    }
    out.gamma = ad::concat_cols(t, cols[0]);
    out.nu = ad::add_scalar(t, ad::softplus(t, ad::concat_cols(t, cols[1])), kEvidenceFloor);
    out.alpha = ad::add_scalar(t, ad::softplus(t, ad::concat_cols(t, cols[2])), 1.0 + kEvidenceFloor);
    out.beta = ad::add_scalar(t, ad::softplus(t, ad::concat_cols(t, cols[3])), kEvidenceFloor);
    for (Var v : {out.gamma, out.nu, out.alpha, out.beta})
        if (!t.value(v).allFinite()) fail(ErrorKind::NumericError, "non-finite surrogate output");
    return out;
}

inline std::vector<NigVector> read_outputs(const Tape& t, const ForwardPass& f) {
    const Mat &g = t.value(f.gamma), &n = t.value(f.nu), &a = t.value(f.alpha), &be = t.value(f.beta);
    std::vector<NigVector> out(static_cast<std::size_t>(g.rows()));
    for (Eigen::Index i = 0; i < g.rows(); ++i)
        for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(kMetrics); ++k)
            out[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] = NigParams{g(i, k), n(i, k), a(i, k), be(i, k)};
    return out;
}

/// Eval-mode batched prediction, one NigVector per graph in input order.
inline std::vector<NigVector> predict(const Surrogate& model, std::span<const HeteroGraph* const> graphs) {
    Tape tape(false);
    ForwardContext c{tape, model, nullptr, Mode::Eval, nullptr};
    const GraphBatch b = make_batch(graphs);
    return read_outputs(tape, forward(c, b));
}

inline std::vector<NigVector> predict(const Surrogate& model, std::span<const HeteroGraph> graphs) {
    std::vector<const HeteroGraph*> ptrs;
    for (const auto& g : graphs) ptrs.push_back(&g);
    return predict(model, std::span<const HeteroGraph* const>(ptrs));
}

inline NigVector predict_one(const Surrogate& model, const HeteroGraph& g) {
    const HeteroGraph* p = &g;
    return predict(model, std::span<const HeteroGraph* const>(&p, 1)).front();
}

/// Backward pass for an evidential loss computed outside the tape.
inline void backward_nig(Tape& t, const ForwardPass& f, const std::vector<std::array<NigGrad, kMetrics>>& grad) {
    const auto rows = static_cast<Eigen::Index>(grad.size());
    const auto k = static_cast<Eigen::Index>(kMetrics);
    Mat dg(rows, k), dn(rows, k), da(rows, k), db(rows, k);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < k; ++j) {
            const NigGrad& g = grad[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            dg(i, j) = g.gamma;
            dn(i, j) = g.nu;
            da(i, j) = g.alpha;
            db(i, j) = g.beta;
        }
    t.backward({{f.gamma, dg}, {f.nu, dn}, {f.alpha, da}, {f.beta, db}});
}

inline constexpr const char* kCheckpointMagic = "perfgraph-checkpoint v1";

struct CheckpointInfo {
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string note;
};

inline std::string serialize_checkpoint(const Surrogate& m, const CheckpointInfo& info) {
    std::string out = std::string(kCheckpointMagic) + "\n";
    out += "config " + m.config().canonical() + "\n";
    out += "seed " + std::to_string(info.seed) + "\n";
    out += "config_hash " + (info.config_hash.empty() ? std::string("-") : info.config_hash) + "\n";
    if (!info.note.empty()) out += "note " + info.note + "\n";
    out += "params " + std::to_string(m.params().items().size()) + "\n";
    for (const auto& p : m.params().items()) {
        out += "param " + p.name + " " + std::to_string(p.value.rows()) + " " + std::to_string(p.value.cols()) + "\n";
        for (Eigen::Index i = 0; i < p.value.size(); ++i) {
            if (i) out += ' ';
            detail::append_number(out, p.value.data()[i]);
        }
        out += "\n";
    }
    return out;
}

inline ModelConfig parse_model_canonical(const std::string& text) {
    ModelConfig c;
    std::istringstream in(text);
    std::string tok;
    while (in >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) fail(ErrorKind::ParseError, "bad config token " + tok);
        const std::string k = tok.substr(0, eq);
        const double v = std::stod(tok.substr(eq + 1));
        if (k == "hidden") c.hidden = static_cast<int>(v);
        else if (k == "layers") c.layers = static_cast<int>(v);
        else if (k == "heads") c.heads = static_cast<int>(v);
        else if (k == "encoder_depth") c.encoder_depth = static_cast<int>(v);
        else if (k == "edge_proj") c.edge_proj = static_cast<int>(v);
        else if (k == "trunk") c.trunk = static_cast<int>(v);
        else if (k == "trunk_layers") c.trunk_layers = static_cast<int>(v);
        else if (k == "dropout") c.dropout = v;
        else if (k == "edge_dropout") c.edge_dropout = v;
        else if (k == "feature_noise") c.feature_noise = v;
        else fail(ErrorKind::ParseError, "unknown config key " + k);
    }
    return c;
}

inline Surrogate deserialize_checkpoint(const std::string& text, CheckpointInfo* info = nullptr) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kCheckpointMagic) fail(ErrorKind::SchemaMismatch, "not a perfgraph checkpoint");
    std::optional<ModelConfig> cfg;
    CheckpointInfo ci;
    std::size_t expected = 0;
    while (std::getline(in, line)) {
        if (line.rfind("config ", 0) == 0) cfg = parse_model_canonical(line.substr(7));
        else if (line.rfind("seed ", 0) == 0) ci.seed = std::stoull(line.substr(5));
        else if (line.rfind("config_hash ", 0) == 0) ci.config_hash = line.substr(12);
        else if (line.rfind("note ", 0) == 0) ci.note = line.substr(5);
        else if (line.rfind("params ", 0) == 0) {
            expected = std::stoull(line.substr(7));
            break;
        }
    }
    if (!cfg) fail(ErrorKind::SchemaMismatch, "checkpoint lacks a config line");
    Surrogate m(*cfg, ci.seed);
    if (expected != m.params().items().size()) fail(ErrorKind::SchemaMismatch, "checkpoint parameter count does not match its config");
    for (std::size_t i = 0; i < expected; ++i) {
        std::string tag, name;
        Eigen::Index rows = 0, cols = 0;
        if (!std::getline(in, line)) fail(ErrorKind::ParseError, "truncated checkpoint");
        std::istringstream hs(line);
        hs >> tag >> name >> rows >> cols;
        if (tag != "param" || !m.params().contains(name)) fail(ErrorKind::SchemaMismatch, "unexpected parameter record: " + line);
        Param& p = m.params().at(name);
        if (p.value.rows() != rows || p.value.cols() != cols) fail(ErrorKind::SchemaMismatch, "shape mismatch for " + name);
        if (!std::getline(in, line)) fail(ErrorKind::ParseError, "truncated checkpoint");
        std::istringstream vs(line);
        std::string tok;
        for (Eigen::Index k = 0; k < p.value.size(); ++k) {
            if (!(vs >> tok)) fail(ErrorKind::ParseError, "too few values for " + name);
            p.value.data()[k] = std::strtod(tok.c_str(), nullptr);
        }
    }
    if (info) *info = ci;
    return m;
}

inline void save_checkpoint(const std::string& path, const Surrogate& m, const CheckpointInfo& info) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::ConfigError, "cannot write '" + path + "'");
    out << serialize_checkpoint(m, info);
}

inline Surrogate load_checkpoint(const std::string& path, CheckpointInfo* info = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::ConfigError, "cannot open checkpoint '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return deserialize_checkpoint(ss.str(), info);
}

} // namespace perfgraph
