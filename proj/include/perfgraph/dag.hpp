#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include "perfgraph/error.hpp"

namespace perfgraph {

enum class DepKind { Spawn, Join, Data };

/// Positions inside TaskSpec::cfg when the standard 12-wide CFG vector is used.
namespace cfg_index {
inline constexpr std::size_t loop_count = 0;
inline constexpr std::size_t max_loop_depth = 1;
inline constexpr std::size_t cyclomatic = 2;
inline constexpr std::size_t branch_count = 3;
inline constexpr std::size_t arith_ops = 4;
inline constexpr std::size_t mem_ops = 5;
inline constexpr std::size_t arith_intensity = 6;
inline constexpr std::size_t array_accesses = 7;
inline constexpr std::size_t pointer_ops = 8;
inline constexpr std::size_t branch_density = 9;
inline constexpr std::size_t recursion_flag = 10;
inline constexpr std::size_t pragma_flag = 11;
inline constexpr std::size_t width = 12;
} // namespace cfg_index

struct StaticFeatures {
    double instructions = 0.0;
    double bytes_moved = 0.0;
    double parallel_degree = 1.0;
    double branch_proxy = 0.0;
};

struct DynamicFeatures {
    double input_size = 1.0;
    double iterations = 1.0;
    double fan_in = 0.0;
    double fan_out = 0.0;
    double prior_cpi = 1.0;
    double run_mode_flag = 1.0;
    double thermal_footprint = 0.0;
};

struct TaskSpec {
    std::string id;
    double weight = 1.0; // seconds
    std::vector<double> cfg;
    StaticFeatures stat;
    DynamicFeatures dyn;
};

struct DepEdge {
    std::string src;
    std::string dst;
    DepKind kind = DepKind::Spawn;
    double bytes = 0.0;
};

struct TaskDag {
    std::vector<TaskSpec> nodes;
    std::vector<DepEdge> edges;
};

/// Index-based adjacency of a validated TaskDag. Construction checks ids,
/// endpoints and acyclicity; the topological order is stable (Kahn's
/// algorithm, ties resolved by node position).
class DagIndex {
public:
    explicit DagIndex(const TaskDag& dag) : dag_(&dag) {
        const std::size_t n = dag.nodes.size();
        if (n == 0) fail(ErrorKind::EmptyGraph, "task dag has no nodes");
        for (std::size_t i = 0; i < n; ++i) {
            if (!index_.emplace(dag.nodes[i].id, i).second)
                fail(ErrorKind::InvalidArgument, "duplicate task id '" + dag.nodes[i].id + "'");
        }
        succ_.resize(n);
        pred_.resize(n);
        for (std::size_t e = 0; e < dag.edges.size(); ++e) {
            const auto& edge = dag.edges[e];
            auto s = index_.find(edge.src);
            auto d = index_.find(edge.dst);
            if (s == index_.end() || d == index_.end())
                fail(ErrorKind::InvalidArgument, "edge " + edge.src + "->" + edge.dst + " references unknown task");
            succ_[s->second].push_back(d->second);
            pred_[d->second].push_back(s->second);
            edge_src_.push_back(s->second);
            edge_dst_.push_back(d->second);
        }
        std::vector<std::size_t> indeg(n);
        for (std::size_t v = 0; v < n; ++v) indeg[v] = pred_[v].size();
        std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
        for (std::size_t v = 0; v < n; ++v)
            if (indeg[v] == 0) ready.push(v);
        while (!ready.empty()) {
            const std::size_t v = ready.top();
            ready.pop();
            topo_.push_back(v);
            for (std::size_t w : succ_[v])
                if (--indeg[w] == 0) ready.push(w);
        }
        if (topo_.size() != n) fail(ErrorKind::CyclicGraph, "task dag contains a cycle");
    }

    std::size_t size() const { return succ_.size(); }
    std::size_t index_of(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) fail(ErrorKind::InvalidArgument, "unknown task id '" + id + "'");
        return it->second;
    }
    const std::vector<std::size_t>& succ(std::size_t v) const { return succ_[v]; }
    const std::vector<std::size_t>& pred(std::size_t v) const { return pred_[v]; }
    const std::vector<std::size_t>& topo_order() const { return topo_; }
    std::size_t edge_src(std::size_t e) const { return edge_src_[e]; }
    std::size_t edge_dst(std::size_t e) const { return edge_dst_[e]; }
    const TaskDag& dag() const { return *dag_; }

private:
    const TaskDag* dag_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::vector<std::size_t>> succ_, pred_;
    std::vector<std::size_t> edge_src_, edge_dst_;
    std::vector<std::size_t> topo_;
};

struct DagMetrics {
    double span = 0.0;             // T_inf, seconds
    double work = 0.0;             // T_1, seconds
    double avg_parallelism = 1.0;  // T_1 / T_inf
    std::size_t diameter = 0;      // hops
    double density = 0.0;          // |E| / (|V|(|V|-1))
    std::vector<std::size_t> width_profile;
    std::size_t max_width = 0;
    std::size_t span_hops = 0;     // hop length of the longest (in hops) path
    std::vector<std::size_t> depth;           // longest hop distance from a source
    std::vector<std::size_t> dist_to_sink;    // longest hop distance to a sink
    std::vector<std::string> critical_path;   // node ids, source to sink
    std::vector<bool> critical_node;
    std::vector<bool> critical_edge;          // parallel to TaskDag::edges
};

namespace detail {

inline bool lex_less(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b, const TaskDag& dag) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), [&](std::size_t x, std::size_t y) {
        return dag.nodes[x].id < dag.nodes[y].id;
    });
}

inline bool weight_tie(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}); }

} // namespace detail

inline DagMetrics dag_metrics(const TaskDag& dag) {
    const DagIndex idx(dag);
    const std::size_t n = idx.size();
    const auto& topo = idx.topo_order();
    DagMetrics m;

    for (const auto& t : dag.nodes) {
        if (!(t.weight > 0.0) || !std::isfinite(t.weight))
            fail(ErrorKind::InvalidArgument, "task '" + t.id + "' has non-positive weight");
        m.work += t.weight;
    }

    m.depth.assign(n, 0);
    for (std::size_t v : topo)
        for (std::size_t p : idx.pred(v)) m.depth[v] = std::max(m.depth[v], m.depth[p] + 1);
    m.dist_to_sink.assign(n, 0);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it)
        for (std::size_t s : idx.succ(*it)) m.dist_to_sink[*it] = std::max(m.dist_to_sink[*it], m.dist_to_sink[s] + 1);
    for (std::size_t v = 0; v < n; ++v) m.span_hops = std::max(m.span_hops, m.depth[v] + m.dist_to_sink[v]);

    // Heaviest path from each node to a sink; equal weights resolved toward
    // the lexicographically smallest id sequence.
    std::vector<double> tail_weight(n, 0.0);
    std::vector<std::vector<std::size_t>> tail_path(n);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        const std::size_t v = *it;
        double best = 0.0;
        const std::vector<std::size_t>* best_path = nullptr;
        for (std::size_t s : idx.succ(v)) {
            if (best_path == nullptr || (tail_weight[s] > best && !detail::weight_tie(tail_weight[s], best)) ||
                (detail::weight_tie(tail_weight[s], best) && detail::lex_less(tail_path[s], *best_path, dag))) {
                best = tail_weight[s];
                best_path = &tail_path[s];
            }
        }
        tail_weight[v] = dag.nodes[v].weight + best;
        tail_path[v].push_back(v);
        if (best_path) tail_path[v].insert(tail_path[v].end(), best_path->begin(), best_path->end());
    }
    std::size_t start = n;
    for (std::size_t v = 0; v < n; ++v) {
        if (!idx.pred(v).empty()) continue;
        if (start == n || (tail_weight[v] > tail_weight[start] && !detail::weight_tie(tail_weight[v], tail_weight[start])) ||
            (detail::weight_tie(tail_weight[v], tail_weight[start]) && detail::lex_less(tail_path[v], tail_path[start], dag)))
            start = v;
    }
    m.span = tail_weight[start];
    m.avg_parallelism = m.work / m.span;
    m.critical_node.assign(n, false);
    for (std::size_t v : tail_path[start]) {
        m.critical_path.push_back(dag.nodes[v].id);
        m.critical_node[v] = true;
    }
    m.critical_edge.assign(dag.edges.size(), false);
    const auto& cp = tail_path[start];
    for (std::size_t e = 0; e < dag.edges.size(); ++e) {
        for (std::size_t k = 0; k + 1 < cp.size(); ++k)
            if (idx.edge_src(e) == cp[k] && idx.edge_dst(e) == cp[k + 1]) m.critical_edge[e] = true;
    }

    // Directed diameter: longest shortest-hop distance over reachable ordered pairs.
    std::vector<std::size_t> dist(n);
    for (std::size_t s = 0; s < n; ++s) {
        std::fill(dist.begin(), dist.end(), n);
        dist[s] = 0;
        std::queue<std::size_t> q;
        q.push(s);
        while (!q.empty()) {
            const std::size_t v = q.front();
            q.pop();
            for (std::size_t w : idx.succ(v)) {
                if (dist[w] == n) {
                    dist[w] = dist[v] + 1;
                    m.diameter = std::max(m.diameter, dist[w]);
                    q.push(w);
                }
            }
        }
    }

    m.density = n > 1 ? static_cast<double>(dag.edges.size()) / (static_cast<double>(n) * static_cast<double>(n - 1)) : 0.0;
    for (std::size_t v = 0; v < n; ++v) {
        if (m.depth[v] >= m.width_profile.size()) m.width_profile.resize(m.depth[v] + 1, 0);
        ++m.width_profile[m.depth[v]];
    }
    m.max_width = *std::max_element(m.width_profile.begin(), m.width_profile.end());
    return m;
}

struct MakespanBounds {
    double lower = 0.0; // max(T_inf, T_1 / P)
    double upper = 0.0; // T_1 / P + T_inf
};

/// Greedy-scheduling bounds on P processors.
inline MakespanBounds brent_bound(const TaskDag& dag, int processors) {
    if (processors < 1) fail(ErrorKind::InvalidArgument, "processor count must be >= 1");
    const DagMetrics m = dag_metrics(dag);
    const double p = static_cast<double>(processors);
    return {std::max(m.span, m.work / p), m.work / p + m.span};
}

using Provenance = std::map<std::string, std::vector<std::string>>;

struct MergeResult {
    TaskDag dag;
    Provenance provenance;
};

namespace detail {

inline TaskSpec merge_tasks(const std::vector<const TaskSpec*>& chain, std::string id) {
    TaskSpec out;
    out.id = std::move(id);
    out.weight = 0.0;
    out.dyn.iterations = 0.0;
    const std::size_t width = chain.front()->cfg.size();
    out.cfg.assign(width, 0.0);
    double cpi_weighted = 0.0;
    for (const TaskSpec* t : chain) {
        out.weight += t->weight;
        for (std::size_t k = 0; k < width && k < t->cfg.size(); ++k) {
            const double x = t->cfg[k];
            if (width == cfg_index::width) {
                switch (k) {
                case cfg_index::max_loop_depth:
                case cfg_index::recursion_flag:
                case cfg_index::pragma_flag: out.cfg[k] = std::max(out.cfg[k], x); break;
                case cfg_index::arith_intensity:
                case cfg_index::branch_density: out.cfg[k] += x * t->weight; break;
                default: out.cfg[k] += x;
                }
            } else {
                out.cfg[k] += x;
            }
        }
        out.stat.instructions += t->stat.instructions;
        out.stat.bytes_moved += t->stat.bytes_moved;
        out.stat.parallel_degree = std::max(out.stat.parallel_degree, t->stat.parallel_degree);
        out.stat.branch_proxy += t->stat.branch_proxy;
        out.dyn.input_size = std::max(out.dyn.input_size, t->dyn.input_size);
        out.dyn.iterations += t->dyn.iterations;
        out.dyn.run_mode_flag = std::max(out.dyn.run_mode_flag, t->dyn.run_mode_flag);
        out.dyn.thermal_footprint += t->dyn.thermal_footprint;
        cpi_weighted += t->dyn.prior_cpi * t->weight;
    }
    out.stat.parallel_degree = std::max(1.0, out.stat.parallel_degree);
    if (width == cfg_index::width) {
        out.cfg[cfg_index::arith_intensity] /= out.weight;
        out.cfg[cfg_index::branch_density] /= out.weight;
    }
    out.dyn.prior_cpi = cpi_weighted / out.weight;
    out.dyn.fan_in = chain.front()->dyn.fan_in;
    out.dyn.fan_out = chain.back()->dyn.fan_out;
    return out;
}

} // namespace detail

/// Collapse maximal chains of light tasks (every weight below the threshold,
/// each link the sole out-edge of its tail and sole in-edge of its head)
/// into single nodes named m1, m2, ... in topological order of their heads.
inline MergeResult merge_small_chains(const TaskDag& dag, double weight_threshold) {
    if (weight_threshold < 0.0) fail(ErrorKind::InvalidArgument, "merge threshold must be >= 0");
    const DagIndex idx(dag);
    const std::size_t n = idx.size();
    auto light = [&](std::size_t v) { return dag.nodes[v].weight < weight_threshold; };
    auto linked = [&](std::size_t v) -> std::ptrdiff_t {
        if (idx.succ(v).size() != 1) return -1;
        const std::size_t w = idx.succ(v).front();
        return idx.pred(w).size() == 1 && light(v) && light(w) ? static_cast<std::ptrdiff_t>(w) : -1;
    };

    std::vector<std::ptrdiff_t> group(n, -1);
    std::vector<std::vector<std::size_t>> chains;
    for (std::size_t v : idx.topo_order()) {
        if (group[v] >= 0) continue;
        const bool continues = idx.pred(v).size() == 1 && linked(idx.pred(v).front()) == static_cast<std::ptrdiff_t>(v);
        if (continues || linked(v) < 0) continue;
        std::vector<std::size_t> chain{v};
        for (std::ptrdiff_t w = linked(v); w >= 0; w = linked(static_cast<std::size_t>(w))) chain.push_back(static_cast<std::size_t>(w));
        for (std::size_t c : chain) group[c] = static_cast<std::ptrdiff_t>(chains.size());
        chains.push_back(std::move(chain));
    }

    MergeResult out;
    if (chains.empty()) {
        out.dag = dag;
        return out;
    }

    std::unordered_map<std::string, bool> taken;
    for (const auto& t : dag.nodes) taken[t.id] = true;
    std::vector<std::string> merged_id(chains.size());
    std::size_t counter = 0;
    for (std::size_t c = 0; c < chains.size(); ++c) {
        std::string id;
        do { id = "m" + std::to_string(++counter); } while (taken.count(id));
        taken[id] = true;
        merged_id[c] = id;
        std::vector<std::string> originals;
        for (std::size_t v : chains[c]) originals.push_back(dag.nodes[v].id);
        out.provenance.emplace(id, std::move(originals));
    }

    auto new_id = [&](std::size_t v) { return group[v] >= 0 ? merged_id[static_cast<std::size_t>(group[v])] : dag.nodes[v].id; };
    std::vector<bool> emitted(chains.size(), false);
    for (std::size_t v = 0; v < n; ++v) {
        if (group[v] < 0) {
            out.dag.nodes.push_back(dag.nodes[v]);
            continue;
        }
        const auto g = static_cast<std::size_t>(group[v]);
        if (emitted[g]) continue;
        emitted[g] = true;
        std::vector<const TaskSpec*> members;
        for (std::size_t c : chains[g]) members.push_back(&dag.nodes[c]);
        out.dag.nodes.push_back(detail::merge_tasks(members, merged_id[g]));
    }
    for (std::size_t e = 0; e < dag.edges.size(); ++e) {
        const std::size_t s = idx.edge_src(e), d = idx.edge_dst(e);
        if (group[s] >= 0 && group[s] == group[d]) continue;
        DepEdge edge = dag.edges[e];
        edge.src = new_id(s);
        edge.dst = new_id(d);
        out.dag.edges.push_back(std::move(edge));
    }
    return out;
}

/// Expand merged nodes back to their originals ("audit" replay).
inline std::vector<std::string> replay_provenance(const TaskDag& merged, const Provenance& provenance) {
    std::vector<std::string> ids;
    for (const auto& t : merged.nodes) {
        auto it = provenance.find(t.id);
        if (it == provenance.end()) {
            ids.push_back(t.id);
        } else {
            ids.insert(ids.end(), it->second.begin(), it->second.end());
        }
    }
    return ids;
}

} // namespace perfgraph
