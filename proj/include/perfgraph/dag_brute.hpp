#pragma once
// Exhaustive references for small DAGs: path enumeration and optimal
// makespan by trying every schedule. Exponential; keep graphs tiny.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "perfgraph/dag.hpp"
#include "perfgraph/rng.hpp"

namespace perfgraph::brute {

/// Random DAG with integer weights (so path sums are exact). Ids are shuffled
/// letters so that node order is not a topological order.
inline TaskDag random_dag(Rng& rng, std::size_t max_nodes, double edge_p = 0.4) {
    const std::size_t n = 1 + uniform_index(rng, max_nodes);
    std::vector<std::size_t> rank(n);
    std::iota(rank.begin(), rank.end(), 0);
    shuffle(rank, rng);
    TaskDag d;
    for (std::size_t i = 0; i < n; ++i) {
        TaskSpec t;
        t.id = std::string(1, static_cast<char>('a' + i));
        t.weight = static_cast<double>(1 + uniform_index(rng, 9));
        t.cfg.assign(cfg_index::width, 0.0);
        d.nodes.push_back(t);
    }
    // Edge u -> v allowed when rank[u] < rank[v].
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = 0; v < n; ++v)
            if (rank[u] < rank[v] && uniform01(rng) < edge_p)
                d.edges.push_back({d.nodes[u].id, d.nodes[v].id, DepKind::Data, 64.0});
    return d;
}

struct Adjacency {
    std::vector<std::vector<std::size_t>> succ, pred;
};

inline Adjacency adjacency(const TaskDag& d) {
    Adjacency a;
    a.succ.resize(d.nodes.size());
    a.pred.resize(d.nodes.size());
    auto id = [&](const std::string& s) {
        for (std::size_t i = 0; i < d.nodes.size(); ++i)
            if (d.nodes[i].id == s) return i;
        return d.nodes.size();
    };
    for (const auto& e : d.edges) {
        a.succ[id(e.src)].push_back(id(e.dst));
        a.pred[id(e.dst)].push_back(id(e.src));
    }
    return a;
}

/// Every directed path (as node sequences), including single nodes.
inline std::vector<std::vector<std::size_t>> all_paths(const TaskDag& d) {
    const Adjacency a = adjacency(d);
    std::vector<std::vector<std::size_t>> out;
    std::function<void(std::vector<std::size_t>&)> walk = [&](std::vector<std::size_t>& p) {
        out.push_back(p);
        for (std::size_t w : a.succ[p.back()]) {
            p.push_back(w);
            walk(p);
            p.pop_back();
        }
    };
    for (std::size_t v = 0; v < d.nodes.size(); ++v) {
        std::vector<std::size_t> p{v};
        walk(p);
    }
    return out;
}

struct PathMetrics {
    double span = 0.0, work = 0.0, density = 0.0;
    std::size_t diameter = 0;
    std::vector<std::size_t> widths;
};

inline PathMetrics path_metrics(const TaskDag& d) {
    const std::size_t n = d.nodes.size();
    PathMetrics m;
    for (const auto& t : d.nodes) m.work += t.weight;
    const auto paths = all_paths(d);
    const std::size_t none = std::numeric_limits<std::size_t>::max();
    std::vector<std::vector<std::size_t>> shortest(n, std::vector<std::size_t>(n, none));
    std::vector<std::size_t> depth(n, 0);
    for (const auto& p : paths) {
        double w = 0.0;
        for (std::size_t v : p) w += d.nodes[v].weight;
        m.span = std::max(m.span, w);
        const std::size_t hops = p.size() - 1;
        auto& s = shortest[p.front()][p.back()];
        s = std::min(s, hops);
        // Depth = longest hop count of any path ending at the node whose
        // start has no predecessor; any path's hop count is a lower bound.
        depth[p.back()] = std::max(depth[p.back()], hops);
    }
    for (std::size_t u = 0; u < n; ++u)
        for (std::size_t v = 0; v < n; ++v)
            if (u != v && shortest[u][v] != none) m.diameter = std::max(m.diameter, shortest[u][v]);
    m.density = n > 1 ? static_cast<double>(d.edges.size()) / static_cast<double>(n * (n - 1)) : 0.0;
    std::size_t levels = 0;
    for (std::size_t v = 0; v < n; ++v) levels = std::max(levels, depth[v] + 1);
    m.widths.assign(levels, 0);
    for (std::size_t v = 0; v < n; ++v) ++m.widths[depth[v]];
    return m;
}

/// Optimal non-preemptive makespan on P identical processors: every task
/// permutation that respects precedence, every processor assignment, tasks
/// started as early as possible in permutation order.
inline double optimal_makespan(const TaskDag& d, int processors) {
    const std::size_t n = d.nodes.size();
    const Adjacency a = adjacency(d);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> pos(n);
    std::vector<int> assign(n);
    std::vector<double> finish(n), free_at(static_cast<std::size_t>(processors));
    do {
        for (std::size_t i = 0; i < n; ++i) pos[perm[i]] = i;
        bool topo = true;
        for (std::size_t v = 0; v < n && topo; ++v)
            for (std::size_t w : a.succ[v])
                if (pos[v] > pos[w]) topo = false;
        if (!topo) continue;
        std::size_t combos = 1;
        for (std::size_t i = 0; i < n; ++i) combos *= static_cast<std::size_t>(processors);
        for (std::size_t c = 0; c < combos; ++c) {
            std::size_t x = c;
            for (std::size_t i = 0; i < n; ++i) {
                assign[i] = static_cast<int>(x % static_cast<std::size_t>(processors));
                x /= static_cast<std::size_t>(processors);
            }
            std::fill(free_at.begin(), free_at.end(), 0.0);
            double span = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t v = perm[i];
                double start = free_at[static_cast<std::size_t>(assign[i])];
                for (std::size_t p : a.pred[v]) start = std::max(start, finish[p]);
                finish[v] = start + d.nodes[v].weight;
                free_at[static_cast<std::size_t>(assign[i])] = finish[v];
                span = std::max(span, finish[v]);
            }
            best = std::min(best, span);
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

} // namespace perfgraph::brute
