#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "perfgraph/dag.hpp"
#include "perfgraph/device.hpp"

namespace perfgraph {

enum class NodeType { Task = 0, Resource = 1, Memory = 2 };
enum class EdgeType { TT = 0, TR = 1, RR = 2, RM = 3 };

inline constexpr std::array<EdgeType, 4> kEdgeTypes{EdgeType::TT, EdgeType::TR, EdgeType::RR, EdgeType::RM};
inline constexpr int kMaxDvfsLevels = 8;

inline const char* edge_type_name(EdgeType t) {
    static const char* names[] = {"TT", "TR", "RR", "RM"};
    return names[static_cast<int>(t)];
}

inline NodeType edge_src_type(EdgeType t) { return t == EdgeType::TT || t == EdgeType::TR ? NodeType::Task : NodeType::Resource; }
inline NodeType edge_dst_type(EdgeType t) {
    switch (t) {
    case EdgeType::TT: return NodeType::Task;
    case EdgeType::TR:
    case EdgeType::RR: return NodeType::Resource;
    case EdgeType::RM: return NodeType::Memory;
    }
    return NodeType::Task;
}

/// Raw feature widths per node/edge type (device context included for nodes).
namespace layout {
inline constexpr std::size_t device_context = 6;
inline constexpr std::size_t task_core = 1 + cfg_index::width + 4 + 7 + 3;
inline constexpr std::size_t resource_core = kMaxDvfsLevels + 11;
inline constexpr std::size_t memory_core = 6;
inline constexpr std::size_t task = task_core + device_context;
inline constexpr std::size_t resource = resource_core + device_context;
inline constexpr std::size_t memory = memory_core + device_context;
inline constexpr std::size_t edge_tt = 8;
inline constexpr std::size_t edge_tr = 2;
inline constexpr std::size_t edge_rr = 2;
inline constexpr std::size_t edge_rm = 2;

inline std::size_t node_width(NodeType t) {
    switch (t) {
    case NodeType::Task: return task;
    case NodeType::Resource: return resource;
    case NodeType::Memory: return memory;
    }
    return 0;
}
inline std::size_t edge_width(EdgeType t) {
    switch (t) {
    case EdgeType::TT: return edge_tt;
    case EdgeType::TR: return edge_tr;
    case EdgeType::RR: return edge_rr;
    case EdgeType::RM: return edge_rm;
    }
    return 0;
}
// Offsets inside a task feature vector.
inline constexpr std::size_t task_depth = 1 + cfg_index::width + 4 + 7;
inline constexpr std::size_t task_dist_to_sink = task_depth + 1;
inline constexpr std::size_t task_critical = task_depth + 2;
// Offsets inside a resource feature vector.
inline constexpr std::size_t res_mask = kMaxDvfsLevels + 3;
} // namespace layout

struct GraphNode {
    std::string id;
    std::vector<double> features;
};

struct GraphEdge {
    std::size_t src = 0; // index into the source type's node list
    std::size_t dst = 0;
    std::vector<double> attrs;
};

struct GraphMeta {
    std::string source = "synthetic"; // real | synthetic
    std::uint64_t seed = 0;
    std::string device_id;
    std::string benchmark;
    double timestamp = 0.0;
    Provenance provenance;
};

/// Typed task/resource/memory graph: the surrogate's only input.
struct HeteroGraph {
    std::array<std::vector<GraphNode>, 3> nodes; // indexed by NodeType
    std::array<std::vector<GraphEdge>, 4> edges; // indexed by EdgeType
    std::vector<double> device_context;
    GraphMeta meta;

    std::vector<GraphNode>& of(NodeType t) { return nodes[static_cast<std::size_t>(t)]; }
    const std::vector<GraphNode>& of(NodeType t) const { return nodes[static_cast<std::size_t>(t)]; }
    std::vector<GraphEdge>& of(EdgeType t) { return edges[static_cast<std::size_t>(t)]; }
    const std::vector<GraphEdge>& of(EdgeType t) const { return edges[static_cast<std::size_t>(t)]; }

    void validate() const {
        for (EdgeType t : kEdgeTypes) {
            const std::size_t ns = of(edge_src_type(t)).size(), nd = of(edge_dst_type(t)).size();
            for (const auto& e : of(t))
                if (e.src >= ns || e.dst >= nd)
                    fail(ErrorKind::InvalidArgument, std::string("edge of type ") + edge_type_name(t) + " references a missing node");
        }
        TaskDag shadow;
        for (const auto& n : of(NodeType::Task)) shadow.nodes.push_back(TaskSpec{n.id, 1.0, {}, {}, {}});
        for (const auto& e : of(EdgeType::TT)) shadow.edges.push_back(DepEdge{shadow.nodes[e.src].id, shadow.nodes[e.dst].id, DepKind::Spawn, 0.0});
        if (!shadow.nodes.empty()) DagIndex check(shadow);
        if (meta.source != "real" && meta.source != "synthetic") fail(ErrorKind::InvalidArgument, "graph metadata source must be real or synthetic");
    }
};

inline std::vector<double> device_context_vector(const DeviceSheet& sheet) {
    double cache_total = 0.0;
    for (const auto& c : sheet.caches) cache_total += c.capacity_bytes;
    return {
        sheet.cores / 8.0,
        static_cast<double>(sheet.clusters.size()) / 4.0,
        sheet.max_freq_hz() * 1e-9,
        sheet.t_max_c / 100.0,
        static_cast<double>(sheet.caches.size()) / 4.0,
        std::log2(1.0 + cache_total) / 32.0,
    };
}

/// Assemble the heterogeneous graph for one (dag, device, runtime state, action).
/// Tasks link to every active core; cores link within their cluster and to
/// every declared cache level.
inline HeteroGraph build_hetero_graph(const TaskDag& dag, const DeviceSheet& sheet, const RuntimeState& state, const Action& action,
                                      GraphMeta meta = {}) {
    check_action(sheet, action);
    const DagIndex idx(dag);
    const DagMetrics dm = dag_metrics(dag);
    const auto cores = static_cast<std::size_t>(sheet.cores);
    if (state.temp_c.size() != cores || state.util_ema.size() != cores)
        fail(ErrorKind::InvalidArgument, "runtime state width does not match core count");

    HeteroGraph g;
    g.device_context = device_context_vector(sheet);
    if (meta.device_id.empty()) meta.device_id = sheet.device_id;
    g.meta = std::move(meta);
    const double f_max = sheet.max_freq_hz();
    const int active = action.active_count();
    const double span_scale = 1.0 / (1.0 + static_cast<double>(dm.span_hops));

    auto append_context = [&](std::vector<double>& f) { f.insert(f.end(), g.device_context.begin(), g.device_context.end()); };

    for (std::size_t v = 0; v < idx.size(); ++v) {
        const TaskSpec& t = dag.nodes[v];
        std::vector<double> f;
        f.reserve(layout::task);
        f.push_back(std::log1p(t.weight * 100.0));
        for (std::size_t k = 0; k < cfg_index::width; ++k) {
            const double x = k < t.cfg.size() ? t.cfg[k] : 0.0;
            const bool ratio = k == cfg_index::arith_intensity || k == cfg_index::branch_density || k == cfg_index::recursion_flag ||
                               k == cfg_index::pragma_flag;
            f.push_back(ratio ? x : std::log1p(std::max(0.0, x)) / 4.0);
        }
        f.push_back(std::log1p(t.stat.instructions * 1e-6));
        f.push_back(std::log1p(t.stat.bytes_moved * 1e-6));
        f.push_back(t.stat.parallel_degree / 8.0);
        f.push_back(std::log1p(t.stat.branch_proxy * 1e-5));
        f.push_back(t.dyn.input_size);
        f.push_back(std::log1p(t.dyn.iterations) / 4.0);
        f.push_back(static_cast<double>(idx.pred(v).size()) / 4.0);
        f.push_back(static_cast<double>(idx.succ(v).size()) / 4.0);
        f.push_back(t.dyn.prior_cpi);
        f.push_back(t.dyn.run_mode_flag);
        f.push_back(t.dyn.thermal_footprint);
        f.push_back(static_cast<double>(dm.depth[v]) * span_scale);
        f.push_back(static_cast<double>(dm.dist_to_sink[v]) * span_scale);
        f.push_back(dm.critical_node[v] ? 1.0 : 0.0);
        append_context(f);
        g.of(NodeType::Task).push_back({t.id, std::move(f)});
    }

    double llc_bandwidth = sheet.caches.empty() ? 1.0 : sheet.caches.back().bandwidth;
    for (int c = 0; c < sheet.cores; ++c) {
        const auto i = static_cast<std::size_t>(c);
        const DvfsTable& table = sheet.table_of(c);
        const bool on = action.mask[i] != 0;
        std::vector<double> f(kMaxDvfsLevels, 0.0);
        double freq = state.freq_hz.size() == cores ? state.freq_hz[i] : table.freqs_hz.front();
        double level = 0.0;
        if (on) {
            const int d = action.dvfs[i];
            f[static_cast<std::size_t>(std::min(d, kMaxDvfsLevels - 1))] = 1.0;
            freq = table.freqs_hz[static_cast<std::size_t>(d)];
            level = table.levels() > 1 ? static_cast<double>(d) / (table.levels() - 1) : 1.0;
        }
        f.push_back(level);
        f.push_back(freq * 1e-9);
        f.push_back(freq / f_max);
        f.push_back(on ? 1.0 : 0.0);
        f.push_back(static_cast<double>(sheet.core_cluster[i]));
        f.push_back(state.util_ema[i]);
        f.push_back((sheet.t_max_c - state.temp_c[i]) / 10.0);
        f.push_back(state.temp_trend.size() == cores ? state.temp_trend[i] : 0.0);
        f.push_back(on ? llc_bandwidth / active : 0.0);
        f.push_back(on ? table.power(freq) : 0.0);
        f.push_back(table.freqs_hz.back() / f_max);
        append_context(f);
        g.of(NodeType::Resource).push_back({"core" + std::to_string(c), std::move(f)});
    }

    for (const auto& cache : sheet.caches) {
        std::vector<double> f{static_cast<double>(cache.level) / 4.0, std::log2(cache.capacity_bytes) / 32.0, cache.associativity / 16.0,
                              cache.line_bytes / 64.0, cache.latency / 16.0, cache.bandwidth / 4.0};
        append_context(f);
        g.of(NodeType::Memory).push_back({"L" + std::to_string(cache.level), std::move(f)});
    }

    for (std::size_t e = 0; e < dag.edges.size(); ++e) {
        const DepEdge& d = dag.edges[e];
        const std::size_t s = idx.edge_src(e), t = idx.edge_dst(e);
        std::vector<double> a(3, 0.0);
        a[static_cast<std::size_t>(d.kind)] = 1.0;
        a.push_back(dm.critical_edge[e] ? 1.0 : 0.0);
        a.push_back(static_cast<double>(dm.depth[t] - dm.depth[s]) / 4.0);
        a.push_back(static_cast<double>(idx.pred(t).size()) / static_cast<double>(std::max(1, active)));
        a.push_back(std::log1p(d.bytes * 1e-6));
        a.push_back(0.0); // queue-delay estimate: no defining model, carried as zero
        g.of(EdgeType::TT).push_back({s, t, std::move(a)});
    }

    const double l1 = sheet.caches.empty() ? 32768.0 : sheet.caches.front().capacity_bytes;
    for (std::size_t v = 0; v < idx.size(); ++v) {
        for (int c = 0; c < sheet.cores; ++c) {
            const auto i = static_cast<std::size_t>(c);
            if (!action.mask[i]) continue;
            const double freq = sheet.table_of(c).freqs_hz[static_cast<std::size_t>(action.dvfs[i])];
            const double migration = std::log1p(dag.nodes[v].stat.bytes_moved / l1) / 8.0;
            g.of(EdgeType::TR).push_back({v, i, {freq / f_max, migration}});
        }
    }

    for (int a = 0; a < sheet.cores; ++a) {
        for (int b = a + 1; b < sheet.cores; ++b) {
            if (sheet.core_cluster[static_cast<std::size_t>(a)] != sheet.core_cluster[static_cast<std::size_t>(b)]) continue;
            const auto members = std::count(sheet.core_cluster.begin(), sheet.core_cluster.end(), sheet.core_cluster[static_cast<std::size_t>(a)]);
            g.of(EdgeType::RR).push_back(
                {static_cast<std::size_t>(a), static_cast<std::size_t>(b), {static_cast<double>(members) / sheet.cores, 1.0}});
        }
    }

    double total_bytes = 0.0;
    for (const auto& t : dag.nodes) total_bytes += t.stat.bytes_moved;
    for (int c = 0; c < sheet.cores; ++c) {
        const bool on = action.mask[static_cast<std::size_t>(c)] != 0;
        for (std::size_t m = 0; m < sheet.caches.size(); ++m) {
            const auto& cache = sheet.caches[m];
            const double access = on ? std::log1p(total_bytes / cache.line_bytes / active) / 16.0 : 0.0;
            const double share = on ? cache.bandwidth / active : 0.0;
            g.of(EdgeType::RM).push_back({static_cast<std::size_t>(c), m, {access, share}});
        }
    }
    return g;
}

namespace detail {
inline void append_number(std::string& out, double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    out += buf;
}
} // namespace detail

inline nlohmann::json meta_to_json(const GraphMeta& m) {
    nlohmann::json j;
    j["source"] = m.source;
    j["seed"] = m.seed;
    j["device_id"] = m.device_id;
    j["benchmark"] = m.benchmark;
    j["timestamp"] = m.timestamp;
    j["provenance"] = m.provenance;
    return j;
}

/// Line-oriented text form: a `meta` JSON line, a `context` line, one
/// `node <T|R|M>` line per node and one `edge <TT|TR|RR|RM>` line per edge.
inline std::string serialize(const HeteroGraph& g) {
    static const char* node_tags[] = {"T", "R", "M"};
    std::string out = "perfgraph-hetero v1\nmeta " + meta_to_json(g.meta).dump() + "\ncontext";
    for (double x : g.device_context) {
        out += ' ';
        detail::append_number(out, x);
    }
    out += '\n';
    for (std::size_t t = 0; t < 3; ++t) {
        for (std::size_t i = 0; i < g.nodes[t].size(); ++i) {
            out += std::string("node ") + node_tags[t] + " " + std::to_string(i) + " " + g.nodes[t][i].id;
            for (double x : g.nodes[t][i].features) {
                out += ' ';
                detail::append_number(out, x);
            }
            out += '\n';
        }
    }
    for (EdgeType t : kEdgeTypes) {
        for (const auto& e : g.of(t)) {
            out += std::string("edge ") + edge_type_name(t) + " " + std::to_string(e.src) + " " + std::to_string(e.dst);
            for (double x : e.attrs) {
                out += ' ';
                detail::append_number(out, x);
            }
            out += '\n';
        }
    }
    return out;
}

inline HeteroGraph deserialize_graph(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "perfgraph-hetero v1") fail(ErrorKind::ParseError, "not a perfgraph-hetero v1 document");
    HeteroGraph g;
    auto numbers = [](std::istringstream& ls) {
        std::vector<double> v;
        std::string tok;
        while (ls >> tok) v.push_back(std::stod(tok));
        return v;
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "meta") {
            const auto j = nlohmann::json::parse(line.substr(5));
            g.meta.source = j.at("source");
            g.meta.seed = j.at("seed");
            g.meta.device_id = j.at("device_id");
            g.meta.benchmark = j.at("benchmark");
            g.meta.timestamp = j.at("timestamp");
            g.meta.provenance = j.at("provenance").get<Provenance>();
        } else if (kind == "context") {
            g.device_context = numbers(ls);
        } else if (kind == "node") {
            std::string tag, id;
            std::size_t i = 0;
            ls >> tag >> i >> id;
            const std::size_t t = tag == "T" ? 0 : tag == "R" ? 1 : tag == "M" ? 2 : 3;
            if (t == 3 || i != g.nodes[t].size()) fail(ErrorKind::ParseError, "bad node line: " + line);
            g.nodes[t].push_back({id, numbers(ls)});
        } else if (kind == "edge") {
            std::string tag;
            GraphEdge e;
            ls >> tag >> e.src >> e.dst;
            e.attrs = numbers(ls);
            std::size_t t = 0;
            while (t < 4 && tag != edge_type_name(kEdgeTypes[t])) ++t;
            if (t == 4) fail(ErrorKind::ParseError, "bad edge line: " + line);
            g.edges[t].push_back(std::move(e));
        } else {
            fail(ErrorKind::ParseError, "unknown record '" + kind + "'");
        }
    }
    g.validate();
    return g;
}

} // namespace perfgraph
