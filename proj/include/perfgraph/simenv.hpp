#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "perfgraph/dag.hpp"
#include "perfgraph/device.hpp"
#include "perfgraph/keyed_config.hpp"
#include "perfgraph/rng.hpp"
#include "perfgraph/telemetry.hpp"

namespace perfgraph {

/// A task DAG plus the scalars the execution model needs.
struct SyntheticWorkload {
    std::string benchmark;
    double input_size = 1.0;
    TaskDag dag;
    double mem_intensity = 0.0; // mu in [0, 1]
    double branch_density = 0.05;
    double noise = 0.05;        // relative sigma of the time noise
};

struct BenchmarkProfile {
    std::string name;
    double mu;             // memory intensity
    double branch_density; // branches per instruction
    double work;           // total seconds at f_max for input size 1
    double exponent;       // work ~ input_size^exponent
    bool recursive;
};

inline const std::vector<BenchmarkProfile>& benchmark_profiles() {
    static const std::vector<BenchmarkProfile> p{
        {"fib", 0.05, 0.12, 0.40, 1.0, true},        {"nqueens", 0.10, 0.18, 0.60, 1.2, true},
        {"sort", 0.60, 0.10, 0.50, 1.1, true},       {"sparselu", 0.70, 0.04, 0.90, 1.3, false},
        {"strassen", 0.80, 0.03, 1.00, 1.4, true},   {"fft", 0.65, 0.05, 0.55, 1.1, true},
        {"health", 0.90, 0.08, 0.70, 1.0, false},    {"alignment", 0.30, 0.09, 0.80, 1.2, false},
        {"uts", 0.20, 0.15, 0.45, 1.0, true},        {"knapsack", 0.40, 0.14, 0.65, 1.1, true},
    };
    return p;
}

inline std::vector<std::string> benchmark_names() {
    std::vector<std::string> n;
    for (const auto& p : benchmark_profiles()) n.push_back(p.name);
    return n;
}

inline const BenchmarkProfile& benchmark_profile(const std::string& name) {
    for (const auto& p : benchmark_profiles())
        if (p.name == name) return p;
    fail(ErrorKind::InvalidArgument, "unknown benchmark '" + name + "'");
}

namespace detail {

/// Relative task weights and edges of each benchmark's DAG shape.
struct Shape {
    std::vector<std::pair<std::string, double>> nodes;
    std::vector<std::tuple<std::string, std::string, DepKind>> edges;

    void node(std::string id, double w) { nodes.emplace_back(std::move(id), w); }
    void edge(std::string s, std::string d, DepKind k = DepKind::Spawn) { edges.emplace_back(std::move(s), std::move(d), k); }
};

inline Shape benchmark_shape(const std::string& name) {
    Shape s;
    using K = DepKind;
    if (name == "fib") {
        // Two levels of binary spawning, then joins back to the root.
        s.node("root", 0.5);
        for (int i = 0; i < 2; ++i) {
            const std::string c = "c" + std::to_string(i);
            s.node(c, 0.5);
            s.edge("root", c);
            for (int j = 0; j < 2; ++j) {
                const std::string l = c + std::to_string(j);
                s.node(l, 2.0 + 0.5 * j);
                s.edge(c, l);
                s.edge(l, "join", K::Join);
            }
        }
        s.node("join", 0.3);
    } else if (name == "nqueens") {
        s.node("root", 0.4);
        for (int i = 0; i < 8; ++i) {
            const std::string c = "q" + std::to_string(i);
            s.node(c, 1.0 + 0.15 * (i % 3));
            s.edge("root", c);
            s.edge(c, "sum", K::Join);
        }
        s.node("sum", 0.2);
    } else if (name == "sort") {
        s.node("split", 0.3);
        for (int i = 0; i < 4; ++i) {
            s.node("leaf" + std::to_string(i), 1.5);
            s.edge("split", "leaf" + std::to_string(i));
        }
        s.node("m01", 0.8);
        s.node("m23", 0.8);
        s.edge("leaf0", "m01", K::Data);
        s.edge("leaf1", "m01", K::Data);
        s.edge("leaf2", "m23", K::Data);
        s.edge("leaf3", "m23", K::Data);
        s.node("final", 1.2);
        s.edge("m01", "final", K::Data);
        s.edge("m23", "final", K::Data);
    } else if (name == "sparselu") {
        s.node("lu0", 1.0);
        for (int i = 0; i < 3; ++i) {
            s.node("fwd" + std::to_string(i), 0.8);
            s.node("bdiv" + std::to_string(i), 0.8);
            s.edge("lu0", "fwd" + std::to_string(i), K::Data);
            s.edge("lu0", "bdiv" + std::to_string(i), K::Data);
        }
        for (int i = 0; i < 3; ++i) {
            s.node("bmod" + std::to_string(i), 1.4);
            s.edge("fwd" + std::to_string(i), "bmod" + std::to_string(i), K::Data);
            s.edge("bdiv" + std::to_string(i), "bmod" + std::to_string(i), K::Data);
            s.edge("bmod" + std::to_string(i), "lu1", K::Data);
        }
        s.node("lu1", 1.0);
    } else if (name == "strassen") {
        s.node("split", 0.4);
        for (int i = 0; i < 7; ++i) {
            s.node("m" + std::to_string(i), 1.0);
            s.edge("split", "m" + std::to_string(i));
            s.edge("m" + std::to_string(i), "combine", K::Join);
        }
        s.node("combine", 0.6);
    } else if (name == "fft") {
        s.node("in", 0.3);
        for (int i = 0; i < 4; ++i) {
            s.node("a" + std::to_string(i), 1.0);
            s.edge("in", "a" + std::to_string(i));
        }
        for (int i = 0; i < 4; ++i) {
            s.node("b" + std::to_string(i), 1.0);
            s.edge("a" + std::to_string(i), "b" + std::to_string(i), K::Data);
            s.edge("a" + std::to_string(i ^ 1), "b" + std::to_string(i), K::Data);
            s.edge("b" + std::to_string(i), "out", K::Join);
        }
        s.node("out", 0.3);
    } else if (name == "health") {
        s.node("village", 0.5);
        for (int i = 0; i < 3; ++i) {
            const std::string h = "h" + std::to_string(i);
            s.node(h, 0.6 + 0.4 * i);
            s.edge("village", h);
            for (int j = 0; j < 2 + (i == 2); ++j) {
                const std::string p = h + "p" + std::to_string(j);
                s.node(p, 0.9);
                s.edge(h, p);
                s.edge(p, "report", K::Join);
            }
        }
        s.node("report", 0.4);
    } else if (name == "alignment") {
        s.node("load", 0.5);
        for (int i = 0; i < 6; ++i) {
            s.node("pair" + std::to_string(i), 1.2);
            s.edge("load", "pair" + std::to_string(i), K::Data);
            s.edge("pair" + std::to_string(i), "reduce", K::Data);
        }
        s.node("reduce", 0.4);
    } else if (name == "uts") {
        s.node("r", 0.3);
        s.node("a", 0.5);
        s.node("b", 0.4);
        s.edge("r", "a");
        s.edge("r", "b");
        for (int i = 0; i < 4; ++i) {
            s.node("a" + std::to_string(i), 0.8 + 0.3 * i);
            s.edge("a", "a" + std::to_string(i));
        }
        for (int i = 0; i < 2; ++i) {
            s.node("b" + std::to_string(i), 0.6);
            s.edge("b", "b" + std::to_string(i));
        }
        s.node("a3x", 1.5);
        s.edge("a3", "a3x");
        s.node("done", 0.1);
        for (const char* t : {"a0", "a1", "a2", "a3x", "b0", "b1"}) s.edge(t, "done", K::Join);
    } else if (name == "knapsack") {
        s.node("k0", 0.8);
        s.node("k1", 0.8);
        s.edge("k0", "k1");
        for (int i = 0; i < 3; ++i) {
            s.node("x" + std::to_string(i), 1.0);
            s.edge("k1", "x" + std::to_string(i));
        }
        s.node("k2", 0.6);
        for (int i = 0; i < 3; ++i) s.edge("x" + std::to_string(i), "k2", K::Join);
        s.node("y0", 0.9);
        s.node("y1", 0.9);
        s.edge("k2", "y0");
        s.edge("k2", "y1");
        s.node("best", 0.3);
        s.edge("y0", "best", K::Join);
        s.edge("y1", "best", K::Join);
    } else {
        fail(ErrorKind::InvalidArgument, "unknown benchmark '" + name + "'");
    }
    return s;
}

} // namespace detail

/// Deterministic workload for a catalog benchmark at an input size.
inline SyntheticWorkload make_workload(const std::string& benchmark, double input_size, double noise = 0.05) {
    if (!(input_size > 0.0)) fail(ErrorKind::InvalidArgument, "input size must be > 0");
    const BenchmarkProfile& prof = benchmark_profile(benchmark);
    const detail::Shape shape = detail::benchmark_shape(benchmark);
    double rel_total = 0.0;
    for (const auto& [id, w] : shape.nodes) rel_total += w;
    const double scale = prof.work * std::pow(input_size, prof.exponent) / rel_total;

    SyntheticWorkload wl;
    wl.benchmark = benchmark;
    wl.input_size = input_size;
    wl.mem_intensity = prof.mu;
    wl.branch_density = prof.branch_density;
    wl.noise = noise;
    std::map<std::string, std::pair<int, int>> degree;
    for (const auto& [s, d, k] : shape.edges) {
        ++degree[s].second;
        ++degree[d].first;
    }
    for (const auto& [id, rel] : shape.nodes) {
        TaskSpec t;
        t.id = id;
        t.weight = rel * scale;
        const double instr = t.weight * 2.0e9 * (1.6 - prof.mu);
        const double mem_ops = instr * (0.1 + 0.4 * prof.mu);
        const double arith = instr * (0.6 - 0.4 * prof.mu);
        t.cfg.assign(cfg_index::width, 0.0);
        t.cfg[cfg_index::loop_count] = 1.0 + 4.0 * rel;
        t.cfg[cfg_index::max_loop_depth] = prof.mu > 0.5 ? 3.0 : 2.0;
        t.cfg[cfg_index::cyclomatic] = 2.0 + 20.0 * prof.branch_density;
        t.cfg[cfg_index::branch_count] = 10.0 * rel * prof.branch_density * 10.0;
        t.cfg[cfg_index::arith_ops] = arith * 1e-8;
        t.cfg[cfg_index::mem_ops] = mem_ops * 1e-8;
        t.cfg[cfg_index::arith_intensity] = arith / (arith + mem_ops);
        t.cfg[cfg_index::array_accesses] = mem_ops * 0.6 * 1e-8;
        t.cfg[cfg_index::pointer_ops] = mem_ops * 0.4 * 1e-8;
        t.cfg[cfg_index::branch_density] = prof.branch_density;
        t.cfg[cfg_index::recursion_flag] = prof.recursive ? 1.0 : 0.0;
        t.cfg[cfg_index::pragma_flag] = 1.0;
        t.stat.instructions = instr;
        t.stat.bytes_moved = mem_ops * 8.0 * prof.mu;
        t.stat.parallel_degree = static_cast<double>(std::max(1, degree[id].second));
        t.stat.branch_proxy = instr * prof.branch_density;
        t.dyn.input_size = input_size;
        t.dyn.iterations = std::round(4.0 * rel * input_size);
        t.dyn.fan_in = degree[id].first;
        t.dyn.fan_out = degree[id].second;
        t.dyn.prior_cpi = 0.7 + prof.mu;
        t.dyn.run_mode_flag = 1.0;
        t.dyn.thermal_footprint = rel / 2.0;
        wl.dag.nodes.push_back(std::move(t));
    }
    for (const auto& [s, d, k] : shape.edges) {
        const double bytes = k == DepKind::Data ? 1e6 * input_size * (0.5 + prof.mu) : 4096.0;
        wl.dag.edges.push_back(DepEdge{s, d, k, bytes});
    }
    return wl;
}

/// Thermal and noise constants of the simulated device.
struct EnvConfig {
    double r_th = 10.0;       // K/W per core
    double tau_rc = 5.0;      // s
    double noise = 0.05;      // relative time noise sigma
    double counter_noise = 0.02;
    double util_decay = 0.5;  // EMA weight of the previous utilization
    double idle_gap = 0.5;    // s of idling between consecutive runs
    std::map<std::string, double> mu_override;
};

inline EnvConfig env_config_from(const KeyedConfig& cfg, EnvConfig base = {}) {
    base.r_th = cfg.num("env.r_th", base.r_th);
    base.tau_rc = cfg.num("env.tau_rc", base.tau_rc);
    base.noise = cfg.num("env.noise", base.noise);
    base.counter_noise = cfg.num("env.counter_noise", base.counter_noise);
    base.util_decay = cfg.num("env.util_decay", base.util_decay);
    base.idle_gap = cfg.num("env.idle_gap", base.idle_gap);
    for (const auto& name : benchmark_names())
        if (cfg.has("env.mu." + name)) base.mu_override[name] = cfg.num("env.mu." + name);
    if (!(base.r_th > 0.0) || !(base.tau_rc > 0.0)) fail(ErrorKind::ConfigError, "thermal constants must be positive");
    if (!(base.noise >= 0.0)) fail(ErrorKind::ConfigError, "env.noise must be >= 0");
    return base;
}

struct SimEnvState {
    std::vector<double> temp_c;
    std::vector<double> util_ema;
    double ambient_c = 25.0;
    double r_th = 10.0;
    double tau_rc = 5.0;
    double clock = 0.0;
    std::int64_t iteration = 0;
    std::uint64_t seed = 0;
    Rng rng;

    static SimEnvState fresh(const DeviceSheet& sheet, const EnvConfig& cfg, std::uint64_t seed) {
        SimEnvState s;
        s.temp_c.assign(static_cast<std::size_t>(sheet.cores), sheet.ambient_c);
        s.util_ema.assign(static_cast<std::size_t>(sheet.cores), 0.0);
        s.ambient_c = sheet.ambient_c;
        s.r_th = cfg.r_th;
        s.tau_rc = cfg.tau_rc;
        s.seed = seed;
        s.rng = substream(seed, "env");
        return s;
    }

    double hottest() const { return temp_c.empty() ? ambient_c : *std::max_element(temp_c.begin(), temp_c.end()); }
};

inline RuntimeState runtime_state(const SimEnvState& s, const DeviceSheet& sheet) {
    RuntimeState r = RuntimeState::idle(sheet);
    r.temp_c = s.temp_c;
    r.util_ema = s.util_ema;
    return r;
}

/// First-order RC step of one core over `dt` seconds at constant power.
inline double rc_step(double temp, double ambient, double power, double r_th, double tau, double dt) {
    const double decay = std::exp(-dt / tau);
    return ambient + (temp - ambient) * decay + power * r_th * (1.0 - decay);
}

inline void idle(SimEnvState& s, double seconds, double util_decay = 0.5) {
    for (double& t : s.temp_c) t = rc_step(t, s.ambient_c, 0.0, s.r_th, s.tau_rc, seconds);
    for (double& u : s.util_ema) u *= util_decay;
    s.clock += seconds;
}

/// Every non-empty mask with every per-core DVFS assignment, sorted; empty
/// when any core is above the thermal cap.
inline std::vector<Action> enumerate_actions(const DeviceSheet& sheet, const std::vector<double>& temps_c, double t_max_c) {
    std::vector<Action> out;
    for (double t : temps_c)
        if (t > t_max_c) return out;
    const int n = sheet.cores;
    for (unsigned bits = 1; bits < (1u << n); ++bits) {
        Action base;
        base.mask.assign(static_cast<std::size_t>(n), 0);
        base.dvfs.assign(static_cast<std::size_t>(n), -1);
        std::vector<int> active;
        for (int c = 0; c < n; ++c)
            if (bits >> c & 1u) {
                base.mask[static_cast<std::size_t>(c)] = 1;
                base.dvfs[static_cast<std::size_t>(c)] = 0;
                active.push_back(c);
            }
        // Odometer over the active cores' ladders.
        while (true) {
            out.push_back(base);
            std::size_t k = active.size();
            while (k > 0) {
                const int c = active[k - 1];
                int& d = base.dvfs[static_cast<std::size_t>(c)];
                if (++d < sheet.table_of(c).levels()) break;
                d = 0;
                --k;
            }
            if (k == 0) break;
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Mean of f/f_max over active cores (f_max is the sheet-wide top frequency).
inline double mean_speed(const DeviceSheet& sheet, const Action& a) {
    double s = 0.0;
    for (int c = 0; c < sheet.cores; ++c) {
        const auto i = static_cast<std::size_t>(c);
        if (a.mask[i]) s += sheet.table_of(c).freqs_hz[static_cast<std::size_t>(a.dvfs[i])] / sheet.max_freq_hz();
    }
    return s / a.active_count();
}

inline constexpr double kContentionScale = 0.1;
inline constexpr double kTiedOverhead = 1.05;

/// Noise-free makespan: max(T1/(P s), Tinf/s) * kappa.
inline double model_time(const SyntheticWorkload& w, const Action& a, const DeviceSheet& sheet, RunMode mode = RunMode::Tasks) {
    const DagMetrics m = dag_metrics(w.dag);
    const double s = mean_speed(sheet, a);
    const int p = mode == RunMode::Serial ? 1 : a.active_count();
    const double kappa = 1.0 + w.mem_intensity * (p - 1) * kContentionScale;
    double t = std::max(m.work / (p * s), m.span / s) * kappa;
    if (mode == RunMode::Tied) t *= kTiedOverhead;
    return t;
}

inline double action_power(const Action& a, const DeviceSheet& sheet) {
    double p = 0.0;
    for (int c = 0; c < sheet.cores; ++c) {
        const auto i = static_cast<std::size_t>(c);
        if (a.mask[i]) p += sheet.table_of(c).power(sheet.table_of(c).freqs_hz[static_cast<std::size_t>(a.dvfs[i])]);
    }
    return p;
}

// D25 counter synthesis constants.
namespace counters {
inline constexpr double refs_per_instr = 0.3;   // times (0.5 + mu)
inline constexpr double miss_base = 0.02;       // miss rate at mu = 0
inline constexpr double miss_mu = 0.10;         // extra miss rate per unit mu
inline constexpr double miss_per_core = 0.15;   // relative growth per extra core
inline constexpr double branch_miss_rate = 0.02;
inline constexpr double page_bytes = 4096.0;
} // namespace counters

struct SimStep {
    TelemetryRow row;
    SimEnvState next;
};

inline SimStep simulate_execution(const SimEnvState& state, const SyntheticWorkload& w, const Action& a, const DeviceSheet& sheet,
                                  RunMode mode = RunMode::Tasks, const EnvConfig& env = {}) {
    check_action(sheet, a);
    SimStep out{{}, state};
    SimEnvState& nx = out.next;
    const DagMetrics dm = dag_metrics(w.dag);
    const double mu = env.mu_override.count(w.benchmark) ? env.mu_override.at(w.benchmark) : w.mem_intensity;
    const int active = a.active_count();
    const int p = mode == RunMode::Serial ? 1 : active;
    const double s = mean_speed(sheet, a);
    const double kappa = 1.0 + mu * (p - 1) * kContentionScale;
    const double sigma = w.noise;
    auto noise = [&](double sd) { return std::clamp(sd * standard_normal(nx.rng), -3.0 * sd, 3.0 * sd); };
    const double eps = noise(sigma);
    double time = std::max(dm.work / (p * s), dm.span / s) * kappa * (1.0 + eps);
    if (mode == RunMode::Tied) time *= kTiedOverhead;

    TelemetryRow& r = out.row;
    r.timestamp = state.clock;
    r.iteration = state.iteration;
    r.benchmark = w.benchmark;
    r.input_size = w.input_size;
    r.run_mode = mode;
    r.core_mask = a.mask_string();
    r.num_active_cores = active;
    r.input_params = "n=" + detail::fmt_double(w.input_size);
    double power = 0.0, fsum = 0.0;
    std::vector<double> core_power(static_cast<std::size_t>(sheet.cores), 0.0);
    for (int c = 0; c < sheet.cores; ++c) {
        const auto i = static_cast<std::size_t>(c);
        const DvfsTable& t = sheet.table_of(c);
        if (a.mask[i]) {
            const double f = t.freqs_hz[static_cast<std::size_t>(a.dvfs[i])];
            core_power[i] = t.power(f);
            power += core_power[i];
            fsum += f;
            r.dvfs_indices.push_back(a.dvfs[i]);
            r.measured_freqs.push_back(f);
        } else {
            r.dvfs_indices.push_back(-1);
            r.measured_freqs.push_back(t.freqs_hz.front());
        }
    }
    r.elapsed_time = time;
    r.power = power;
    r.energy = power * time;

    const double busy = dm.work * kappa * (1.0 + eps) / s; // core-seconds spent on work
    double instr = 0.0, branch_proxy = 0.0, bytes = 0.0;
    for (const auto& t : w.dag.nodes) {
        instr += t.stat.instructions;
        branch_proxy += t.stat.branch_proxy;
        bytes += t.stat.bytes_moved;
    }
    r.task_clock = std::min(busy, time * p);
    r.cpu_clock = time * active;
    r.cycles = r.task_clock * fsum / active;
    r.instructions = instr;
    r.cache_refs = instr * counters::refs_per_instr * (0.5 + mu);
    const double miss_rate = (counters::miss_base + counters::miss_mu * mu) * (1.0 + counters::miss_per_core * (p - 1));
    r.cache_misses = r.cache_refs * miss_rate * (1.0 + noise(env.counter_noise));
    r.branches = branch_proxy;
    r.branch_misses = branch_proxy * counters::branch_miss_rate * (1.0 + 2.0 * w.branch_density) * (1.0 + noise(env.counter_noise));
    r.page_faults = std::round(bytes / counters::page_bytes);

    r.temps_pre = state.temp_c;
    r.util_pre = state.util_ema;
    const double util = r.task_clock / (time * p);
    for (int c = 0; c < sheet.cores; ++c) {
        const auto i = static_cast<std::size_t>(c);
        nx.temp_c[i] = rc_step(state.temp_c[i], state.ambient_c, core_power[i], state.r_th, state.tau_rc, time);
        nx.util_ema[i] = env.util_decay * state.util_ema[i] + (1.0 - env.util_decay) * (a.mask[i] ? util : 0.0);
    }
    r.temps_post = nx.temp_c;
    double dt = -INFINITY;
    for (std::size_t i = 0; i < nx.temp_c.size(); ++i) dt = std::max(dt, nx.temp_c[i] - state.temp_c[i]);
    r.delta_t = dt;
    r.headroom = sheet.t_max_c - nx.hottest();
    r.source = "synthetic";
    r.seed = state.seed;
    r.device_id = sheet.device_id;
    nx.clock += time;
    nx.iteration += 1;
    return out;
}

struct SweepGrid {
    std::vector<std::string> benchmarks;
    std::vector<std::vector<std::uint8_t>> masks;
    std::vector<std::vector<int>> dvfs; // per-core indices, clamped per cluster
    std::vector<Action> actions;        // explicit list; replaces masks x dvfs when non-empty
    std::vector<double> inputs{1.0};
    std::vector<RunMode> modes{RunMode::Tasks};
    int repetitions = 1;

    std::size_t action_count() const { return actions.empty() ? masks.size() * dvfs.size() : actions.size(); }
    std::size_t cells() const { return benchmarks.size() * action_count() * inputs.size() * modes.size(); }
};

inline std::vector<std::uint8_t> parse_mask(const std::string& s) {
    std::vector<std::uint8_t> m;
    for (char c : s) {
        if (c != '0' && c != '1') fail(ErrorKind::ConfigError, "mask must be a 0/1 string: " + s);
        m.push_back(c == '1');
    }
    return m;
}

/// 10 benchmarks x 100 distinct actions x 2 inputs = 2000 cells. The
/// actions are evenly spaced over the sorted feasible set of the sheet.
inline SweepGrid default_sweep_grid(const DeviceSheet& sheet = default_device_sheet(), std::size_t n_actions = 100) {
    SweepGrid g;
    g.benchmarks = benchmark_names();
    const auto all = enumerate_actions(sheet, std::vector<double>(static_cast<std::size_t>(sheet.cores), sheet.ambient_c), INFINITY);
    n_actions = std::min(n_actions, all.size());
    for (std::size_t i = 0; i < n_actions; ++i) g.actions.push_back(all[i * all.size() / n_actions]);
    g.inputs = {1.0, 2.0};
    return g;
}

inline Action grid_action(const DeviceSheet& sheet, const std::vector<std::uint8_t>& mask, const std::vector<int>& dvfs) {
    if (mask.size() != static_cast<std::size_t>(sheet.cores) || dvfs.size() != mask.size())
        fail(ErrorKind::ConfigError, "grid mask/dvfs width does not match the device");
    Action a;
    a.mask = mask;
    a.dvfs.assign(mask.size(), -1);
    for (int c = 0; c < sheet.cores; ++c) {
        const auto i = static_cast<std::size_t>(c);
        if (mask[i]) a.dvfs[i] = std::clamp(dvfs[i], 0, sheet.table_of(c).levels() - 1);
    }
    return a;
}

/// One warm-up run (discarded) then `repetitions` recorded runs per cell.
inline std::vector<TelemetryRow> sweep_generate(const SweepGrid& grid, const DeviceSheet& sheet, std::uint64_t seed, const EnvConfig& env = {}) {
    if (grid.cells() == 0 || grid.repetitions < 1) fail(ErrorKind::InvalidArgument, "sweep grid is empty");
    std::vector<Action> actions = grid.actions;
    if (actions.empty())
        for (const auto& mask : grid.masks)
            for (const auto& dv : grid.dvfs) actions.push_back(grid_action(sheet, mask, dv));
    SimEnvState state = SimEnvState::fresh(sheet, env, seed);
    std::vector<TelemetryRow> rows;
    rows.reserve(grid.cells() * static_cast<std::size_t>(grid.repetitions));
    for (const auto& bench : grid.benchmarks)
        for (double input : grid.inputs) {
            const SyntheticWorkload w = make_workload(bench, input, env.noise);
            for (RunMode mode : grid.modes)
                for (const Action& a : actions) {
                    state = simulate_execution(state, w, a, sheet, mode, env).next;
                    idle(state, env.idle_gap, env.util_decay);
                    for (int rep = 0; rep < grid.repetitions; ++rep) {
                        SimStep step = simulate_execution(state, w, a, sheet, mode, env);
                        rows.push_back(std::move(step.row));
                        state = std::move(step.next);
                        idle(state, env.idle_gap, env.util_decay);
                    }
                }
        }
    return rows;
}

} // namespace perfgraph
