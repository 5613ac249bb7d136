// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/gamma.hpp>

#include "oracles.hpp"
#include "perfgraph/pipeline.hpp"

using namespace perfgraph;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    failures += !ok;
}

template <class... T>
std::string str(const T&... parts) {
    std::ostringstream s;
    s.precision(6);
    (s << ... << parts);
    return s.str();
}

ModelConfig tiny_model() {
    ModelConfig c;
    c.hidden = 8;
    c.layers = 2;
    c.heads = 2;
    c.edge_proj = 4;
    c.trunk = 8;
    c.trunk_layers = 1;
    return c;
}

HeteroGraph random_graph(Rng& rng, const DeviceSheet& sheet, const std::vector<Action>& actions) {
    const auto names = benchmark_names();
    const auto w = make_workload(names[uniform_index(rng, names.size())], uniform(rng, 0.5, 3.0));
    RuntimeState st = RuntimeState::idle(sheet);
    for (auto& t : st.temp_c) t = uniform(rng, 25, 70);
    for (auto& u : st.util_ema) u = uniform01(rng);
    return build_hetero_graph(w.dag, sheet, st, actions[uniform_index(rng, actions.size())]);
}

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

TelemetryRow random_row(Rng& rng) {
    TelemetryRow r;
    r.timestamp = uniform(rng, 0, 1e4);
    r.iteration = static_cast<std::int64_t>(uniform_index(rng, 100000));
    r.benchmark = "bench" + std::to_string(uniform_index(rng, 10));
    r.input_size = uniform(rng, 0.5, 4.0);
    r.run_mode = static_cast<RunMode>(uniform_index(rng, 3));
    const std::size_t cores = 1 + uniform_index(rng, 8);
    r.num_active_cores = 0;
    for (std::size_t c = 0; c < cores; ++c) {
        const bool on = uniform01(rng) < 0.6;
        r.core_mask += on ? '1' : '0';
        r.num_active_cores += on;
        r.dvfs_indices.push_back(on ? static_cast<int>(uniform_index(rng, 5)) : -1);
        r.measured_freqs.push_back(uniform(rng, 3e8, 3e9));
        r.temps_pre.push_back(uniform(rng, 20, 90));
        r.temps_post.push_back(uniform(rng, 20, 90));
        r.util_pre.push_back(uniform01(rng));
    }
    r.input_params = "n=" + std::to_string(uniform_index(rng, 1000));
    r.elapsed_time = uniform(rng, 1e-4, 100);
    r.energy = uniform(rng, 0, 500);
    r.power = uniform(rng, 0, 20);
    r.cycles = std::exp(uniform(rng, 0, 40));
    r.instructions = std::exp(uniform(rng, 0, 40));
    r.cache_refs = uniform(rng, 0, 1e9);
    r.cache_misses = uniform(rng, 0, 1) * r.cache_refs;
    r.branches = uniform(rng, 0, 1e9);
    r.branch_misses = uniform(rng, 0, 1) * r.branches;
    r.task_clock = uniform(rng, 0, 100);
    r.cpu_clock = uniform(rng, 0, 100);
    r.page_faults = std::floor(uniform(rng, 0, 1e5));
    double dt = -1e300;
    for (std::size_t z = 0; z < r.temps_pre.size(); ++z) dt = std::max(dt, r.temps_post[z] - r.temps_pre[z]);
    r.delta_t = dt;
    r.headroom = uniform(rng, -10, 60);
    r.seed = rng();
    r.device_id = "dev" + std::to_string(uniform_index(rng, 3));
    return r;
}

void criterion1() {
    const auto t0 = Clock::now();
    Rng rng = substream(1, "acceptance.dag");
    int bad = 0;
    for (int i = 0; i < 200; ++i) {
        const TaskDag d = oracle::random_dag(rng, 7);
        const auto m = dag_metrics(d);
        const auto ref = oracle::path_metrics(d);
        bad += m.span != ref.span || m.diameter != ref.diameter || m.density != ref.density || m.width_profile != ref.widths || m.work != ref.work;
    }
    const double s = seconds_since(t0);
    report(1, bad == 0 && s < 5.0, str("200 DAGs, ", bad, " mismatches against path enumeration, ", s, " s"));
}

void criterion2() {
    Rng rng = substream(2, "acceptance.brent");
    int bad = 0;
    for (int i = 0; i < 100; ++i) {
        const TaskDag d = oracle::random_dag(rng, 6);
        const auto m = dag_metrics(d);
        for (int P = 1; P <= 3; ++P) {
            const double opt = oracle::optimal_makespan(d, P);
            const double tol = 1e-9 * std::max(1.0, m.work);
            bad += opt < std::max(m.span, m.work / P) - tol || opt > m.work / P + m.span + tol;
        }
    }
    report(2, bad == 0, str("100 DAGs x P in {1,2,3}, ", bad, " violations"));
}

void criterion3() {
    const auto t0 = Clock::now();
    const DeviceSheet sheet = default_device_sheet();
    const auto actions = enumerate_actions(sheet, std::vector<double>(static_cast<std::size_t>(sheet.cores), sheet.ambient_c), INFINITY);
    Rng rng = substream(3, "acceptance.grad");
    std::vector<HeteroGraph> graphs;
    std::vector<TargetVector> y;
    for (int i = 0; i < 5; ++i) {
        graphs.push_back(random_graph(rng, sheet, actions));
        TargetVector t;
        for (auto& v : t) v = uniform(rng, -1, 1);
        y.push_back(t);
    }
    Surrogate model(tiny_model(), 3);
    // Zero biases leave ReLU inputs on the kink for constant edge features.
    for (auto& p : model.params().items())
        for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] += uniform(rng, -0.05, 0.05);
    std::vector<const HeteroGraph*> ptrs;
    for (const auto& g : graphs) ptrs.push_back(&g);
    const auto gc = grad_check(model, ptrs, y, LossConfig{});
    const double s = seconds_since(t0);
    report(3, gc.max_rel_error < 1e-4 && s < 120.0,
           str("max relative error ", gc.max_rel_error, " over ", gc.checked, " parameters (worst ", gc.worst, "), ", s, " s"));
}

void criterion4() {
    Rng rng = substream(4, "acceptance.nig");
    auto draw = [&] {
        return NigParams{uniform(rng, -2, 2), std::exp(uniform(rng, -2, 2)), 1.2 + std::exp(uniform(rng, -1, 2)), std::exp(uniform(rng, -2, 1))};
    };
    double worst = 0.0;
    int identity_bad = 0;
    for (int i = 0; i < 50; ++i) {
        const NigParams p = draw();
        const double y = p.gamma + uniform(rng, -3, 3);
        worst = std::max(worst, std::abs(nig_nll(y, p) - oracle::nll_by_quadrature(y, p)));
        const auto u = decompose(p);
        identity_bad += u.total != u.aleatoric + u.epistemic;
    }
    const NigParams p{1.0, 2.0, 3.0, 1.5};
    const auto iv = prediction_interval(p, 0.95);
    boost::math::gamma_distribution<double> precision(p.alpha, 1.0 / p.beta);
    const int n = 100000;
    int hit = 0;
    for (int i = 0; i < n; ++i) {
        const double sigma2 = 1.0 / boost::math::quantile(precision, uniform01(rng) * (1 - 1e-16) + 1e-17);
        const double mu = p.gamma + std::sqrt(sigma2 / p.nu) * standard_normal(rng);
        const double yy = mu + std::sqrt(sigma2) * standard_normal(rng);
        hit += yy >= iv.lo && yy <= iv.hi;
    }
    const double cover = static_cast<double>(hit) / n;
    report(4, worst <= 1e-6 && identity_bad == 0 && std::abs(cover - 0.95) <= 0.01,
           str("NLL vs quadrature max |diff| ", worst, ", decomposition mismatches ", identity_bad, ", 95% coverage ", cover));
}

void criterion5() {
    const DeviceSheet sheet = default_device_sheet();
    const auto actions = enumerate_actions(sheet, std::vector<double>(static_cast<std::size_t>(sheet.cores), sheet.ambient_c), INFINITY);
    ModelConfig mc;
    mc.hidden = 16;
    mc.layers = 2;
    mc.heads = 2;
    mc.trunk = 16;
    Surrogate m(mc, 5);
    Rng rng = substream(5, "acceptance.attention");
    double norm_err = 0.0, perm_err = 0.0;
    for (int i = 0; i < 100; ++i) {
        const HeteroGraph g = random_graph(rng, sheet, actions);
        const HeteroGraph* gp = &g;
        const GraphBatch b = make_batch(std::span<const HeteroGraph* const>(&gp, 1));
        Tape tape(false);
        ForwardContext c{tape, m, nullptr, Mode::Eval, nullptr};
        const auto f = forward(c, b, true);
        for (const auto& tr : f.attention) {
            std::vector<double> sum(static_cast<std::size_t>(b.total_nodes()), 0.0);
            std::vector<int> incoming(sum.size(), 0);
            const Mat& a = tape.value(tr.alpha);
            for (std::size_t e = 0; e < tr.dst.size(); ++e) {
                sum[static_cast<std::size_t>(tr.dst[e])] += a(static_cast<Eigen::Index>(e), 0);
                ++incoming[static_cast<std::size_t>(tr.dst[e])];
            }
            for (std::size_t v = 0; v < sum.size(); ++v)
                if (incoming[v]) norm_err = std::max(norm_err, std::abs(sum[v] - 1.0));
        }
        const NigVector base = predict_one(m, g);
        for (NodeType t : {NodeType::Task, NodeType::Resource, NodeType::Memory}) {
            std::vector<std::size_t> perm(g.of(t).size());
            std::iota(perm.begin(), perm.end(), 0);
            shuffle(perm, rng);
            const NigVector q = predict_one(m, permute(g, t, perm));
            for (std::size_t k = 0; k < kMetrics; ++k)
                perm_err = std::max({perm_err, std::abs(q[k].gamma - base[k].gamma), std::abs(q[k].nu - base[k].nu), std::abs(q[k].alpha - base[k].alpha),
                                     std::abs(q[k].beta - base[k].beta)});
        }
    }
    report(5, norm_err <= 1e-6 && perm_err <= 1e-9, str("100 graphs, attention sum error ", norm_err, ", permutation error ", perm_err));
}

struct Trained {
    DeviceSheet sheet = default_device_sheet();
    EnvConfig env;
    std::vector<TelemetryRow> rows;
    PreprocessResult pre;
    std::vector<Sample> train, val, test;
    Surrogate model{ModelConfig{}, 42};
    CalibrationParams calib;
    double seconds = 0.0;
};

// Desk-scale surrogate shared by criteria 6-9.
Trained train_surrogate() {
    const auto t0 = Clock::now();
    Trained t;
    t.rows = sweep_generate(default_sweep_grid(t.sheet), t.sheet, 42, t.env);
    t.pre = preprocess(t.rows, SplitSpec{}, 5.0);
    t.train = build_samples(t.pre.train, t.pre.stats, t.sheet);
    t.val = build_samples(t.pre.val, t.pre.stats, t.sheet);
    t.test = build_samples(t.pre.test, t.pre.stats, t.sheet);
    ModelConfig mc;
    mc.hidden = 64;
    mc.layers = 3;
    mc.trunk = 64;
    t.model = Surrogate(mc, 42);
    const TrainConfig tc;
    train_stage1(t.model, t.train, t.val, tc);
    train_stage2(t.model, t.train, t.val, tc, LossConfig{});
    t.calib = calibrate(t.model, t.val);
    t.seconds = seconds_since(t0);
    return t;
}

void criteria6and7(const Trained& t) {
    const MetricReport rep = evaluate(t.model, t.calib, t.test, 42);
    const auto& mk = rep.targets[0];
    report(6, mk.regression.r2 >= 0.90 && mk.ranking.spearman >= 0.90 && t.seconds <= 900.0,
           str(t.rows.size(), " rows (", t.train.size(), "/", t.val.size(), "/", t.test.size(), "), held-out makespan R2 ", mk.regression.r2, ", Spearman ",
               mk.ranking.spearman, ", train+calibrate ", t.seconds, " s"));
    report(7, mk.calibration.ece <= 0.05, str("makespan ECE ", mk.calibration.ece, " at tau ", mk.temperature, " (95% PICE, 10 bins)"));
}

struct Scheduling {
    Predictor pred;
    SyntheticWorkload work = make_workload("fft", 1.0);
    RewardConfig reward;
    double eta_star = 0.0;
};

Scheduling scheduling(const Trained& t) {
    Scheduling s;
    s.pred.model = &t.model;
    s.pred.calib = t.calib;
    s.pred.moments = t.pre.stats.for_device(t.sheet.device_id);
    s.reward = baseline_reward(s.work, t.sheet);
    s.eta_star = median_start_epistemic(s.pred, t.sheet, t.env, s.work, RunMode::Tasks, 42);
    return s;
}

void criterion8(const Trained& t, const Scheduling& s) {
    GateConfig gate;
    gate.eta = s.eta_star;
    gate.t_max_time = 1.5 * s.reward.m_target;
    DynaConfig dc;
    dc.episodes = 200;
    dc.zeta = 10;
    const DynaTrace tr = dyna_q_run(t.sheet, t.env, s.work, s.pred, gate, s.reward, dc, 42);
    const std::size_t violations = gate_violations(tr, gate);
    std::size_t fallbacks = 0;
    for (const auto& r : tr.steps) fallbacks += r.fallback;

    const auto all = enumerate_actions(t.sheet, std::vector<double>(static_cast<std::size_t>(t.sheet.cores), t.sheet.ambient_c), INFINITY);
    ScoreCache cache(s.pred, t.sheet, s.work, RunMode::Tasks, all);
    const SimEnvState st = SimEnvState::fresh(t.sheet, t.env, 42);
    const auto& scores = cache.at(digest_of(st.temp_c, st.util_ema, benchmark_id("fft")), gate.level);
    std::vector<std::vector<std::size_t>> kept;
    for (double f : {0.5, 1.0, 2.0}) {
        GateConfig g = gate;
        g.eta = f * s.eta_star;
        kept.push_back(uncertainty_gate(scores, g).kept);
    }
    bool nested = true;
    for (std::size_t i = 0; i + 1 < kept.size(); ++i) nested = nested && std::includes(kept[i + 1].begin(), kept[i + 1].end(), kept[i].begin(), kept[i].end());
    report(8, violations == 0 && nested,
           str(tr.steps.size(), " steps over ", tr.episodes.size(), " episodes, ", violations, " gate violations, ", fallbacks,
               " logged fallbacks; kept sets ", kept[0].size(), " <= ", kept[1].size(), " <= ", kept[2].size(), (nested ? " nested" : " NOT nested"),
               " at eta* ", s.eta_star));
}

void criterion9(const Trained& t, const Scheduling& s) {
    GateConfig gate;
    gate.eta = s.eta_star;
    int wins = 0;
    std::string detail;
    for (std::uint64_t seed : {42, 123, 456, 789, 1024}) {
        DynaConfig dc;
        dc.zeta = 0;
        const auto a = dyna_q_run(t.sheet, t.env, s.work, s.pred, gate, s.reward, dc, seed);
        dc.zeta = 10;
        const auto b = dyna_q_run(t.sheet, t.env, s.work, s.pred, gate, s.reward, dc, seed);
        auto reach = [&](const DynaTrace& d) { return d.episodes_to_reach < 0 ? dc.episodes + 1 : d.episodes_to_reach; };
        wins += reach(b) < reach(a);
        detail += str(" ", seed, ":", b.episodes_to_reach, "/", a.episodes_to_reach);
    }
    report(9, wins >= 4, str("zeta=10 reaches within 10% of the exhaustive best sooner in ", wins, "/5 seeds (seed:zeta10/zeta0)", detail));
}

void criterion10() {
    const fs::path dir = fs::temp_directory_path() / ("perfgraph_acceptance_" + std::to_string(::getpid()));
    KeyedConfig cfg;
    cfg.set("run.out", dir.string());
    cfg.set("run.seed", "7");
    cfg.set("data.actions", "10");
    cfg.set("model.hidden", "8");
    cfg.set("model.layers", "1");
    cfg.set("model.heads", "1");
    cfg.set("model.trunk", "8");
    cfg.set("train.epochs1", "2");
    cfg.set("train.epochs2", "1");
    const RunConfig r = load_run_config(cfg);

    auto once = [&] {
        const std::string csv = format_csv(generate_data(r));
        const Prepared p = prepare(parse_csv(csv), r);
        Surrogate m(r.model, r.seed);
        train_stage1(m, p.train, p.val, r.train);
        train_stage2(m, p.train, p.val, r.train, r.loss);
        const std::string ckpt = serialize_checkpoint(m, CheckpointInfo{r.seed, r.config_hash(), "perfgraph"});
        MetricReport rep = evaluate(m, calibrate(m, p.val), p.test, r.seed);
        rep.config_hash = r.config_hash();
        return std::array<std::string, 3>{csv, ckpt, to_json(rep).dump(2)};
    };
    const auto a = once(), b = once();
    const bool identical = a == b;

    const std::array<const char*, 3> names{"telemetry.csv", "model.ckpt", "metrics.json"};
    bool carried = true;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const std::string path = (dir / names[i]).string();
        write_artifact(r, path, a[i], names[i]);
        const auto meta = read_sidecar(path);
        carried = carried && meta.at("seed").get<std::uint64_t>() == r.seed && meta.at("config_hash").get<std::string>() == r.config_hash();
    }
    CheckpointInfo info;
    deserialize_checkpoint(a[1], &info);
    const auto metrics = nlohmann::json::parse(a[2]);
    carried = carried && info.seed == r.seed && info.config_hash == r.config_hash() && metrics.at("seed").get<std::uint64_t>() == r.seed &&
              metrics.at("config_hash").get<std::string>() == r.config_hash();
    fs::remove_all(dir);
    report(10, identical && carried,
           str("repeat run ", identical ? "byte-identical" : "DIFFERS", " (CSV ", a[0].size(), " B, checkpoint ", a[1].size(), " B, report ", a[2].size(),
               " B); seed and config hash ", carried ? "present" : "MISSING", " in every artifact"));
}

void criterion11() {
    Rng rng = substream(11, "acceptance.rows");
    std::vector<TelemetryRow> rows;
    for (int i = 0; i < 1000; ++i) rows.push_back(random_row(rng));
    const std::string text = format_csv(rows);
    const bool lossless = parse_csv(text) == rows;
    auto rejected = [](const std::string& t) {
        try {
            parse_csv(t);
        } catch (const Error& e) {
            return e.kind() == ErrorKind::SchemaMismatch;
        }
        return false;
    };
    std::string missing = text, extra = text, renamed = text;
    missing.erase(missing.find(",energy"), 7);
    extra.insert(extra.find('\n'), ",extra");
    renamed.replace(renamed.find("benchmark"), 9, "benchmarq");
    const int caught = rejected(missing) + rejected(extra) + rejected(renamed);
    report(11, lossless && caught == 3, str("1000 rows ", lossless ? "round-trip exactly" : "DIFFER after round-trip", "; ", caught, "/3 mismatched headers rejected"));
}

} // namespace

// Optional arguments select criteria by number; default runs all of them.
int main(int argc, char** argv) {
    const auto t0 = Clock::now();
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
    auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
    auto guarded = [&](const std::string& what, int weight, const std::function<void()>& f) {
        try {
            f();
        } catch (const std::exception& e) {
            std::printf("[FAIL] %s: %s\n", what.c_str(), e.what());
            failures += weight;
        }
    };
    const std::vector<std::pair<int, void (*)()>> standalone{{1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},
                                                             {5, criterion5}, {10, criterion10}, {11, criterion11}};
    for (const auto& [id, f] : standalone)
        if (wanted(id)) guarded("criterion " + std::to_string(id), 1, f);
    if (wanted(6) || wanted(7) || wanted(8) || wanted(9))
        guarded("criteria 6-9", 4, [&] {
            const Trained t = train_surrogate();
            if (wanted(6) || wanted(7)) criteria6and7(t);
            const Scheduling s = scheduling(t);
            if (wanted(8)) criterion8(t, s);
            if (wanted(9)) criterion9(t, s);
        });
    std::printf("%d failing criteria, %.1f s total\n", failures, seconds_since(t0));
    return failures == 0 ? 0 : 1;
}
