// perfgraph_cli: data generation, training, calibration, evaluation and
// scheduling on the simulated device.

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "perfgraph/dag_brute.hpp"
#include "perfgraph/pipeline.hpp"

using namespace perfgraph;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0, kConfig = 2, kNumeric = 3, kAcceptance = 4;

int exit_code(ErrorKind k) {
    switch (k) {
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidArgument:
    case ErrorKind::ParseError:
    case ErrorKind::SchemaMismatch:
    case ErrorKind::EmptyDataset:
    case ErrorKind::InsufficientData:
        return kConfig;
    default:
        return kNumeric;
    }
}

struct Flags {
    std::string config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    int stage = 0;
    std::optional<int> epochs, zeta, episodes;
    std::optional<double> eta, delta, tmax_time;
    std::optional<std::size_t> bins;
};

RunConfig resolve(const Flags& f) {
    KeyedConfig cfg = f.config.empty() ? KeyedConfig{} : KeyedConfig::load(f.config);
    auto put = [&](const std::string& key, auto v) {
        std::ostringstream s;
        s.precision(17);
        s << v;
        cfg.set(key, s.str());
    };
    if (f.out) cfg.set("run.out", *f.out);
    if (f.seed) put("run.seed", *f.seed);
    if (f.epochs) {
        if (f.stage != 2) put("train.epochs1", *f.epochs);
        if (f.stage != 1) put("train.epochs2", *f.epochs);
    }
    if (f.zeta) put("dyna.zeta", *f.zeta);
    if (f.episodes) put("dyna.episodes", *f.episodes);
    if (f.eta) put("gate.eta", *f.eta);
    if (f.delta) put("gate.delta", *f.delta);
    if (f.tmax_time) put("gate.tmax_time", *f.tmax_time);
    if (f.bins) put("eval.bins", *f.bins);
    return load_run_config(cfg);
}

std::string out_path(const RunConfig& r, const std::string& name) { return (fs::path(r.out_dir) / name).string(); }

Prepared load_prepared(const RunConfig& r) {
    const std::string path = r.raw.str("data.path");
    if (!fs::exists(path)) fail(ErrorKind::ConfigError, "data.path: no such file '" + path + "'");
    return prepare(read_telemetry_csv(path), r);
}

Surrogate load_model(const RunConfig& r) {
    const std::string path = out_path(r, "model.ckpt");
    if (!fs::exists(path)) fail(ErrorKind::ConfigError, "no checkpoint at '" + path + "'; run train first");
    return deserialize_checkpoint(read_text(path));
}

CalibrationParams load_calibration(const RunConfig& r) {
    const std::string path = out_path(r, "calibration.json");
    if (!fs::exists(path)) return {};
    return calibration_from_json(nlohmann::json::parse(read_text(path)));
}

void save_model(const RunConfig& r, const Surrogate& m) {
    write_artifact(r, out_path(r, "model.ckpt"), serialize_checkpoint(m, CheckpointInfo{r.seed, r.config_hash(), "perfgraph"}), "checkpoint");
}

int cmd_gen_data(const RunConfig& r) {
    const auto rows = generate_data(r);
    write_artifact(r, out_path(r, "telemetry.csv"), format_csv(rows), "telemetry");
    std::cout << "wrote " << rows.size() << " rows to " << out_path(r, "telemetry.csv") << "\n";
    return kOk;
}

int cmd_train(const RunConfig& r, int stage) {
    if (stage < 0 || stage > 2) fail(ErrorKind::ConfigError, "--stage must be 0 (both), 1 or 2");
    const Prepared p = load_prepared(r);
    Surrogate m = stage == 2 ? load_model(r) : Surrogate(r.model, r.seed);
    std::vector<EpochLog> log;
    if (stage != 2) {
        const auto r1 = train_stage1(m, p.train, p.val, r.train);
        log.insert(log.end(), r1.log.begin(), r1.log.end());
        std::cout << "stage 1: " << r1.epochs_run << " epochs, best val MAE " << r1.best_val << " at epoch " << r1.best_epoch << "\n";
    }
    if (stage != 1) {
        const auto r2 = train_stage2(m, p.train, p.val, r.train, r.loss);
        log.insert(log.end(), r2.train.log.begin(), r2.train.log.end());
        std::cout << "stage 2: " << r2.train.epochs_run << " epochs, best val NLL " << r2.train.best_val << (r2.mae_guard_ok ? "" : " (MAE guard exceeded)")
                  << "\n";
    }
    if (!m.params().finite()) fail(ErrorKind::NumericError, "non-finite parameters after training");
    save_model(r, m);
    write_artifact(r, out_path(r, "training_log.csv"), training_log_csv(log), "training_log");
    return kOk;
}

int cmd_calibrate(const RunConfig& r) {
    const Prepared p = load_prepared(r);
    const Surrogate m = load_model(r);
    const CalibrationParams c = calibrate(m, p.val, r.bins);
    nlohmann::json j = to_json(c);
    j["seed"] = r.seed;
    j["config_hash"] = r.config_hash();
    write_artifact(r, out_path(r, "calibration.json"), j.dump(2) + "\n", "calibration");
    for (std::size_t k = 0; k < kMetrics; ++k) std::cout << kTargetNames[k] << ": tau " << c.tau[k] << ", ECE " << c.ece_after[k] << "\n";
    return kOk;
}

int cmd_eval(const RunConfig& r) {
    const Prepared p = load_prepared(r);
    const Surrogate m = load_model(r);
    const auto& data = p.test.size() >= 2 ? p.test : p.val;
    MetricReport rep = evaluate(m, load_calibration(r), data, r.seed, r.bins);
    rep.config_hash = r.config_hash();
    write_artifact(r, out_path(r, "metrics.json"), to_json(rep).dump(2) + "\n", "metric_report");
    write_artifact(r, out_path(r, "reliability.csv"), reliability_csv(rep), "reliability");
    const auto pred = predict_samples(m, data);
    std::vector<ParetoPoint> pts;
    for (std::size_t i = 0; i < data.size(); ++i) pts.push_back({to_raw(data[i], 0, pred[i][0].gamma), to_raw(data[i], 1, pred[i][1].gamma)});
    write_artifact(r, out_path(r, "pareto.csv"), pareto_csv(pts, pareto_front(pts)), "pareto");
    for (const auto& t : rep.targets)
        std::cout << t.name << ": R2 " << t.regression.r2 << ", Spearman " << t.ranking.spearman << ", ECE " << t.calibration.ece << "\n";
    return kOk;
}

int cmd_schedule(const RunConfig& r) {
    const Prepared p = load_prepared(r);
    const Surrogate m = load_model(r);
    Predictor pred{&m, load_calibration(r), p.moments};
    const SyntheticWorkload w = make_workload(r.benchmark, r.input_size, r.env.noise);
    GateConfig gate = r.gate;
    if (!r.eta_given) gate.eta = median_start_epistemic(pred, r.sheet, r.env, w, r.dyna.mode, r.seed);
    RewardConfig rw = baseline_reward(w, r.sheet, r.dyna.mode);
    rw.w_m = r.reward_weights.w_m;
    rw.w_e = r.reward_weights.w_e;
    rw.thermal_penalty = r.reward_weights.thermal_penalty;
    const DynaTrace t = dyna_q_run(r.sheet, r.env, w, pred, gate, rw, r.dyna, r.seed);
    write_artifact(r, out_path(r, "trace.csv"), trace_csv(t), "episode_trace");
    write_artifact(r, out_path(r, "episodes.csv"), episodes_csv(t), "episode_summary");
    std::cout << "eta " << gate.eta << ", episodes to reach " << t.episodes_to_reach << ", best makespan " << t.best_time << ", gate violations "
              << gate_violations(t, gate) << ", synthetic transitions " << t.synthetic_transitions << "\n";
    return kOk;
}

int cmd_report(const RunConfig& r) {
    std::ostringstream s;
    s << "# perfgraph run report\n\nseed " << r.seed << ", config " << r.config_hash() << "\n";
    const std::string metrics = out_path(r, "metrics.json");
    if (fs::exists(metrics)) {
        const auto j = nlohmann::json::parse(read_text(metrics));
        s << "\n## Held-out metrics (" << j["samples"] << " samples)\n\n| target | R2 | Spearman | MAPE | ECE | PICP95 | tau |\n|---|---|---|---|---|---|---|\n";
        auto cell = [](const nlohmann::json& v) {
            if (!v.is_number()) return std::string("n/a");
            std::ostringstream o;
            o << std::fixed << std::setprecision(4) << v.get<double>();
            return o.str();
        };
        for (const auto& name : kTargetNames) {
            const auto& t = j["targets"][name];
            s << "| " << name << " | " << cell(t["r2"]) << " | " << cell(t["spearman"]) << " | " << cell(t["mape"]) << " | " << cell(t["ece"]) << " | "
              << cell(t["picp95"]) << " | " << cell(t["temperature"]) << " |\n";
        }
    }
    const std::string episodes = out_path(r, "episodes.csv");
    if (fs::exists(episodes)) {
        std::istringstream in(read_text(episodes));
        std::string line, last;
        int n = 0;
        std::getline(in, line);
        while (std::getline(in, line))
            if (!line.empty()) {
                last = line;
                ++n;
            }
        s << "\n## Scheduling\n\n" << n << " episodes; last episode (episode,makespan,energy,reward,gated_fraction,greedy_time): " << last << "\n";
    }
    write_artifact(r, out_path(r, "report.md"), s.str(), "report");
    std::cout << s.str();
    return kOk;
}

int cmd_selftest(const RunConfig& r) {
    bool ok = true;
    Rng rng = substream(r.seed, "selftest.dag");
    int dag_fail = 0, brent_fail = 0;
    for (int i = 0; i < 200; ++i) {
        const TaskDag d = brute::random_dag(rng, 7);
        const auto m = dag_metrics(d);
        const auto ref = brute::path_metrics(d);
        if (m.span != ref.span || m.work != ref.work || m.diameter != ref.diameter || m.width_profile != ref.widths || m.density != ref.density) ++dag_fail;
    }
    for (int i = 0; i < 100; ++i) {
        const TaskDag d = brute::random_dag(rng, 6);
        const auto m = dag_metrics(d);
        for (int P = 1; P <= 3; ++P) {
            const double opt = brute::optimal_makespan(d, P);
            if (opt < std::max(m.span, m.work / P) - 1e-9 || opt > m.work / P + m.span + 1e-9) ++brent_fail;
        }
    }
    std::cout << "dag oracle: " << dag_fail << " mismatches\nbrent bound: " << brent_fail << " violations\n";
    ok = ok && dag_fail == 0 && brent_fail == 0;

    SweepGrid g = default_sweep_grid(r.sheet, 4);
    g.benchmarks = {"fft", "sort", "nqueens", "strassen", "sparselu"};
    g.inputs = {1.0};
    const auto rows = sweep_generate(g, r.sheet, r.seed, r.env);
    std::vector<HeteroGraph> graphs;
    std::vector<TargetVector> y;
    Rng yr = substream(r.seed, "selftest.targets");
    for (std::size_t i = 0; i < 5; ++i) {
        graphs.push_back(row_graph(rows[i * 4], r.sheet, make_workload(rows[i * 4].benchmark, rows[i * 4].input_size)));
        TargetVector t;
        for (auto& v : t) v = uniform(yr, -1, 1);
        y.push_back(t);
    }
    ModelConfig mc;
    mc.hidden = 8;
    mc.layers = 2;
    mc.heads = 2;
    mc.edge_proj = 4;
    mc.trunk = 8;
    mc.trunk_layers = 1;
    Surrogate model(mc, r.seed);
    Rng jr = substream(r.seed, "selftest.jitter");
    for (auto& p : model.params().items())
        for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] += uniform(jr, -0.05, 0.05);
    std::vector<const HeteroGraph*> ptrs;
    for (const auto& h : graphs) ptrs.push_back(&h);
    const auto gc = grad_check(model, ptrs, y, r.loss);
    std::cout << "grad check: max relative error " << gc.max_rel_error << " over " << gc.checked << " parameters (worst " << gc.worst << ")\n";
    ok = ok && gc.max_rel_error < 1e-4;
    std::cout << (ok ? "selftest passed\n" : "selftest FAILED\n");
    return ok ? kOk : kAcceptance;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph surrogate for task-parallel performance prediction and uncertainty-gated scheduling"};
    app.fallthrough();
    app.require_subcommand(1);
    Flags f;
    app.add_option("--config", f.config, "keyed config file");
    app.add_option("--out", f.out, "output directory");
    app.add_option("--seed", f.seed, "master seed");
    app.add_option("--stage", f.stage, "train: 0 = both stages, 1 or 2");
    app.add_option("--epochs", f.epochs, "train: epochs for the selected stage(s)");
    app.add_option("--zeta", f.zeta, "schedule: synthetic draws per real step");
    app.add_option("--eta", f.eta, "schedule: epistemic threshold");
    app.add_option("--delta", f.delta, "schedule: interval miss rate (level = 1 - delta)");
    app.add_option("--tmax-time", f.tmax_time, "schedule: makespan deadline in seconds");
    app.add_option("--episodes", f.episodes, "schedule: episode count");
    app.add_option("--bins", f.bins, "calibrate/eval: calibration bins");
    const std::vector<std::pair<std::string, std::string>> cmds{
        {"gen-data", "simulate the sweep grid and write telemetry.csv"},
        {"train", "train stages 1-2 on data.path, write model.ckpt and training_log.csv"},
        {"calibrate", "fit per-target temperatures on the validation split"},
        {"eval", "held-out metrics, reliability and Pareto data"},
        {"schedule", "Dyna-Q with the uncertainty gate on the simulated device"},
        {"report", "summarize the artifacts in the output directory"},
        {"selftest", "DAG brute-force oracles and gradient check"},
    };
    for (const auto& [name, help] : cmds) app.add_subcommand(name, help);
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help();
        return kConfig;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        const RunConfig r = resolve(f);
        if (cmd == "gen-data") return cmd_gen_data(r);
        if (cmd == "train") return cmd_train(r, f.stage);
        if (cmd == "calibrate") return cmd_calibrate(r);
        if (cmd == "eval") return cmd_eval(r);
        if (cmd == "schedule") return cmd_schedule(r);
        if (cmd == "report") return cmd_report(r);
        return cmd_selftest(r);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumeric;
    }
}
