// Train a small surrogate on a simulated sweep, then pick a configuration for
// one fft run with the uncertainty gate and execute it on the simulator.
//
//   ./build/schedule_demo [benchmark]

#include <iostream>

#include "perfgraph/pipeline.hpp"

using namespace perfgraph;

int main(int argc, char** argv) {
    const std::string bench = argc > 1 ? argv[1] : "fft";
    const DeviceSheet sheet = default_device_sheet();
    const EnvConfig env;

    const auto rows = sweep_generate(default_sweep_grid(sheet, 30), sheet, 42, env);
    const auto pre = preprocess(rows, SplitSpec{}, 5.0);
    const auto train = build_samples(pre.train, pre.stats, sheet);
    const auto val = build_samples(pre.val, pre.stats, sheet);

    ModelConfig mc;
    mc.hidden = 32;
    mc.layers = 2;
    mc.heads = 2;
    mc.trunk = 32;
    Surrogate model(mc, 42);
    TrainConfig tc;
    tc.epochs1 = 30;
    tc.epochs2 = 10;
    train_stage1(model, train, val, tc);
    train_stage2(model, train, val, tc, LossConfig{});
    std::cout << rows.size() << " telemetry rows, " << train.size() << " for training\n";

    Predictor pred{&model, calibrate(model, val), pre.stats.for_device(sheet.device_id)};
    const SyntheticWorkload w = make_workload(bench, 1.0);
    const SimEnvState start = SimEnvState::fresh(sheet, env, 42);
    const auto actions = enumerate_actions(sheet, start.temp_c, sheet.t_max_c);
    std::vector<HeteroGraph> graphs;
    for (const auto& a : actions) graphs.push_back(build_hetero_graph(w.dag, sheet, runtime_state(start, sheet), a));
    const auto scores = score_candidates(pred, actions, graphs);

    GateConfig gate;
    gate.eta = median_start_epistemic(pred, sheet, env, w, RunMode::Tasks, 42);
    const GateResult g = uncertainty_gate(scores, gate);
    std::cout << actions.size() << " candidates, " << g.kept.size() << " pass the gate at eta " << gate.eta << "\n";

    const std::size_t best = select_index(scores, g.kept);
    const CandidateScore& s = scores[best];
    std::cout << "chosen " << to_string(s.action) << ": predicted " << s.mean[0] << " s [" << s.interval[0].lo << ", " << s.interval[0].hi << "], "
              << s.mean[1] << " J\n";
    const SimStep run = simulate_execution(start, w, s.action, sheet, RunMode::Tasks, env);
    std::cout << "simulated " << run.row.elapsed_time << " s, " << run.row.energy << " J\n";
}
