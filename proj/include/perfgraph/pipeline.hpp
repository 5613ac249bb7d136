#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "perfgraph/keyed_config.hpp"
#include "perfgraph/scheduler.hpp"

namespace perfgraph {

inline constexpr int kArtifactSchema = 1;

/// Everything one CLI invocation needs, resolved from a keyed config.
struct RunConfig {
    KeyedConfig raw;
    DeviceSheet sheet = default_device_sheet();
    EnvConfig env;
    ModelConfig model;
    TrainConfig train;
    LossConfig loss;
    GateConfig gate;
    bool eta_given = false;
    RewardConfig reward_weights;
    DynaConfig dyna;
    SplitSpec split;
    double mad_k = 5.0;
    std::size_t bins = 10;
    std::size_t sweep_actions = 100;
    std::string benchmark = "fft";
    double input_size = 1.0;
    std::uint64_t seed = 42;
    std::string out_dir = "out";

    /// Hash of the canonical config text without the seed and output
    /// directory, which are reported separately or irrelevant.
    std::string config_hash() const {
        KeyedConfig c;
        for (const auto& [k, v] : raw.values())
            if (k != "run.seed" && k != "run.out") c.set(k, v);
        return hex64(c.hash());
    }
};

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::ConfigError, "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::ConfigError, "cannot write '" + path + "'");
    out << text;
}

/// File references (run.device, run.env, data.path) are taken relative to
/// the working directory.
inline RunConfig load_run_config(const KeyedConfig& cfg) {
    RunConfig r;
    r.raw = cfg;
    if (cfg.has("run.device")) {
        const std::string p = cfg.str("run.device");
        r.sheet = load_device_sheet(KeyedConfig::parse(read_text(p), p));
    }
    if (cfg.has("run.env")) {
        const std::string p = cfg.str("run.env");
        r.env = env_config_from(KeyedConfig::parse(read_text(p), p));
    }
    r.env = env_config_from(cfg, r.env);
    r.model = model_config_from(cfg);
    r.train = train_config_from(cfg);
    r.loss = loss_config_from(cfg);
    r.seed = static_cast<std::uint64_t>(cfg.num("run.seed", 42));
    r.out_dir = cfg.str("run.out", "out");
    r.mad_k = cfg.num("data.mad_k", r.mad_k);
    r.sweep_actions = static_cast<std::size_t>(cfg.num("data.actions", 100));
    r.bins = static_cast<std::size_t>(cfg.num("eval.bins", 10));
    r.eta_given = cfg.has("gate.eta");
    r.gate.eta = cfg.num("gate.eta", r.gate.eta);
    r.gate.level = 1.0 - cfg.num("gate.delta", 0.05);
    r.gate.t_max_time = cfg.num("gate.tmax_time", r.gate.t_max_time);
    r.gate.validate();
    r.reward_weights.w_m = cfg.num("reward.w_m", r.reward_weights.w_m);
    r.reward_weights.w_e = cfg.num("reward.w_e", r.reward_weights.w_e);
    r.reward_weights.thermal_penalty = cfg.num("reward.thermal_penalty", r.reward_weights.thermal_penalty);
    r.dyna.episodes = static_cast<int>(cfg.num("dyna.episodes", r.dyna.episodes));
    r.dyna.steps_per_episode = static_cast<int>(cfg.num("dyna.steps", r.dyna.steps_per_episode));
    r.dyna.zeta = static_cast<int>(cfg.num("dyna.zeta", r.dyna.zeta));
    r.dyna.alpha = cfg.num("dyna.alpha", r.dyna.alpha);
    r.dyna.gamma = cfg.num("dyna.gamma", r.dyna.gamma);
    r.dyna.epsilon = cfg.num("dyna.epsilon", r.dyna.epsilon);
    r.dyna.synth_level = cfg.num("dyna.synth_level", r.dyna.synth_level);
    r.dyna.synth_time_width = cfg.num("dyna.synth_time_width", r.dyna.synth_time_width);
    r.dyna.synth_energy_width = cfg.num("dyna.synth_energy_width", r.dyna.synth_energy_width);
    r.benchmark = cfg.str("schedule.benchmark", r.benchmark);
    r.input_size = cfg.num("schedule.input", r.input_size);
    if (benchmark_id(r.benchmark) < 0) fail(ErrorKind::ConfigError, "schedule.benchmark: unknown benchmark '" + r.benchmark + "'");
    if (r.bins < 1) fail(ErrorKind::ConfigError, "eval.bins must be >= 1");
    r.train.seed = r.seed;
    r.split.seed = r.seed;
    return r;
}

// ---------------------------------------------------------------- artifacts

inline nlohmann::json provenance(const RunConfig& r, const std::string& kind) {
    return nlohmann::json{{"kind", kind}, {"seed", r.seed}, {"config_hash", r.config_hash()}, {"schema_version", kArtifactSchema},
                          {"device", r.sheet.device_id}, {"device_version", r.sheet.version_hash}};
}

/// Writes `path` plus a `path.meta.json` sidecar carrying the provenance.
inline void write_artifact(const RunConfig& r, const std::string& path, const std::string& text, const std::string& kind) {
    write_text(path, text);
    write_text(path + ".meta.json", provenance(r, kind).dump(2) + "\n");
}

inline nlohmann::json read_sidecar(const std::string& path) { return nlohmann::json::parse(read_text(path + ".meta.json")); }

// ------------------------------------------------------------------ stages

struct Prepared {
    PreprocessResult pre;
    std::vector<Sample> train, val, test;
    Moments moments;
};

inline Prepared prepare(const std::vector<TelemetryRow>& rows, const RunConfig& r) {
    Prepared p;
    p.pre = preprocess(rows, r.split, r.mad_k);
    p.train = build_samples(p.pre.train, p.pre.stats, r.sheet);
    p.val = build_samples(p.pre.val, p.pre.stats, r.sheet);
    p.test = build_samples(p.pre.test, p.pre.stats, r.sheet);
    if (p.train.empty() || p.val.empty()) fail(ErrorKind::InsufficientData, "training or validation split is empty");
    p.moments = p.pre.stats.for_device(r.sheet.device_id);
    return p;
}

inline std::vector<TelemetryRow> generate_data(const RunConfig& r) {
    return sweep_generate(default_sweep_grid(r.sheet, r.sweep_actions), r.sheet, r.seed, r.env);
}

/// Median makespan epistemic over the start-state candidates: the default
/// gate threshold when none is configured.
inline double median_start_epistemic(const Predictor& p, const DeviceSheet& sheet, const EnvConfig& env, const SyntheticWorkload& w,
                                     RunMode mode, std::uint64_t seed) {
    const auto all = enumerate_actions(sheet, std::vector<double>(static_cast<std::size_t>(sheet.cores), sheet.ambient_c), INFINITY);
    ScoreCache cache(p, sheet, w, mode, all);
    const SimEnvState st = SimEnvState::fresh(sheet, env, seed);
    const auto& sc = cache.at(digest_of(st.temp_c, st.util_ema, benchmark_id(w.benchmark)), 0.95);
    std::vector<double> e;
    for (const auto& s : sc)
        if (s.ok) e.push_back(s.uncertainty[0].epistemic);
    if (e.empty()) fail(ErrorKind::NumericError, "no candidate could be scored");
    return median(e);
}

inline std::string episodes_csv(const DynaTrace& t) {
    std::string out = "episode,makespan,energy,reward,gated_fraction,greedy_time\n";
    for (const auto& e : t.episodes)
        out += std::to_string(e.episode) + "," + detail::fmt_double(e.makespan) + "," + detail::fmt_double(e.energy) + "," + detail::fmt_double(e.reward) +
               "," + detail::fmt_double(e.gated_fraction) + "," + detail::fmt_double(e.greedy_time) + "\n";
    return out;
}

} // namespace perfgraph
