#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "perfgraph/nig.hpp"
#include "perfgraph/preprocess.hpp"
#include "perfgraph/simenv.hpp"
#include "perfgraph/surrogate.hpp"
#include "perfgraph/training.hpp"

namespace perfgraph {

/// Trained surrogate plus what is needed to read its outputs: temperatures
/// and the normalization moments of the training split.
struct Predictor {
    const Surrogate* model = nullptr;
    CalibrationParams calib;
    Moments moments;

    double to_raw(std::size_t k, double z) const { return inverse_transform_target(k, moments.denormalize(kTargetFeatureOffset + k, z)); }
};

struct CandidateScore {
    Action action;
    bool ok = false;
    std::string error;
    NigVector nig{};
    std::array<UncertaintyReport, kMetrics> uncertainty{}; // normalized units, temperature applied
    std::array<double, kMetrics> mean{};                   // original units
    std::array<Interval, kMetrics> interval{};             // original units
};

inline CandidateScore make_score(const Predictor& p, const Action& a, const NigVector& nig, double level) {
    CandidateScore s;
    s.action = a;
    s.nig = nig;
    for (std::size_t k = 0; k < kMetrics; ++k) {
        const double t2 = p.calib.tau[k] * p.calib.tau[k];
        UncertaintyReport u = decompose(nig[k]);
        u.aleatoric *= t2;
        u.epistemic *= t2;
        u.total *= t2;
        s.uncertainty[k] = u;
        s.mean[k] = p.to_raw(k, nig[k].gamma);
        const Interval iv = prediction_interval(nig[k], level, p.calib.tau[k]);
        s.interval[k] = {p.to_raw(k, iv.lo), p.to_raw(k, iv.hi)};
    }
    s.ok = true;
    return s;
}

/// Scores candidate graphs in one batched forward pass; if the batch fails,
/// each candidate is scored alone so one bad graph does not sink the rest.
inline std::vector<CandidateScore> score_candidates(const Predictor& p, const std::vector<Action>& actions, const std::vector<HeteroGraph>& graphs,
                                                    double level = 0.95) {
    if (actions.empty()) fail(ErrorKind::InvalidArgument, "no candidates");
    if (actions.size() != graphs.size()) fail(ErrorKind::InvalidArgument, "actions and graphs differ in length");
    std::vector<CandidateScore> out;
    out.reserve(actions.size());
    try {
        std::vector<const HeteroGraph*> ptrs;
        for (const auto& g : graphs) ptrs.push_back(&g);
        const auto nig = predict(*p.model, std::span<const HeteroGraph* const>(ptrs));
        for (std::size_t i = 0; i < actions.size(); ++i) out.push_back(make_score(p, actions[i], nig[i], level));
        return out;
    } catch (const Error&) {
        out.clear();
    }
    for (std::size_t i = 0; i < actions.size(); ++i) {
        try {
            out.push_back(make_score(p, actions[i], predict_one(*p.model, graphs[i]), level));
        } catch (const Error& e) {
            CandidateScore s;
            s.action = actions[i];
            s.error = e.what();
            out.push_back(std::move(s));
        }
    }
    return out;
}

struct GateConfig {
    double eta = 1.0;            // epistemic threshold on makespan, normalized units squared
    double level = 0.95;         // interval level 1 - delta
    double t_max_time = 1e300;   // s
    double thermal_cap_c = 85.0;

    void validate() const {
        if (!(eta >= 0.0)) fail(ErrorKind::ConfigError, "gate.eta must be >= 0");
        if (!(level > 0.0 && level < 1.0)) fail(ErrorKind::ConfigError, "gate level must lie in (0, 1)");
    }
};

enum class RejectReason { HighEpistemic, DeadlineRisk, ScoreError };

inline std::string to_string(RejectReason r) {
    switch (r) {
    case RejectReason::HighEpistemic: return "HighEpistemic";
    case RejectReason::DeadlineRisk: return "DeadlineRisk";
    case RejectReason::ScoreError: return "ScoreError";
    }
    return "?";
}

struct GateResult {
    std::vector<std::size_t> kept;
    std::vector<std::pair<std::size_t, RejectReason>> rejected;
};

inline bool passes_gate(const CandidateScore& s, const GateConfig& g) {
    return s.ok && s.uncertainty[0].epistemic <= g.eta && s.interval[0].hi <= g.t_max_time;
}

/// Keeps a candidate iff epistemic(time) <= eta and the upper makespan
/// bound is within the deadline (both inclusive). Intervals must have been
/// computed at `g.level`.
inline GateResult uncertainty_gate(const std::vector<CandidateScore>& scores, const GateConfig& g) {
    GateResult r;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const auto& s = scores[i];
        if (!s.ok) r.rejected.push_back({i, RejectReason::ScoreError});
        else if (!(s.uncertainty[0].epistemic <= g.eta)) r.rejected.push_back({i, RejectReason::HighEpistemic});
        else if (!(s.interval[0].hi <= g.t_max_time)) r.rejected.push_back({i, RejectReason::DeadlineRisk});
        else r.kept.push_back(i);
    }
    return r;
}

/// Lowest predicted makespan; ties go to lower predicted energy, then to the
/// lexicographically smaller action.
inline std::size_t select_index(const std::vector<CandidateScore>& scores, const std::vector<std::size_t>& kept) {
    if (kept.empty()) fail(ErrorKind::NoSafeAction, "every candidate was rejected by the gate");
    std::size_t best = kept.front();
    for (std::size_t i : kept) {
        const auto& a = scores[i];
        const auto& b = scores[best];
        if (std::tie(a.mean[0], a.mean[1]) < std::tie(b.mean[0], b.mean[1]) ||
            (a.mean[0] == b.mean[0] && a.mean[1] == b.mean[1] && a.action < b.action))
            best = i;
    }
    return best;
}

inline Action select_action(const std::vector<CandidateScore>& scores, const std::vector<std::size_t>& kept) {
    return scores[select_index(scores, kept)].action;
}

// ------------------------------------------------------------------- Dyna-Q

/// Tabular state: hottest-core temperature in 5 degree bins, mean
/// utilization decile, benchmark id.
struct StateDigest {
    int temp_bin = 0;
    int util_decile = 0;
    int benchmark = 0;
    auto operator<=>(const StateDigest&) const = default;
};

inline int benchmark_id(const std::string& name) {
    const auto names = benchmark_names();
    const auto it = std::find(names.begin(), names.end(), name);
    return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

inline StateDigest digest_of(const std::vector<double>& temps, const std::vector<double>& util, int bench) {
    StateDigest d;
    d.temp_bin = static_cast<int>(std::floor(*std::max_element(temps.begin(), temps.end()) / 5.0));
    double u = 0.0;
    for (double x : util) u += x;
    u /= static_cast<double>(std::max<std::size_t>(1, util.size()));
    d.util_decile = std::clamp(static_cast<int>(std::floor(u * 10.0)), 0, 9);
    d.benchmark = bench;
    return d;
}

/// Runtime state the surrogate sees for a digest: every core at the bin
/// centre temperature and the decile centre utilization.
inline RuntimeState digest_state(const StateDigest& d, const DeviceSheet& sheet) {
    RuntimeState r = RuntimeState::idle(sheet);
    std::fill(r.temp_c.begin(), r.temp_c.end(), 5.0 * d.temp_bin + 2.5);
    std::fill(r.util_ema.begin(), r.util_ema.end(), (d.util_decile + 0.5) / 10.0);
    return r;
}

struct RewardConfig {
    double m_target = 1.0;
    double e_target = 1.0;
    double w_m = 1.0;
    double w_e = 0.1;
    double thermal_penalty = 1.0; // per degree above the cap
    double cap_c = 85.0;

    double reward(double time, double energy, double t_post) const {
        return -(w_m * time / m_target + w_e * energy / e_target) - thermal_penalty * std::max(0.0, t_post - cap_c);
    }
};

/// References from the all-cores, top-frequency run (performance governor).
inline RewardConfig baseline_reward(const SyntheticWorkload& w, const DeviceSheet& sheet, RunMode mode = RunMode::Tasks) {
    RewardConfig r;
    const Action top = uniform_action(sheet, std::vector<std::uint8_t>(static_cast<std::size_t>(sheet.cores), 1), 1 << 20);
    r.m_target = model_time(w, top, sheet, mode);
    r.e_target = action_power(top, sheet) * r.m_target;
    r.cap_c = sheet.t_max_c;
    return r;
}

struct DynaConfig {
    int episodes = 200;
    int steps_per_episode = 5;
    int zeta = 0;               // synthetic draws per real step
    double alpha = 0.5;         // Q learning rate
    double gamma = 0.5;         // discount
    double epsilon = 0.1;       // exploration among gated actions
    std::size_t real_capacity = 100000;
    std::size_t synthetic_capacity = 100000;
    double synth_level = 0.90;        // interval level used to admit synthetic samples
    double synth_time_width = 0.5;    // max relative half-width of the makespan interval
    double synth_energy_width = 0.5;  // max relative half-width of the energy interval
    double reach_tolerance = 0.10;
    RunMode mode = RunMode::Tasks;
};

struct Transition {
    StateDigest state;
    Action action;
    double reward = 0.0;
    StateDigest next;
    bool terminal = false;
    std::vector<double> temps; // pre-state temperatures
    std::vector<double> util;  // pre-state utilization
    bool synthetic = false;
};

/// Bounded FIFO of transitions with one provenance.
class ReplayBuffer {
public:
    ReplayBuffer(std::size_t capacity, bool synthetic) : cap_(capacity), synthetic_(synthetic) {}

    void push(Transition t) {
        if (t.synthetic != synthetic_) fail(ErrorKind::InvalidArgument, "transition provenance does not match buffer");
        if (items_.size() == cap_) items_.erase(items_.begin());
        items_.push_back(std::move(t));
    }
    std::size_t size() const { return items_.size(); }
    bool empty() const { return items_.empty(); }
    const Transition& operator[](std::size_t i) const { return items_[i]; }
    const std::vector<Transition>& items() const { return items_; }
    bool synthetic() const { return synthetic_; }

private:
    std::size_t cap_;
    bool synthetic_;
    std::vector<Transition> items_;
};

struct StepRecord {
    int episode = 0;
    int step = 0;
    Action action;
    double time = 0.0;
    double energy = 0.0;
    double reward = 0.0;
    std::size_t gated = 0; // candidates rejected by the gate
    bool fallback = false;
    double epistemic = 0.0;   // of the executed action
    double pi_upper = 0.0;    // makespan interval upper bound of the executed action
    int synthetic_draws = 0;
    int synthetic_admitted = 0;
};

struct EpisodeSummary {
    int episode = 0;
    double makespan = 0.0; // summed over steps
    double energy = 0.0;
    double reward = 0.0;
    double gated_fraction = 0.0;
    double greedy_time = 0.0; // noise-free makespan of the greedy action from the start state
};

struct DynaTrace {
    std::vector<StepRecord> steps;
    std::vector<EpisodeSummary> episodes;
    double best_time = 0.0;    // exhaustive noise-free optimum from the start state
    int episodes_to_reach = -1; // first episode whose greedy time is within tolerance; -1 if never
    std::size_t real_transitions = 0;
    std::size_t synthetic_transitions = 0;
};

class QTable {
public:
    explicit QTable(std::size_t n_actions) : n_(n_actions) {}

    double get(const StateDigest& s, const Action& a) const {
        const auto it = q_.find(s);
        if (it == q_.end()) return 0.0;
        const auto jt = it->second.find(a);
        return jt == it->second.end() ? 0.0 : jt->second;
    }

    /// Unvisited actions count as 0.
    double max_value(const StateDigest& s) const {
        const auto it = q_.find(s);
        if (it == q_.end() || it->second.empty()) return 0.0;
        double m = -INFINITY;
        for (const auto& [a, v] : it->second) m = std::max(m, v);
        return it->second.size() < n_ ? std::max(m, 0.0) : m;
    }

    void update(const Transition& t, double alpha, double gamma) {
        const double target = t.reward + (t.terminal ? 0.0 : gamma * max_value(t.next));
        double& q = q_[t.state][t.action];
        q += alpha * (target - q);
    }

private:
    std::size_t n_;
    std::map<StateDigest, std::map<Action, double>> q_;
};

/// Candidate scores per digest, computed once over the full action list.
class ScoreCache {
public:
    ScoreCache(const Predictor& p, const DeviceSheet& sheet, const SyntheticWorkload& w, RunMode mode, std::vector<Action> actions)
        : p_(p), sheet_(sheet), w_(w), mode_(mode), actions_(std::move(actions)) {}

    const std::vector<CandidateScore>& at(const StateDigest& d, double level) {
        const auto key = std::make_pair(d, level);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        TaskDag dag = w_.dag;
        for (auto& t : dag.nodes) t.dyn.run_mode_flag = run_mode_flag(mode_);
        const RuntimeState st = digest_state(d, sheet_);
        std::vector<HeteroGraph> graphs;
        graphs.reserve(actions_.size());
        for (const auto& a : actions_) graphs.push_back(build_hetero_graph(dag, sheet_, st, a, GraphMeta{}));
        return cache_.emplace(key, score_candidates(p_, actions_, graphs, level)).first->second;
    }

    const std::vector<Action>& actions() const { return actions_; }

private:
    const Predictor& p_;
    const DeviceSheet& sheet_;
    const SyntheticWorkload& w_;
    RunMode mode_;
    std::vector<Action> actions_;
    std::map<std::pair<StateDigest, double>, std::vector<CandidateScore>> cache_;
};

inline bool admit_synthetic(const CandidateScore& s, const GateConfig& g, const DynaConfig& c) {
    if (!s.ok || !(s.uncertainty[0].epistemic <= g.eta)) return false;
    auto rel = [&](std::size_t k) { return 0.5 * (s.interval[k].hi - s.interval[k].lo) / std::max(std::abs(s.mean[k]), 1e-300); };
    return rel(0) <= c.synth_time_width && rel(1) <= c.synth_energy_width;
}

/// Greedy choice among gated actions: highest Q, earliest (lexicographic)
/// action on ties.
inline std::size_t greedy_index(const QTable& q, const StateDigest& s, const std::vector<CandidateScore>& scores, const std::vector<std::size_t>& kept) {
    std::size_t best = kept.front();
    double bv = q.get(s, scores[best].action);
    for (std::size_t i : kept) {
        const double v = q.get(s, scores[i].action);
        if (v > bv) {
            bv = v;
            best = i;
        }
    }
    return best;
}

/// Tabular Dyna-Q on the simulated device: each real step executes an
/// epsilon-greedy gated action, then draws `zeta` synthetic state-action
/// pairs whose outcome is predicted by the surrogate and admitted only when
/// the safety gate passes.
inline DynaTrace dyna_q_run(const DeviceSheet& sheet, const EnvConfig& env, const SyntheticWorkload& w, const Predictor& p, const GateConfig& gate,
                            const RewardConfig& reward, const DynaConfig& cfg, std::uint64_t seed) {
    gate.validate();
    if (cfg.episodes < 1 || cfg.steps_per_episode < 1 || cfg.zeta < 0) fail(ErrorKind::ConfigError, "invalid Dyna-Q settings");
    const int bench = benchmark_id(w.benchmark);
    const std::vector<Action> all = enumerate_actions(sheet, std::vector<double>(static_cast<std::size_t>(sheet.cores), sheet.ambient_c), INFINITY);
    ScoreCache cache(p, sheet, w, cfg.mode, all);
    QTable q(all.size());
    ReplayBuffer real(cfg.real_capacity, false), synth(cfg.synthetic_capacity, true);
    Rng policy_rng = substream(seed, "dyna.policy");
    Rng synth_rng = substream(seed, "dyna.synthetic");
    Rng env_rng = substream(seed, "env");

    DynaTrace trace;
    trace.best_time = INFINITY;
    for (const auto& a : all) trace.best_time = std::min(trace.best_time, model_time(w, a, sheet, cfg.mode));
    const SimEnvState start = SimEnvState::fresh(sheet, env, seed);
    const StateDigest start_digest = digest_of(start.temp_c, start.util_ema, bench);

    for (int ep = 1; ep <= cfg.episodes; ++ep) {
        SimEnvState st = start;
        st.rng = env_rng;
        EpisodeSummary sum;
        sum.episode = ep;
        std::size_t gated_total = 0, cand_total = 0;
        for (int step = 0; step < cfg.steps_per_episode; ++step) {
            const StateDigest s = digest_of(st.temp_c, st.util_ema, bench);
            const auto& scores = cache.at(s, gate.level);
            const bool too_hot = st.hottest() > gate.thermal_cap_c;
            GateResult g = uncertainty_gate(scores, gate);
            if (too_hot) {
                g.rejected.clear();
                g.kept.clear();
            }
            StepRecord rec;
            rec.episode = ep;
            rec.step = step;
            rec.gated = too_hot ? scores.size() : g.rejected.size();
            cand_total += scores.size();
            gated_total += rec.gated;
            if (g.kept.empty()) {
                rec.fallback = true;
                rec.action = min_frequency_action(sheet);
            } else {
                std::size_t idx;
                if (uniform01(policy_rng) < cfg.epsilon) idx = g.kept[uniform_index(policy_rng, g.kept.size())];
                else idx = greedy_index(q, s, scores, g.kept);
                rec.action = scores[idx].action;
                rec.epistemic = scores[idx].uncertainty[0].epistemic;
                rec.pi_upper = scores[idx].interval[0].hi;
            }
            const SimStep out = simulate_execution(st, w, rec.action, sheet, cfg.mode, env);
            rec.time = out.row.elapsed_time;
            rec.energy = out.row.energy;
            rec.reward = reward.reward(rec.time, rec.energy, out.next.hottest());
            Transition t{s, rec.action, rec.reward, digest_of(out.next.temp_c, out.next.util_ema, bench), step + 1 == cfg.steps_per_episode,
                         st.temp_c, st.util_ema, false};
            q.update(t, cfg.alpha, cfg.gamma);
            real.push(std::move(t));
            ++trace.real_transitions;
            st = out.next;
            idle(st, env.idle_gap, env.util_decay);

            for (int z = 0; z < cfg.zeta; ++z) {
                ++rec.synthetic_draws;
                const Transition& base = real[uniform_index(synth_rng, real.size())];
                const std::size_t ai = uniform_index(synth_rng, all.size());
                const CandidateScore& sc = cache.at(base.state, cfg.synth_level)[ai];
                if (!admit_synthetic(sc, gate, cfg)) continue;
                const double time = sc.mean[0], energy = sc.mean[1];
                std::vector<double> temps = base.temps, util = base.util;
                double hottest = -INFINITY;
                for (int c = 0; c < sheet.cores; ++c) {
                    const auto i = static_cast<std::size_t>(c);
                    const double pw = sc.action.mask[i] ? sheet.table_of(c).power(sheet.table_of(c).freqs_hz[static_cast<std::size_t>(sc.action.dvfs[i])]) : 0.0;
                    temps[i] = rc_step(temps[i], sheet.ambient_c, pw, env.r_th, env.tau_rc, time);
                    hottest = std::max(hottest, temps[i]);
                    util[i] = env.util_decay * util[i] + (1.0 - env.util_decay) * (sc.action.mask[i] ? std::clamp(sc.mean[4], 0.0, 1.0) : 0.0);
                }
                Transition ts{base.state, sc.action, reward.reward(time, energy, hottest), digest_of(temps, util, bench), base.terminal,
                              base.temps, base.util, true};
                q.update(ts, cfg.alpha, cfg.gamma);
                synth.push(std::move(ts));
                ++trace.synthetic_transitions;
                ++rec.synthetic_admitted;
            }
            sum.makespan += rec.time;
            sum.energy += rec.energy;
            sum.reward += rec.reward;
            trace.steps.push_back(std::move(rec));
        }
        env_rng = st.rng;
        sum.gated_fraction = cand_total ? static_cast<double>(gated_total) / static_cast<double>(cand_total) : 0.0;
        const auto& scores = cache.at(start_digest, gate.level);
        const GateResult g = uncertainty_gate(scores, gate);
        const Action greedy = g.kept.empty() ? min_frequency_action(sheet) : scores[greedy_index(q, start_digest, scores, g.kept)].action;
        sum.greedy_time = model_time(w, greedy, sheet, cfg.mode);
        if (trace.episodes_to_reach < 0 && sum.greedy_time <= (1.0 + cfg.reach_tolerance) * trace.best_time) trace.episodes_to_reach = ep;
        trace.episodes.push_back(sum);
    }
    return trace;
}

inline std::string trace_csv(const DynaTrace& t) {
    std::string out = "episode,step,action,time,energy,reward,gated,fallback,epistemic,pi_upper,synthetic_draws,synthetic_admitted\n";
    for (const auto& r : t.steps) {
        out += std::to_string(r.episode) + "," + std::to_string(r.step) + "," + to_string(r.action) + "," + detail::fmt_double(r.time) + "," +
               detail::fmt_double(r.energy) + "," + detail::fmt_double(r.reward) + "," + std::to_string(r.gated) + "," + (r.fallback ? "1" : "0") +
               "," + detail::fmt_double(r.epistemic) + "," + detail::fmt_double(r.pi_upper) + "," + std::to_string(r.synthetic_draws) + "," +
               std::to_string(r.synthetic_admitted) + "\n";
    }
    return out;
}

/// Executed actions that break the gate (fallbacks excluded).
inline std::size_t gate_violations(const DynaTrace& t, const GateConfig& g) {
    std::size_t n = 0;
    for (const auto& r : t.steps)
        if (!r.fallback && !(r.epistemic <= g.eta && r.pi_upper <= g.t_max_time)) ++n;
    return n;
}

} // namespace perfgraph
