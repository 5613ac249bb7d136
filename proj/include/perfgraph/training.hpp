#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "perfgraph/hetero_graph.hpp"
#include "perfgraph/metrics.hpp"
#include "perfgraph/nig.hpp"
#include "perfgraph/optim.hpp"
#include "perfgraph/preprocess.hpp"
#include "perfgraph/simenv.hpp"
#include "perfgraph/surrogate.hpp"

namespace perfgraph {

/// One training example: the graph of a telemetry row and its normalized
/// targets, plus what is needed to map predictions back to raw units.
struct Sample {
    HeteroGraph graph;
    TargetVector y{};    // z-scored transformed targets
    TargetVector raw{};  // original units
    TargetVector mean{}, std{};
    std::string benchmark;
    std::string stratum;
};

inline double run_mode_flag(RunMode m) {
    switch (m) {
    case RunMode::Serial: return 0.0;
    case RunMode::Tied: return 0.5;
    case RunMode::Tasks: return 1.0;
    }
    return 1.0;
}

inline Action row_action(const TelemetryRow& r) {
    Action a;
    a.mask = parse_mask(r.core_mask);
    a.dvfs = r.dvfs_indices;
    for (std::size_t i = 0; i < a.mask.size() && i < a.dvfs.size(); ++i)
        if (!a.mask[i]) a.dvfs[i] = -1;
    return a;
}

/// Graph for a telemetry row: catalog workload, pre-run thermal/utilization
/// state, and the executed action.
inline HeteroGraph row_graph(const TelemetryRow& r, const DeviceSheet& sheet, const SyntheticWorkload& w) {
    TaskDag dag = w.dag;
    for (auto& t : dag.nodes) t.dyn.run_mode_flag = run_mode_flag(r.run_mode);
    RuntimeState st = RuntimeState::idle(sheet);
    if (r.temps_pre.size() == st.temp_c.size()) st.temp_c = r.temps_pre;
    if (r.util_pre.size() == st.util_ema.size()) st.util_ema = r.util_pre;
    GraphMeta meta;
    meta.source = r.source;
    meta.seed = r.seed;
    meta.device_id = r.device_id;
    meta.benchmark = r.benchmark;
    meta.timestamp = r.timestamp;
    return build_hetero_graph(dag, sheet, st, row_action(r), meta);
}

inline std::vector<Sample> build_samples(const std::vector<PreparedRow>& rows, const NormStats& stats, const DeviceSheet& sheet) {
    std::map<std::pair<std::string, double>, SyntheticWorkload> cache;
    std::vector<Sample> out;
    out.reserve(rows.size());
    for (const auto& p : rows) {
        const auto key = std::make_pair(p.row.benchmark, p.row.input_size);
        auto it = cache.find(key);
        if (it == cache.end()) it = cache.emplace(key, make_workload(p.row.benchmark, p.row.input_size)).first;
        Sample s;
        s.graph = row_graph(p.row, sheet, it->second);
        const Moments& m = stats.for_device(p.row.device_id);
        const auto raw = row_targets(p.row);
        for (std::size_t k = 0; k < kMetrics; ++k) {
            s.y[k] = p.features[kTargetFeatureOffset + k];
            s.raw[k] = raw[k];
            s.mean[k] = m.mean[kTargetFeatureOffset + k];
            s.std[k] = m.std[kTargetFeatureOffset + k];
        }
        s.benchmark = p.row.benchmark;
        s.stratum = p.stratum;
        out.push_back(std::move(s));
    }
    return out;
}

/// Normalized prediction back to original target units.
inline double to_raw(const Sample& s, std::size_t k, double z) {
    const double t = s.std[k] > 0.0 ? z * s.std[k] + s.mean[k] : s.mean[k];
    return inverse_transform_target(k, t);
}

struct TrainConfig {
    double lr1 = 1e-3;
    double lr2 = 1e-4;
    int batch = 32;
    int epochs1 = 100;
    int epochs2 = 50;
    double clip = 1.0;
    int patience = 10;
    double min_delta = 1e-5;
    double weight_decay = 1e-4;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double mae_guard = 0.10;
    std::size_t max_pairs = 32;
    std::uint64_t seed = 42;

    void validate() const {
        if (!(lr1 >= 0.0) || !(lr2 >= 0.0)) fail(ErrorKind::ConfigError, "learning rates must be >= 0");
        if (!(clip > 0.0)) fail(ErrorKind::ConfigError, "clip norm must be > 0");
        if (batch < 1 || epochs1 < 0 || epochs2 < 0 || patience < 1) fail(ErrorKind::ConfigError, "invalid epoch/batch settings");
    }
};

inline TrainConfig train_config_from(const KeyedConfig& cfg, TrainConfig base = {}) {
    base.lr1 = cfg.num("train.lr1", base.lr1);
    base.lr2 = cfg.num("train.lr2", base.lr2);
    base.batch = static_cast<int>(cfg.num("train.batch", base.batch));
    base.epochs1 = static_cast<int>(cfg.num("train.epochs1", base.epochs1));
    base.epochs2 = static_cast<int>(cfg.num("train.epochs2", base.epochs2));
    base.clip = cfg.num("train.clip", base.clip);
    base.patience = static_cast<int>(cfg.num("train.patience", base.patience));
    base.min_delta = cfg.num("train.min_delta", base.min_delta);
    base.weight_decay = cfg.num("train.weight_decay", base.weight_decay);
    base.mae_guard = cfg.num("train.mae_guard", base.mae_guard);
    base.validate();
    return base;
}

inline LossConfig loss_config_from(const KeyedConfig& cfg, LossConfig base = {}) {
    base.lambda = cfg.num("loss.lambda", base.lambda);
    base.rank_weight = cfg.num("loss.rank_weight", base.rank_weight);
    base.margin = cfg.num("loss.margin", base.margin);
    if (!(base.lambda >= 0.0) || !(base.rank_weight >= 0.0)) fail(ErrorKind::ConfigError, "loss weights must be >= 0");
    return base;
}

struct EpochLog {
    int stage = 1;
    int epoch = 0;
    std::string split;
    double loss = 0.0;
    std::array<double, kMetrics> mae{};
    double grad_norm = 0.0;
};

struct TrainResult {
    std::vector<EpochLog> log;
    double best_val = INFINITY; // MAE (stage 1) or NLL (stage 2)
    int best_epoch = -1;
    int epochs_run = 0;
    double val_mae = 0.0;       // at the returned checkpoint
    double max_clipped_norm = 0.0;
    std::vector<double> step_losses;
};

inline std::vector<NigVector> predict_samples(const Surrogate& model, const std::vector<Sample>& data, std::size_t chunk = 64) {
    std::vector<NigVector> out;
    out.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); i += chunk) {
        std::vector<const HeteroGraph*> g;
        for (std::size_t j = i; j < std::min(data.size(), i + chunk); ++j) g.push_back(&data[j].graph);
        const auto part = predict(model, std::span<const HeteroGraph* const>(g));
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

inline std::array<double, kMetrics> mae_per_metric(const std::vector<Sample>& data, const std::vector<NigVector>& pred) {
    std::array<double, kMetrics> m{};
    for (std::size_t i = 0; i < data.size(); ++i)
        for (std::size_t k = 0; k < kMetrics; ++k) m[k] += std::abs(pred[i][k].gamma - data[i].y[k]);
    for (double& x : m) x /= static_cast<double>(std::max<std::size_t>(1, data.size()));
    return m;
}

inline double mean_of(const std::array<double, kMetrics>& a) {
    double s = 0.0;
    for (double x : a) s += x;
    return s / static_cast<double>(kMetrics);
}

inline double mean_nll(const std::vector<Sample>& data, const std::vector<NigVector>& pred) {
    double s = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
        for (std::size_t k = 0; k < kMetrics; ++k) s += nig_nll(data[i].y[k], pred[i][k]);
    return s / static_cast<double>(std::max<std::size_t>(1, data.size() * kMetrics));
}

/// Makespan ranking pairs within a batch: same benchmark only, at most
/// `limit` drawn uniformly.
inline std::vector<SamplePair> ranking_pairs(const std::vector<const Sample*>& batch, std::size_t limit, Rng& rng) {
    std::vector<SamplePair> all;
    for (std::size_t i = 0; i < batch.size(); ++i)
        for (std::size_t j = i + 1; j < batch.size(); ++j)
            if (batch[i]->benchmark == batch[j]->benchmark) all.push_back({i, j});
    shuffle(all, rng);
    if (all.size() > limit) all.resize(limit);
    return all;
}

namespace detail {

using Snapshot = std::vector<Mat>;

inline Snapshot snapshot(const Surrogate& m) {
    Snapshot s;
    for (const auto& p : m.params().items()) s.push_back(p.value);
    return s;
}

inline void restore(Surrogate& m, const Snapshot& s) {
    auto& items = m.params().items();
    for (std::size_t i = 0; i < items.size(); ++i) items[i].value = s[i];
}

inline std::vector<std::vector<const Sample*>> make_batches(const std::vector<Sample>& data, int batch, Rng& rng) {
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order, rng);
    std::vector<std::vector<const Sample*>> out;
    for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(batch)) {
        std::vector<const Sample*> b;
        for (std::size_t j = i; j < std::min(order.size(), i + static_cast<std::size_t>(batch)); ++j) b.push_back(&data[order[j]]);
        out.push_back(std::move(b));
    }
    return out;
}

inline GraphBatch batch_of(const std::vector<const Sample*>& b) {
    std::vector<const HeteroGraph*> g;
    for (const auto* s : b) g.push_back(&s->graph);
    return make_batch(std::span<const HeteroGraph* const>(g));
}

} // namespace detail

/// Loss of one batch and its gradient with respect to the NIG outputs.
using BatchObjective = std::function<EvidentialLoss(const std::vector<NigVector>&, const std::vector<const Sample*>&, Rng&)>;

/// Shared epoch loop with early stopping on a validation criterion.
inline TrainResult run_stage(Surrogate& model, const std::vector<Sample>& train, const std::vector<Sample>& val, const TrainConfig& cfg,
                             int stage, double lr, int epochs, const BatchObjective& objective,
                             const std::function<double(const std::vector<NigVector>&)>& criterion) {
    if (train.empty()) fail(ErrorKind::EmptyDataset, "empty training split");
    if (val.empty()) fail(ErrorKind::EmptyDataset, "empty validation split");
    cfg.validate();
    TrainResult res;
    AdamW opt({lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay});
    const std::string tag = "stage" + std::to_string(stage);
    Rng batch_rng = substream(cfg.seed, tag + ".batches");
    Rng noise_rng = substream(cfg.seed, tag + ".dropout");
    Rng pair_rng = substream(cfg.seed, tag + ".pairs");

    auto val_pred = predict_samples(model, val);
    res.best_val = criterion(val_pred);
    res.best_epoch = 0;
    res.val_mae = mean_of(mae_per_metric(val, val_pred));
    detail::Snapshot best = detail::snapshot(model);
    res.log.push_back({stage, 0, "val", res.best_val, mae_per_metric(val, val_pred), 0.0});
    int stale = 0;
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        double loss_sum = 0.0, norm_sum = 0.0;
        std::size_t steps = 0;
        std::array<double, kMetrics> train_mae{};
        for (const auto& b : detail::make_batches(train, cfg.batch, batch_rng)) {
            model.params().zero_grad();
            Tape tape(true);
            ForwardContext ctx{tape, model, &model.params(), Mode::Train, &noise_rng};
            const GraphBatch gb = detail::batch_of(b);
            ForwardPass fp;
            try {
                fp = forward(ctx, gb);
            } catch (const Error& e) {
                detail::restore(model, best);
                throw;
            }
            const auto pred = read_outputs(tape, fp);
            EvidentialLoss l = objective(pred, b, pair_rng);
            if (!std::isfinite(l.value)) {
                detail::restore(model, best);
                fail(ErrorKind::NumericError, "non-finite training loss in stage " + std::to_string(stage));
            }
            backward_nig(tape, fp, l.grad);
            const double norm = clip_grad_norm(model.params(), cfg.clip);
            res.max_clipped_norm = std::max(res.max_clipped_norm, model.params().grad_norm());
            opt.step(model.params());
            if (!model.params().finite()) {
                detail::restore(model, best);
                fail(ErrorKind::NumericError, "non-finite parameters after an update");
            }
            loss_sum += l.value;
            norm_sum += norm;
            res.step_losses.push_back(l.value);
            for (std::size_t i = 0; i < b.size(); ++i)
                for (std::size_t k = 0; k < kMetrics; ++k) train_mae[k] += std::abs(pred[i][k].gamma - b[i]->y[k]);
            ++steps;
        }
        for (double& x : train_mae) x /= static_cast<double>(train.size());
        res.log.push_back({stage, epoch, "train", loss_sum / static_cast<double>(steps), train_mae, norm_sum / static_cast<double>(steps)});
        val_pred = predict_samples(model, val);
        const double crit = criterion(val_pred);
        const auto vmae = mae_per_metric(val, val_pred);
        res.log.push_back({stage, epoch, "val", crit, vmae, 0.0});
        res.epochs_run = epoch;
        if (!std::isfinite(crit)) {
            detail::restore(model, best);
            fail(ErrorKind::NumericError, "non-finite validation criterion");
        }
        if (crit < res.best_val - cfg.min_delta) {
            res.best_val = crit;
            res.best_epoch = epoch;
            res.val_mae = mean_of(vmae);
            best = detail::snapshot(model);
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }
    detail::restore(model, best);
    return res;
}

/// Inverse-variance weights of the (normalized) training targets.
inline std::array<double, kMetrics> inverse_variance_weights(const std::vector<Sample>& train) {
    std::array<double, kMetrics> w{};
    for (std::size_t k = 0; k < kMetrics; ++k) {
        double m = 0.0, v = 0.0;
        for (const auto& s : train) m += s.y[k];
        m /= static_cast<double>(train.size());
        for (const auto& s : train) v += (s.y[k] - m) * (s.y[k] - m);
        v /= static_cast<double>(train.size());
        w[k] = v > 0.0 ? 1.0 / v : 0.0;
    }
    return w;
}

/// Stage 1: inverse-variance weighted MSE on the means, early stopping on
/// validation MAE.
inline TrainResult train_stage1(Surrogate& model, const std::vector<Sample>& train, const std::vector<Sample>& val, const TrainConfig& cfg) {
    const auto w = inverse_variance_weights(train);
    BatchObjective obj = [w](const std::vector<NigVector>& pred, const std::vector<const Sample*>& b, Rng&) {
        EvidentialLoss l;
        l.grad.resize(pred.size());
        const double n = static_cast<double>(pred.size());
        for (std::size_t i = 0; i < pred.size(); ++i)
            for (std::size_t k = 0; k < kMetrics; ++k) {
                const double e = pred[i][k].gamma - b[i]->y[k];
                l.value += w[k] * e * e / n;
                l.grad[i][k].gamma = 2.0 * w[k] * e / n;
            }
        return l;
    };
    auto crit = [&val](const std::vector<NigVector>& p) { return mean_of(mae_per_metric(val, p)); };
    return run_stage(model, train, val, cfg, 1, cfg.lr1, cfg.epochs1, obj, crit);
}

struct Stage2Result {
    TrainResult train;
    double stage1_val_mae = 0.0;
    bool mae_guard_ok = true; // stage-2 validation MAE within mae_guard of stage 1's
};

/// Stage 2: evidential fine-tuning, early stopping on validation NLL.
inline Stage2Result train_stage2(Surrogate& model, const std::vector<Sample>& train, const std::vector<Sample>& val, const TrainConfig& cfg,
                                 const LossConfig& loss) {
    Stage2Result out;
    out.stage1_val_mae = mean_of(mae_per_metric(val, predict_samples(model, val)));
    const std::size_t max_pairs = cfg.max_pairs;
    BatchObjective obj = [loss, max_pairs](const std::vector<NigVector>& pred, const std::vector<const Sample*>& b, Rng& rng) {
        std::vector<TargetVector> y;
        for (const auto* s : b) y.push_back(s->y);
        const auto pairs = ranking_pairs(b, max_pairs, rng);
        return evidential_loss(pred, y, pairs, loss);
    };
    auto crit = [&val](const std::vector<NigVector>& p) { return mean_nll(val, p); };
    out.train = run_stage(model, train, val, cfg, 2, cfg.lr2, cfg.epochs2, obj, crit);
    out.mae_guard_ok = out.train.val_mae <= out.stage1_val_mae * (1.0 + cfg.mae_guard);
    return out;
}

inline std::string training_log_csv(const std::vector<EpochLog>& log) {
    std::string out = "stage,epoch,split,loss";
    for (const char* t : kTargetNames) out += std::string(",mae_") + t;
    out += ",grad_norm\n";
    for (const auto& e : log) {
        out += std::to_string(e.stage) + "," + std::to_string(e.epoch) + "," + e.split + "," + detail::fmt_double(e.loss);
        for (double m : e.mae) out += "," + detail::fmt_double(m);
        out += "," + detail::fmt_double(e.grad_norm) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------- calibration

struct CalibrationParams {
    std::array<double, kMetrics> tau{1.0, 1.0, 1.0, 1.0, 1.0};
    std::array<double, kMetrics> ece_before{}, ece_after{};
};

inline double scaled_nll(const std::vector<double>& y, const std::vector<NigParams>& p, double tau) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += student_t_nll(y[i], p[i].gamma, tau * student_t_scale(p[i]), 2.0 * p[i].alpha);
    return s / static_cast<double>(y.size());
}

/// Golden-section search over log(tau) in [log 0.1, log 10].
inline double fit_temperature(const std::vector<double>& y, const std::vector<NigParams>& p, double lo = 0.1, double hi = 10.0) {
    if (y.empty()) fail(ErrorKind::EmptyDataset, "no calibration samples");
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = std::log(lo), b = std::log(hi);
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = scaled_nll(y, p, std::exp(c)), fd = scaled_nll(y, p, std::exp(d));
    for (int it = 0; it < 200 && b - a > 1e-10; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = scaled_nll(y, p, std::exp(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = scaled_nll(y, p, std::exp(d));
        }
    }
    return std::exp(0.5 * (a + b));
}

inline CalibrationParams calibrate(const Surrogate& model, const std::vector<Sample>& val, std::size_t bins = 10) {
    if (val.empty()) fail(ErrorKind::EmptyDataset, "empty validation split");
    const auto pred = predict_samples(model, val);
    CalibrationParams c;
    for (std::size_t k = 0; k < kMetrics; ++k) {
        std::vector<double> y;
        std::vector<NigParams> p;
        for (std::size_t i = 0; i < val.size(); ++i) {
            y.push_back(val[i].y[k]);
            p.push_back(pred[i][k]);
        }
        c.tau[k] = fit_temperature(y, p);
        c.ece_before[k] = calibration_metrics(y, p, 1.0, bins).ece;
        c.ece_after[k] = calibration_metrics(y, p, c.tau[k], bins).ece;
    }
    return c;
}

inline nlohmann::json to_json(const CalibrationParams& c) {
    nlohmann::json j;
    for (std::size_t k = 0; k < kMetrics; ++k)
        j["targets"][kTargetNames[k]] = {{"tau", c.tau[k]}, {"ece_before", c.ece_before[k]}, {"ece_after", c.ece_after[k]}};
    return j;
}

inline CalibrationParams calibration_from_json(const nlohmann::json& j) {
    CalibrationParams c;
    for (std::size_t k = 0; k < kMetrics; ++k) {
        const auto& t = j.at("targets").at(kTargetNames[k]);
        c.tau[k] = t.at("tau").get<double>();
        if (!(c.tau[k] > 0.0)) fail(ErrorKind::InvalidParams, "temperature must be > 0");
        c.ece_before[k] = t.value("ece_before", 0.0);
        c.ece_after[k] = t.value("ece_after", 0.0);
    }
    return c;
}

// ------------------------------------------------------------- gradient check

inline double central_difference(const std::function<double(double)>& f, double x, double h) { return (f(x + h) - f(x - h)) / (2.0 * h); }

/// Evidential loss of a batch in eval mode; fills parameter gradients when
/// `with_grad` is set.
inline double batch_loss(Surrogate& model, const GraphBatch& gb, const std::vector<TargetVector>& y, const std::vector<SamplePair>& pairs,
                         const LossConfig& loss, bool with_grad) {
    Tape tape(with_grad);
    ForwardContext ctx{tape, model, with_grad ? &model.params() : nullptr, Mode::Eval, nullptr};
    const ForwardPass fp = forward(ctx, gb);
    const auto pred = read_outputs(tape, fp);
    const EvidentialLoss l = evidential_loss(pred, y, pairs, loss);
    if (with_grad) backward_nig(tape, fp, l.grad);
    return l.value;
}

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst;
    std::size_t checked = 0;
};

/// Analytic parameter gradients against central differences with step
/// h = h_scale * max(1, |theta|). The relative error uses
/// max(|analytic|, |numeric|, floor) as denominator; exact-zero pairs
/// compare absolutely.
inline GradCheckResult grad_check(Surrogate& model, const std::vector<const HeteroGraph*>& graphs, const std::vector<TargetVector>& y,
                                  const LossConfig& loss, double h_scale = 1e-5, double floor = 1e-6, std::size_t stride = 1) {
    const GraphBatch gb = make_batch(std::span<const HeteroGraph* const>(graphs));
    std::vector<SamplePair> pairs;
    for (std::size_t i = 0; i < graphs.size(); ++i)
        for (std::size_t j = i + 1; j < graphs.size(); ++j) pairs.push_back({i, j});
    model.params().zero_grad();
    batch_loss(model, gb, y, pairs, loss, true);
    GradCheckResult r;
    std::size_t flat = 0;
    for (auto& p : model.params().items()) {
        for (Eigen::Index i = 0; i < p.value.size(); ++i, ++flat) {
            if (flat % stride) continue;
            double& theta = p.value.data()[i];
            const double saved = theta;
            const double h = h_scale * std::max(1.0, std::abs(saved));
            theta = saved + h;
            const double up = batch_loss(model, gb, y, pairs, loss, false);
            theta = saved - h;
            const double down = batch_loss(model, gb, y, pairs, loss, false);
            theta = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = p.grad.data()[i];
            double err;
            if (analytic == 0.0 && numeric == 0.0) err = 0.0;
            else err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
            ++r.checked;
            if (err > r.max_rel_error) {
                r.max_rel_error = err;
                r.worst = p.name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return r;
}

// ------------------------------------------------------------------ evaluation

inline MetricReport evaluate(const Surrogate& model, const CalibrationParams& calib, const std::vector<Sample>& data, std::uint64_t seed,
                             std::size_t bins = 10, int bootstrap = 1000) {
    if (data.size() < 2) fail(ErrorKind::InsufficientData, "need at least two samples to evaluate");
    const auto pred = predict_samples(model, data);
    MetricReport rep;
    rep.samples = data.size();
    rep.seed = seed;
    std::vector<ParetoPoint> pts;
    for (std::size_t i = 0; i < data.size(); ++i) pts.push_back({to_raw(data[i], 0, pred[i][0].gamma), to_raw(data[i], 1, pred[i][1].gamma)});
    for (std::size_t k = 0; k < kMetrics; ++k) {
        TargetReport t;
        t.name = kTargetNames[k];
        t.temperature = calib.tau[k];
        std::vector<double> y_raw, yhat_raw, y, mu_z;
        std::vector<NigParams> p;
        for (std::size_t i = 0; i < data.size(); ++i) {
            y_raw.push_back(data[i].raw[k]);
            yhat_raw.push_back(to_raw(data[i], k, pred[i][k].gamma));
            y.push_back(data[i].y[k]);
            p.push_back(pred[i][k]);
        }
        t.regression = regression_metrics(y_raw, yhat_raw);
        t.ranking = ranking_metrics(y_raw, yhat_raw, 10);
        t.calibration = calibration_metrics(y, p, calib.tau[k], bins);
        t.nll = scaled_nll(y, p, calib.tau[k]);
        rep.targets.push_back(std::move(t));
    }
    rep.pareto = pareto_report(pts, seed, bootstrap);
    return rep;
}

} // namespace perfgraph
