#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "perfgraph/error.hpp"
#include "perfgraph/nig.hpp"
#include "perfgraph/rng.hpp"

namespace perfgraph {

inline constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

struct RegressionMetrics {
    double rmse = 0.0, mae = 0.0, mape = 0.0, r2 = 0.0;
};

/// MAPE skips zero targets; R2 is NaN when y is constant.
inline RegressionMetrics regression_metrics(const std::vector<double>& y, const std::vector<double>& yhat) {
    if (y.size() != yhat.size()) fail(ErrorKind::InvalidArgument, "length mismatch");
    if (y.size() < 2) fail(ErrorKind::InsufficientData, "need at least two samples");
    const double n = static_cast<double>(y.size());
    const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double se = 0.0, ae = 0.0, ape = 0.0, tot = 0.0;
    std::size_t nz = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double e = yhat[i] - y[i];
        se += e * e;
        ae += std::abs(e);
        tot += (y[i] - mean) * (y[i] - mean);
        if (y[i] != 0.0) {
            ape += std::abs(e / y[i]);
            ++nz;
        }
    }
    RegressionMetrics m;
    m.rmse = std::sqrt(se / n);
    m.mae = ae / n;
    m.mape = nz ? ape / static_cast<double>(nz) : kUndefined;
    m.r2 = tot > 0.0 ? 1.0 - se / tot : kUndefined;
    return m;
}

/// Average ranks (1-based), ties share the mean rank.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n, mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return kUndefined;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

struct RankingMetrics {
    double spearman = 0.0, kendall = 0.0, ndcg = 0.0;
    bool defined = true; // false when y (or yhat) is constant
};

inline double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
    double conc = 0.0, disc = 0.0, tx = 0.0, ty = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            const double dx = x[i] - x[j], dy = y[i] - y[j];
            if (dx == 0.0 && dy == 0.0) continue;
            if (dx == 0.0) tx += 1.0;
            else if (dy == 0.0) ty += 1.0;
            else if ((dx > 0.0) == (dy > 0.0)) conc += 1.0;
            else disc += 1.0;
        }
    const double denom = std::sqrt((conc + disc + tx) * (conc + disc + ty));
    return denom > 0.0 ? (conc - disc) / denom : kUndefined;
}

/// NDCG@k where a lower target is more relevant: gain = 1 / (1 + min-max
/// normalized target); items ranked by ascending prediction.
inline double ndcg_at_k(const std::vector<double>& y, const std::vector<double>& yhat, std::size_t k) {
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    const double range = *hi - *lo;
    auto gain = [&](std::size_t i) { return 1.0 / (1.0 + (range > 0.0 ? (y[i] - *lo) / range : 0.0)); };
    std::vector<std::size_t> pred(y.size()), ideal(y.size());
    std::iota(pred.begin(), pred.end(), 0);
    std::iota(ideal.begin(), ideal.end(), 0);
    std::stable_sort(pred.begin(), pred.end(), [&](std::size_t a, std::size_t b) { return yhat[a] < yhat[b]; });
    std::stable_sort(ideal.begin(), ideal.end(), [&](std::size_t a, std::size_t b) { return y[a] < y[b]; });
    k = std::min(k, y.size());
    double dcg = 0.0, idcg = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double disc = 1.0 / std::log2(static_cast<double>(i) + 2.0);
        dcg += gain(pred[i]) * disc;
        idcg += gain(ideal[i]) * disc;
    }
    return idcg > 0.0 ? dcg / idcg : kUndefined;
}

inline RankingMetrics ranking_metrics(const std::vector<double>& y, const std::vector<double>& yhat, std::size_t k = 10) {
    if (y.size() != yhat.size()) fail(ErrorKind::InvalidArgument, "length mismatch");
    if (y.size() < 2) fail(ErrorKind::InsufficientData, "need at least two samples");
    RankingMetrics m;
    m.spearman = pearson(average_ranks(y), average_ranks(yhat));
    m.kendall = kendall_tau_b(y, yhat);
    m.ndcg = ndcg_at_k(y, yhat, k);
    m.defined = !std::isnan(m.spearman) && !std::isnan(m.kendall);
    return m;
}

struct ReliabilityBin {
    double lo_uncertainty = 0.0, hi_uncertainty = 0.0;
    std::size_t count = 0;
    double hit_rate = 0.0;
    double nominal = 0.95;
};

struct CalibrationMetrics {
    double ece = 0.0; // PICE at the 95% level
    double mce = 0.0;
    double pice90 = 0.0, pice95 = 0.0;
    double picp90 = 0.0, picp95 = 0.0;
    double mis90 = 0.0, mis95 = 0.0;
    double sharpness90 = 0.0, sharpness95 = 0.0;
    std::size_t bins = 0;
    bool bins_reduced = false;
    std::vector<ReliabilityBin> reliability; // at the 95% level
};

struct IntervalStats {
    double pice = 0.0, mce = 0.0, picp = 0.0, mis = 0.0, sharpness = 0.0;
    std::vector<ReliabilityBin> bins;
};

/// Interval statistics at one level. `order` lists samples by ascending
/// predicted uncertainty; bins are equal-mass chunks of it.
inline IntervalStats interval_stats(const std::vector<double>& y, const std::vector<Interval>& iv, const std::vector<double>& uncertainty,
                                    const std::vector<std::size_t>& order, std::size_t bins, double level) {
    const std::size_t n = y.size();
    const double delta = 1.0 - level;
    IntervalStats s;
    std::vector<bool> hit(n);
    double hits = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        hit[i] = y[i] >= iv[i].lo && y[i] <= iv[i].hi;
        hits += hit[i];
        const double w = iv[i].hi - iv[i].lo;
        s.sharpness += w;
        s.mis += w + (2.0 / delta) * std::max(0.0, iv[i].lo - y[i]) + (2.0 / delta) * std::max(0.0, y[i] - iv[i].hi);
    }
    s.picp = hits / static_cast<double>(n);
    s.sharpness /= static_cast<double>(n);
    s.mis /= static_cast<double>(n);
    for (std::size_t b = 0; b < bins; ++b) {
        const std::size_t lo = b * n / bins, hi = (b + 1) * n / bins;
        if (hi == lo) continue;
        ReliabilityBin rb;
        rb.count = hi - lo;
        rb.nominal = level;
        rb.lo_uncertainty = uncertainty[order[lo]];
        rb.hi_uncertainty = uncertainty[order[hi - 1]];
        double h = 0.0;
        for (std::size_t k = lo; k < hi; ++k) h += hit[order[k]];
        rb.hit_rate = h / static_cast<double>(rb.count);
        const double gap = std::abs(rb.hit_rate - level);
        s.pice += static_cast<double>(rb.count) / static_cast<double>(n) * gap;
        s.mce = std::max(s.mce, gap);
        s.bins.push_back(rb);
    }
    return s;
}

/// Calibration of NIG predictions against targets (same units), with the
/// predictive scale multiplied by `temperature`. Bins partition samples by
/// predicted total uncertainty into equal-mass groups.
inline CalibrationMetrics calibration_metrics(const std::vector<double>& y, const std::vector<NigParams>& pred, double temperature = 1.0,
                                              std::size_t bins = 10) {
    if (y.size() != pred.size()) fail(ErrorKind::InvalidArgument, "length mismatch");
    if (y.empty()) fail(ErrorKind::InsufficientData, "no samples");
    if (bins == 0) fail(ErrorKind::InvalidArgument, "bins must be >= 1");
    CalibrationMetrics m;
    if (y.size() < bins) {
        bins = std::max<std::size_t>(1, y.size() / 5);
        m.bins_reduced = true;
    }
    m.bins = bins;
    std::vector<double> unc(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) unc[i] = decompose(pred[i]).total * temperature * temperature;
    std::vector<std::size_t> order(y.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return unc[a] < unc[b]; });
    std::vector<Interval> iv90, iv95;
    for (const auto& p : pred) {
        iv90.push_back(prediction_interval(p, 0.90, temperature));
        iv95.push_back(prediction_interval(p, 0.95, temperature));
    }
    const IntervalStats s90 = interval_stats(y, iv90, unc, order, bins, 0.90);
    const IntervalStats s95 = interval_stats(y, iv95, unc, order, bins, 0.95);
    m.pice90 = s90.pice;
    m.pice95 = s95.pice;
    m.ece = s95.pice;
    m.mce = s95.mce;
    m.picp90 = s90.picp;
    m.picp95 = s95.picp;
    m.mis90 = s90.mis;
    m.mis95 = s95.mis;
    m.sharpness90 = s90.sharpness;
    m.sharpness95 = s95.sharpness;
    m.reliability = s95.bins;
    return m;
}

struct ParetoPoint {
    double time = 0.0, energy = 0.0;
    bool operator==(const ParetoPoint&) const = default;
};

/// Non-dominated points under (min time, min energy), sorted by time.
inline std::vector<ParetoPoint> pareto_front(std::vector<ParetoPoint> pts) {
    if (pts.empty()) fail(ErrorKind::InsufficientData, "no points");
    std::sort(pts.begin(), pts.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
        return a.time < b.time || (a.time == b.time && a.energy < b.energy);
    });
    std::vector<ParetoPoint> front;
    double best = INFINITY;
    for (const auto& p : pts) {
        if (p.energy < best) {
            front.push_back(p);
            best = p.energy;
        }
    }
    return front;
}

/// Area under the front's staircase over the observed time range,
/// normalized by the bounding box of all points.
inline double pareto_auc(const std::vector<ParetoPoint>& pts) {
    const auto front = pareto_front(pts);
    double t0 = INFINITY, t1 = -INFINITY, e0 = INFINITY, e1 = -INFINITY;
    for (const auto& p : pts) {
        t0 = std::min(t0, p.time);
        t1 = std::max(t1, p.time);
        e0 = std::min(e0, p.energy);
        e1 = std::max(e1, p.energy);
    }
    if (!(t1 > t0) || !(e1 > e0)) return 0.0;
    double area = 0.0;
    for (std::size_t i = 0; i < front.size(); ++i) {
        const double next = i + 1 < front.size() ? front[i + 1].time : t1;
        area += (front[i].energy - e0) * (next - front[i].time);
    }
    return area / ((t1 - t0) * (e1 - e0));
}

struct ParetoReport {
    std::vector<ParetoPoint> front;
    double auc = 0.0;
    double auc_mean = 0.0, auc_std = 0.0;
    int resamples = 0;
};

inline ParetoReport pareto_report(const std::vector<ParetoPoint>& pts, std::uint64_t seed, int resamples = 1000) {
    ParetoReport r;
    r.front = pareto_front(pts);
    r.auc = pareto_auc(pts);
    r.resamples = resamples;
    Rng rng = substream(seed, "bootstrap");
    std::vector<double> aucs;
    std::vector<ParetoPoint> sample(pts.size());
    for (int b = 0; b < resamples; ++b) {
        for (auto& s : sample) s = pts[uniform_index(rng, pts.size())];
        aucs.push_back(pareto_auc(sample));
    }
    if (!aucs.empty()) {
        r.auc_mean = std::accumulate(aucs.begin(), aucs.end(), 0.0) / static_cast<double>(aucs.size());
        double v = 0.0;
        for (double a : aucs) v += (a - r.auc_mean) * (a - r.auc_mean);
        r.auc_std = std::sqrt(v / static_cast<double>(aucs.size()));
    }
    return r;
}

struct TargetReport {
    std::string name;
    RegressionMetrics regression;    // original units
    RankingMetrics ranking;          // original units
    CalibrationMetrics calibration;  // normalized units
    double nll = 0.0;                // mean, normalized units, temperature applied
    double temperature = 1.0;
};

struct MetricReport {
    std::vector<TargetReport> targets;
    ParetoReport pareto;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    std::string config_hash;
    int schema_version = 1;
};

namespace detail {
inline nlohmann::json num(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }
} // namespace detail

inline nlohmann::json to_json(const MetricReport& r) {
    using detail::num;
    nlohmann::json j;
    j["schema_version"] = r.schema_version;
    j["seed"] = r.seed;
    j["config_hash"] = r.config_hash;
    j["samples"] = r.samples;
    for (const auto& t : r.targets) {
        nlohmann::json x;
        x["rmse"] = num(t.regression.rmse);
        x["mae"] = num(t.regression.mae);
        x["mape"] = num(t.regression.mape);
        x["r2"] = num(t.regression.r2);
        x["spearman"] = num(t.ranking.spearman);
        x["kendall"] = num(t.ranking.kendall);
        x["ndcg"] = num(t.ranking.ndcg);
        x["ranking_defined"] = t.ranking.defined;
        const auto& c = t.calibration;
        x["ece"] = num(c.ece);
        x["mce"] = num(c.mce);
        x["pice90"] = num(c.pice90);
        x["pice95"] = num(c.pice95);
        x["picp90"] = num(c.picp90);
        x["picp95"] = num(c.picp95);
        x["mis90"] = num(c.mis90);
        x["mis95"] = num(c.mis95);
        x["sharpness90"] = num(c.sharpness90);
        x["sharpness95"] = num(c.sharpness95);
        x["bins"] = c.bins;
        x["bins_reduced"] = c.bins_reduced;
        x["nll"] = num(t.nll);
        x["temperature"] = num(t.temperature);
        j["targets"][t.name] = x;
    }
    nlohmann::json front = nlohmann::json::array();
    for (const auto& p : r.pareto.front) front.push_back({num(p.time), num(p.energy)});
    j["pareto"] = {{"front", front}, {"auc", num(r.pareto.auc)}, {"auc_mean", num(r.pareto.auc_mean)}, {"auc_std", num(r.pareto.auc_std)},
                   {"resamples", r.pareto.resamples}};
    return j;
}

inline std::string reliability_csv(const MetricReport& r) {
    std::string out = "target,bin,lo_uncertainty,hi_uncertainty,count,hit_rate,nominal\n";
    char buf[256];
    for (const auto& t : r.targets)
        for (std::size_t b = 0; b < t.calibration.reliability.size(); ++b) {
            const auto& rb = t.calibration.reliability[b];
            std::snprintf(buf, sizeof buf, "%s,%zu,%.17g,%.17g,%zu,%.17g,%.17g\n", t.name.c_str(), b, rb.lo_uncertainty, rb.hi_uncertainty, rb.count,
                          rb.hit_rate, rb.nominal);
            out += buf;
        }
    return out;
}

inline std::string pareto_csv(const std::vector<ParetoPoint>& all, const std::vector<ParetoPoint>& front) {
    std::string out = "time,energy,on_front\n";
    char buf[128];
    for (const auto& p : all) {
        const bool on = std::find(front.begin(), front.end(), p) != front.end();
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d\n", p.time, p.energy, on ? 1 : 0);
        out += buf;
    }
    return out;
}

} // namespace perfgraph
