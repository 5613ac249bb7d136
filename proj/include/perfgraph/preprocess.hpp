#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "perfgraph/error.hpp"
#include "perfgraph/rng.hpp"
#include "perfgraph/telemetry.hpp"

namespace perfgraph {

inline constexpr std::size_t kNumTargets = 5;
inline constexpr std::array<const char*, kNumTargets> kTargetNames{"makespan", "energy", "cache_misses", "branch_misses", "utilization"};

/// Raw target values of a row, in the order of kTargetNames.
inline std::array<double, kNumTargets> row_targets(const TelemetryRow& r) {
    return {r.elapsed_time, r.energy, r.cache_misses, r.branch_misses, r.utilization()};
}

/// Positive, heavy-tailed targets are modelled in log space; utilization as is.
inline double transform_target(std::size_t k, double y) {
    switch (k) {
    case 0:
    case 1: return std::log(std::max(y, 1e-300));
    case 2:
    case 3: return std::log1p(std::max(y, 0.0));
    default: return y;
    }
}

inline double inverse_transform_target(std::size_t k, double z) {
    switch (k) {
    case 0:
    case 1: return std::exp(z);
    case 2:
    case 3: return std::expm1(z);
    default: return z;
    }
}

/// Row-level feature view that gets z-scored: five context features
/// followed by the five transformed targets.
inline const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names{"input_size", "num_active_cores", "mean_active_freq_ghz", "max_temp_pre", "mean_util_pre",
                                                "t_makespan", "t_energy", "t_cache_misses", "t_branch_misses", "t_utilization"};
    return names;
}
inline constexpr std::size_t kTargetFeatureOffset = 5;

inline std::vector<double> row_features(const TelemetryRow& r) {
    double fsum = 0.0;
    int fn = 0;
    for (std::size_t c = 0; c < r.measured_freqs.size() && c < r.core_mask.size(); ++c)
        if (r.core_mask[c] == '1') {
            fsum += r.measured_freqs[c] * 1e-9;
            ++fn;
        }
    const double tmax = r.temps_pre.empty() ? 0.0 : *std::max_element(r.temps_pre.begin(), r.temps_pre.end());
    double usum = 0.0;
    for (double u : r.util_pre) usum += u;
    std::vector<double> f{r.input_size, static_cast<double>(r.num_active_cores), fn ? fsum / fn : 0.0, tmax,
                          r.util_pre.empty() ? 0.0 : usum / static_cast<double>(r.util_pre.size())};
    const auto t = row_targets(r);
    for (std::size_t k = 0; k < kNumTargets; ++k) f.push_back(transform_target(k, t[k]));
    return f;
}

struct Moments {
    std::vector<double> mean;
    std::vector<double> std; // population standard deviation

    double normalize(std::size_t i, double x) const { return std[i] > 0.0 ? (x - mean[i]) / std[i] : 0.0; }
    double denormalize(std::size_t i, double z) const { return std[i] > 0.0 ? z * std[i] + mean[i] : mean[i]; }
};

/// Per-device and all-device feature moments, fitted on the training split.
struct NormStats {
    std::vector<std::string> features;
    std::map<std::string, Moments> per_device;
    Moments global;

    const Moments& for_device(const std::string& device) const {
        auto it = per_device.find(device);
        return it == per_device.end() ? global : it->second;
    }
};

inline Moments fit_moments(const std::vector<const std::vector<double>*>& rows, std::size_t width) {
    Moments m;
    m.mean.assign(width, 0.0);
    m.std.assign(width, 0.0);
    if (rows.empty()) return m;
    const double n = static_cast<double>(rows.size());
    for (const auto* r : rows)
        for (std::size_t i = 0; i < width; ++i) m.mean[i] += (*r)[i];
    for (double& x : m.mean) x /= n;
    for (const auto* r : rows)
        for (std::size_t i = 0; i < width; ++i) m.std[i] += ((*r)[i] - m.mean[i]) * ((*r)[i] - m.mean[i]);
    for (std::size_t i = 0; i < width; ++i) {
        m.std[i] = std::sqrt(m.std[i] / n);
        // Treat round-off residue on a constant column as zero variance.
        if (m.std[i] <= 1e-12 * std::max(1.0, std::abs(m.mean[i]))) m.std[i] = 0.0;
    }
    return m;
}

inline nlohmann::json to_json(const NormStats& s) {
    nlohmann::json j;
    j["features"] = s.features;
    j["global"] = {{"mean", s.global.mean}, {"std", s.global.std}};
    for (const auto& [dev, m] : s.per_device) j["devices"][dev] = {{"mean", m.mean}, {"std", m.std}};
    return j;
}

inline NormStats norm_stats_from_json(const nlohmann::json& j) {
    NormStats s;
    s.features = j.at("features").get<std::vector<std::string>>();
    s.global.mean = j.at("global").at("mean").get<std::vector<double>>();
    s.global.std = j.at("global").at("std").get<std::vector<double>>();
    if (j.contains("devices"))
        for (const auto& [dev, m] : j.at("devices").items())
            s.per_device[dev] = Moments{m.at("mean").get<std::vector<double>>(), m.at("std").get<std::vector<double>>()};
    return s;
}

enum class StrataKind {
    BenchmarkInputCores, // (benchmark, input size, active core count)
    Full,                // (benchmark, input size, core mask, dvfs indices)
};

struct SplitSpec {
    double train = 0.6, val = 0.2, test = 0.2;
    std::uint64_t seed = 42;
    StrataKind strata = StrataKind::BenchmarkInputCores;
};

inline std::string stratum_key(const TelemetryRow& r, StrataKind kind) {
    std::string key = r.benchmark + "|" + detail::fmt_double(r.input_size) + "|";
    if (kind == StrataKind::BenchmarkInputCores) return key + std::to_string(r.num_active_cores);
    return key + r.core_mask + "|" + detail::join(r.dvfs_indices);
}

/// (graph id, input, mask, dvfs). The run mode is part of the graph id.
inline std::string dedup_key(const TelemetryRow& r) {
    return r.benchmark + "/" + to_string(r.run_mode) + "|" + detail::fmt_double(r.input_size) + "|" + r.core_mask + "|" +
           detail::join(r.dvfs_indices);
}

struct PreparedRow {
    TelemetryRow row;
    std::vector<double> features; // z-scored row_features
    std::string stratum;
    std::size_t source_index = 0; // position in the preprocess input
};

struct PreprocessResult {
    std::vector<PreparedRow> train, val, test;
    NormStats stats;
    std::size_t duplicates_removed = 0;
    std::size_t outliers_removed = 0;
};

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Split sizes for n items by largest remainder; ties go to the earlier split.
inline std::array<std::size_t, 3> allocate_split(std::size_t n, const SplitSpec& spec) {
    const std::array<double, 3> frac{spec.train, spec.val, spec.test};
    std::array<std::size_t, 3> out{};
    std::array<double, 3> rem{};
    std::size_t used = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double exact = frac[i] * static_cast<double>(n);
        out[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        rem[i] = exact - static_cast<double>(out[i]);
        used += out[i];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b] + 1e-12; });
    for (std::size_t k = 0; used < n; ++k, ++used) ++out[order[k % 3]];
    return out;
}

/// Dedup, MAD outlier filter, stratified split, per-device z-scoring.
inline PreprocessResult preprocess(const std::vector<TelemetryRow>& rows, const SplitSpec& spec, double mad_k) {
    if (rows.empty()) fail(ErrorKind::EmptyDataset, "no telemetry rows");
    if (!(mad_k > 0.0)) fail(ErrorKind::InvalidArgument, "MAD multiplier must be > 0");
    if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9) fail(ErrorKind::InvalidArgument, "split fractions must sum to 1");
    PreprocessResult out;

    // (1) duplicates: keep the earliest timestamp, then the earliest position.
    std::map<std::string, std::size_t> first;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto [it, fresh] = first.emplace(dedup_key(rows[i]), i);
        if (!fresh && rows[i].timestamp < rows[it->second].timestamp) it->second = i;
    }
    std::vector<std::size_t> kept;
    for (const auto& [key, i] : first) kept.push_back(i);
    std::sort(kept.begin(), kept.end());
    out.duplicates_removed = rows.size() - kept.size();

    // (2) MAD filter on elapsed time within each stratum.
    std::map<std::string, std::vector<std::size_t>> strata;
    for (std::size_t i : kept) strata[stratum_key(rows[i], spec.strata)].push_back(i);
    for (auto& [key, members] : strata) {
        std::vector<double> t;
        for (std::size_t i : members) t.push_back(rows[i].elapsed_time);
        const double med = median(t);
        std::vector<double> dev;
        for (double x : t) dev.push_back(std::abs(x - med));
        const double mad = median(dev);
        std::vector<std::size_t> survivors;
        for (std::size_t i : members)
            if (std::abs(rows[i].elapsed_time - med) <= mad_k * mad) survivors.push_back(i);
        out.outliers_removed += members.size() - survivors.size();
        members = std::move(survivors);
    }

    // (3) stratified split.
    Rng rng = substream(spec.seed, "split");
    std::array<std::vector<PreparedRow>*, 3> dest{&out.train, &out.val, &out.test};
    for (auto& [key, members] : strata) {
        std::vector<std::size_t> order = members;
        shuffle(order, rng);
        const auto sizes = allocate_split(order.size(), spec);
        std::size_t pos = 0;
        for (std::size_t s = 0; s < 3; ++s) {
            std::vector<std::size_t> chunk(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                           order.begin() + static_cast<std::ptrdiff_t>(pos + sizes[s]));
            pos += sizes[s];
            std::sort(chunk.begin(), chunk.end());
            for (std::size_t i : chunk) dest[s]->push_back(PreparedRow{rows[i], row_features(rows[i]), key, i});
        }
    }
    if (out.train.empty()) fail(ErrorKind::EmptyDataset, "no rows left for training after filtering");

    // (4) z-score with training moments, per device plus a global set.
    const std::size_t width = feature_names().size();
    out.stats.features = feature_names();
    std::vector<const std::vector<double>*> all;
    std::map<std::string, std::vector<const std::vector<double>*>> by_device;
    for (const auto& p : out.train) {
        all.push_back(&p.features);
        by_device[p.row.device_id].push_back(&p.features);
    }
    out.stats.global = fit_moments(all, width);
    for (const auto& [dev, list] : by_device) out.stats.per_device[dev] = fit_moments(list, width);
    for (auto* split : dest)
        for (auto& p : *split) {
            const Moments& m = out.stats.for_device(p.row.device_id);
            for (std::size_t i = 0; i < width; ++i) p.features[i] = m.normalize(i, p.features[i]);
        }
    return out;
}

} // namespace perfgraph
