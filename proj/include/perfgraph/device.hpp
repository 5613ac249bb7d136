#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "perfgraph/error.hpp"
#include "perfgraph/keyed_config.hpp"

namespace perfgraph {

/// Discrete frequency ladder of one cluster and its quadratic power curve.
/// Power is evaluated with the frequency expressed in GHz.
struct DvfsTable {
    std::vector<double> freqs_hz;
    double a = 0.0, b = 0.0, c = 0.0;

    double power(double f_hz) const {
        const double g = f_hz * 1e-9;
        return a * g * g + b * g + c;
    }
    int levels() const { return static_cast<int>(freqs_hz.size()); }
};

struct CacheLevel {
    int level = 1;
    double capacity_bytes = 32768;
    int associativity = 4;
    double line_bytes = 64;
    double latency = 1.0;   // relative cycles
    double bandwidth = 1.0; // relative bytes/cycle
};

struct DeviceSheet {
    std::string device_id = "device";
    int cores = 1;
    std::vector<DvfsTable> clusters;
    std::vector<int> core_cluster; // cluster index per core
    std::vector<CacheLevel> caches;
    std::vector<std::string> governors;
    double t_max_c = 50.0;
    double ambient_c = 25.0;
    std::string version_hash;

    const DvfsTable& table_of(int core) const { return clusters.at(static_cast<std::size_t>(core_cluster.at(static_cast<std::size_t>(core)))); }

    double max_freq_hz() const {
        double f = 0.0;
        for (const auto& t : clusters) f = std::max(f, t.freqs_hz.back());
        return f;
    }

    void validate() const {
        if (cores < 1) fail(ErrorKind::ConfigError, "device must have at least one core");
        if (clusters.empty()) fail(ErrorKind::ConfigError, "device has no DVFS clusters");
        if (static_cast<int>(core_cluster.size()) != cores) fail(ErrorKind::ConfigError, "core_cluster length must equal core count");
        for (int c : core_cluster)
            if (c < 0 || c >= static_cast<int>(clusters.size())) fail(ErrorKind::ConfigError, "core assigned to unknown cluster");
        for (const auto& t : clusters) {
            if (t.freqs_hz.empty()) fail(ErrorKind::ConfigError, "empty DVFS table");
            for (std::size_t i = 1; i < t.freqs_hz.size(); ++i)
                if (!(t.freqs_hz[i] > t.freqs_hz[i - 1])) fail(ErrorKind::ConfigError, "DVFS table must be strictly increasing");
        }
        if (!(t_max_c > ambient_c)) fail(ErrorKind::ConfigError, "thermal cap must exceed ambient temperature");
    }
};

/// Reads a device sheet from a keyed config (sections `device`, `clusterN`, `cacheN`).
inline DeviceSheet load_device_sheet(const KeyedConfig& cfg) {
    DeviceSheet s;
    s.device_id = cfg.str("device.id");
    s.cores = static_cast<int>(cfg.num("device.cores"));
    for (double c : cfg.nums("device.core_cluster")) s.core_cluster.push_back(static_cast<int>(c));
    s.t_max_c = cfg.num("device.t_max_c", 50.0);
    s.ambient_c = cfg.num("device.ambient_c", 25.0);
    if (cfg.has("device.governors")) s.governors = cfg.strs("device.governors");
    s.version_hash = cfg.str("device.version", hex64(cfg.hash()));
    for (int k = 0; cfg.has("cluster" + std::to_string(k) + ".freqs_ghz"); ++k) {
        const std::string p = "cluster" + std::to_string(k) + ".";
        DvfsTable t;
        for (double g : cfg.nums(p + "freqs_ghz")) t.freqs_hz.push_back(g * 1e9);
        const auto coef = cfg.nums(p + "power");
        if (coef.size() != 3) fail(ErrorKind::ConfigError, "key '" + p + "power' needs three coefficients a,b,c");
        t.a = coef[0];
        t.b = coef[1];
        t.c = coef[2];
        s.clusters.push_back(std::move(t));
    }
    for (int k = 0; cfg.has("cache" + std::to_string(k) + ".level"); ++k) {
        const std::string p = "cache" + std::to_string(k) + ".";
        CacheLevel c;
        c.level = static_cast<int>(cfg.num(p + "level"));
        c.capacity_bytes = cfg.num(p + "capacity");
        c.associativity = static_cast<int>(cfg.num(p + "assoc"));
        c.line_bytes = cfg.num(p + "line");
        c.latency = cfg.num(p + "latency", 1.0);
        c.bandwidth = cfg.num(p + "bandwidth", 1.0);
        s.caches.push_back(c);
    }
    s.validate();
    return s;
}

/// Built-in 4-core big.LITTLE-style sheet used by tests and as the CLI default.
inline DeviceSheet default_device_sheet() {
    DeviceSheet s;
    s.device_id = "quad-bl";
    s.cores = 4;
    s.core_cluster = {0, 0, 1, 1};
    s.clusters = {DvfsTable{{0.8e9, 1.4e9, 2.0e9}, 0.45, 0.10, 0.08}, DvfsTable{{0.6e9, 1.0e9, 1.4e9}, 0.25, 0.05, 0.04}};
    s.caches = {CacheLevel{1, 32768, 4, 64, 1.0, 4.0}, CacheLevel{2, 2097152, 16, 64, 12.0, 1.5}};
    s.governors = {"performance", "powersave", "schedutil"};
    s.t_max_c = 50.0;
    s.ambient_c = 25.0;
    s.version_hash = "builtin-1";
    return s;
}

struct RuntimeState {
    std::vector<int> dvfs_index;       // per core
    std::vector<double> freq_hz;       // measured, per core
    std::vector<double> util_ema;      // per core, [0,1]
    std::vector<double> temp_c;        // one thermal zone per core
    std::vector<double> temp_trend;    // last delta T per zone
    std::vector<double> counters;      // recent counter snapshot (free form)

    static RuntimeState idle(const DeviceSheet& sheet) {
        RuntimeState s;
        const auto n = static_cast<std::size_t>(sheet.cores);
        s.dvfs_index.assign(n, 0);
        s.freq_hz.resize(n);
        for (int c = 0; c < sheet.cores; ++c) s.freq_hz[static_cast<std::size_t>(c)] = sheet.table_of(c).freqs_hz.front();
        s.util_ema.assign(n, 0.0);
        s.temp_c.assign(n, sheet.ambient_c);
        s.temp_trend.assign(n, 0.0);
        return s;
    }
};

/// Scheduling action: active-core mask, per-core DVFS index (ignored on
/// inactive cores, stored as -1) and optional FIFO priority.
struct Action {
    std::vector<std::uint8_t> mask;
    std::vector<int> dvfs;
    std::optional<int> priority;

    int active_count() const { return static_cast<int>(std::count(mask.begin(), mask.end(), 1)); }

    std::string mask_string() const {
        std::string s;
        for (auto b : mask) s += b ? '1' : '0';
        return s;
    }

    auto operator<=>(const Action& o) const {
        if (auto c = mask <=> o.mask; c != 0) return c;
        return dvfs <=> o.dvfs;
    }
    bool operator==(const Action& o) const { return mask == o.mask && dvfs == o.dvfs; }
};

inline std::string to_string(const Action& a) {
    std::string s = a.mask_string() + "@";
    for (std::size_t i = 0; i < a.dvfs.size(); ++i) {
        if (i) s += ';';
        s += a.mask[i] ? std::to_string(a.dvfs[i]) : "-";
    }
    return s;
}

inline void check_action(const DeviceSheet& sheet, const Action& a) {
    const auto n = static_cast<std::size_t>(sheet.cores);
    if (a.mask.size() != n || a.dvfs.size() != n) fail(ErrorKind::InfeasibleAction, "action width does not match core count");
    if (a.active_count() == 0) fail(ErrorKind::InfeasibleAction, "action has no active core");
    for (int c = 0; c < sheet.cores; ++c) {
        const auto i = static_cast<std::size_t>(c);
        if (a.mask[i] > 1) fail(ErrorKind::InfeasibleAction, "mask entries must be 0 or 1");
        if (a.mask[i] && (a.dvfs[i] < 0 || a.dvfs[i] >= sheet.table_of(c).levels()))
            fail(ErrorKind::InfeasibleAction, "dvfs index out of range on core " + std::to_string(c));
    }
    if (a.priority && (*a.priority < 1 || *a.priority > 99)) fail(ErrorKind::InfeasibleAction, "priority outside 1..99");
}

/// All active cores at one DVFS level (clamped to each cluster's ladder).
inline Action uniform_action(const DeviceSheet& sheet, const std::vector<std::uint8_t>& mask, int level) {
    Action a;
    a.mask = mask;
    a.dvfs.assign(mask.size(), -1);
    for (int c = 0; c < sheet.cores; ++c)
        if (mask[static_cast<std::size_t>(c)]) a.dvfs[static_cast<std::size_t>(c)] = std::min(level, sheet.table_of(c).levels() - 1);
    return a;
}

/// Single core 0 at its lowest frequency: the conservative fallback.
inline Action min_frequency_action(const DeviceSheet& sheet) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(sheet.cores), 0);
    mask[0] = 1;
    return uniform_action(sheet, mask, 0);
}

} // namespace perfgraph
