#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "perfgraph/error.hpp"
#include "perfgraph/keyed_config.hpp"

namespace perfgraph {

enum class RunMode { Serial, Tasks, Tied };

inline std::string to_string(RunMode m) {
    switch (m) {
    case RunMode::Serial: return "serial";
    case RunMode::Tasks: return "tasks";
    case RunMode::Tied: return "tied";
    }
    return "tasks";
}

inline RunMode parse_run_mode(const std::string& s) {
    if (s == "serial") return RunMode::Serial;
    if (s == "tasks") return RunMode::Tasks;
    if (s == "tied") return RunMode::Tied;
    fail(ErrorKind::ParseError, "unknown run mode '" + s + "'");
}

/// One execution record.
struct TelemetryRow {
    double timestamp = 0.0;
    std::int64_t iteration = 0;
    std::string benchmark;
    double input_size = 1.0;
    RunMode run_mode = RunMode::Tasks;
    std::vector<int> dvfs_indices;     // per core, -1 on inactive cores
    std::vector<double> measured_freqs; // Hz per core
    int num_active_cores = 1;
    std::string core_mask;             // '1'/'0' per core, core 0 first
    std::string input_params;
    double elapsed_time = 1.0;         // s
    double energy = 0.0;               // J
    double power = 0.0;                // W
    double cycles = 0, instructions = 0, cache_refs = 0, cache_misses = 0, branches = 0, branch_misses = 0;
    double task_clock = 0, cpu_clock = 0, page_faults = 0;
    std::vector<double> temps_pre;     // deg C per zone
    std::vector<double> temps_post;
    std::vector<double> util_pre;      // utilization EMA per core before the run
    double delta_t = 0.0;              // max over zones of post - pre
    double headroom = 0.0;             // T_max - hottest post temperature
    std::string source = "synthetic";
    std::uint64_t seed = 0;
    std::string device_id;

    /// Mean core utilization over the run; the fifth prediction target.
    double utilization() const {
        return num_active_cores > 0 && elapsed_time > 0 ? task_clock / (elapsed_time * num_active_cores) : 0.0;
    }

    bool operator==(const TelemetryRow&) const = default;
};

inline const std::vector<std::string>& telemetry_columns() {
    static const std::vector<std::string> cols{
        "timestamp", "iteration", "benchmark", "input_size", "run_mode", "dvfs_indices", "measured_freqs", "num_active_cores",
        "core_mask", "input_params", "elapsed_time", "energy", "power", "cycles", "instructions", "cache_refs", "cache_misses",
        "branches", "branch_misses", "task_clock", "cpu_clock", "page_faults", "temps_pre", "temps_post", "util_pre", "delta_t",
        "headroom", "source", "seed", "device_id"};
    return cols;
}

inline void validate_row(const TelemetryRow& r, std::size_t row_index) {
    auto bad = [&](const std::string& what) { fail(ErrorKind::ParseError, "row " + std::to_string(row_index) + ": " + what); };
    if (!(r.elapsed_time > 0.0) || !std::isfinite(r.elapsed_time)) bad("elapsed_time must be > 0");
    if (!(r.energy >= 0.0)) bad("energy must be >= 0");
    for (double c : {r.cycles, r.instructions, r.cache_refs, r.cache_misses, r.branches, r.branch_misses, r.task_clock, r.cpu_clock,
                     r.page_faults})
        if (!(c >= 0.0)) bad("counters must be >= 0");
    for (const auto* temps : {&r.temps_pre, &r.temps_post})
        for (double t : *temps)
            if (!std::isfinite(t)) bad("temperatures must be finite");
    if (r.source != "real" && r.source != "synthetic") bad("source must be real or synthetic");
}

namespace detail {

inline std::string fmt_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

template <class T>
std::string join(const std::vector<T>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ';';
        if constexpr (std::is_same_v<T, double>) s += fmt_double(v[i]);
        else s += std::to_string(v[i]);
    }
    return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace detail

inline std::string format_csv(const std::vector<TelemetryRow>& rows) {
    using detail::fmt_double;
    using detail::join;
    std::string out;
    const auto& cols = telemetry_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
    out += '\n';
    for (const auto& r : rows) {
        for (const std::string& text : {r.benchmark, r.input_params, r.core_mask, r.device_id})
            if (text.find_first_of(",\n") != std::string::npos) fail(ErrorKind::InvalidArgument, "text field contains a separator: " + text);
        const std::vector<std::string> fields{
            fmt_double(r.timestamp), std::to_string(r.iteration), r.benchmark, fmt_double(r.input_size), to_string(r.run_mode),
            join(r.dvfs_indices), join(r.measured_freqs), std::to_string(r.num_active_cores), r.core_mask, r.input_params,
            fmt_double(r.elapsed_time), fmt_double(r.energy), fmt_double(r.power), fmt_double(r.cycles), fmt_double(r.instructions),
            fmt_double(r.cache_refs), fmt_double(r.cache_misses), fmt_double(r.branches), fmt_double(r.branch_misses),
            fmt_double(r.task_clock), fmt_double(r.cpu_clock), fmt_double(r.page_faults), join(r.temps_pre), join(r.temps_post),
            join(r.util_pre), fmt_double(r.delta_t), fmt_double(r.headroom), r.source, std::to_string(r.seed), r.device_id};
        for (std::size_t i = 0; i < fields.size(); ++i) out += (i ? "," : "") + fields[i];
        out += '\n';
    }
    return out;
}

inline std::vector<TelemetryRow> parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::SchemaMismatch, "empty telemetry file");
    const auto header = detail::split_csv_line(line);
    const auto& cols = telemetry_columns();
    if (header != cols) {
        for (const auto& c : cols)
            if (std::find(header.begin(), header.end(), c) == header.end()) fail(ErrorKind::SchemaMismatch, "missing column '" + c + "'");
        for (const auto& h : header)
            if (std::find(cols.begin(), cols.end(), h) == cols.end()) fail(ErrorKind::SchemaMismatch, "unexpected column '" + h + "'");
        fail(ErrorKind::SchemaMismatch, "columns out of order");
    }

    std::vector<TelemetryRow> rows;
    std::size_t index = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto f = detail::split_csv_line(line);
        auto err = [&](const std::string& what) { fail(ErrorKind::ParseError, "row " + std::to_string(index) + ": " + what); };
        if (f.size() != cols.size()) err("expected " + std::to_string(cols.size()) + " fields, got " + std::to_string(f.size()));
        auto num = [&](std::size_t c) {
            try {
                std::size_t used = 0;
                const double x = std::stod(f[c], &used);
                if (used != f[c].size()) throw std::invalid_argument(f[c]);
                return x;
            } catch (const std::exception&) {
                fail(ErrorKind::ParseError, "row " + std::to_string(index) + ": column '" + cols[c] + "' is not numeric: '" + f[c] + "'");
            }
        };
        auto integer = [&](std::size_t c) {
            try {
                std::size_t used = 0;
                const long long x = std::stoll(f[c], &used);
                if (used != f[c].size()) throw std::invalid_argument(f[c]);
                return x;
            } catch (const std::exception&) {
                fail(ErrorKind::ParseError, "row " + std::to_string(index) + ": column '" + cols[c] + "' is not an integer: '" + f[c] + "'");
            }
        };
        auto list = [&](std::size_t c) {
            std::vector<double> v;
            for (const auto& part : KeyedConfig::split(f[c], ';')) {
                try {
                    v.push_back(std::stod(part));
                } catch (const std::exception&) {
                    err("column '" + cols[c] + "' has non-numeric entry '" + part + "'");
                }
            }
            return v;
        };
        TelemetryRow r;
        r.timestamp = num(0);
        r.iteration = integer(1);
        r.benchmark = f[2];
        r.input_size = num(3);
        try {
            r.run_mode = parse_run_mode(f[4]);
        } catch (const Error&) {
            err("unknown run mode '" + f[4] + "'");
        }
        for (double d : list(5)) r.dvfs_indices.push_back(static_cast<int>(d));
        r.measured_freqs = list(6);
        r.num_active_cores = static_cast<int>(integer(7));
        r.core_mask = f[8];
        r.input_params = f[9];
        r.elapsed_time = num(10);
        r.energy = num(11);
        r.power = num(12);
        r.cycles = num(13);
        r.instructions = num(14);
        r.cache_refs = num(15);
        r.cache_misses = num(16);
        r.branches = num(17);
        r.branch_misses = num(18);
        r.task_clock = num(19);
        r.cpu_clock = num(20);
        r.page_faults = num(21);
        r.temps_pre = list(22);
        r.temps_post = list(23);
        r.util_pre = list(24);
        r.delta_t = num(25);
        r.headroom = num(26);
        r.source = f[27];
        try {
            std::size_t used = 0;
            r.seed = std::stoull(f[28], &used);
            if (used != f[28].size() || f[28].front() == '-') throw std::invalid_argument(f[28]);
        } catch (const std::exception&) {
            err("column 'seed' is not an unsigned integer: '" + f[28] + "'");
        }
        r.device_id = f[29];
        validate_row(r, index);
        rows.push_back(std::move(r));
        ++index;
    }
    return rows;
}

inline void write_telemetry_csv(const std::string& path, const std::vector<TelemetryRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::ConfigError, "cannot write '" + path + "'");
    out << format_csv(rows);
}

inline std::vector<TelemetryRow> read_telemetry_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::ConfigError, "cannot open telemetry file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str());
}

} // namespace perfgraph
