#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "amrmc/experiments.hpp"
#include "amrmc/moments.hpp"
#include "amrmc/regression.hpp"

namespace amrmc {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Doubles in JSON carry 17 significant digits (round-trip exact for 64-bit
/// floats); non-finite values serialize as null. CSV uses 6 significant
/// digits (human-facing tables).
inline std::string json_double(double x) {
    if (!std::isfinite(x)) return "null";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string csv_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

/// Minimal ordered JSON document builder (fixed field order, controlled
/// number formatting).
class Json {
public:
    Json() = default;
    Json(bool b) : kind_(Kind::Boolean), bool_(b) {}
    Json(double d) : kind_(Kind::Double), double_(d) {}
    Json(int i) : kind_(Kind::Integer), int_(i) {}
    Json(std::int64_t i) : kind_(Kind::Integer), int_(i) {}
    Json(std::uint64_t u) : kind_(Kind::Unsigned), uint_(u) {}
    Json(std::string s) : kind_(Kind::String), string_(std::move(s)) {}
    Json(std::string_view s) : kind_(Kind::String), string_(s) {}
    Json(const char* s) : kind_(Kind::String), string_(s) {}

    static Json object() {
        Json j;
        j.kind_ = Kind::Object;
        return j;
    }
    static Json array() {
        Json j;
        j.kind_ = Kind::Array;
        return j;
    }
    template <typename T>
    static Json array_of(const std::vector<T>& xs) {
        Json j = array();
        for (const T& x : xs) j.push(Json(x));
        return j;
    }

    Json& set(std::string key, Json value) {
        members_.emplace_back(std::move(key), std::move(value));
        return *this;
    }
    Json& push(Json value) {
        elements_.push_back(std::move(value));
        return *this;
    }

    std::string dump(int indent = 2) const {
        std::string out;
        write(out, indent, 0);
        return out;
    }

private:
    enum class Kind { Null, Boolean, Integer, Unsigned, Double, String, Array, Object };

    static void escape(const std::string& s, std::string& out) {
        out += '"';
        for (char c : s) {
            switch (c) {
                case '"': out += "\\\""; break;
                case '\\': out += "\\\\"; break;
                case '\n': out += "\\n"; break;
                case '\t': out += "\\t"; break;
                case '\r': out += "\\r"; break;
                default:
                    if (static_cast<unsigned char>(c) < 0x20) {
                        char buf[8];
                        std::snprintf(buf, sizeof buf, "\\u%04x", c);
                        out += buf;
                    } else {
                        out += c;
                    }
            }
        }
        out += '"';
    }

    void write(std::string& out, int indent, int depth) const {
        const std::string pad(indent * (depth + 1), ' ');
        const std::string closepad(indent * depth, ' ');
        const char* nl = indent > 0 ? "\n" : "";
        switch (kind_) {
            case Kind::Null: out += "null"; break;
            case Kind::Boolean: out += bool_ ? "true" : "false"; break;
            case Kind::Integer: out += std::to_string(int_); break;
            case Kind::Unsigned: out += std::to_string(uint_); break;
            case Kind::Double: out += json_double(double_); break;
            case Kind::String: escape(string_, out); break;
            case Kind::Array: {
                if (elements_.empty()) {
                    out += "[]";
                    break;
                }
                out += '[';
                out += nl;
                for (std::size_t i = 0; i < elements_.size(); ++i) {
                    out += pad;
                    elements_[i].write(out, indent, depth + 1);
                    if (i + 1 < elements_.size()) out += ',';
                    out += nl;
                }
                out += closepad;
                out += ']';
                break;
            }
            case Kind::Object: {
                if (members_.empty()) {
                    out += "{}";
                    break;
                }
                out += '{';
                out += nl;
                for (std::size_t i = 0; i < members_.size(); ++i) {
                    out += pad;
                    escape(members_[i].first, out);
                    out += indent > 0 ? ": " : ":";
                    members_[i].second.write(out, indent, depth + 1);
                    if (i + 1 < members_.size()) out += ',';
                    out += nl;
                }
                out += closepad;
                out += '}';
                break;
            }
        }
    }

    Kind kind_ = Kind::Null;
    bool bool_ = false;
    double double_ = 0.0;
    std::int64_t int_ = 0;
    std::uint64_t uint_ = 0;
    std::string string_;
    std::vector<std::pair<std::string, Json>> members_;
    std::vector<Json> elements_;
};

// ---------------------------------------------------------------------------
// JSON serialization of result types (log-space fields carry a log_ prefix)
// ---------------------------------------------------------------------------

inline Json to_json(const SeedCoordinates& seed) {
    Json j = Json::object();
    j.set("base_seed", Json(seed.base_seed));
    j.set("labels", Json::array_of(seed.labels));
    return j;
}

inline Json to_json(const BasisSpec& spec) {
    Json j = Json::object();
    j.set("family", Json(to_string(spec.family)));
    j.set("order", Json(spec.order));
    return j;
}

inline Json to_json(const BoundReport& r) {
    Json j = Json::object();
    j.set("kind", Json(r.kind));
    j.set("K", Json(r.K));
    j.set("N", Json(r.n_paths));
    Json params = Json::object();
    for (const auto& [k, v] : r.parameters) params.set(k, Json(v));
    j.set("parameters", std::move(params));
    Json consts = Json::object();
    for (const auto& [k, v] : r.constants) consts.set(k, Json(v));
    for (const auto& [k, v] : r.log_constants) consts.set(k, Json(v));
    j.set("constants", std::move(consts));
    j.set("log_lower", Json(r.log_lower));
    j.set("log_upper", Json(r.log_upper));
    // exp() may overflow; null then means "see the log_ field"
    j.set("lower", Json(r.lower()));
    j.set("upper", Json(r.upper()));
    j.set("asymptotic", Json(r.asymptotic));
    return j;
}

inline Json to_json(const GramAnalysis& g) {
    const int n = g.basis.size();
    Json j = Json::object();
    j.set("basis", to_json(g.basis));
    j.set("t", Json(g.t));
    Json rows = Json::array();
    for (int q = 0; q < n; ++q) {
        Json row = Json::array();
        for (int r = 0; r < n; ++r) row.push(Json(g.matrix[q * n + r]));
        rows.push(std::move(row));
    }
    j.set("matrix", std::move(rows));
    j.set("log_det", Json(g.log_det));
    j.set("norm", Json(g.norm));
    j.set("inverse_available", Json(g.inverse_available));
    if (g.inverse_available) {
        Json inv = Json::array();
        for (int q = 0; q < n; ++q) {
            Json row = Json::array();
            for (int r = 0; r < n; ++r) row.push(Json(g.inverse[q * n + r]));
            inv.push(std::move(row));
        }
        j.set("inverse", std::move(inv));
        j.set("inverse_norm", Json(g.inverse_norm));
    }
    j.set("condition_estimate", Json(g.condition_estimate));
    j.set("log_norm_bound", Json(g.log_norm_bound));
    j.set("log_inverse_norm_bound", Json(g.log_inverse_norm_bound));
    return j;
}

inline Json to_json(const CoefficientSet& c) {
    Json j = Json::object();
    j.set("value_estimate", Json(c.value_estimate));
    j.set("continuation_estimate", Json(c.continuation_estimate));
    Json betas = Json::array();
    for (const auto& b : c.betas) betas.push(Json::array_of(b));
    j.set("betas", std::move(betas));
    j.set("dates", Json::array_of(c.dates));
    j.set("sample_sizes", Json::array_of(c.sample_sizes));
    j.set("seed", to_json(c.seed));
    j.set("process", Json(to_string(c.process)));
    j.set("basis", to_json(c.basis));
    j.set("generator", Json(c.generator));
    return j;
}

inline Json to_json(const AssumptionReport& r) {
    Json j = Json::object();
    j.set("all_pass", Json(r.all_pass));
    Json checks = Json::array();
    for (const AssumptionCheck& c : r.checks) {
        Json e = Json::object();
        e.set("condition", Json(c.condition));
        e.set("detail", Json(c.detail));
        e.set("lhs", Json(c.lhs));
        e.set("lhs_se", Json(c.lhs_se));
        e.set("rhs", Json(c.rhs));
        e.set("rhs_se", Json(c.rhs_se));
        e.set("pass", Json(c.pass));
        checks.push(std::move(e));
    }
    j.set("checks", std::move(checks));
    return j;
}

// ---------------------------------------------------------------------------
// Sweep CSV (schema is part of the external interface)
// ---------------------------------------------------------------------------

inline constexpr std::string_view kSweepCsvHeader =
    "setting,K,N,batches,method,mse_mean,mse_stderr,mse_median,expected_mse,"
    "critical_K_lower,critical_K_upper,regime";

inline std::string mse_cell_csv_row(Setting setting, const MseCell& c) {
    std::string row = to_string(setting);
    row += ',' + std::to_string(c.K);
    row += ',' + std::to_string(c.N);
    row += ',' + std::to_string(c.batches);
    row += ',' + to_string(c.method);
    row += ',' + csv_double(c.mse_mean);
    row += ',' + csv_double(c.mse_stderr);
    row += ',' + csv_double(c.mse_median);
    row += ',' + csv_double(c.expected_mse);
    row += ',' + csv_double(c.critical_k_lower);
    row += ',' + csv_double(c.critical_k_upper);
    row += ',' + (c.available ? c.regime : std::string("unavailable"));
    return row;
}

inline std::string sweep_to_csv(const SweepResult& result) {
    std::string out{kSweepCsvHeader};
    out += '\n';
    for (const MseCell& c : result.cells) {
        out += mse_cell_csv_row(result.grid.setting, c);
        out += '\n';
    }
    return out;
}

/// Parses one data row of the sweep CSV back into an MseCell (round-trip
/// counterpart of mse_cell_csv_row).
inline std::pair<Setting, MseCell> parse_mse_cell_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    if (fields.size() != 12) throw IoError("sweep CSV row: expected 12 fields");
    Setting setting;
    if (fields[0] == "normal")
        setting = Setting::Normal;
    else if (fields[0] == "lognormal")
        setting = Setting::Lognormal;
    else
        throw IoError("sweep CSV row: unknown setting " + fields[0]);
    MseCell c;
    c.K = std::atoi(fields[1].c_str());
    c.N = std::strtoull(fields[2].c_str(), nullptr, 10);
    c.batches = std::strtoull(fields[3].c_str(), nullptr, 10);
    if (fields[4] == "direct")
        c.method = MseMethod::Direct;
    else if (fields[4] == "scaled")
        c.method = MseMethod::Scaled;
    else
        throw IoError("sweep CSV row: unknown method " + fields[4]);
    c.mse_mean = std::strtod(fields[5].c_str(), nullptr);
    c.mse_stderr = std::strtod(fields[6].c_str(), nullptr);
    c.mse_median = std::strtod(fields[7].c_str(), nullptr);
    c.expected_mse = std::strtod(fields[8].c_str(), nullptr);
    c.critical_k_lower = std::strtod(fields[9].c_str(), nullptr);
    c.critical_k_upper = std::strtod(fields[10].c_str(), nullptr);
    c.regime = fields[11];
    c.available = c.regime != "unavailable";
    return {setting, c};
}

inline Json to_json(const SweepResult& result) {
    Json j = Json::object();
    Json grid = Json::object();
    grid.set("setting", Json(to_string(result.grid.setting)));
    grid.set("K_values", Json::array_of(result.grid.k_values));
    grid.set("N_values", Json::array_of(result.grid.n_values));
    grid.set("batches", Json(result.grid.batches));
    grid.set("t1", Json(result.grid.t1));
    grid.set("t2", Json(result.grid.t2));
    grid.set("base_seed", Json(result.grid.base_seed));
    grid.set("scaled_threshold", Json(result.grid.scaled_threshold));
    grid.set("N_ref", Json(result.grid.n_ref));
    j.set("grid", std::move(grid));
    Json cells = Json::array();
    for (const MseCell& c : result.cells) {
        Json e = Json::object();
        e.set("K", Json(c.K));
        e.set("N", Json(c.N));
        e.set("batches", Json(c.batches));
        e.set("method", Json(to_string(c.method)));
        e.set("available", Json(c.available));
        e.set("mse_mean", Json(c.mse_mean));
        e.set("mse_stderr", Json(c.mse_stderr));
        e.set("mse_median", Json(c.mse_median));
        e.set("expected_mse", Json(c.expected_mse));
        e.set("critical_K_lower", Json(c.critical_k_lower));
        e.set("critical_K_upper", Json(c.critical_k_upper));
        e.set("regime", Json(c.regime));
        cells.push(std::move(e));
    }
    j.set("cells", std::move(cells));
    return j;
}

/// Plot-data export: (K, N, mse_mean) triples plus critical-curve samples.
inline std::string sweep_to_plot_csv(const SweepResult& result) {
    std::string out = "kind,K,N,value\n";
    for (const MseCell& c : result.cells) {
        if (!c.available) continue;
        out += "mse," + std::to_string(c.K) + ',' + std::to_string(c.N) + ',' +
               csv_double(c.mse_mean) + '\n';
    }
    for (std::size_t n : result.grid.n_values) {
        const MseCell* sample = nullptr;
        for (const MseCell& c : result.cells)
            if (c.N == n && c.available) {
                sample = &c;
                break;
            }
        if (sample == nullptr) continue;
        out += "critical_lower," + csv_double(sample->critical_k_lower) + ',' +
               std::to_string(n) + ',' + csv_double(sample->critical_k_lower) + '\n';
        out += "critical_upper," + csv_double(sample->critical_k_upper) + ',' +
               std::to_string(n) + ',' + csv_double(sample->critical_k_upper) + '\n';
    }
    return out;
}

}  // namespace amrmc
